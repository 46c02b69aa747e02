use onramp::platoon::PlatoonSpec;
use onramp::sim::{FlowSpec, World, WorldConfig};

// Closed-loop reference for a two-member platoon: leader cruising at 25 m/s,
// setpoint stepped from 2 m to 30 m at t = 0. Integrated offline at
// rtol 1e-10 with the PD saturation and the IDM envelope in the loop.
const REFERENCE: [(f64, f64); 6] =
    [(2.0, 8.5456), (5.0, 20.6785), (10.0, 28.2591), (15.0, 29.7025), (20.0, 29.9502), (30.0, 29.9986)];
const REFERENCE_T95: f64 = 10.6234;

fn pair_world() -> World {
    let config = WorldConfig {
        flow: FlowSpec { mainline_rate: 0.0, ramp_rate: 0.0, ..Default::default() },
        platoons: vec![PlatoonSpec { lane: Some(0), size: 2, scheduled_arrival_s: 0.0, ..Default::default() }],
        vehicle_length: (4.5, 4.5),
        ..Default::default()
    };
    let mut w = World::new(config).unwrap();
    w.step(0.1);
    assert_eq!(w.platoons.len(), 1);
    w
}

/// `(t since step, gap)` every tick for `horizon` seconds.
fn step_response(horizon: f64) -> Vec<(f64, f64)> {
    let mut w = pair_world();
    let id = w.platoons[0].id;
    let t0 = w.time;
    w.apply_gap_commands(id, &[30.0]).unwrap();
    let mut out = Vec::new();
    while w.time - t0 < horizon - 1e-9 {
        w.step(0.1);
        out.push((w.time - t0, w.platoon_summary(id).unwrap().actual_gaps[0]));
    }
    out
}

fn at(trace: &[(f64, f64)], t: f64) -> f64 {
    trace.iter().find(|(s, _)| (s - t).abs() < 1e-6).unwrap().1
}

#[test]
fn gap_step_tracks_continuous_reference() {
    let trace = step_response(30.0);
    for (t, expected) in REFERENCE {
        let got = at(&trace, t);
        // Semi-implicit Euler at 0.1 s drifts by a few decimetres during
        // the saturated opening phase.
        assert!((got - expected).abs() < 0.5, "t = {t}: gap {got:.4}, reference {expected:.4}");
    }
}

#[test]
fn gap_step_settles_without_overshoot() {
    let trace = step_response(30.0);
    let t95 = trace.iter().find(|(_, g)| *g >= 2.0 + 0.95 * 28.0).unwrap().0;
    assert!((t95 - REFERENCE_T95).abs() < 0.3, "t95 = {t95}");
    let peak = trace.iter().map(|&(_, g)| g).fold(f64::MIN, f64::max);
    assert!(peak <= 30.0 + 1e-6, "overshoot to {peak}");
    assert!((trace.last().unwrap().1 - 30.0).abs() < 0.05);
    assert!(trace.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-9), "gap not monotone");
}

#[test]
fn leader_speed_is_undisturbed() {
    let mut w = pair_world();
    let id = w.platoons[0].id;
    w.apply_gap_commands(id, &[30.0]).unwrap();
    for _ in 0..200 {
        w.step(0.1);
        assert!((w.platoon_summary(id).unwrap().leader_speed - 25.0).abs() < 1e-12);
    }
}

#[test]
fn setpoints_are_clamped() {
    let mut w = pair_world();
    let id = w.platoons[0].id;
    w.apply_gap_commands(id, &[100.0]).unwrap();
    assert_eq!(w.platoon(id).unwrap().gap_setpoints, vec![30.0]);
    w.apply_gap_commands(id, &[-5.0]).unwrap();
    assert_eq!(w.platoon(id).unwrap().gap_setpoints, vec![2.0]);
    assert!(w.apply_gap_commands(id, &[3.0, 4.0]).is_err());
}

#[test]
fn steady_platoon_holds_default_gap() {
    let mut w = pair_world();
    let id = w.platoons[0].id;
    for _ in 0..100 {
        w.step(0.1);
    }
    let gap = w.platoon_summary(id).unwrap().actual_gaps[0];
    assert!((gap - 2.0).abs() < 1e-9, "gap {gap}");
}
