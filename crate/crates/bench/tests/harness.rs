use std::process::Command;

use onramp::ScenarioConfig;
use onramp_bench::experiments::{degradation, Gain, RunRecord};
use onramp_bench::probes::measure_latency;
use onramp_bench::training::new_agent;
use onramp_bench::{run_episode, run_sweep, BenchError, EvalOptions, Mode, Policy, SweepKind, SweepSpec};

fn short() -> SweepSpec {
    let mut spec = SweepSpec::new(SweepKind::Density, vec![Mode::Base, Mode::Rlpg], 2, 500);
    spec.values = vec![400.0, 800.0];
    spec.sizes = vec![20];
    spec.eval.window = 30.0;
    spec
}

fn untrained() -> Policy {
    Policy::new(new_agent(&ScenarioConfig::default(), 3).actor)
}

fn csv_bytes(spec: &SweepSpec, policy: &Policy) -> (Vec<u8>, Vec<u8>) {
    let r = run_sweep(&ScenarioConfig::default(), spec, Some(policy)).unwrap();
    let (mut runs, mut gains) = (Vec::new(), Vec::new());
    r.write_runs_csv(&mut runs).unwrap();
    r.write_gains_csv(&mut gains).unwrap();
    (runs, gains)
}

#[test]
fn sweeps_are_reproducible() {
    let p = untrained();
    assert_eq!(csv_bytes(&short(), &p), csv_bytes(&short(), &p));
}

#[test]
fn base_mode_never_consults_the_policy() {
    let p = untrained();
    let mut spec = short();
    spec.modes = vec![Mode::Base];
    run_sweep(&ScenarioConfig::default(), &spec, Some(&p)).unwrap();
    assert_eq!(p.invocations(), 0);
    spec.modes = vec![Mode::Rlpg];
    run_sweep(&ScenarioConfig::default(), &spec, Some(&p)).unwrap();
    assert!(p.invocations() > 0);
}

#[test]
fn rlpg_without_a_policy_is_refused() {
    let err = run_sweep(&ScenarioConfig::default(), &short(), None).unwrap_err();
    assert!(matches!(err, BenchError::MissingCheckpoint));
}

#[test]
fn gains_recompute_from_the_raw_runs() {
    let p = untrained();
    let (runs, gains) = csv_bytes(&short(), &p);
    let runs: Vec<RunRecord> = csv::Reader::from_reader(runs.as_slice()).deserialize().map(|r| r.unwrap()).collect();
    let gains: Vec<Gain> = csv::Reader::from_reader(gains.as_slice()).deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(gains.len(), 2);
    for g in gains {
        let mean = |mode| {
            let xs: Vec<f64> =
                runs.iter().filter(|r| r.value == g.value && r.mode == mode).map(|r| r.mean_speed).collect();
            xs.iter().sum::<f64>() / xs.len() as f64
        };
        let (b, r) = (mean(Mode::Base), mean(Mode::Rlpg));
        assert!((g.change_pct - (r - b) / b * 100.0).abs() < 1e-9);
    }
}

#[test]
fn degradation_reads_the_named_cells() {
    let mut spec = short();
    spec.modes = vec![Mode::Base];
    let r = run_sweep(&ScenarioConfig::default(), &spec, None).unwrap();
    let a = r.cell(400.0, 20, Mode::Base).unwrap().mean_speed;
    let b = r.cell(800.0, 20, Mode::Base).unwrap().mean_speed;
    assert_eq!(degradation(&r, 400.0, 800.0, 20, Mode::Base), Some((a - b) / a));
    assert_eq!(degradation(&r, 400.0, 800.0, 30, Mode::Base), None);
}

#[test]
fn episode_keeps_vehicles_accounted_for() {
    let opts = EvalOptions { window: 60.0, spacetime: None };
    let o = run_episode(&ScenarioConfig::default(), 9, None, &opts).unwrap();
    assert!(o.conserved);
    assert!(o.mean_speed > 0.0 && o.mean_speed <= 27.5);
    assert!((o.formed_at - 102.0).abs() < 5.0, "formed at {}", o.formed_at);
}

#[test]
fn two_vehicle_platoon_leaves_no_lasting_slowdown() {
    // Single seeds swing with ordinary ramp breakdowns, so compare cross-seed means.
    let mut scenario = ScenarioConfig::default();
    scenario.world.platoons[0].size = 2;
    let (mut before, mut after) = (0.0, 0.0);
    for seed in 100_000..100_010 {
        let o = run_episode(&scenario, seed, None, &EvalOptions::default()).unwrap();
        before += o.pre_arrival_speed;
        after += o.tail_speed;
    }
    assert!(after >= 0.9 * before, "{after} after vs {before} before");
}

#[test]
fn single_latency_sample_is_one_cdf_step() {
    let delays = measure_latency(&ScenarioConfig::default(), &untrained(), 1, 0).unwrap();
    assert_eq!(delays.len(), 1);
    let cdf = onramp::rsu::latency_cdf(&delays).unwrap();
    assert_eq!(cdf.points(), vec![(delays[0], 1.0)]);
    assert!(measure_latency(&ScenarioConfig::default(), &untrained(), 0, 0).is_err());
}

#[test]
fn cli_train_writes_checkpoint_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rlpg"))
        .args(["--out", dir.path().to_str().unwrap(), "train", "--episodes", "2", "--sizes", "5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let train = dir.path().join("train");
    assert!(train.join("policy.ckpt").exists());
    assert!(train.join("config.json").exists());
    let log = std::fs::read_to_string(train.join("rewards.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
}

#[test]
fn cli_sweep_without_checkpoint_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rlpg"))
        .args(["--out", dir.path().to_str().unwrap(), "sweep", "--kind", "density"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint"));
}
