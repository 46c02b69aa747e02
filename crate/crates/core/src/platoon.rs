//! Platoons and per-member gap tracking.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::sim::idm::IdmParams;

pub const GAP_MIN: f64 = 2.0;
pub const GAP_MAX: f64 = 30.0;

/// PD gap controller with an IDM safety envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapControllerParams {
    /// Gain on gap error (1/s²).
    pub k_gap: f64,
    /// Gain on relative speed (1/s).
    pub k_speed: f64,
    pub accel_min: f64,
    pub accel_max: f64,
    /// Jam distance of the safety envelope. Must sit below `GAP_MIN` so the
    /// tightest setpoint stays reachable.
    pub envelope_min_gap: f64,
    /// Time headway of the safety envelope.
    pub envelope_time_headway: f64,
}

impl Default for GapControllerParams {
    fn default() -> Self {
        Self {
            k_gap: 0.23,
            k_speed: 1.0,
            accel_min: -4.5,
            accel_max: 2.6,
            envelope_min_gap: 1.0,
            envelope_time_headway: 0.0,
        }
    }
}

impl GapControllerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| SimError::Config {
            key: format!("gap_controller.{key}"),
            reason: reason.into(),
        };
        if !(self.k_gap > 0.0) {
            return Err(bad("k_gap", "gain must be positive"));
        }
        if !(self.k_speed > 0.0) {
            return Err(bad("k_speed", "gain must be positive"));
        }
        if self.k_speed * self.k_speed < 4.0 * self.k_gap {
            return Err(bad("k_speed", "closed loop is underdamped (need k_speed² >= 4·k_gap)"));
        }
        if !(self.accel_min < 0.0 && self.accel_max > 0.0) {
            return Err(bad("accel_min", "bounds must straddle zero"));
        }
        if !(self.envelope_min_gap > 0.0 && self.envelope_min_gap < GAP_MIN) {
            return Err(bad("envelope_min_gap", "must lie in (0, 2) m"));
        }
        if self.envelope_time_headway < 0.0 {
            return Err(bad("envelope_time_headway", "must be non-negative"));
        }
        Ok(())
    }

    /// Envelope model derived from the car-following parameters.
    pub fn envelope(&self, idm: &IdmParams) -> IdmParams {
        IdmParams { min_gap: self.envelope_min_gap, time_headway: self.envelope_time_headway, ..*idm }
    }

    /// Member acceleration. `own_gap` is (gap, speed, acceleration) of the
    /// platoon predecessor (`None` when it has left); `actual` is the vehicle
    /// directly ahead in the lane, which may be an intruder. The predecessor's
    /// acceleration is fed forward and may brake harder than `accel_min`.
    pub fn member_accel(
        &self,
        idm: &IdmParams,
        speed: f64,
        setpoint: f64,
        own_gap: Option<(f64, f64, f64)>,
        actual: (f64, f64),
    ) -> f64 {
        let (actual_gap, actual_speed) = actual;
        let Some((gap, pred_speed, pred_accel)) = own_gap else {
            return idm.accel(speed, actual_gap.max(1e-3), actual_speed);
        };
        let pd = (self.k_gap * (gap - setpoint) + self.k_speed * (pred_speed - speed) + pred_accel)
            .clamp(self.accel_min.min(pred_accel), self.accel_max);
        let safe = self.envelope(idm).interaction_accel(speed, actual_gap.max(1e-3), actual_speed);
        pd.min(safe)
    }
}

/// Platoon to be injected during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatoonSpec {
    /// Mainline lane; `None` means the lane next to the ramp.
    pub lane: Option<usize>,
    pub size: usize,
    pub default_gap_m: f64,
    /// Time at which the leader should reach the merge zone (s).
    pub scheduled_arrival_s: f64,
    /// Whether the gap advisory controls this platoon.
    pub controlled: bool,
}

impl Default for PlatoonSpec {
    fn default() -> Self {
        Self { lane: None, size: 20, default_gap_m: GAP_MIN, scheduled_arrival_s: 30.0, controlled: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Platoon {
    pub id: u64,
    /// Leader first.
    pub member_ids: Vec<u64>,
    /// `gap_setpoints[i]` is the commanded gap between members `i` and `i+1`.
    pub gap_setpoints: Vec<f64>,
    pub default_gap: f64,
    pub lane: usize,
    pub controlled: bool,
}

impl Platoon {
    pub fn size(&self) -> usize {
        self.member_ids.len()
    }

    /// Replace the setpoints, clamping each to `[2, 30]` m.
    pub fn apply_gap_commands(&mut self, gaps: &[f64]) -> Result<()> {
        if gaps.len() != self.gap_setpoints.len() {
            return Err(SimError::GapLengthMismatch { expected: self.gap_setpoints.len(), got: gaps.len() });
        }
        for (s, &g) in self.gap_setpoints.iter_mut().zip(gaps) {
            *s = if g.is_nan() { self.default_gap } else { g.clamp(GAP_MIN, GAP_MAX) };
        }
        Ok(())
    }

    pub fn reset_gaps(&mut self) {
        self.gap_setpoints.fill(self.default_gap);
    }
}

/// What a platoon leader reports about its platoon.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatoonSummary {
    pub leader_position: f64,
    pub leader_speed: f64,
    pub size: usize,
    /// Bumper-to-bumper gaps between consecutive members. A pair with a
    /// member already gone reports its setpoint.
    pub actual_gaps: Vec<f64>,
    pub alive: usize,
}

/// Length of a platoon from the leader's front to the tail's rear.
pub fn platoon_span(lengths: &[f64], gaps: &[f64]) -> f64 {
    lengths.iter().sum::<f64>() + gaps.iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn platoon(size: usize) -> Platoon {
        Platoon {
            id: 0,
            member_ids: (0..size as u64).collect(),
            gap_setpoints: vec![GAP_MIN; size - 1],
            default_gap: GAP_MIN,
            lane: 2,
            controlled: true,
        }
    }

    #[test]
    fn commands_are_clamped() {
        let mut p = platoon(4);
        p.apply_gap_commands(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(p.gap_setpoints, vec![2.0; 3]);
        p.apply_gap_commands(&[35.0, 1.0, 16.0]).unwrap();
        assert_eq!(p.gap_setpoints, vec![30.0, 2.0, 16.0]);
        assert!(matches!(
            p.apply_gap_commands(&[5.0, 5.0]),
            Err(SimError::GapLengthMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn span_of_twenty() {
        assert_eq!(platoon_span(&[4.5; 20], &[2.0; 19]), 128.0);
    }

    #[test]
    fn default_gains_are_valid() {
        GapControllerParams::default().validate().unwrap();
        let under = GapControllerParams { k_gap: 0.3, ..Default::default() };
        assert!(under.validate().is_err());
    }

    #[test]
    fn equilibrium_and_gap_error() {
        let c = GapControllerParams::default();
        let idm = IdmParams::default();
        let at_rest = c.member_accel(&idm, 20.0, 10.0, Some((10.0, 20.0, 0.0)), (10.0, 20.0));
        assert_eq!(at_rest, 0.0);
        // 10 m too far back: k_gap·10 = 2.3, below a_max and the envelope.
        let a = c.member_accel(&idm, 20.0, 10.0, Some((20.0, 20.0, 0.0)), (20.0, 20.0));
        assert!((a - 2.3).abs() < 1e-12, "{a}");
    }

    #[test]
    fn envelope_dominates_when_closing() {
        let c = GapControllerParams::default();
        let idm = IdmParams::default();
        // Setpoint far below the gap, but the car ahead is much slower.
        let a = c.member_accel(&idm, 25.0, 2.0, Some((10.0, 25.0, 0.0)), (10.0, 10.0));
        let safe = c.envelope(&idm).interaction_accel(25.0, 10.0, 10.0);
        assert_eq!(a, safe);
        assert!(a < 0.0);
    }

    #[test]
    fn predecessor_braking_is_fed_forward() {
        let c = GapControllerParams::default();
        let idm = IdmParams::default();
        let a = c.member_accel(&idm, 20.0, 10.0, Some((10.0, 20.0, -1.5)), (10.0, 20.0));
        assert_eq!(a, -1.5);
        // Below accel_min the predecessor still sets the floor.
        let hard = c.member_accel(&idm, 20.0, 10.0, Some((10.0, 20.0, -7.0)), (10.0, 20.0));
        assert_eq!(hard, -7.0);
    }

    #[test]
    fn missing_predecessor_falls_back_to_idm() {
        let c = GapControllerParams::default();
        let idm = IdmParams::default();
        let a = c.member_accel(&idm, 20.0, 2.0, None, (f64::INFINITY, 0.0));
        assert_eq!(a, idm.accel(20.0, f64::INFINITY, 0.0));
    }
}
