//! Intelligent driver model.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmParams {
    /// Desired speed v0 (m/s).
    pub desired_speed: f64,
    /// Safe time headway T (s).
    pub time_headway: f64,
    /// Jam distance s0 (m).
    pub min_gap: f64,
    /// Maximum comfortable acceleration a (m/s²).
    pub max_accel: f64,
    /// Comfortable deceleration b (m/s², positive).
    pub comfort_decel: f64,
    pub delta: f64,
    /// Output bounds.
    pub accel_min: f64,
    pub accel_max: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            desired_speed: 25.0,
            time_headway: 1.0,
            min_gap: 2.0,
            max_accel: 2.6,
            comfort_decel: 4.5,
            delta: 4.0,
            accel_min: -9.0,
            accel_max: 2.6,
        }
    }
}

impl IdmParams {
    pub fn with_desired_speed(mut self, v0: f64) -> Self {
        self.desired_speed = v0;
        self
    }

    /// Desired dynamic gap s*(v, Δv) with Δv = v − v_lead.
    pub fn desired_gap(&self, speed: f64, approach_rate: f64) -> f64 {
        self.min_gap
            + speed * self.time_headway
            + speed * approach_rate / (2.0 * (self.max_accel * self.comfort_decel).sqrt())
    }

    fn free_term(&self, speed: f64) -> f64 {
        1.0 - (speed / self.desired_speed).powf(self.delta)
    }

    /// Unchecked acceleration. `gap` must be positive or infinite.
    pub(crate) fn accel(&self, speed: f64, gap: f64, lead_speed: f64) -> f64 {
        let mut a = self.free_term(speed);
        if gap.is_finite() {
            let s_star = self.desired_gap(speed, speed - lead_speed).max(0.0);
            a -= (s_star / gap).powi(2);
        }
        (self.max_accel * a).clamp(self.accel_min, self.accel_max)
    }

    /// Steady-state gap at `speed` behind a leader of the same speed.
    pub fn equilibrium_gap(&self, speed: f64) -> f64 {
        (self.min_gap + speed * self.time_headway) / self.free_term(speed).sqrt()
    }

    /// Single-lane steady-state flow (veh/h) at `speed`.
    pub fn equilibrium_flow(&self, speed: f64, vehicle_length: f64) -> f64 {
        3600.0 * speed / (self.equilibrium_gap(speed) + vehicle_length)
    }

    /// Speed at which the steady-state flow peaks; slower traffic is on the
    /// congested branch.
    pub fn capacity_speed(&self, vehicle_length: f64) -> f64 {
        let flow = |v: f64| self.equilibrium_flow(v, vehicle_length);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (0.0, self.desired_speed);
        while hi - lo > 1e-9 {
            let (a, b) = (hi - r * (hi - lo), lo + r * (hi - lo));
            if flow(a) < flow(b) {
                lo = a;
            } else {
                hi = b;
            }
        }
        0.5 * (lo + hi)
    }

    /// The interaction part only, `a·[1 − (s*/s)²]`, bounded like [`Self::accel`].
    pub(crate) fn interaction_accel(&self, speed: f64, gap: f64, lead_speed: f64) -> f64 {
        if !gap.is_finite() {
            return self.accel_max;
        }
        let s_star = self.desired_gap(speed, speed - lead_speed).max(0.0);
        (self.max_accel * (1.0 - (s_star / gap).powi(2))).clamp(self.accel_min, self.accel_max)
    }
}

/// IDM acceleration for an ego vehicle. Pass `f64::INFINITY` as the gap when
/// there is no leader; `lead_speed` is then ignored.
pub fn car_following_accel(ego_speed: f64, gap: f64, lead_speed: f64, params: &IdmParams) -> Result<f64> {
    if gap.is_nan() || gap <= 0.0 {
        return Err(SimError::InvalidGap(gap));
    }
    Ok(params.accel(ego_speed, gap, lead_speed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_road_equilibrium() {
        let p = IdmParams::default().with_desired_speed(30.0);
        assert_eq!(car_following_accel(30.0, f64::INFINITY, 0.0, &p).unwrap(), 0.0);
        assert_eq!(car_following_accel(0.0, f64::INFINITY, 0.0, &p).unwrap(), 2.6);
    }

    #[test]
    fn gap_at_static_desired_distance() {
        let p = IdmParams::default().with_desired_speed(30.0);
        // s* = 2 + 20·1 = 22; a·[1 − (20/30)^4 − 1] = −2.6·16/81.
        let a = car_following_accel(20.0, 22.0, 20.0, &p).unwrap();
        assert!((a - (-2.6 * 16.0 / 81.0)).abs() < 1e-12, "{a}");
    }

    #[test]
    fn rejects_non_positive_gap() {
        let p = IdmParams::default();
        assert!(matches!(car_following_accel(10.0, 0.0, 10.0, &p), Err(SimError::InvalidGap(_))));
        assert!(car_following_accel(10.0, -1.0, 10.0, &p).is_err());
    }

    #[test]
    fn capacity_of_default_model() {
        let p = IdmParams::default().with_desired_speed(25.0);
        let v = p.capacity_speed(4.5);
        assert!((v - 15.5375).abs() < 1e-3, "{v}");
        assert!((p.equilibrium_flow(v, 4.5) - 2378.88).abs() < 0.01);
    }

    #[test]
    fn output_is_bounded() {
        let p = IdmParams::default();
        assert_eq!(car_following_accel(30.0, 0.1, 0.0, &p).unwrap(), p.accel_min);
    }
}
