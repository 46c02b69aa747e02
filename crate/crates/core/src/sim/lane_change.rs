//! Gap acceptance and the MOBIL incentive.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    /// Target lane index, or `None` when stepping off lane 0.
    pub fn target(self, lane: usize) -> Option<usize> {
        match self {
            Direction::Left => lane.checked_sub(1),
            Direction::Right => Some(lane + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaneChangeParams {
    pub politeness: f64,
    /// Switching threshold (m/s²).
    pub threshold: f64,
    /// Time headway used in the required front and rear gaps (s).
    pub safe_time_headway: f64,
    /// Jam distance used in the required gaps (m).
    pub safe_min_gap: f64,
    /// Deceleration a follower can always apply; bounds the closing-speed
    /// part of gap acceptance (m/s², positive).
    pub max_safe_decel: f64,
    /// Assertiveness given to every spawned vehicle.
    pub assertiveness: f64,
}

impl Default for LaneChangeParams {
    fn default() -> Self {
        Self {
            politeness: 0.3,
            threshold: 0.2,
            safe_time_headway: 0.5,
            safe_min_gap: 2.0,
            max_safe_decel: 4.5,
            assertiveness: 1.0,
        }
    }
}

/// Hard floor under either gap after a change, regardless of assertiveness.
pub const MIN_PHYSICAL_GAP: f64 = 0.5;

/// Neighbourhood of a vehicle in the lane it wants to enter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetGap {
    /// Rear of the new leader minus own front; infinite when there is none.
    pub front_gap: f64,
    pub lead_speed: f64,
    /// Own rear minus the new follower's front; infinite when there is none.
    pub rear_gap: f64,
    pub follower_speed: f64,
}

impl LaneChangeParams {
    pub fn required_front_gap(&self, speed: f64, assertiveness: f64) -> f64 {
        (self.safe_min_gap + speed * self.safe_time_headway) / assertiveness
    }

    pub fn required_rear_gap(&self, follower_speed: f64, assertiveness: f64) -> f64 {
        (self.safe_min_gap + follower_speed * self.safe_time_headway) / assertiveness
    }

    fn closing_distance(&self, back_speed: f64, front_speed: f64) -> f64 {
        let dv = (back_speed - front_speed).max(0.0);
        dv * dv / (2.0 * self.max_safe_decel)
    }

    /// Safety half of the decision. Required gaps shrink with assertiveness;
    /// the stopping-distance check against a faster follower does not.
    pub fn gap_acceptable(&self, speed: f64, assertiveness: f64, g: &TargetGap) -> bool {
        g.front_gap >= MIN_PHYSICAL_GAP
            && g.rear_gap >= MIN_PHYSICAL_GAP
            && g.front_gap >= self.required_front_gap(speed, assertiveness)
            && g.rear_gap >= self.required_rear_gap(g.follower_speed, assertiveness)
            && g.front_gap >= self.closing_distance(speed, g.lead_speed)
            && g.rear_gap >= self.closing_distance(g.follower_speed, speed)
    }

    /// MOBIL: own gain must beat the politeness-weighted loss imposed on the
    /// new follower plus the threshold.
    pub fn mobil_incentive(&self, own_before: f64, own_after: f64, follower_before: f64, follower_after: f64) -> bool {
        own_after - own_before > self.politeness * (follower_before - follower_after) + self.threshold
    }
}
