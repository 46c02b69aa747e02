use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// A straight mainline segment with one on-ramp on the right.
///
/// Lanes `0..mainline_lanes` are mainline, numbered from the left; lane
/// `mainline_lanes` is the ramp. The ramp enters at
/// `merge_zone_start − accel_lane_length`, runs alongside the mainline from
/// `merge_zone_start` and ends at `merge_zone_start + merge_lane_length`.
/// Merging into the mainline is allowed only alongside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadNetwork {
    pub segment_length: f64,
    pub mainline_lanes: usize,
    pub merge_lane_length: f64,
    pub accel_lane_length: f64,
    pub merge_zone_start: f64,
    pub speed_limit: f64,
}

impl Default for RoadNetwork {
    fn default() -> Self {
        Self {
            segment_length: 1100.0,
            mainline_lanes: 3,
            merge_lane_length: 150.0,
            accel_lane_length: 150.0,
            merge_zone_start: 450.0,
            speed_limit: 25.0,
        }
    }
}

fn bad(key: &str, reason: impl Into<String>) -> SimError {
    SimError::Config { key: format!("road.{key}"), reason: reason.into() }
}

impl RoadNetwork {
    pub fn validate(&self) -> Result<()> {
        if !(self.segment_length > 0.0) {
            return Err(bad("segment_length", "must be positive"));
        }
        if self.mainline_lanes == 0 {
            return Err(bad("mainline_lanes", "need at least one mainline lane"));
        }
        if !(self.merge_lane_length > 0.0) {
            return Err(bad("merge_lane_length", "must be positive"));
        }
        if !(self.accel_lane_length > 0.0) {
            return Err(bad("accel_lane_length", "must be positive"));
        }
        if self.ramp_start() < 0.0 {
            return Err(bad("merge_zone_start", "ramp would start upstream of the segment"));
        }
        if self.ramp_end() > self.segment_length {
            return Err(bad("merge_lane_length", "merging lane runs past the segment end"));
        }
        if !(self.speed_limit > 0.0) {
            return Err(bad("speed_limit", "must be positive"));
        }
        Ok(())
    }

    pub fn ramp_lane(&self) -> usize {
        self.mainline_lanes
    }

    pub fn lane_count(&self) -> usize {
        self.mainline_lanes + 1
    }

    pub fn is_ramp(&self, lane: usize) -> bool {
        lane == self.mainline_lanes
    }

    /// Mainline lane the ramp merges into.
    pub fn merge_target_lane(&self) -> usize {
        self.mainline_lanes - 1
    }

    pub fn ramp_start(&self) -> f64 {
        self.merge_zone_start - self.accel_lane_length
    }

    pub fn ramp_end(&self) -> f64 {
        self.merge_zone_start + self.merge_lane_length
    }

    pub fn ramp_length(&self) -> f64 {
        self.ramp_end() - self.ramp_start()
    }

    /// True where a ramp vehicle at `position` may change into the mainline.
    pub fn in_merge_zone(&self, position: f64) -> bool {
        position >= self.merge_zone_start && position <= self.ramp_end()
    }

    pub fn entry_position(&self, lane: usize) -> f64 {
        if self.is_ramp(lane) {
            self.ramp_start()
        } else {
            0.0
        }
    }

    /// Position where `lane` ends for vehicles travelling on it.
    pub fn lane_end(&self, lane: usize) -> f64 {
        if self.is_ramp(lane) {
            self.ramp_end()
        } else {
            f64::INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let r = RoadNetwork::default();
        r.validate().unwrap();
        assert_eq!(r.ramp_lane(), 3);
        assert_eq!(r.merge_target_lane(), 2);
        assert_eq!(r.ramp_start(), 300.0);
        assert_eq!(r.ramp_end(), 600.0);
        assert!(r.in_merge_zone(450.0) && r.in_merge_zone(600.0) && !r.in_merge_zone(449.0));
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut r = RoadNetwork { merge_lane_length: 0.0, ..Default::default() };
        assert!(r.validate().is_err());
        r = RoadNetwork { merge_zone_start: 1000.0, ..Default::default() };
        assert!(matches!(r.validate(), Err(SimError::Config { ref key, .. }) if key == "road.merge_lane_length"));
    }
}
