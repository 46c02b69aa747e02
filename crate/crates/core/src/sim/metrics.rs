use crate::error::{Result, SimError};
use crate::sim::road::RoadNetwork;
use crate::sim::vehicle::Vehicle;
use crate::sim::world::{ExitRecord, World};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentMetrics {
    /// Mean speed of every vehicle on the segment (m/s).
    pub mean_speed: f64,
    pub mean_speed_mainline: f64,
    pub mean_speed_ramp: f64,
    /// Vehicles per km per mainline lane.
    pub density_mainline: f64,
    /// Vehicles per km of ramp.
    pub density_ramp: f64,
    /// Exits per hour over the trailing window.
    pub throughput: f64,
    /// Mean segment-normalised traversal time of trips completed in the
    /// trailing window (s); `segment_length / mean_speed` when there are none.
    pub mean_delay: f64,
    pub vehicles_on_segment: usize,
}

fn mean_or(speeds: impl Iterator<Item = f64>, empty: f64) -> f64 {
    let (sum, n) = speeds.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        empty
    } else {
        sum / n as f64
    }
}

/// Metrics for an arbitrary scene. An empty segment reports the speed limit.
pub fn measure(
    road: &RoadNetwork,
    vehicles: &[Vehicle],
    exits: &[ExitRecord],
    now: f64,
    window: f64,
) -> Result<SegmentMetrics> {
    if !(window > 0.0) {
        return Err(SimError::NonPositiveWindow(window));
    }
    let on = |v: &&Vehicle| v.position >= 0.0 && v.position < road.segment_length;
    let main = |v: &&Vehicle| !road.is_ramp(v.lane);
    let ramp = |v: &&Vehicle| road.is_ramp(v.lane);

    let mean_speed = mean_or(vehicles.iter().filter(on).map(|v| v.speed), road.speed_limit);
    let mean_speed_mainline = mean_or(vehicles.iter().filter(on).filter(main).map(|v| v.speed), road.speed_limit);
    let mean_speed_ramp = mean_or(vehicles.iter().filter(on).filter(ramp).map(|v| v.speed), road.speed_limit);
    let n_main = vehicles.iter().filter(on).filter(main).count();
    let n_ramp = vehicles.iter().filter(on).filter(ramp).count();
    let density_mainline = n_main as f64 / (road.segment_length / 1000.0 * road.mainline_lanes as f64);
    let density_ramp = n_ramp as f64 / (road.ramp_length() / 1000.0);

    let recent: Vec<&ExitRecord> = exits.iter().rev().take_while(|e| e.exit_time > now - window).collect();
    let throughput = recent.len() as f64 * 3600.0 / window;
    let mean_delay = if recent.is_empty() {
        road.segment_length / mean_speed
    } else {
        recent.iter().map(|e| e.normalized_delay(road.segment_length)).sum::<f64>() / recent.len() as f64
    };

    Ok(SegmentMetrics {
        mean_speed,
        mean_speed_mainline,
        mean_speed_ramp,
        density_mainline,
        density_ramp,
        throughput,
        mean_delay,
        vehicles_on_segment: n_main + n_ramp,
    })
}

/// Metrics of the live world with trips completed in the trailing `window`.
pub fn measure_metrics(world: &World, window: f64) -> Result<SegmentMetrics> {
    measure(world.road(), &world.vehicles, &world.exits, world.time, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::vehicle::VehicleKind;

    fn car(lane: usize, position: f64, speed: f64) -> Vehicle {
        Vehicle {
            id: 0,
            lane,
            position,
            speed,
            accel: 0.0,
            length: 4.5,
            kind: VehicleKind::Free,
            assertiveness: 1.0,
            platoon: None,
            entry_time: 0.0,
            entry_position: 0.0,
        }
    }

    #[test]
    fn mean_speed_of_three() {
        let road = RoadNetwork::default();
        let cars = [car(0, 10.0, 10.0), car(1, 20.0, 20.0), car(2, 30.0, 30.0)];
        assert_eq!(measure(&road, &cars, &[], 0.0, 60.0).unwrap().mean_speed, 20.0);
    }

    #[test]
    fn density_of_thirty_three() {
        let road = RoadNetwork::default();
        let cars: Vec<Vehicle> = (0..33).map(|i| car(i % 3, 10.0 + 30.0 * i as f64, 20.0)).collect();
        let m = measure(&road, &cars, &[], 0.0, 60.0).unwrap();
        assert!((m.density_mainline - 10.0).abs() < 1e-12);
        assert_eq!(m.density_ramp, 0.0);
    }

    #[test]
    fn empty_segment_reports_speed_limit() {
        let road = RoadNetwork::default();
        let m = measure(&road, &[], &[], 0.0, 60.0).unwrap();
        assert_eq!(m.mean_speed, road.speed_limit);
        assert_eq!(m.mean_delay, road.segment_length / road.speed_limit);
        assert_eq!(m.throughput, 0.0);
    }

    #[test]
    fn upstream_vehicles_are_not_counted() {
        let road = RoadNetwork::default();
        let m = measure(&road, &[car(2, -5.0, 0.0)], &[], 0.0, 60.0).unwrap();
        assert_eq!(m.vehicles_on_segment, 0);
    }

    #[test]
    fn window_must_be_positive() {
        assert!(measure(&RoadNetwork::default(), &[], &[], 0.0, 0.0).is_err());
    }
}
