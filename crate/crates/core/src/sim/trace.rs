//! Per-tick vehicle snapshots and their CSV form.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::sim::world::World;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub tick: u64,
    pub vehicle_id: u64,
    pub lane: usize,
    pub position_m: f64,
    pub speed_mps: f64,
    pub accel_mps2: f64,
    pub kind: &'static str,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub dt: f64,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn new(dt: f64) -> Self {
        Self { dt, rows: Vec::new() }
    }

    /// Append one row per vehicle currently in the world.
    pub fn record(&mut self, world: &World) {
        self.rows.extend(world.vehicles.iter().map(|v| TraceRow {
            tick: world.tick,
            vehicle_id: v.id,
            lane: v.lane,
            position_m: v.position,
            speed_mps: v.speed,
            accel_mps2: v.accel,
            kind: v.kind.as_str(),
        }));
    }

    pub fn time_of(&self, row: &TraceRow) -> f64 {
        row.tick as f64 * self.dt
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(["tick", "vehicle_id", "lane", "position_m", "speed_mps", "accel_mps2", "kind"])?;
        }
        w.flush()?;
        Ok(())
    }
}
