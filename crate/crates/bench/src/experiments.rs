//! Sweeps over one scenario parameter, repeated across seeds and modes.

use std::collections::BTreeMap;
use std::io::Write;

use onramp::ScenarioConfig;
use serde::{Deserialize, Serialize};

use crate::episode::{run_episode, EvalOptions};
use crate::error::{setting, Result};
use crate::policy::{require_policy, Mode, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Ramp demand (veh/h).
    Density,
    /// Length of the merging lane (m).
    MergeLength,
    /// Lane-change assertiveness.
    Assertiveness,
    /// Size of the controlled platoon.
    PlatoonSize,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Density => "density",
            SweepKind::MergeLength => "merge-length",
            SweepKind::Assertiveness => "assertiveness",
            SweepKind::PlatoonSize => "platoon-size",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepKind::Density => vec![400.0, 600.0, 800.0],
            SweepKind::MergeLength => vec![100.0, 150.0, 200.0, 250.0],
            SweepKind::Assertiveness => vec![0.25, 0.5, 1.0, 1.4],
            SweepKind::PlatoonSize => vec![2.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        }
    }

    /// `scenario` with the swept parameter set to `value`.
    pub fn apply(self, scenario: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut s = scenario.clone();
        match self {
            SweepKind::Density => s.world.flow.ramp_rate = value,
            SweepKind::MergeLength => s.world.road.merge_lane_length = value,
            SweepKind::Assertiveness => s.world.lane_change.assertiveness = value,
            SweepKind::PlatoonSize => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(setting("values", format!("platoon size {value} is not a whole number")));
                }
                s.world.platoons[0].size = value as usize;
            }
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub values: Vec<f64>,
    /// Controlled platoon sizes; ignored by a platoon-size sweep.
    pub sizes: Vec<usize>,
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
    pub eval: EvalOptions,
}

impl SweepSpec {
    pub fn new(kind: SweepKind, modes: Vec<Mode>, repetitions: usize, first_seed: u64) -> Self {
        Self {
            kind,
            values: kind.default_values(),
            sizes: if kind == SweepKind::PlatoonSize { vec![] } else { vec![20, 30] },
            modes,
            seeds: (0..repetitions as u64).map(|k| first_seed + k).collect(),
            eval: EvalOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(setting("repetitions", "need at least one"));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(setting("seeds", "must be distinct"));
        }
        if self.values.is_empty() || self.modes.is_empty() {
            return Err(setting("values", "empty sweep"));
        }
        if self.kind != SweepKind::PlatoonSize && self.sizes.is_empty() {
            return Err(setting("sizes", "need at least one platoon size"));
        }
        Ok(())
    }
}

/// One evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub value: f64,
    pub size: usize,
    pub mode: Mode,
    pub seed: u64,
    pub mean_speed: f64,
    /// Average over vehicles that left the segment during the window.
    pub trip_speed: f64,
    pub throughput: f64,
    pub pre_arrival_speed: f64,
    pub tail_speed: f64,
}

/// Cross-seed statistics of one (value, size, mode) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub value: f64,
    pub size: usize,
    pub mode: Mode,
    pub repetitions: usize,
    pub mean_speed: f64,
    /// Sample standard deviation across seeds (0 for one seed).
    pub std_speed: f64,
    pub mean_throughput: f64,
}

/// rlpg against base for one (value, size).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gain {
    pub value: f64,
    pub size: usize,
    pub base_speed: f64,
    pub rlpg_speed: f64,
    /// `(rlpg − base) / base × 100`.
    pub change_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub runs: Vec<RunRecord>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

impl SweepResult {
    /// Cells in (value, size, mode) order.
    pub fn cells(&self) -> Vec<CellStats> {
        let mut groups: BTreeMap<(u64, usize, Mode), Vec<&RunRecord>> = BTreeMap::new();
        for r in &self.runs {
            groups.entry((r.value.to_bits(), r.size, r.mode)).or_default().push(r);
        }
        let mut cells: Vec<CellStats> = groups
            .into_values()
            .map(|runs| {
                let speeds: Vec<f64> = runs.iter().map(|r| r.mean_speed).collect();
                let (mean_speed, std_speed) = mean_std(&speeds);
                CellStats {
                    value: runs[0].value,
                    size: runs[0].size,
                    mode: runs[0].mode,
                    repetitions: runs.len(),
                    mean_speed,
                    std_speed,
                    mean_throughput: runs.iter().map(|r| r.throughput).sum::<f64>() / runs.len() as f64,
                }
            })
            .collect();
        cells.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.size.cmp(&b.size)).then(a.mode.cmp(&b.mode)));
        cells
    }

    pub fn cell(&self, value: f64, size: usize, mode: Mode) -> Option<CellStats> {
        self.cells().into_iter().find(|c| c.value == value && c.size == size && c.mode == mode)
    }

    pub fn gains(&self) -> Vec<Gain> {
        let cells = self.cells();
        cells
            .iter()
            .filter(|c| c.mode == Mode::Base)
            .filter_map(|b| {
                let r = cells.iter().find(|c| c.mode == Mode::Rlpg && c.value == b.value && c.size == b.size)?;
                Some(Gain {
                    value: b.value,
                    size: b.size,
                    base_speed: b.mean_speed,
                    rlpg_speed: r.mean_speed,
                    change_pct: (r.mean_speed - b.mean_speed) / b.mean_speed * 100.0,
                })
            })
            .collect()
    }

    pub fn write_runs_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(out, &self.runs)
    }

    pub fn write_cells_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(out, &self.cells())
    }

    pub fn write_gains_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(out, &self.gains())
    }
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Full factorial of values × sizes × modes × seeds, run in that order.
pub fn run_sweep(scenario: &ScenarioConfig, spec: &SweepSpec, policy: Option<&Policy>) -> Result<SweepResult> {
    spec.validate()?;
    for &mode in &spec.modes {
        require_policy(mode, policy)?;
    }
    let sizes = if spec.kind == SweepKind::PlatoonSize { vec![0] } else { spec.sizes.clone() };
    let mut runs = Vec::new();
    for &value in &spec.values {
        for &size in &sizes {
            let mut s = spec.kind.apply(scenario, value)?;
            if spec.kind != SweepKind::PlatoonSize {
                s = SweepKind::PlatoonSize.apply(&s, size as f64)?;
            }
            let size = s.world.platoons[0].size;
            for &mode in &spec.modes {
                let p = require_policy(mode, policy)?;
                for &seed in &spec.seeds {
                    let o = run_episode(&s, seed, p, &spec.eval)?;
                    runs.push(RunRecord {
                        value,
                        size,
                        mode,
                        seed,
                        mean_speed: o.mean_speed,
                        trip_speed: o.trip_speed,
                        throughput: o.throughput,
                        pre_arrival_speed: o.pre_arrival_speed,
                        tail_speed: o.tail_speed,
                    });
                }
            }
        }
    }
    Ok(SweepResult { kind: spec.kind, runs })
}

/// Base-mode mean speed for each platoon size.
pub fn motivation(scenario: &ScenarioConfig, sizes: &[usize], seeds: &[u64], eval: &EvalOptions) -> Result<SweepResult> {
    let spec = SweepSpec {
        kind: SweepKind::PlatoonSize,
        values: sizes.iter().map(|&s| s as f64).collect(),
        sizes: vec![],
        modes: vec![Mode::Base],
        seeds: seeds.to_vec(),
        eval: eval.clone(),
    };
    run_sweep(scenario, &spec, None)
}

/// Relative drop from the first to the last listed value:
/// `(speed(first) − speed(last)) / speed(first)`.
pub fn degradation(result: &SweepResult, from: f64, to: f64, size: usize, mode: Mode) -> Option<f64> {
    let a = result.cell(from, size, mode)?.mean_speed;
    let b = result.cell(to, size, mode)?.mean_speed;
    Some((a - b) / a)
}
