//! Space-time speed grids and breakdown detection on them.

use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeGrid {
    pub x_range: (f64, f64),
    pub t_range: (f64, f64),
    pub nx: usize,
    pub nt: usize,
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl SpaceTimeGrid {
    pub fn new(x_range: (f64, f64), t_range: (f64, f64), nx: usize, nt: usize) -> Self {
        assert!(nx >= 1 && nt >= 1, "need at least one bin per axis");
        assert!(x_range.1 > x_range.0 && t_range.1 > t_range.0, "empty range");
        Self { x_range, t_range, nx, nt, sums: vec![0.0; nx * nt], counts: vec![0; nx * nt] }
    }

    fn bin(value: f64, (lo, hi): (f64, f64), n: usize) -> Option<usize> {
        if value < lo || value > hi {
            return None;
        }
        Some((((value - lo) / (hi - lo) * n as f64) as usize).min(n - 1))
    }

    pub fn add(&mut self, time: f64, position: f64, speed: f64) {
        if let (Some(i), Some(t)) = (Self::bin(position, self.x_range, self.nx), Self::bin(time, self.t_range, self.nt)) {
            self.sums[t * self.nx + i] += speed;
            self.counts[t * self.nx + i] += 1;
        }
    }

    /// Mean speed in spatial bin `i` during time bin `t`; `None` if nothing was seen.
    pub fn cell(&self, i: usize, t: usize) -> Option<f64> {
        let k = t * self.nx + i;
        (self.counts[k] > 0).then(|| self.sums[k] / self.counts[k] as f64)
    }

    pub fn count(&self, i: usize, t: usize) -> u64 {
        self.counts[t * self.nx + i]
    }

    pub fn x_bin_start(&self, i: usize) -> f64 {
        self.x_range.0 + (self.x_range.1 - self.x_range.0) * i as f64 / self.nx as f64
    }

    pub fn t_bin_start(&self, t: usize) -> f64 {
        self.t_range.0 + (self.t_range.1 - self.t_range.0) * t as f64 / self.nt as f64
    }

    /// Cells holding data with mean speed strictly below `threshold`.
    pub fn cells_below(&self, threshold: f64) -> usize {
        (0..self.nt).flat_map(|t| (0..self.nx).map(move |i| (i, t))).filter(|&(i, t)| self.cell(i, t).is_some_and(|v| v < threshold)).count()
    }

    /// Largest 8-connected set of below-threshold cells.
    pub fn largest_band(&self, threshold: f64) -> Option<Band> {
        let low = |i: usize, t: usize| self.cell(i, t).is_some_and(|v| v < threshold);
        let mut seen = vec![false; self.nx * self.nt];
        let mut best: Option<Band> = None;
        for t0 in 0..self.nt {
            for i0 in 0..self.nx {
                if seen[t0 * self.nx + i0] || !low(i0, t0) {
                    continue;
                }
                let mut stack = vec![(i0, t0)];
                seen[t0 * self.nx + i0] = true;
                let mut cells = Vec::new();
                while let Some((i, t)) = stack.pop() {
                    cells.push((i, t));
                    for dt in -1i64..=1 {
                        for di in -1i64..=1 {
                            let (ni, nt) = (i as i64 + di, t as i64 + dt);
                            if ni < 0 || nt < 0 || ni >= self.nx as i64 || nt >= self.nt as i64 {
                                continue;
                            }
                            let (ni, nt) = (ni as usize, nt as usize);
                            if !seen[nt * self.nx + ni] && low(ni, nt) {
                                seen[nt * self.nx + ni] = true;
                                stack.push((ni, nt));
                            }
                        }
                    }
                }
                let band = Band::from_cells(&cells);
                if best.as_ref().is_none_or(|b| band.cells > b.cells) {
                    best = Some(band);
                }
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_bin_start_m", "t_bin_start_s", "mean_speed_mps", "sample_count"])?;
        for t in 0..self.nt {
            for i in 0..self.nx {
                let speed = self.cell(i, t).map(|v| v.to_string()).unwrap_or_default();
                w.write_record([
                    self.x_bin_start(i).to_string(),
                    self.t_bin_start(t).to_string(),
                    speed,
                    self.count(i, t).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// A connected low-speed region of a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Band {
    pub cells: usize,
    pub onset_t: usize,
    /// Most downstream spatial bin at onset.
    pub onset_x: usize,
    /// Most upstream spatial bin ever reached.
    pub upstream_x: usize,
    /// First time bin at which `upstream_x` was reached.
    pub upstream_t: usize,
}

impl Band {
    fn from_cells(cells: &[(usize, usize)]) -> Self {
        let onset_t = cells.iter().map(|c| c.1).min().unwrap();
        let onset_x = cells.iter().filter(|c| c.1 == onset_t).map(|c| c.0).max().unwrap();
        let upstream_x = cells.iter().map(|c| c.0).min().unwrap();
        let upstream_t = cells.iter().filter(|c| c.0 == upstream_x).map(|c| c.1).min().unwrap();
        Self { cells: cells.len(), onset_t, onset_x, upstream_x, upstream_t }
    }

    /// Started downstream and later reached at least `bins` bins further upstream.
    pub fn propagates_upstream(&self, bins: usize) -> bool {
        self.onset_x >= self.upstream_x + bins && self.upstream_t > self.onset_t
    }
}

/// Grid of `(time, position, speed)` samples over a region.
pub fn space_time_grid(
    samples: impl IntoIterator<Item = (f64, f64, f64)>,
    region: (f64, f64),
    time_range: (f64, f64),
    bins: (usize, usize),
) -> SpaceTimeGrid {
    let mut grid = SpaceTimeGrid::new(region, time_range, bins.0, bins.1);
    for (t, x, v) in samples {
        grid.add(t, x, v);
    }
    grid
}
