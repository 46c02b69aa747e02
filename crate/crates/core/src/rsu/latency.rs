use std::io::Write;

use crate::rsu::service::RsuError;

/// Empirical distribution of compute delays (µs).
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyCdf {
    /// Sorted samples.
    pub sorted: Vec<f64>,
    pub mean: f64,
}

pub fn latency_cdf(delays: &[f64]) -> Result<LatencyCdf, RsuError> {
    if delays.is_empty() {
        return Err(RsuError::BadRequest("latency CDF needs at least one sample".into()));
    }
    let mut sorted = delays.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Ok(LatencyCdf { sorted, mean })
}

impl LatencyCdf {
    /// `(delay, P[X <= delay])` at every sample.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        self.sorted.iter().enumerate().map(|(i, &d)| (d, (i + 1) as f64 / n)).collect()
    }

    /// Linearly interpolated quantile, `q` in `[0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let h = q.clamp(0.0, 1.0) * (self.sorted.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        self.sorted[lo] + (h - lo as f64) * (self.sorted[hi] - self.sorted[lo])
    }

    /// Share of samples at or below `bound`.
    pub fn fraction_below(&self, bound: f64) -> f64 {
        self.sorted.partition_point(|&d| d <= bound) as f64 / self.sorted.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["compute_delay_us", "cdf"])?;
        for (d, p) in self.points() {
            w.write_record([d.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_mean_of_four() {
        let cdf = latency_cdf(&[4000.0, 1000.0, 3000.0, 2000.0]).unwrap();
        assert_eq!(cdf.quantile(0.5), 2500.0);
        assert_eq!(cdf.mean, 2500.0);
        assert_eq!(cdf.points().last().unwrap().1, 1.0);
    }

    #[test]
    fn single_sample_is_one_step() {
        let cdf = latency_cdf(&[7.0]).unwrap();
        assert_eq!(cdf.points(), vec![(7.0, 1.0)]);
        assert_eq!(cdf.quantile(0.9), 7.0);
    }

    #[test]
    fn constant_samples() {
        let cdf = latency_cdf(&[3.0; 5]).unwrap();
        assert_eq!(cdf.fraction_below(2.9), 0.0);
        assert_eq!(cdf.fraction_below(3.0), 1.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(latency_cdf(&[]).is_err());
    }
}
