use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

/// One-sample t-test of repeated recall measurements against a baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub baseline: f64,
    /// Infinite when every sample is equal and differs from the baseline.
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    /// Zero variance: `t` and `p` are set by convention, not computed.
    pub degenerate: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("need at least 2 samples, got {0}")]
    InsufficientSamples(usize),
}

pub fn repeated_stats(samples: &[f64], baseline: f64) -> Result<RunStats, StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::InsufficientSamples(n));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let diff = mean - baseline;

    if sd == 0.0 || sd < 1e-12 * mean.abs().max(1.0) {
        let (t, p) = if diff.abs() < 1e-12 { (0.0, 1.0) } else { (f64::INFINITY.copysign(diff), 0.0) };
        return Ok(RunStats { n, mean, sd, baseline, t, p, degenerate: diff.abs() >= 1e-12 });
    }
    let t = diff / (sd / nf.sqrt());
    let dist = StudentsT::new(0.0, 1.0, nf - 1.0).expect("n >= 2 gives positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(RunStats { n, mean, sd, baseline, t, p, degenerate: false })
}
