//! Exact simulation of the shot-noise process `dY = -Y dt + dZ`, with unit
//! jumps at rate `gamma(Y)` thinned from a constant-rate stream.

use alloc::{format, vec::Vec};

use crate::rng::CandidateStream;
use crate::stats::{batch_stderr, BatchLayout, DEFAULT_BATCHES};
use crate::{Error, Result};

/// When to record `Y`: at `burn_in + j * stride` for `j < samples`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotNoisePlan {
    pub burn_in: f64,
    pub stride: f64,
    pub samples: usize,
}

impl ShotNoisePlan {
    /// Burn-in 50 and stride 5: successive samples are correlated by `e^-5`.
    pub fn with_samples(samples: usize) -> Self {
        Self { burn_in: 50.0, stride: 5.0, samples }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotNoiseSamples {
    pub values: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// Batch-means standard errors.
    pub mean_stderr: f64,
    pub variance_stderr: f64,
    /// Accepted jumps up to the last sample.
    pub jumps: u64,
}

/// Samples `Y` from `Y(0) = 0`. Every candidate must find
/// `gamma(Y) <= gamma_bar`; a violation is reported as an error.
pub fn simulate_shotnoise(
    gamma: impl Fn(f64) -> f64,
    gamma_bar: f64,
    plan: &ShotNoisePlan,
    seed: u64,
) -> Result<ShotNoiseSamples> {
    if !(gamma_bar.is_finite() && gamma_bar > 0.0) {
        return Err(Error::Support(format!("rate bound must be finite and positive, got {gamma_bar}")));
    }
    if !(plan.stride > 0.0 && plan.burn_in >= 0.0) || plan.samples < 2 {
        return Err(Error::DegenerateGrid(format!("bad sampling plan {plan:?}")));
    }
    let mut stream = CandidateStream::new(seed, 0, gamma_bar);
    let mut t = 0.0;
    let mut y = 0.0;
    let mut jumps = 0;
    let mut values = Vec::with_capacity(plan.samples);
    let mut next = stream.next_candidate();
    for j in 0..plan.samples {
        let at = plan.burn_in + j as f64 * plan.stride;
        while let Some(c) = next.filter(|c| c.time <= at) {
            y *= libm::exp(-(c.time - t));
            t = c.time;
            let rate = gamma(y);
            if !(rate >= 0.0 && rate <= gamma_bar) {
                return Err(Error::Support(format!("gamma({y}) = {rate} exceeds the bound {gamma_bar}")));
            }
            if c.mark < rate {
                y += 1.0;
                jumps += 1;
            }
            next = stream.next_candidate();
        }
        y *= libm::exp(-(at - t));
        t = at;
        values.push(y);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let layout = BatchLayout::new(values.len(), DEFAULT_BATCHES);
    let mut sums = alloc::vec![0.0; layout.batches()];
    let mut sq = alloc::vec![0.0; layout.batches()];
    for (i, v) in values.iter().enumerate() {
        sums[layout.batch_of(i)] += v;
        sq[layout.batch_of(i)] += (v - mean) * (v - mean);
    }
    let sizes = layout.batch_sizes();
    Ok(ShotNoiseSamples {
        mean_stderr: batch_stderr(&sums, &sizes),
        variance_stderr: batch_stderr(&sq, &sizes),
        values,
        mean,
        variance,
        jumps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn campbell_moments() {
        let s = simulate_shotnoise(|_| 1.2, 1.2, &ShotNoisePlan::with_samples(20_000), 3).unwrap();
        assert!((s.mean - 1.2).abs() < 4.0 * s.mean_stderr, "{} {}", s.mean, s.mean_stderr);
        assert!((s.variance - 0.6).abs() < 4.0 * s.variance_stderr, "{} {}", s.variance, s.variance_stderr);
    }

    #[test]
    fn bound_violation_detected() {
        let r = simulate_shotnoise(|y| 0.5 + y, 1.0, &ShotNoisePlan::with_samples(1000), 1);
        assert!(matches!(r, Err(Error::Support(_))));
    }

    #[test]
    fn deterministic() {
        let p = ShotNoisePlan::with_samples(100);
        assert_eq!(simulate_shotnoise(|_| 1.0, 1.0, &p, 8).unwrap(), simulate_shotnoise(|_| 1.0, 1.0, &p, 8).unwrap());
    }
}
