//! Small statistics helpers for the Monte-Carlo estimators.

use alloc::vec::Vec;

/// Number of contiguous batches used for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 100;

/// Splits `total` sequential samples into `batches` contiguous batches.
#[derive(Debug, Clone)]
pub struct BatchLayout {
    total: usize,
    batches: usize,
}

impl BatchLayout {
    pub fn new(total: usize, batches: usize) -> Self {
        Self { total: total.max(1), batches: batches.clamp(1, total.max(1)) }
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    #[inline]
    pub fn batch_of(&self, sample: usize) -> usize {
        (sample * self.batches / self.total).min(self.batches - 1)
    }

    pub fn batch_sizes(&self) -> Vec<usize> {
        let mut sizes = alloc::vec![0usize; self.batches];
        for (b, s) in (0..self.batches).zip(sizes.iter_mut()) {
            let lo = (b * self.total).div_ceil(self.batches);
            let hi = ((b + 1) * self.total).div_ceil(self.batches);
            *s = hi - lo;
        }
        sizes
    }
}

/// Batch-means standard error of the overall mean `sum(sums) / sum(sizes)`.
pub fn batch_stderr(sums: &[f64], sizes: &[usize]) -> f64 {
    let b = sums.len();
    if b < 2 {
        return f64::INFINITY;
    }
    let n: usize = sizes.iter().sum();
    let mean = sums.iter().sum::<f64>() / n as f64;
    let var = sums
        .iter()
        .zip(sizes)
        .map(|(&s, &k)| {
            let d = s / k as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / (b - 1) as f64;
    libm::sqrt(var / b as f64)
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Kolmogorov-Smirnov distance between the empirical law of `sorted` and `cdf`.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d: f64, (k, &x)| {
        let f = cdf(x);
        d.max(f - k as f64 / n).max((k + 1) as f64 / n - f)
    })
}

/// Asymptotic 1% critical value of the one-sample KS distance.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / libm::sqrt(n as f64)
}
