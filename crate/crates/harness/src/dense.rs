//! Direct dense solve of the stationary equations, as a cross-check of the
//! power iteration on small chains.

use nalgebra::{DMatrix, DVector};
use spikewin_core::chain::GridChain;

/// Solves `pi (P - I) = 0`, `sum pi = 1` by LU with partial pivoting.
/// `None` if the system is singular.
pub fn dense_stationary(chain: &GridChain) -> Option<Vec<f64>> {
    let n = chain.num_states();
    // Rows of `a` are the balance equations; the last is replaced by the normalization.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (i, j, p) in chain.triplets() {
        a[(j, i)] += p;
    }
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b)?;
    Some(x.iter().copied().collect())
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
