//! Truncated dynamics, the shared-stream coupling with the full dynamics, and
//! the closed-form bounds on truncation error, densities and merge times.

use alloc::{format, vec, vec::Vec};

use crate::network::{Model, NetworkConfig, Truncation, Weights};
use crate::sim::{CoupledObserver, CoupledRun, Event, Side, Simulator};
use crate::state::{Unit, WindowState};
use crate::stats::{batch_stderr, DEFAULT_BATCHES};
use crate::{Error, Result};

/// Intensity of neuron `i` in the dynamics truncated at `n` window spikes.
pub fn truncated_rate(cfg: &NetworkConfig, state: &WindowState, weights: &Weights, i: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidConfig("truncation level must be at least 1".into()));
    }
    let rate = cfg.firing_rate(state, weights, i)?;
    Ok(if state.ages(Unit::Neuron(i))?.len() >= n { 0.0 } else { rate })
}

/// Outcome of one coupled run of the full and the truncated dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingStats {
    /// Truncation level.
    pub n: usize,
    /// Number of window-length blocks simulated.
    pub blocks: usize,
    pub theta: f64,
    /// Maximal time intervals on which the two states differ.
    pub intervals: Vec<(f64, f64)>,
    /// Total length of `intervals`.
    pub mismatch: f64,
    /// Fraction of time the states differ: `mismatch / (theta * blocks)`.
    pub p_n: f64,
    /// Batch-means standard error of `p_n`.
    pub stderr: f64,
    /// Times the states went from equal to different.
    pub splits: usize,
    /// Times the states went from different to equal.
    pub merges: usize,
    /// First time a neuron of the full dynamics held `n` window spikes.
    pub first_saturation: Option<f64>,
}

struct Tracker {
    n: usize,
    intervals: Vec<(f64, f64)>,
    first_saturation: Option<f64>,
}

impl CoupledObserver for Tracker {
    fn on_event(&mut self, side: Side, event: Event, state: &WindowState) {
        if self.first_saturation.is_none() && side == Side::A {
            if let Unit::Neuron(_) = event.unit {
                if state.ages(event.unit).map_or(0, <[f64]>::len) >= self.n {
                    self.first_saturation = Some(event.time);
                }
            }
        }
    }

    fn on_mismatch(&mut self, start: f64, end: f64) {
        match self.intervals.last_mut() {
            Some(last) if last.1 == start => last.1 = end,
            _ => self.intervals.push((start, end)),
        }
    }
}

/// Runs the full dynamics and the dynamics truncated at `n` neuron spikes from
/// the silent state for `blocks` window lengths, both driven by one candidate
/// stream, and measures exactly how long they disagree.
pub fn simulate_coupled(model: &Model, n: usize, blocks: usize, seed: u64) -> Result<CouplingStats> {
    if blocks == 0 {
        return Err(Error::DegenerateGrid("need at least one block".into()));
    }
    let full = model.clone().with_truncation(Truncation { neurons: None, ..model.truncation() })?;
    let truncated = model.clone().with_truncation(Truncation { neurons: Some(n), ..model.truncation() })?;
    let empty = model.config().empty_state();
    let theta = model.config().theta();
    let horizon = theta * blocks as f64;
    let mut pair = CoupledRun::new(Simulator::new(&full, empty.clone())?, Simulator::new(&truncated, empty)?, seed, 0)?;
    let mut tracker = Tracker { n, intervals: Vec::new(), first_saturation: None };
    pair.run(horizon, false, &mut tracker);

    let intervals = tracker.intervals;
    let mismatch: f64 = intervals.iter().map(|(a, b)| b - a).sum();
    let splits = intervals.len();
    let open_at_end = intervals.last().is_some_and(|&(_, b)| b >= horizon);
    let merges = splits - usize::from(open_at_end);

    let batches = DEFAULT_BATCHES.min(blocks);
    let mut sums = vec![0.0; batches];
    let mut sizes = vec![0usize; batches];
    let edges: Vec<f64> = (0..=batches).map(|b| theta * (b * blocks / batches) as f64).collect();
    for b in 0..batches {
        sizes[b] = (b + 1) * blocks / batches - b * blocks / batches;
    }
    for &(a, b) in &intervals {
        let first = edges.partition_point(|&e| e <= a).saturating_sub(1).min(batches - 1);
        for k in first..batches {
            let lo = a.max(edges[k]);
            let hi = b.min(edges[k + 1]);
            if hi <= lo {
                break;
            }
            // Batch statistics are in units of theta per block.
            sums[k] += (hi - lo) / theta;
        }
    }
    let stderr = if batches >= 2 { batch_stderr(&sums, &sizes) } else { f64::NAN };
    Ok(CouplingStats {
        n,
        blocks,
        theta,
        p_n: mismatch / horizon,
        mismatch,
        intervals,
        stderr,
        splits,
        merges,
        first_saturation: tracker.first_saturation,
    })
}

/// The constants `(C, alpha)` of [`truncation_bound`].
pub fn truncation_constants(cfg: &NetworkConfig) -> (f64, f64) {
    let theta = cfg.theta();
    let top = cfg.rate_bounds().iter().copied().fold(0.0, f64::max);
    let c = 2.0 * cfg.num_neurons() as f64 / libm::sqrt(core::f64::consts::PI) * libm::exp(theta * (cfg.total_source_rate() + cfg.total_rate_bound()));
    let alpha = (1.0 + libm::log(theta * top)) / 2.0;
    (c, alpha)
}

/// `C n^{-(n+1)/2} e^{alpha n}` with `C = 2N/sqrt(pi) exp(theta (sum rho + sum bound))`
/// and `alpha = (1 + ln(theta max bound)) / 2`.
pub fn truncation_bound(cfg: &NetworkConfig, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidConfig("truncation level must be at least 1".into()));
    }
    if cfg.num_neurons() == 0 {
        return Ok(0.0);
    }
    let (c, alpha) = truncation_constants(cfg);
    let n = n as f64;
    // Work in logs: n^{-(n+1)/2} underflows long before the product does.
    Ok(c * libm::exp(-(n + 1.0) / 2.0 * libm::log(n) + alpha * n))
}

/// Upper bound on the density of the stationary law on the component with
/// `m[k]` spikes of source `k` and `n[i]` spikes of neuron `i`.
pub fn density_bound(cfg: &NetworkConfig, m: &[usize], n: &[usize]) -> Result<f64> {
    if m.len() != cfg.num_sources() || n.len() != cfg.num_neurons() {
        return Err(Error::InvalidConfig(format!(
            "component index has {}+{} entries, network has {}+{} units",
            m.len(),
            n.len(),
            cfg.num_sources(),
            cfg.num_neurons()
        )));
    }
    let mut b = libm::exp(-cfg.theta() * cfg.total_source_rate());
    for (&rho, &mk) in cfg.source_rates().iter().zip(m) {
        b *= libm::pow(rho, mk as f64);
    }
    for (bound, &ni) in cfg.rate_bounds().into_iter().zip(n) {
        b *= libm::pow(bound, ni as f64);
    }
    Ok(b)
}

/// [`density_bound`] with the component given as one count vector, sources first.
pub fn density_bound_flat(cfg: &NetworkConfig, counts: &[usize]) -> Result<f64> {
    let m = cfg.num_sources().min(counts.len());
    density_bound(cfg, &counts[..m], &counts[m..])
}

/// The coarser bound `Lambda^{total} e^{-theta sum rho}` with `Lambda` the
/// largest rate bound.
pub fn uniform_density_bound(cfg: &NetworkConfig, total: usize) -> f64 {
    libm::pow(cfg.max_rate(), total as f64) * libm::exp(-cfg.theta() * cfg.total_source_rate())
}

/// Probability that the candidate stream is silent for a whole window.
pub fn silent_window_probability(cfg: &NetworkConfig) -> f64 {
    libm::exp(-cfg.theta() * (cfg.total_source_rate() + cfg.total_rate_bound()))
}

/// Bound on the probability that two coupled copies have not merged by time
/// `t`: every full window without candidates forces a merge.
pub fn merge_bound(cfg: &NetworkConfig, t: f64) -> f64 {
    let k = libm::floor(t / cfg.theta());
    libm::pow(1.0 - silent_window_probability(cfg), k.max(0.0))
}
