//! The discrete grid Markov chain approximating the network on a time grid of
//! step `h * theta`, `h = 1/q`.
//!
//! Ages are measured in units of the window length. One unit's grid vector
//! `1 >= xi_1 > ... > xi_n > 0` with entries in `hZ` is stored as a bitmask:
//! bit `k - 1` set means the value `k h` is present. Per step every value drops
//! by `h` (the value `h` leaves) and a unit that fires prepends `1`.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::{format, vec, vec::Vec};

use crate::network::{Model, Weights};
use crate::state::WindowState;
use crate::{Error, Result};

/// Largest supported grid resolution.
pub const MAX_Q: usize = 64;

/// Default cap on the number of enumerated states.
pub const DEFAULT_STATE_CAP: usize = 2_000_000;

/// A grid state: one bitmask per unit, sources first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridState {
    q: usize,
    masks: Vec<u64>,
}

impl GridState {
    pub fn zero(q: usize, units: usize) -> Self {
        Self { q, masks: vec![0; units] }
    }

    pub fn from_masks(q: usize, masks: Vec<u64>) -> Result<Self> {
        check_q(q)?;
        if masks.iter().any(|&m| m & !full_mask(q) != 0) {
            return Err(Error::InvalidState(format!("mask has bits beyond q = {q}")));
        }
        Ok(Self { q, masks })
    }

    /// Builds a state from grid values (in window units), most recent first.
    pub fn from_values(q: usize, values: &[Vec<f64>]) -> Result<Self> {
        check_q(q)?;
        let mut masks = Vec::with_capacity(values.len());
        for (u, v) in values.iter().enumerate() {
            let mut mask = 0u64;
            let mut prev = usize::MAX;
            for &x in v {
                let k = libm::round(x * q as f64);
                if (x * q as f64 - k).abs() > 1e-9 || k < 1.0 || k > q as f64 {
                    return Err(Error::InvalidState(format!("unit {u}: {x} is not a grid value in (0, 1] for q = {q}")));
                }
                let k = k as usize;
                if k >= prev {
                    return Err(Error::InvalidState(format!("unit {u}: grid values not strictly decreasing")));
                }
                prev = k;
                mask |= 1 << (k - 1);
            }
            masks.push(mask);
        }
        Ok(Self { q, masks })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    /// Grid values per unit, most recent first.
    pub fn values(&self) -> Vec<Vec<f64>> {
        let h = 1.0 / self.q as f64;
        self.masks.iter().map(|&m| mask_values(m).map(|k| k as f64 * h).collect()).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.masks.iter().map(|m| m.count_ones() as usize).collect()
    }

    /// The embedded continuous state `F(zeta)` for window length `theta`.
    pub fn to_window_state(&self, theta: f64, sources: usize) -> WindowState {
        let h = theta / self.q as f64;
        let mut ages: Vec<Vec<f64>> = self.masks.iter().map(|&m| mask_values(m).map(|k| k as f64 * h).collect()).collect();
        let neurons = ages.split_off(sources);
        WindowState::from_ages(theta, ages, neurons).expect("grid values are valid ages")
    }

    /// Every value drops by `h`; values reaching 0 leave.
    pub fn shifted(&self) -> Self {
        Self { q: self.q, masks: self.masks.iter().map(|&m| m >> 1).collect() }
    }

    /// The shift, followed by a spike of the unit at `slot`.
    pub fn spiked_at(&self, slot: usize) -> Self {
        let mut s = self.shifted();
        s.masks[slot] |= head_bit(self.q);
        s
    }

    /// All states from which one step can lead here.
    ///
    /// A unit whose head is 1 must have fired, otherwise it must not; either
    /// way its predecessor may or may not have held one extra value `h` that
    /// left during the step.
    pub fn precursors(&self) -> Vec<GridState> {
        let units = self.masks.len();
        let base: Vec<u64> = self.masks.iter().map(|&m| unshift(m, self.q)).collect();
        (0..1usize << units)
            .map(|alpha| GridState {
                q: self.q,
                masks: base.iter().enumerate().map(|(u, &b)| if alpha >> u & 1 == 1 { b | 1 } else { b }).collect(),
            })
            .collect()
    }

    /// Whether unit `slot` fired in the step leading to this state.
    pub fn fired(&self, slot: usize) -> bool {
        self.masks[slot] & head_bit(self.q) != 0
    }

    /// Whether two values of one unit sit in neighbouring grid cells. Such
    /// states stand in for the cells cut by the diagonal `x_j = x_{j+1}`.
    pub fn is_boundary(&self) -> bool {
        self.masks.iter().any(|&m| m & (m >> 1) != 0)
    }
}

#[inline]
fn full_mask(q: usize) -> u64 {
    if q == 64 {
        u64::MAX
    } else {
        (1u64 << q) - 1
    }
}

#[inline]
fn head_bit(q: usize) -> u64 {
    1u64 << (q - 1)
}

/// Inverse of the shift with no expired value.
#[inline]
fn unshift(mask: u64, q: usize) -> u64 {
    (mask & !head_bit(q)) << 1
}

/// Grid indices `k` (value `k h`) of a mask, largest first.
fn mask_values(mask: u64) -> impl Iterator<Item = u32> {
    let mut m = mask;
    core::iter::from_fn(move || {
        if m == 0 {
            return None;
        }
        let top = 63 - m.leading_zeros();
        m &= !(1u64 << top);
        Some(top + 1)
    })
}

fn check_q(q: usize) -> Result<()> {
    if q == 0 || q > MAX_Q {
        return Err(Error::InvalidConfig(format!("grid resolution q must be in 1..={MAX_Q}, got {q}")));
    }
    Ok(())
}

/// Rejects grids on which some unit's bound times the step exceeds 1.
pub fn check_step(model: &Model, q: usize) -> Result<()> {
    check_q(q)?;
    let cfg = model.config();
    let dt = cfg.theta() / q as f64;
    let named = cfg
        .source_rates()
        .iter()
        .enumerate()
        .map(|(k, &r)| (crate::Unit::Source(k), r))
        .chain(cfg.rate_bounds().into_iter().enumerate().map(|(i, r)| (crate::Unit::Neuron(i), r)));
    for (unit, rate) in named {
        if dt * rate > 1.0 {
            return Err(Error::StepProbability { unit: format!("{unit}"), product: dt * rate, q });
        }
    }
    Ok(())
}

/// Per-unit spike probabilities of one step from `state`.
fn spike_probabilities(model: &Model, weights: &Weights, state: &GridState) -> Result<Vec<f64>> {
    let cfg = model.config();
    let dt = cfg.theta() / state.q as f64;
    let ws = state.to_window_state(cfg.theta(), cfg.num_sources());
    (0..state.masks.len())
        .map(|slot| {
            let p = dt * model.slot_rate(&ws, weights, slot);
            if !p.is_finite() || p > 1.0 {
                Err(Error::StepProbability { unit: format!("{}", ws.unit_at(slot)), product: p, q: state.q })
            } else {
                Ok(p)
            }
        })
        .collect()
}

/// Successors of `state` with their one-step probabilities. Outcomes of
/// probability zero are left out.
pub fn transition_row(model: &Model, state: &GridState) -> Result<Vec<(GridState, f64)>> {
    let weights = model.weights_for(None);
    let probs = spike_probabilities(model, &weights, state)?;
    Ok(row_from(state, &probs))
}

fn row_from(state: &GridState, probs: &[f64]) -> Vec<(GridState, f64)> {
    let units = probs.len();
    let shifted = state.shifted();
    let head = head_bit(state.q);
    let mut row = Vec::new();
    for outcome in 0..1usize << units {
        let mut p = 1.0;
        let mut next = shifted.clone();
        for (u, &pu) in probs.iter().enumerate() {
            if outcome >> u & 1 == 1 {
                p *= pu;
                next.masks[u] |= head;
            } else {
                p *= 1.0 - pu;
            }
        }
        if p > 0.0 {
            row.push((next, p));
        }
    }
    row
}

/// One-step probability from `from` to `to`, computed directly from the
/// spike pattern of `to` rather than by enumerating outcomes.
pub fn step_probability(model: &Model, from: &GridState, to: &GridState) -> Result<f64> {
    let weights = model.weights_for(None);
    let probs = spike_probabilities(model, &weights, from)?;
    Ok(step_probability_with(from, to, &probs))
}

fn step_probability_with(from: &GridState, to: &GridState, probs: &[f64]) -> f64 {
    let head = head_bit(from.q);
    let mut p = 1.0;
    for (u, &pu) in probs.iter().enumerate() {
        let after = from.masks[u] >> 1;
        if to.masks[u] & !head != after {
            return 0.0;
        }
        p *= if to.masks[u] & head != 0 { pu } else { 1.0 - pu };
    }
    p
}

/// Options for the stationary solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop once successive iterates differ by less than this in sup norm.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tolerance: 1e-13, max_iterations: 1_000_000 }
    }
}

/// Stationary vector of a [`GridChain`] with its quality measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub pi: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm change of the last iteration.
    pub last_change: f64,
    /// `|| pi P - pi ||_inf`.
    pub fixed_point_residual: f64,
    /// Largest violation of `pi(z) = sum_V pi(V) p(z | V)` over the precursors.
    pub balance_residual: f64,
}

/// The reachable part of the grid chain with its sparse transition matrix.
#[derive(Debug, Clone)]
pub struct GridChain {
    model: Model,
    q: usize,
    states: Vec<GridState>,
    index: BTreeMap<Vec<u64>, usize>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl GridChain {
    /// Enumerates the states reachable from the silent state, breadth first.
    pub fn build(model: &Model, q: usize, cap: usize) -> Result<Self> {
        if model.plasticity().is_some() {
            return Err(Error::InvalidConfig("the grid chain covers static weights only".into()));
        }
        check_step(model, q)?;
        let units = model.config().num_sources() + model.config().num_neurons();
        if units == 0 {
            return Err(Error::InvalidConfig("network has no units".into()));
        }
        let weights = model.weights_for(None);
        let zero = GridState::zero(q, units);
        let mut index = BTreeMap::new();
        let mut states = vec![zero.clone()];
        index.insert(zero.masks.clone(), 0);
        let mut queue = VecDeque::from([0usize]);
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
        while let Some(i) = queue.pop_front() {
            let probs = spike_probabilities(model, &weights, &states[i])?;
            let mut row = Vec::new();
            for (next, p) in row_from(&states[i], &probs) {
                let j = match index.get(&next.masks) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= cap {
                            return Err(Error::StateCapExceeded { cap, reached: states.len() + 1 });
                        }
                        let j = states.len();
                        index.insert(next.masks.clone(), j);
                        states.push(next);
                        queue.push_back(j);
                        j
                    }
                };
                row.push((j, p));
            }
            if rows.len() <= i {
                rows.resize(i + 1, Vec::new());
            }
            rows[i] = row;
        }
        let mut row_ptr = Vec::with_capacity(states.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &rows {
            for &(j, p) in row {
                cols.push(j);
                vals.push(p);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { model: model.clone(), q, states, index, row_ptr, cols, vals })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[GridState] {
        &self.states
    }

    pub fn index_of(&self, state: &GridState) -> Option<usize> {
        self.index.get(&state.masks).copied()
    }

    /// Column indices and probabilities of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    /// All nonzero entries as `(row, column, probability)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_states()).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &p)| (i, j, p))
        })
    }

    /// `x P` for a row vector `x`.
    pub fn left_multiply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (c, v) = self.row(i);
            for (&j, &p) in c.iter().zip(v) {
                out[j] += xi * p;
            }
        }
    }

    /// Largest deviation of a row sum from 1.
    pub fn row_sum_error(&self) -> f64 {
        (0..self.num_states()).map(|i| (self.row(i).1.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Stationary vector by damped power iteration on `(I + P) / 2`.
    pub fn stationary(&self, opts: SolveOptions) -> Result<Stationary> {
        let n = self.num_states();
        let mut pi = vec![1.0 / n as f64; n];
        let mut next = vec![0.0; n];
        let mut change = f64::INFINITY;
        let mut iterations = 0;
        while iterations < opts.max_iterations {
            self.left_multiply(&pi, &mut next);
            let mut total = 0.0;
            for (nx, &p) in next.iter_mut().zip(&pi) {
                *nx = 0.5 * (*nx + p);
                total += *nx;
            }
            change = 0.0;
            for (nx, p) in next.iter_mut().zip(pi.iter_mut()) {
                *nx /= total;
                change = f64::max(change, (*nx - *p).abs());
                *p = *nx;
            }
            iterations += 1;
            if change < opts.tolerance {
                break;
            }
        }
        if !(change < opts.tolerance) {
            return Err(Error::NoConvergence { iterations, change });
        }
        let fixed_point_residual = self.fixed_point_residual(&pi);
        let balance_residual = self.balance_residual(&pi)?;
        Ok(Stationary { pi, iterations, last_change: change, fixed_point_residual, balance_residual })
    }

    pub fn fixed_point_residual(&self, pi: &[f64]) -> f64 {
        let mut out = vec![0.0; pi.len()];
        self.left_multiply(pi, &mut out);
        out.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Checks `pi(z) = sum_V pi(V) p(z | V)` with `V` ranging over the
    /// precursors of `z`, using the closed-form one-step probability.
    pub fn balance_residual(&self, pi: &[f64]) -> Result<f64> {
        let weights = self.model.weights_for(None);
        let mut worst: f64 = 0.0;
        for (z, state) in self.states.iter().enumerate() {
            let mut inflow = 0.0;
            for v in state.precursors() {
                if let Some(iv) = self.index_of(&v) {
                    let probs = spike_probabilities(&self.model, &weights, &v)?;
                    inflow += pi[iv] * step_probability_with(&v, state, &probs);
                }
            }
            worst = worst.max((inflow - pi[z]).abs());
        }
        Ok(worst)
    }

    /// Pushes `pi` forward to the continuous state space.
    pub fn embed(&self, pi: &[f64]) -> ChainEmbedding {
        let cfg = self.model.config();
        let cell = cfg.theta() / self.q as f64;
        let mut masses = BTreeMap::new();
        let mut boundary = BTreeMap::new();
        let mut density = BTreeMap::new();
        for (state, &p) in self.states.iter().zip(pi) {
            let counts = state.counts();
            *masses.entry(counts.clone()).or_insert(0.0) += p;
            if state.is_boundary() {
                *boundary.entry(counts.clone()).or_insert(0.0) += p;
            }
            let dim = counts.iter().sum::<usize>() as i32;
            density.insert(state.masks.clone(), p / libm::pow(cell, dim as f64));
        }
        ChainEmbedding { q: self.q, theta: cfg.theta(), sources: cfg.num_sources(), masses, boundary, density }
    }

    /// `sum_z pi(z) * (number of window spikes in z)`.
    pub fn mean_total_count(&self, pi: &[f64]) -> f64 {
        self.states.iter().zip(pi).map(|(s, &p)| p * s.counts().iter().sum::<usize>() as f64).sum()
    }
}

/// A stationary grid vector viewed as a law on window states: grid value
/// `xi` stands for the cell `(xi - h, xi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEmbedding {
    pub q: usize,
    pub theta: f64,
    pub sources: usize,
    /// Spike counts per unit -> probability.
    pub masses: BTreeMap<Vec<usize>, f64>,
    /// Part of each component's mass held by states with values in
    /// neighbouring cells of one unit.
    pub boundary: BTreeMap<Vec<usize>, f64>,
    density: BTreeMap<Vec<u64>, f64>,
}

impl ChainEmbedding {
    pub fn mass(&self, counts: &[usize]) -> f64 {
        self.masses.get(counts).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.values().sum()
    }

    pub fn total_boundary_mass(&self) -> f64 {
        self.boundary.values().sum()
    }

    /// Cell density at `ages` (per unit, most recent first, in time units).
    /// `None` when two ages of one unit fall in the same cell, which no grid
    /// state represents.
    pub fn density_at(&self, ages: &[Vec<f64>]) -> Option<f64> {
        let cell = self.theta / self.q as f64;
        let mut masks = Vec::with_capacity(ages.len());
        for v in ages {
            let mut m = 0u64;
            for &x in v {
                if !(x > 0.0 && x <= self.theta) {
                    return None;
                }
                let k = (libm::ceil(x / cell) as usize).clamp(1, self.q);
                let bit = 1u64 << (k - 1);
                if m & bit != 0 {
                    return None;
                }
                m |= bit;
            }
            masks.push(m);
        }
        Some(self.density.get(&masks).copied().unwrap_or(0.0))
    }

    /// Iterates over `(grid values per unit, density)` for every state.
    pub fn cells(&self) -> impl Iterator<Item = (Vec<Vec<f64>>, f64)> + '_ {
        self.density.iter().map(move |(m, &d)| (GridState { q: self.q, masks: m.clone() }.values(), d))
    }
}
