//! Exact simulation by thinning the shared candidate stream, and ergodic
//! estimators of stationary quantities.
//!
//! Candidate marks are laid out as in the coupling construction: source `k`
//! owns an interval of width `rho_k`, neuron `i` one of width equal to its
//! activation bound. A candidate landing in a neuron's interval at offset `o`
//! is accepted iff `o < rate_i(state just before the candidate)`.

use alloc::collections::BTreeMap;
use alloc::{format, vec, vec::Vec};

use crate::network::{Model, Weights};
use crate::plasticity::PlasticState;
use crate::rng::{Candidate, CandidateStream};
use crate::state::{Unit, WindowState};
use crate::stats::{batch_stderr, BatchLayout, DEFAULT_BATCHES};
use crate::{Error, Result};

/// Components with more window spikes than this are pooled into one cell.
pub const COMPONENT_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    SourceSpike,
    NeuronSpike,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub unit: Unit,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        match self.unit {
            Unit::Source(_) => EventKind::SourceSpike,
            Unit::Neuron(_) => EventKind::NeuronSpike,
        }
    }
}

/// Accepted spikes of one run, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub seed: u64,
    pub horizon: f64,
    pub events: Vec<Event>,
}

/// One trajectory of the network process.
#[derive(Debug, Clone)]
pub struct Simulator<'m> {
    model: &'m Model,
    state: WindowState,
    plastic: Option<PlasticState>,
    weights: Weights,
    time: f64,
}

impl<'m> Simulator<'m> {
    /// Starts at `initial` with the model's initial plastic levels.
    pub fn new(model: &'m Model, initial: WindowState) -> Result<Self> {
        Self::with_plastic(model, initial, model.initial_plastic_state())
    }

    pub fn with_plastic(model: &'m Model, initial: WindowState, plastic: Option<PlasticState>) -> Result<Self> {
        model.config().check_state(&initial)?;
        if let Some(p) = &plastic {
            let expected = model.plasticity().map_or(0, |c| c.synapses.len());
            if p.levels().len() != expected {
                return Err(Error::InvalidState(format!(
                    "plastic state has {} levels, model has {expected} plastic synapses",
                    p.levels().len()
                )));
            }
        }
        let weights = model.weights_for(plastic.as_ref());
        if !model.total_rate().is_finite() {
            return Err(Error::NonFiniteRate("candidate stream".into()));
        }
        Ok(Self { model, state: initial, plastic, weights, time: 0.0 })
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn state(&self) -> &WindowState {
        &self.state
    }

    pub fn plastic(&self) -> Option<&PlasticState> {
        self.plastic.as_ref()
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Drifts the state forward to time `t` (no-op if `t` is not later).
    #[inline]
    pub fn advance_to(&mut self, t: f64) {
        if t > self.time {
            self.state.drift(t - self.time);
            self.time = t;
        }
    }

    /// Moves to the candidate's time and accepts or rejects it.
    pub fn offer(&mut self, c: &Candidate) -> Option<Unit> {
        self.advance_to(c.time);
        let (slot, offset) = self.model.locate(c.mark)?;
        let rate = self.model.slot_rate(&self.state, &self.weights, slot);
        if offset >= rate {
            return None;
        }
        let unit = self.state.unit_at(slot);
        if let (Some(cfg), Some(plastic)) = (self.model.plasticity(), self.plastic.as_mut()) {
            cfg.apply(plastic, &self.state, unit);
            self.weights = cfg.weights(self.model.config(), plastic);
        }
        self.state.spike_slot(slot);
        Some(unit)
    }

    fn same_as(&self, other: &Self) -> Option<f64> {
        if self.plastic != other.plastic {
            return Some(f64::INFINITY);
        }
        self.state.divergence_horizon(&other.state)
    }
}

/// A simulator attached to its candidate stream.
#[derive(Debug, Clone)]
pub struct Run<'m> {
    sim: Simulator<'m>,
    stream: CandidateStream,
    pending: Option<Candidate>,
}

impl<'m> Run<'m> {
    pub fn new(sim: Simulator<'m>, seed: u64, stream: u64) -> Self {
        let rate = sim.model.total_rate();
        Self { sim, stream: CandidateStream::new(seed, stream, rate), pending: None }
    }

    pub fn simulator(&self) -> &Simulator<'m> {
        &self.sim
    }

    /// Processes every candidate up to `t_end` and drifts to `t_end`.
    pub fn run_until(&mut self, t_end: f64, mut on_event: impl FnMut(Event)) {
        loop {
            let next = match self.pending.take().or_else(|| self.stream.next_candidate()) {
                Some(c) => c,
                None => break,
            };
            if next.time > t_end {
                self.pending = Some(next);
                break;
            }
            if let Some(unit) = self.sim.offer(&next) {
                on_event(Event { time: next.time, unit });
            }
        }
        self.sim.advance_to(t_end);
    }
}

/// Simulates from `initial` up to `horizon` and logs every accepted spike.
pub fn simulate(model: &Model, initial: WindowState, horizon: f64, seed: u64) -> Result<EventLog> {
    let plastic = model.initial_plastic_state();
    simulate_from(model, initial, plastic, horizon, seed)
}

pub fn simulate_from(
    model: &Model,
    initial: WindowState,
    plastic: Option<PlasticState>,
    horizon: f64,
    seed: u64,
) -> Result<EventLog> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::DegenerateGrid(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    let mut run = Run::new(Simulator::with_plastic(model, initial, plastic)?, seed, 0);
    let mut events = Vec::new();
    run.run_until(horizon, |e| events.push(e));
    Ok(EventLog { seed, horizon, events })
}

/// Which side of a coupled pair an event belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// Hooks called while a coupled pair runs.
pub trait CoupledObserver {
    /// `state` is the side's state right after the spike.
    fn on_event(&mut self, _side: Side, _event: Event, _state: &WindowState) {}
    /// The two trajectories differ on `[start, end)`.
    fn on_mismatch(&mut self, _start: f64, _end: f64) {}
}

impl CoupledObserver for () {}

/// Two trajectories driven by the same candidate stream.
#[derive(Debug, Clone)]
pub struct CoupledRun<'m> {
    a: Simulator<'m>,
    b: Simulator<'m>,
    stream: CandidateStream,
    pending: Option<Candidate>,
}

impl<'m> CoupledRun<'m> {
    pub fn new(a: Simulator<'m>, b: Simulator<'m>, seed: u64, stream: u64) -> Result<Self> {
        if a.model.config().rate_bounds() != b.model.config().rate_bounds()
            || a.model.config().source_rates() != b.model.config().source_rates()
        {
            return Err(Error::InvalidConfig("coupled models must share the candidate partition".into()));
        }
        let rate = a.model.total_rate();
        Ok(Self { a, b, stream: CandidateStream::new(seed, stream, rate), pending: None })
    }

    pub fn first(&self) -> &Simulator<'m> {
        &self.a
    }

    pub fn second(&self) -> &Simulator<'m> {
        &self.b
    }

    pub fn time(&self) -> f64 {
        self.a.time
    }

    /// Runs to `t_end`, reporting exact mismatch intervals. With
    /// `stop_on_merge`, returns as soon as the two states coincide and yields
    /// that time.
    pub fn run(&mut self, t_end: f64, stop_on_merge: bool, obs: &mut impl CoupledObserver) -> Option<f64> {
        loop {
            let next = self.pending.take().or_else(|| self.stream.next_candidate());
            let t_next = next.map_or(t_end, |c| c.time.min(t_end));
            let now = self.a.time;
            match self.a.same_as(&self.b) {
                None if stop_on_merge => {
                    self.pending = next;
                    return Some(now);
                }
                None => {}
                Some(h) => {
                    let end = (now + h).min(t_next);
                    if end > now {
                        obs.on_mismatch(now, end);
                    }
                    if stop_on_merge && now + h <= t_next {
                        self.a.advance_to(now + h);
                        self.b.advance_to(now + h);
                        self.pending = next;
                        return Some(now + h);
                    }
                }
            }
            match next {
                Some(c) if c.time <= t_end => {
                    if let Some(unit) = self.a.offer(&c) {
                        obs.on_event(Side::A, Event { time: c.time, unit }, &self.a.state);
                    }
                    if let Some(unit) = self.b.offer(&c) {
                        obs.on_event(Side::B, Event { time: c.time, unit }, &self.b.state);
                    }
                }
                other => {
                    self.pending = other;
                    self.a.advance_to(t_end);
                    self.b.advance_to(t_end);
                    return None;
                }
            }
        }
    }
}

/// State sampling times `burn_in + j * stride <= horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    pub horizon: f64,
    pub burn_in: f64,
    pub stride: f64,
}

impl SamplingPlan {
    /// Stride `theta / 4` and burn-in `50 theta`.
    pub fn with_defaults(theta: f64, horizon: f64) -> Self {
        Self { horizon, burn_in: 50.0 * theta, stride: theta / 4.0 }
    }

    pub fn samples(&self) -> Result<usize> {
        let ok = self.horizon.is_finite()
            && self.burn_in >= 0.0
            && self.burn_in < self.horizon
            && self.stride > 0.0
            && self.stride.is_finite();
        if !ok {
            return Err(Error::DegenerateGrid(format!(
                "need 0 <= burn_in < horizon and stride > 0, got {self:?}"
            )));
        }
        let n = libm::floor((self.horizon - self.burn_in) / self.stride) as usize + 1;
        if n < 2 {
            return Err(Error::DegenerateGrid("fewer than two sampling times".into()));
        }
        Ok(n)
    }
}

/// Visits the state at every sampling time of `plan`, starting from the
/// silent state.
pub fn sample_states(
    model: &Model,
    plan: &SamplingPlan,
    seed: u64,
    mut visit: impl FnMut(usize, &WindowState),
) -> Result<usize> {
    let n = plan.samples()?;
    let mut run = Run::new(Simulator::new(model, model.config().empty_state())?, seed, 0);
    for j in 0..n {
        run.run_until(plan.burn_in + j as f64 * plan.stride, |_| {});
        visit(j, run.simulator().state());
    }
    Ok(n)
}

/// Empirical stationary masses of the state-space components.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMassEstimate {
    /// Spike counts per unit (sources first) -> estimated probability.
    pub masses: BTreeMap<Vec<usize>, f64>,
    /// Batch-means standard error of each mass.
    pub stderr: BTreeMap<Vec<usize>, f64>,
    /// Pooled mass of components with more than [`COMPONENT_CAP`] spikes.
    pub overflow: f64,
    pub samples: usize,
    pub burn_in: f64,
}

impl ComponentMassEstimate {
    pub fn mass(&self, counts: &[usize]) -> f64 {
        self.masses.get(counts).copied().unwrap_or(0.0)
    }

    pub fn stderr_of(&self, counts: &[usize]) -> f64 {
        self.stderr.get(counts).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.masses.values().sum::<f64>() + self.overflow
    }

    /// Mass of all components whose total spike count is `k`.
    pub fn mass_of_total(&self, k: usize) -> f64 {
        self.masses.iter().filter(|(c, _)| c.iter().sum::<usize>() == k).map(|(_, m)| m).sum()
    }
}

pub fn estimate_component_masses(model: &Model, plan: &SamplingPlan, seed: u64) -> Result<ComponentMassEstimate> {
    let total = plan.samples()?;
    let layout = BatchLayout::new(total, DEFAULT_BATCHES);
    let mut counts: BTreeMap<Vec<usize>, Vec<u64>> = BTreeMap::new();
    let mut overflow = 0u64;
    sample_states(model, plan, seed, |j, s| {
        if s.total_count() > COMPONENT_CAP {
            overflow += 1;
        } else {
            counts.entry(s.counts()).or_insert_with(|| vec![0; layout.batches()])[layout.batch_of(j)] += 1;
        }
    })?;
    let sizes = layout.batch_sizes();
    let mut masses = BTreeMap::new();
    let mut stderr = BTreeMap::new();
    for (key, per_batch) in counts {
        let hits: u64 = per_batch.iter().sum();
        let sums: Vec<f64> = per_batch.iter().map(|&c| c as f64).collect();
        masses.insert(key.clone(), hits as f64 / total as f64);
        stderr.insert(key, batch_stderr(&sums, &sizes));
    }
    Ok(ComponentMassEstimate { masses, stderr, overflow: overflow as f64 / total as f64, samples: total, burn_in: plan.burn_in })
}

/// One histogram cell of a density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Bin index along each coordinate.
    pub bins: Vec<usize>,
    /// Lower corner of the cell.
    pub lower: Vec<f64>,
    /// Lebesgue measure of the cell inside the component.
    pub volume: f64,
    pub hits: u64,
    /// Estimate of the density component: `P(component, cell) / volume`.
    pub density: f64,
    pub stderr: f64,
    /// `P(cell | component)`.
    pub conditional_mass: f64,
}

/// Histogram estimate of the stationary density on one component of
/// dimension 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHistogram {
    pub component: Vec<usize>,
    pub bins: usize,
    pub theta: f64,
    pub cells: Vec<Cell>,
    pub samples: usize,
    pub component_samples: u64,
}

impl DensityHistogram {
    pub fn width(&self) -> f64 {
        self.theta / self.bins as f64
    }

    pub fn bin_of(&self, x: f64) -> usize {
        bin_index(x, self.width(), self.bins)
    }

    /// Cell holding `point` (component coordinates), if any.
    pub fn cell_at(&self, point: &[f64]) -> Option<&Cell> {
        let bins: Vec<usize> = point.iter().map(|&x| self.bin_of(x)).collect();
        self.cells.iter().find(|c| c.bins == bins)
    }
}

#[inline]
fn bin_index(x: f64, width: f64, bins: usize) -> usize {
    (libm::floor(x / width) as usize).min(bins - 1)
}

pub fn estimate_density(
    model: &Model,
    component: &[usize],
    bins: usize,
    plan: &SamplingPlan,
    seed: u64,
) -> Result<DensityHistogram> {
    let cfg = model.config();
    let units = cfg.num_sources() + cfg.num_neurons();
    let dim: usize = component.iter().sum();
    if component.len() != units {
        return Err(Error::InvalidConfig(format!("component has {} entries, network has {units} units", component.len())));
    }
    if !(1..=2).contains(&dim) || bins == 0 {
        return Err(Error::InvalidConfig(format!("density histograms need dimension 1 or 2 and bins > 0, got {dim}")));
    }
    let theta = cfg.theta();
    let width = theta / bins as f64;
    let ordered = component.iter().any(|&c| c == 2);
    let mut cells: Vec<Cell> = Vec::new();
    let mut index = BTreeMap::new();
    let mut push = |bins_v: Vec<usize>, volume: f64| {
        index.insert(bins_v.clone(), cells.len());
        let lower = bins_v.iter().map(|&b| b as f64 * width).collect();
        cells.push(Cell { bins: bins_v, lower, volume, hits: 0, density: 0.0, stderr: 0.0, conditional_mass: 0.0 });
    };
    if dim == 1 {
        for b in 0..bins {
            push(vec![b], width);
        }
    } else {
        for b0 in 0..bins {
            for b1 in 0..bins {
                if ordered && b1 > b0 {
                    continue;
                }
                // Diagonal cells of an ordered pair are cut in half by x1 > x2.
                let vol = if ordered && b0 == b1 { width * width / 2.0 } else { width * width };
                push(vec![b0, b1], vol);
            }
        }
    }
    let total = plan.samples()?;
    let layout = BatchLayout::new(total, DEFAULT_BATCHES);
    let mut per_batch = vec![0u64; cells.len() * layout.batches()];
    let mut component_hits = 0u64;
    sample_states(model, plan, seed, |j, s| {
        if (0..units).any(|u| s.slot_ages(u).len() != component[u]) {
            return;
        }
        component_hits += 1;
        let key: Vec<usize> = s.coordinates().iter().map(|&x| bin_index(x, width, bins)).collect();
        if let Some(&c) = index.get(&key) {
            per_batch[c * layout.batches() + layout.batch_of(j)] += 1;
        }
    })?;
    if component_hits == 0 {
        return Err(Error::EmptySample);
    }
    let sizes = layout.batch_sizes();
    for (c, cell) in cells.iter_mut().enumerate() {
        let row = &per_batch[c * layout.batches()..(c + 1) * layout.batches()];
        cell.hits = row.iter().sum();
        cell.density = cell.hits as f64 / (total as f64 * cell.volume);
        let sums: Vec<f64> = row.iter().map(|&k| k as f64).collect();
        cell.stderr = batch_stderr(&sums, &sizes) / cell.volume;
        cell.conditional_mass = cell.hits as f64 / component_hits as f64;
    }
    Ok(DensityHistogram { component: component.to_vec(), bins, theta, cells, samples: total, component_samples: component_hits })
}

/// Sampled stationary law: component masses plus density histograms of some
/// low-dimensional components.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDensity {
    pub masses: ComponentMassEstimate,
    pub histograms: Vec<DensityHistogram>,
}

impl SampledDensity {
    /// Estimate and standard error at a point, mass for the silent state.
    pub fn lookup(&self, counts: &[usize], ages: &[Vec<f64>]) -> Option<(f64, f64)> {
        if counts.iter().all(|&c| c == 0) {
            return Some((self.masses.mass(counts), self.masses.stderr_of(counts)));
        }
        let hist = self.histograms.iter().find(|h| h.component == counts)?;
        let point: Vec<f64> = ages.iter().flatten().copied().collect();
        hist.cell_at(&point).map(|c| (c.density, c.stderr))
    }
}

/// One-dimensional special case of [`estimate_density`].
pub fn estimate_density_1d(
    model: &Model,
    component: &[usize],
    bins: usize,
    plan: &SamplingPlan,
    seed: u64,
) -> Result<DensityHistogram> {
    if component.iter().sum::<usize>() != 1 {
        return Err(Error::InvalidConfig("selector must pick a one-dimensional component".into()));
    }
    estimate_density(model, component, bins, plan, seed)
}

/// Fraction of coupled replications that have not merged, on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeCurve {
    pub times: Vec<f64>,
    pub unmerged: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Merge time of each replication (`None`: not merged by the last grid time).
    pub merge_times: Vec<Option<f64>>,
}

/// Runs `replications` coupled pairs from `init_a` and `init_b`, each pair
/// sharing one candidate stream, and reports the unmerged fraction: an upper
/// bound on the total-variation distance between the two laws at each time.
pub fn ergodicity_diagnostic(
    model: &Model,
    init_a: &WindowState,
    init_b: &WindowState,
    times: &[f64],
    replications: usize,
    seed: u64,
) -> Result<MergeCurve> {
    if replications == 0 || times.is_empty() || times.windows(2).any(|w| w[0] > w[1]) || times[0] < 0.0 {
        return Err(Error::DegenerateGrid("need replications > 0 and an ordered, non-negative time grid".into()));
    }
    let t_max = *times.last().unwrap();
    let mut merge_times = Vec::with_capacity(replications);
    for r in 0..replications {
        let a = Simulator::new(model, init_a.clone())?;
        let b = Simulator::new(model, init_b.clone())?;
        let mut pair = CoupledRun::new(a, b, seed, r as u64)?;
        merge_times.push(pair.run(t_max, true, &mut ()));
    }
    let n = replications as f64;
    let unmerged: Vec<f64> = times
        .iter()
        .map(|&t| merge_times.iter().filter(|m| m.is_none_or(|m| m > t)).count() as f64 / n)
        .collect();
    let stderr = unmerged.iter().map(|&p| libm::sqrt(p * (1.0 - p) / n)).collect();
    Ok(MergeCurve { times: times.to_vec(), unmerged, stderr, merge_times })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::{Activation, Kernel, Refractory};
    use crate::network::NetworkBuilder;

    fn poisson(rate: f64) -> Model {
        Model::new(NetworkBuilder::new(1.0).source(rate).build().unwrap())
    }

    #[test]
    fn zero_horizon_is_empty() {
        let m = poisson(2.0);
        let log = simulate(&m, m.config().empty_state(), 0.0, 1).unwrap();
        assert!(log.events.is_empty());
    }

    #[test]
    fn same_seed_same_log() {
        let cfg = NetworkBuilder::new(1.0)
            .source(1.0)
            .neuron(Activation::Logistic { lower: 0.2, upper: 2.0, gain: 1.0, midpoint: 1.0 }, 0.0)
            .synapse(Unit::Source(0), 0, 1.0, Kernel::Bump { height: 1.0 })
            .synapse(Unit::Neuron(0), 0, 0.5, Kernel::Triangular { peak: 0.2, height: 1.0 })
            .build()
            .unwrap();
        let m = Model::new(cfg);
        let a = simulate(&m, m.config().empty_state(), 200.0, 9).unwrap();
        let b = simulate(&m, m.config().empty_state(), 200.0, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, m.config().empty_state(), 200.0, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn log_times_increase_within_horizon() {
        let m = poisson(3.0);
        let log = simulate(&m, m.config().empty_state(), 50.0, 4).unwrap();
        assert!(log.events.windows(2).all(|w| w[0].time < w[1].time));
        assert!(log.events.iter().all(|e| e.time >= 0.0 && e.time <= 50.0));
        assert!(log.events.iter().all(|e| e.kind() == EventKind::SourceSpike));
    }

    #[test]
    fn hard_refractory_spacing() {
        let delta = 0.3;
        let cfg = NetworkBuilder::new(1.0)
            .neuron(Activation::Constant(5.0), 0.0)
            .refractory(Refractory::Hard { delta })
            .build()
            .unwrap();
        let m = Model::new(cfg);
        let log = simulate(&m, m.config().empty_state(), 500.0, 2).unwrap();
        assert!(log.events.len() > 500);
        assert!(log.events.windows(2).all(|w| w[1].time - w[0].time > delta));
    }

    #[test]
    fn degenerate_plans_rejected() {
        let bad = SamplingPlan { horizon: 10.0, burn_in: 10.0, stride: 0.25 };
        assert!(matches!(bad.samples(), Err(Error::DegenerateGrid(_))));
        let bad = SamplingPlan { horizon: 10.0, burn_in: 1.0, stride: 0.0 };
        assert!(bad.samples().is_err());
    }

    #[test]
    fn masses_sum_to_one() {
        let m = poisson(1.5);
        let plan = SamplingPlan::with_defaults(1.0, 500.0);
        let est = estimate_component_masses(&m, &plan, 3).unwrap();
        assert!((est.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_inits_never_differ() {
        let m = poisson(1.0);
        let s = m.config().empty_state();
        let curve = ergodicity_diagnostic(&m, &s, &s, &[0.0, 1.0, 5.0], 20, 1).unwrap();
        assert!(curve.unmerged.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn empty_component_sample_is_an_error() {
        let m = poisson(0.01);
        let plan = SamplingPlan::with_defaults(1.0, 100.0);
        assert_eq!(estimate_density(&m, &[2], 4, &plan, 1), Err(Error::EmptySample));
    }
}
