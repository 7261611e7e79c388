//! Network configuration and the firing-rate formulas.

use alloc::{format, vec, vec::Vec};

use crate::func::{Activation, Kernel, Refractory};
use crate::plasticity::{PlasticState, PlasticityConfig};
use crate::state::{Unit, WindowState};
use crate::{Error, Result};

/// Synaptic weights: `source[i][k]` from source `k` and `neuron[i][j]` from
/// neuron `j`, both onto neuron `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub source: Vec<Vec<f64>>,
    pub neuron: Vec<Vec<f64>>,
}

impl Weights {
    pub fn zeros(sources: usize, neurons: usize) -> Self {
        Self { source: vec![vec![0.0; sources]; neurons], neuron: vec![vec![0.0; neurons]; neurons] }
    }
}

#[derive(Debug, Clone, Copy)]
struct SynapseSpec {
    pre: Unit,
    post: usize,
    weight: f64,
    kernel: Kernel,
}

/// Incremental construction of a [`NetworkConfig`].
#[derive(Debug, Clone)]
pub struct NetworkBuilder {
    theta: f64,
    source_rates: Vec<f64>,
    activations: Vec<Activation>,
    background: Vec<f64>,
    refractory: Refractory,
    synapses: Vec<SynapseSpec>,
}

impl NetworkBuilder {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            source_rates: Vec::new(),
            activations: Vec::new(),
            background: Vec::new(),
            refractory: Refractory::None,
            synapses: Vec::new(),
        }
    }

    /// Adds an external Poisson source with the given rate.
    pub fn source(mut self, rate: f64) -> Self {
        self.source_rates.push(rate);
        self
    }

    /// Adds a neuron with activation function and background influx.
    pub fn neuron(mut self, activation: Activation, background: f64) -> Self {
        self.activations.push(activation);
        self.background.push(background);
        self
    }

    pub fn refractory(mut self, refractory: Refractory) -> Self {
        self.refractory = refractory;
        self
    }

    /// Connects `pre` (a source or a neuron) to neuron `post`.
    pub fn synapse(mut self, pre: Unit, post: usize, weight: f64, kernel: Kernel) -> Self {
        self.synapses.push(SynapseSpec { pre, post, weight, kernel });
        self
    }

    pub fn build(self) -> Result<NetworkConfig> {
        let theta = self.theta;
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidConfig(format!("theta must be positive and finite, got {theta}")));
        }
        for (k, &rho) in self.source_rates.iter().enumerate() {
            if !(rho.is_finite() && rho >= 0.0) {
                return Err(Error::InvalidConfig(format!("source {k}: rate must be finite and >= 0, got {rho}")));
            }
        }
        for (i, a) in self.activations.iter().enumerate() {
            a.validate().map_err(|e| Error::InvalidConfig(format!("neuron {i}: {e}")))?;
            if !self.background[i].is_finite() {
                return Err(Error::InvalidConfig(format!("neuron {i}: background must be finite")));
            }
        }
        self.refractory.validate(theta)?;
        let (m, n) = (self.source_rates.len(), self.activations.len());
        let mut weights = Weights::zeros(m, n);
        let mut source_kernels = vec![vec![Kernel::Zero; m]; n];
        let mut neuron_kernels = vec![vec![Kernel::Zero; n]; n];
        for s in &self.synapses {
            if s.post >= n {
                return Err(Error::InvalidConfig(format!("synapse onto missing neuron {}", s.post)));
            }
            if !s.weight.is_finite() {
                return Err(Error::InvalidConfig(format!("synapse {} -> neuron {}: weight not finite", s.pre, s.post)));
            }
            s.kernel.validate(theta)?;
            match s.pre {
                Unit::Source(k) if k < m => {
                    weights.source[s.post][k] = s.weight;
                    source_kernels[s.post][k] = s.kernel;
                }
                Unit::Neuron(j) if j < n => {
                    weights.neuron[s.post][j] = s.weight;
                    neuron_kernels[s.post][j] = s.kernel;
                }
                pre => return Err(Error::InvalidConfig(format!("synapse from missing {pre}"))),
            }
        }
        Ok(NetworkConfig {
            theta,
            source_rates: self.source_rates,
            activations: self.activations,
            background: self.background,
            refractory: self.refractory,
            source_kernels,
            neuron_kernels,
            weights,
        })
    }
}

/// Model I network: sources, neurons, kernels, static weights and the
/// shared refractory function.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    theta: f64,
    source_rates: Vec<f64>,
    activations: Vec<Activation>,
    background: Vec<f64>,
    refractory: Refractory,
    source_kernels: Vec<Vec<Kernel>>,
    neuron_kernels: Vec<Vec<Kernel>>,
    weights: Weights,
}

impl NetworkConfig {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn num_sources(&self) -> usize {
        self.source_rates.len()
    }

    pub fn num_neurons(&self) -> usize {
        self.activations.len()
    }

    pub fn source_rates(&self) -> &[f64] {
        &self.source_rates
    }

    pub fn activation(&self, i: usize) -> &Activation {
        &self.activations[i]
    }

    pub fn background(&self, i: usize) -> f64 {
        self.background[i]
    }

    pub fn refractory(&self) -> Refractory {
        self.refractory
    }

    pub fn source_kernel(&self, i: usize, k: usize) -> Kernel {
        self.source_kernels[i][k]
    }

    pub fn neuron_kernel(&self, i: usize, j: usize) -> Kernel {
        self.neuron_kernels[i][j]
    }

    /// The static (Model I) weights.
    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Upper activation bounds, one per neuron.
    pub fn rate_bounds(&self) -> Vec<f64> {
        self.activations.iter().map(Activation::upper).collect()
    }

    /// Sum of the source rates.
    pub fn total_source_rate(&self) -> f64 {
        self.source_rates.iter().sum()
    }

    /// Sum of the neurons' upper rate bounds.
    pub fn total_rate_bound(&self) -> f64 {
        self.activations.iter().map(Activation::upper).sum()
    }

    /// Largest single rate among sources and neuron bounds.
    pub fn max_rate(&self) -> f64 {
        self.source_rates.iter().copied().chain(self.activations.iter().map(Activation::upper)).fold(0.0, f64::max)
    }

    /// The silent state of this network.
    pub fn empty_state(&self) -> WindowState {
        WindowState::empty(self.theta, self.num_sources(), self.num_neurons())
    }

    pub fn check_state(&self, state: &WindowState) -> Result<()> {
        if state.num_sources() != self.num_sources()
            || state.num_neurons() != self.num_neurons()
            || state.theta() != self.theta
        {
            return Err(Error::InvalidState(format!(
                "state shape ({} sources, {} neurons, theta {}) does not match the network",
                state.num_sources(),
                state.num_neurons(),
                state.theta()
            )));
        }
        Ok(())
    }

    fn check_neuron(&self, i: usize) -> Result<()> {
        if i >= self.num_neurons() {
            return Err(Error::UnitOutOfRange { index: i, len: self.num_neurons() });
        }
        Ok(())
    }

    /// Total synaptic influx into neuron `i`: background plus weighted kernel
    /// responses to every spike in the window.
    pub fn synaptic_influx(&self, state: &WindowState, weights: &Weights, i: usize) -> Result<f64> {
        self.check_state(state)?;
        self.check_neuron(i)?;
        Ok(self.influx(state, weights, i))
    }

    /// Instantaneous intensity of neuron `i` without truncation.
    pub fn firing_rate(&self, state: &WindowState, weights: &Weights, i: usize) -> Result<f64> {
        self.check_state(state)?;
        self.check_neuron(i)?;
        Ok(self.rate(state, weights, i))
    }

    #[inline]
    pub(crate) fn influx(&self, state: &WindowState, weights: &Weights, i: usize) -> f64 {
        let theta = self.theta;
        let mut total = self.background[i];
        for (k, kernel) in self.source_kernels[i].iter().enumerate() {
            let w = weights.source[i][k];
            if w == 0.0 || kernel.is_zero() {
                continue;
            }
            let s: f64 = state.source_ages(k).iter().map(|&x| kernel.eval(theta - x, theta)).sum();
            total += w * s;
        }
        for (j, kernel) in self.neuron_kernels[i].iter().enumerate() {
            let w = weights.neuron[i][j];
            if w == 0.0 || kernel.is_zero() {
                continue;
            }
            let s: f64 = state.neuron_ages(j).iter().map(|&x| kernel.eval(theta - x, theta)).sum();
            total += w * s;
        }
        total
    }

    #[inline]
    pub(crate) fn rate(&self, state: &WindowState, weights: &Weights, i: usize) -> f64 {
        // With no own spike in the window the refractory factor is r(theta) = 1.
        let refr = match state.neuron_ages(i).first() {
            Some(&x) => self.refractory.eval(self.theta - x),
            None => 1.0,
        };
        if refr == 0.0 {
            return 0.0;
        }
        self.activations[i].eval(self.influx(state, weights, i)) * refr
    }
}

/// Spike-count caps of the truncated dynamics: a unit holding `n` spikes in
/// its window cannot fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Truncation {
    pub neurons: Option<usize>,
    pub sources: Option<usize>,
}

impl Truncation {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn neurons(n: usize) -> Self {
        Self { neurons: Some(n), sources: None }
    }
}

/// A network together with optional plasticity and truncation: everything
/// needed to evaluate intensities along a trajectory.
#[derive(Debug, Clone)]
pub struct Model {
    cfg: NetworkConfig,
    plasticity: Option<PlasticityConfig>,
    truncation: Truncation,
    /// Right ends of the mark intervals, sources first, then neurons.
    partition: Vec<f64>,
}

impl Model {
    pub fn new(cfg: NetworkConfig) -> Self {
        let mut partition = Vec::with_capacity(cfg.num_sources() + cfg.num_neurons());
        let mut acc = 0.0;
        for &rho in cfg.source_rates() {
            acc += rho;
            partition.push(acc);
        }
        for bound in cfg.rate_bounds() {
            acc += bound;
            partition.push(acc);
        }
        Self { cfg, plasticity: None, truncation: Truncation::none(), partition }
    }

    pub fn with_plasticity(mut self, plasticity: PlasticityConfig) -> Result<Self> {
        plasticity.validate(&self.cfg)?;
        self.plasticity = Some(plasticity);
        Ok(self)
    }

    pub fn with_truncation(mut self, truncation: Truncation) -> Result<Self> {
        if truncation.neurons == Some(0) || truncation.sources == Some(0) {
            return Err(Error::InvalidConfig("truncation level must be at least 1".into()));
        }
        self.truncation = truncation;
        Ok(self)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn plasticity(&self) -> Option<&PlasticityConfig> {
        self.plasticity.as_ref()
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    /// Rate of the dominating candidate stream: `sum rho_k + sum bound_i`.
    pub fn total_rate(&self) -> f64 {
        self.partition.last().copied().unwrap_or(0.0)
    }

    /// Weights at the start of a run: static ones, or those of the initial
    /// plastic levels.
    pub fn initial_plastic_state(&self) -> Option<PlasticState> {
        self.plasticity.as_ref().map(PlasticityConfig::initial_state)
    }

    pub fn weights_for(&self, plastic: Option<&PlasticState>) -> Weights {
        match (self.plasticity.as_ref(), plastic) {
            (Some(p), Some(state)) => p.weights(&self.cfg, state),
            _ => self.cfg.weights.clone(),
        }
    }

    /// The unit owning mark `y` in `[0, total_rate)` and the offset of `y`
    /// inside that unit's interval.
    #[inline]
    pub(crate) fn locate(&self, y: f64) -> Option<(usize, f64)> {
        let slot = self.partition.partition_point(|&end| end <= y);
        if slot >= self.partition.len() {
            return None;
        }
        let start = if slot == 0 { 0.0 } else { self.partition[slot - 1] };
        Some((slot, y - start))
    }

    /// Intensity of neuron `i` including truncation.
    #[inline]
    pub fn neuron_rate(&self, state: &WindowState, weights: &Weights, i: usize) -> f64 {
        if let Some(n) = self.truncation.neurons {
            if state.neuron_ages(i).len() >= n {
                return 0.0;
            }
        }
        self.cfg.rate(state, weights, i)
    }

    /// Intensity of source `k` including truncation.
    #[inline]
    pub fn source_rate(&self, state: &WindowState, k: usize) -> f64 {
        if let Some(n) = self.truncation.sources {
            if state.source_ages(k).len() >= n {
                return 0.0;
            }
        }
        self.cfg.source_rates[k]
    }

    /// Intensity of the unit at flat `slot`.
    #[inline]
    pub fn slot_rate(&self, state: &WindowState, weights: &Weights, slot: usize) -> f64 {
        let m = self.cfg.num_sources();
        if slot < m {
            self.source_rate(state, slot)
        } else {
            self.neuron_rate(state, weights, slot - m)
        }
    }

    /// Sum of all intensities at `state`.
    pub fn total_intensity(&self, state: &WindowState, weights: &Weights) -> f64 {
        (0..self.partition.len()).map(|s| self.slot_rate(state, weights, s)).sum()
    }
}
