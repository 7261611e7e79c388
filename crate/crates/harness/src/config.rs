//! Experiment configuration: a TOML document with an explicit schema version.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spikewin_core::{
    Activation, Kernel, LagRule, Model, NetworkBuilder, NetworkConfig, PlasticSynapse, PlasticityConfig, Refractory,
    Truncation, Unit,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema violation: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{field}: grid step precondition h*rate <= 1 violated for {unit} (h*rate = {product:.4} at q = {q}); remedy: use q >= {min_q}")]
    StepPrecondition { field: String, unit: String, product: f64, q: usize, min_q: usize },
}

fn invalid(field: impl Into<String>, message: impl ToString) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub network: NetworkSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plasticity: Option<PlasticitySpec>,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub couple: CoupleSpec,
    #[serde(default)]
    pub chain: ChainSpec,
    #[serde(default)]
    pub analytic: AnalyticSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub neurons: Vec<NeuronSpec>,
    #[serde(default)]
    pub synapses: Vec<SynapseSpec>,
    #[serde(default)]
    pub refractory: RefractorySpec,
    #[serde(default)]
    pub truncation: TruncationSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronSpec {
    pub activation: ActivationSpec,
    #[serde(default)]
    pub background: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActivationSpec {
    Constant { value: f64 },
    LinearClipped { slope: f64, offset: f64, lower: f64, upper: f64 },
    Logistic { lower: f64, upper: f64, gain: f64, midpoint: f64 },
}

impl From<ActivationSpec> for Activation {
    fn from(a: ActivationSpec) -> Self {
        match a {
            ActivationSpec::Constant { value } => Activation::Constant(value),
            ActivationSpec::LinearClipped { slope, offset, lower, upper } => {
                Activation::LinearClipped { slope, offset, lower, upper }
            }
            ActivationSpec::Logistic { lower, upper, gain, midpoint } => {
                Activation::Logistic { lower, upper, gain, midpoint }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Zero,
    Constant { height: f64 },
    Linear { slope: f64 },
    Triangular { peak: f64, height: f64 },
    Bump { height: f64 },
}

impl From<KernelSpec> for Kernel {
    fn from(k: KernelSpec) -> Self {
        match k {
            KernelSpec::Zero => Kernel::Zero,
            KernelSpec::Constant { height } => Kernel::Constant { height },
            KernelSpec::Linear { slope } => Kernel::Linear { slope },
            KernelSpec::Triangular { peak, height } => Kernel::Triangular { peak, height },
            KernelSpec::Bump { height } => Kernel::Bump { height },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RefractorySpec {
    #[default]
    None,
    Hard { delta: f64 },
    Ramp { delta: f64 },
}

impl From<RefractorySpec> for Refractory {
    fn from(r: RefractorySpec) -> Self {
        match r {
            RefractorySpec::None => Refractory::None,
            RefractorySpec::Hard { delta } => Refractory::Hard { delta },
            RefractorySpec::Ramp { delta } => Refractory::Ramp { delta },
        }
    }
}

/// `{ source = k }` or `{ neuron = i }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitRef {
    Source(usize),
    Neuron(usize),
}

impl From<UnitRef> for Unit {
    fn from(u: UnitRef) -> Self {
        match u {
            UnitRef::Source(k) => Unit::Source(k),
            UnitRef::Neuron(i) => Unit::Neuron(i),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynapseSpec {
    pub pre: UnitRef,
    pub post: usize,
    pub weight: f64,
    pub kernel: KernelSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neurons: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlasticitySpec {
    pub window: f64,
    pub synapses: Vec<PlasticSynapseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlasticSynapseSpec {
    pub pre: UnitRef,
    pub post: usize,
    pub levels: Vec<f64>,
    pub initial: usize,
    #[serde(default)]
    pub rules: Vec<LagRuleSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagRuleSpec {
    pub from: usize,
    pub lower: f64,
    pub upper: f64,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub seed: u64,
    pub horizon: f64,
    /// Defaults to `50 theta`.
    pub burn_in: Option<f64>,
    /// Defaults to `theta / 4`.
    pub stride: Option<f64>,
    /// Bins per coordinate of the density histograms.
    pub bins: usize,
    /// Horizon of the event log artifact.
    pub log_horizon: f64,
    pub replications: usize,
    /// Last time of the merge curve, in window lengths.
    pub merge_windows: usize,
    /// Window spikes per unit in the crowded start of the merge diagnostic.
    pub crowded_start: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            horizon: 10_000.0,
            burn_in: None,
            stride: None,
            bins: 20,
            log_horizon: 100.0,
            replications: 400,
            merge_windows: 40,
            crowded_start: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoupleSpec {
    pub levels: Vec<usize>,
    pub blocks: usize,
}

impl Default for CoupleSpec {
    fn default() -> Self {
        Self { levels: vec![2, 3, 4, 5], blocks: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSpec {
    pub q: Vec<usize>,
    pub state_cap: usize,
    /// Largest chain also solved densely as a cross-check.
    pub dense_limit: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self { q: vec![4, 8, 16], state_cap: 200_000, dense_limit: 2000, tolerance: 1e-13, max_iterations: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticSpec {
    pub step: f64,
    pub residual_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shot_noise: Option<ShotNoiseSpec>,
}

impl Default for AnalyticSpec {
    fn default() -> Self {
        Self { step: 1e-3, residual_points: 50, shot_noise: None }
    }
}

/// The jump process with exponentially decaying memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotNoiseSpec {
    pub gamma: ActivationSpec,
    #[serde(default = "twelve")]
    pub n_max: usize,
    #[serde(default = "samples_default")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

fn one() -> f64 {
    1.0
}

fn twelve() -> usize {
    12
}

fn samples_default() -> usize {
    100_000
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.fill_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    /// The effective configuration, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// SHA-256 of the effective configuration.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    fn fill_defaults(&mut self) {
        let theta = self.network.theta;
        self.run.burn_in.get_or_insert(50.0 * theta);
        self.run.stride.get_or_insert(theta / 4.0);
    }

    pub fn burn_in(&self) -> f64 {
        self.run.burn_in.unwrap_or(50.0 * self.network.theta)
    }

    pub fn stride(&self) -> f64 {
        self.run.stride.unwrap_or(self.network.theta / 4.0)
    }

    pub fn network_config(&self) -> Result<NetworkConfig, ConfigError> {
        let n = &self.network;
        let mut b = NetworkBuilder::new(n.theta);
        for s in &n.sources {
            b = b.source(s.rate);
        }
        for nr in &n.neurons {
            b = b.neuron(nr.activation.into(), nr.background);
        }
        b = b.refractory(n.refractory.into());
        for s in &n.synapses {
            b = b.synapse(s.pre.into(), s.post, s.weight, s.kernel.into());
        }
        b.build().map_err(|e| invalid("network", e))
    }

    pub fn model(&self) -> Result<Model, ConfigError> {
        let mut m = Model::new(self.network_config()?)
            .with_truncation(Truncation { neurons: self.network.truncation.neurons, sources: self.network.truncation.sources })
            .map_err(|e| invalid("network.truncation", e))?;
        if let Some(p) = &self.plasticity {
            let pc = PlasticityConfig {
                window: p.window,
                synapses: p
                    .synapses
                    .iter()
                    .map(|s| PlasticSynapse {
                        pre: s.pre.into(),
                        post: s.post,
                        levels: s.levels.clone(),
                        initial: s.initial,
                        rules: s.rules.iter().map(|r| LagRule { from: r.from, lower: r.lower, upper: r.upper, to: r.to }).collect(),
                    })
                    .collect(),
            };
            m = m.with_plasticity(pc).map_err(|e| invalid("plasticity", e))?;
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid("schema_version", format!("expected {SCHEMA_VERSION}, got {}", self.schema_version)));
        }
        let net = self.network_config()?;
        self.model()?;
        let r = &self.run;
        let (burn_in, stride) = (self.burn_in(), self.stride());
        if !(r.horizon.is_finite() && burn_in >= 0.0 && burn_in < r.horizon) {
            return Err(invalid("run.burn_in", format!("need 0 <= burn_in < horizon, got {burn_in} and {}", r.horizon)));
        }
        if !(stride > 0.0 && stride.is_finite()) {
            return Err(invalid("run.stride", format!("must be positive, got {stride}")));
        }
        if r.bins == 0 || r.replications == 0 || r.merge_windows == 0 {
            return Err(invalid("run", "bins, replications and merge_windows must be positive"));
        }
        if !(r.log_horizon >= 0.0 && r.log_horizon.is_finite()) {
            return Err(invalid("run.log_horizon", "must be finite and non-negative"));
        }
        if self.couple.levels.contains(&0) || self.couple.blocks == 0 {
            return Err(invalid("couple", "levels must be >= 1 and blocks > 0"));
        }
        if self.chain.q.iter().any(|&q| q == 0 || q > spikewin_core::chain::MAX_Q) {
            return Err(invalid("chain.q", format!("each q must be in 1..={}", spikewin_core::chain::MAX_Q)));
        }
        let bounds: Vec<(String, f64)> = net
            .source_rates()
            .iter()
            .enumerate()
            .map(|(k, &r)| (format!("source {k}"), r))
            .chain(net.rate_bounds().into_iter().enumerate().map(|(i, r)| (format!("neuron {i}"), r)))
            .collect();
        for (j, &q) in self.chain.q.iter().enumerate() {
            let h = net.theta() / q as f64;
            for (unit, rate) in &bounds {
                if h * rate > 1.0 {
                    return Err(ConfigError::StepPrecondition {
                        field: format!("chain.q[{j}]"),
                        unit: unit.clone(),
                        product: h * rate,
                        q,
                        min_q: (net.theta() * rate).ceil() as usize,
                    });
                }
            }
        }
        if !(self.analytic.step > 0.0 && self.analytic.step <= 0.25) || self.analytic.residual_points == 0 {
            return Err(invalid("analytic", "step must be in (0, 0.25] and residual_points positive"));
        }
        if let Some(s) = &self.analytic.shot_noise {
            let a: Activation = s.gamma.into();
            a.validate().map_err(|e| invalid("analytic.shot_noise.gamma", e))?;
            if s.samples < 2 || s.n_max == 0 {
                return Err(invalid("analytic.shot_noise", "need samples >= 2 and n_max >= 1"));
            }
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    ExperimentConfig::from_toml(&text)
}

pub fn save_config(cfg: &ExperimentConfig, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, cfg.to_toml())
}
