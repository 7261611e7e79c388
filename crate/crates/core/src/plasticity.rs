//! Discrete-level spike-timing dependent plasticity (Model II).
//!
//! Each plastic synapse carries an ordered set of weight levels and an explicit
//! lookup `(current level, lag interval) -> new level`. The lag is always
//! `t_pre - t_post`: negative when the post-synaptic spike follows the
//! pre-synaptic one.

use alloc::{format, vec::Vec};

use crate::network::{NetworkConfig, Weights};
use crate::state::{Unit, WindowState};
use crate::{Error, Result};

/// `lag in (lower, upper]` moves a synapse at level `from` to level `to`.
/// Levels are 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagRule {
    pub from: usize,
    pub lower: f64,
    pub upper: f64,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlasticSynapse {
    pub pre: Unit,
    pub post: usize,
    /// Weight values `g(1) <= ... <= g(L)`.
    pub levels: Vec<f64>,
    pub initial: usize,
    pub rules: Vec<LagRule>,
}

impl PlasticSynapse {
    fn new_level(&self, level: usize, lag: f64) -> usize {
        self.rules
            .iter()
            .find(|r| r.from == level && lag > r.lower && lag <= r.upper)
            .map_or(level, |r| r.to)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlasticityConfig {
    pub synapses: Vec<PlasticSynapse>,
    /// Learning window: every rule interval lies inside `[-window, window]`.
    pub window: f64,
}

/// Current level of every plastic synapse, aligned with
/// [`PlasticityConfig::synapses`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlasticState {
    levels: Vec<usize>,
}

impl PlasticState {
    pub fn levels(&self) -> &[usize] {
        &self.levels
    }
}

impl PlasticityConfig {
    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        let theta = cfg.theta();
        if !(self.window > 0.0 && self.window < theta) {
            return Err(Error::InvalidConfig(format!(
                "learning window {} must lie in (0, theta = {theta})",
                self.window
            )));
        }
        for (idx, s) in self.synapses.iter().enumerate() {
            let name = format!("plastic synapse {idx} ({} -> neuron {})", s.pre, s.post);
            let pre_ok = match s.pre {
                Unit::Source(k) => k < cfg.num_sources(),
                Unit::Neuron(j) => j < cfg.num_neurons() && j != s.post,
            };
            if !pre_ok || s.post >= cfg.num_neurons() {
                return Err(Error::InvalidConfig(format!("{name}: endpoints missing or self-connection")));
            }
            if self.synapses[..idx].iter().any(|o| o.pre == s.pre && o.post == s.post) {
                return Err(Error::InvalidConfig(format!("{name}: listed twice")));
            }
            let l = s.levels.len();
            if l == 0 || s.levels.windows(2).any(|w| w[0] > w[1]) || s.levels.iter().any(|g| !g.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name}: levels must be finite and non-decreasing")));
            }
            if !(1..=l).contains(&s.initial) {
                return Err(Error::InvalidConfig(format!("{name}: initial level {} not in 1..={l}", s.initial)));
            }
            for (ri, r) in s.rules.iter().enumerate() {
                if !(1..=l).contains(&r.from) || !(1..=l).contains(&r.to) {
                    return Err(Error::InvalidConfig(format!("{name}: rule {ri} level outside 1..={l}")));
                }
                if !(r.lower < r.upper && r.lower >= -self.window && r.upper <= self.window) {
                    return Err(Error::InvalidConfig(format!(
                        "{name}: rule {ri} interval ({}, {}] not inside the learning window",
                        r.lower, r.upper
                    )));
                }
                let overlaps = s.rules[..ri]
                    .iter()
                    .any(|o| o.from == r.from && o.lower < r.upper && r.lower < o.upper);
                if overlaps {
                    return Err(Error::InvalidConfig(format!("{name}: rule {ri} overlaps an earlier rule")));
                }
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> PlasticState {
        PlasticState { levels: self.synapses.iter().map(|s| s.initial).collect() }
    }

    /// Static weights with every plastic synapse replaced by its current level value.
    pub fn weights(&self, cfg: &NetworkConfig, state: &PlasticState) -> Weights {
        let mut w = cfg.weights().clone();
        for (s, &level) in self.synapses.iter().zip(&state.levels) {
            let g = s.levels[level - 1];
            match s.pre {
                Unit::Source(k) => w.source[s.post][k] = g,
                Unit::Neuron(j) => w.neuron[s.post][j] = g,
            }
        }
        w
    }

    /// Levels after `unit` fires. `state` must be the window state just
    /// before the spike is recorded.
    pub fn stdp_update(&self, plastic: &PlasticState, state: &WindowState, unit: Unit) -> PlasticState {
        let mut next = plastic.clone();
        self.apply(&mut next, state, unit);
        next
    }

    pub(crate) fn apply(&self, plastic: &mut PlasticState, state: &WindowState, unit: Unit) {
        let theta = state.theta();
        for (s, level) in self.synapses.iter().zip(plastic.levels.iter_mut()) {
            let lag = if unit == Unit::Neuron(s.post) {
                // Post fires now; the pre spike happened theta - x ago.
                state.ages(s.pre).ok().and_then(|a| a.first().copied()).map(|x| x - theta)
            } else if unit == s.pre {
                state.neuron_ages(s.post).first().map(|&x| theta - x)
            } else {
                None
            };
            if let Some(lag) = lag {
                *level = s.new_level(*level, lag);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::{Activation, Kernel};
    use crate::network::NetworkBuilder;
    use alloc::vec;

    fn two_neurons() -> NetworkConfig {
        NetworkBuilder::new(1.0)
            .source(1.0)
            .neuron(Activation::Constant(1.0), 0.0)
            .neuron(Activation::Constant(1.0), 0.0)
            .synapse(Unit::Neuron(0), 1, 0.5, Kernel::Constant { height: 1.0 })
            .build()
            .unwrap()
    }

    fn potentiation() -> PlasticityConfig {
        PlasticityConfig {
            window: 0.2,
            synapses: vec![
                PlasticSynapse {
                    pre: Unit::Neuron(0),
                    post: 1,
                    levels: vec![0.5, 1.0],
                    initial: 1,
                    rules: vec![
                        LagRule { from: 1, lower: -0.1, upper: 0.0, to: 2 },
                        LagRule { from: 2, lower: 0.0, upper: 0.1, to: 1 },
                    ],
                },
                PlasticSynapse { pre: Unit::Source(0), post: 0, levels: vec![0.0, 1.0], initial: 2, rules: vec![] },
            ],
        }
    }

    #[test]
    fn post_after_pre_potentiates() {
        let cfg = two_neurons();
        let p = potentiation();
        p.validate(&cfg).unwrap();
        // Pre spiked 0.05 ago; post fires now.
        let s = WindowState::from_ages(1.0, vec![vec![]], vec![vec![0.95], vec![]]).unwrap();
        let next = p.stdp_update(&p.initial_state(), &s, Unit::Neuron(1));
        assert_eq!(next.levels(), &[2, 2]);
        assert_eq!(p.weights(&cfg, &next).neuron[1][0], 1.0);
    }

    #[test]
    fn missing_counterpart_leaves_level() {
        let p = potentiation();
        let s = WindowState::from_ages(1.0, vec![vec![]], vec![vec![], vec![]]).unwrap();
        assert_eq!(p.stdp_update(&p.initial_state(), &s, Unit::Neuron(1)), p.initial_state());
    }

    #[test]
    fn lag_outside_rules_leaves_level() {
        let p = potentiation();
        let s = WindowState::from_ages(1.0, vec![vec![]], vec![vec![0.5], vec![]]).unwrap();
        assert_eq!(p.stdp_update(&p.initial_state(), &s, Unit::Neuron(1)), p.initial_state());
    }

    #[test]
    fn unrelated_spike_leaves_all_levels() {
        let p = potentiation();
        let s = WindowState::from_ages(1.0, vec![vec![0.99]], vec![vec![0.95], vec![0.97]]).unwrap();
        // Source 0 is only connected to neuron 0, which has a spike 0.05 ago,
        // but that synapse has no rules; synapse 0 is not incident.
        assert_eq!(p.stdp_update(&p.initial_state(), &s, Unit::Source(0)), p.initial_state());
    }

    #[test]
    fn pre_after_post_depresses() {
        let p = potentiation();
        let start = PlasticState { levels: vec![2, 2] };
        // Post spiked 0.05 ago, pre fires now: lag = +0.05.
        let s = WindowState::from_ages(1.0, vec![vec![]], vec![vec![], vec![0.95]]).unwrap();
        assert_eq!(p.stdp_update(&start, &s, Unit::Neuron(0)).levels(), &[1, 2]);
    }

    #[test]
    fn validation_catches_bad_rules() {
        let cfg = two_neurons();
        let mut p = potentiation();
        p.synapses[0].rules.push(LagRule { from: 1, lower: -0.05, upper: 0.05, to: 2 });
        assert!(p.validate(&cfg).is_err());
        let mut p = potentiation();
        p.synapses[0].rules[0].to = 3;
        assert!(p.validate(&cfg).is_err());
        let mut p = potentiation();
        p.window = 1.0;
        assert!(p.validate(&cfg).is_err());
        let mut p = potentiation();
        p.synapses[0].pre = Unit::Neuron(1);
        assert!(p.validate(&cfg).is_err());
    }
}
