//! Stationary distributions of bounded-memory networks of non-linear Poisson
//! neurons.
//!
//! A network state records, for every external source and every neuron, the
//! times until its recent spikes leave the memory window `(t - theta, t]`.
//! Four independent routes to the stationary law live here:
//!
//! * [`sim`]: exact simulation by thinning against the constant rate bounds,
//!   plus ergodic-average estimators;
//! * [`trunc`]: the truncated dynamics, the shared-stream coupling with the
//!   full dynamics and the closed-form approximation/density bounds;
//! * [`chain`]: the discrete grid Markov chain and its stationary vector;
//! * [`analytic`]: closed-form densities for the single feedback neuron cases
//!   and residuals of the stationary density equations.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod chain;
mod error;
pub mod func;
pub mod network;
pub mod plasticity;
pub mod rng;
pub mod sim;
pub mod state;
pub mod stats;
pub mod trunc;

pub use error::{Error, Result};
pub use func::{Activation, Kernel, Refractory};
pub use network::{Model, NetworkBuilder, NetworkConfig, Truncation, Weights};
pub use plasticity::{LagRule, PlasticState, PlasticSynapse, PlasticityConfig};
pub use state::{Unit, WindowState};
