//! Stationary law of a single feedback neuron that can hold at most two
//! spikes in its window (window length 1).
//!
//! With `R0` the rate in the silent state and `R(t)` the rate when the only
//! window spike leaves in time `t`, the densities are
//! `psi_1(t) = R0 psi_0 phi(t)` with `phi(t) = exp(int_0^t R(y) - R(1-y) dy)`
//! and `psi_2(t + y, t) = R(1-y) psi_1(1-y)`. The atom `psi_0` is fixed by the
//! total mass.

use alloc::boxed::Box;
use alloc::{format, vec::Vec};

use super::quad::{simpson_panel, simpson_samples};
use super::unit_steps;
use crate::network::Model;
use crate::state::WindowState;
use crate::{Error, Result};

type RateFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tabulated Example 1 density.
pub struct Example1Density {
    step: f64,
    rate_empty: f64,
    rate_one: RateFn,
    psi0: f64,
    /// `ln phi` at the grid nodes.
    log_phi: Vec<f64>,
    mass1: f64,
    mass2: f64,
}

impl core::fmt::Debug for Example1Density {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Example1Density")
            .field("step", &self.step)
            .field("rate_empty", &self.rate_empty)
            .field("psi0", &self.psi0)
            .field("mass1", &self.mass1)
            .field("mass2", &self.mass2)
            .finish_non_exhaustive()
    }
}

/// Builds the density for silent-state rate `rate_empty` and one-spike rate
/// `rate_one(t)`, on a grid of the given step.
pub fn example1_density<F>(rate_empty: f64, rate_one: F, step: f64) -> Result<Example1Density>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let n = unit_steps(step)?;
    if !(rate_empty.is_finite() && rate_empty >= 0.0) {
        return Err(Error::NonFiniteRate(format!("silent-state rate {rate_empty}")));
    }
    let h = 1.0 / n as f64;
    let g = |y: f64| rate_one(y) - rate_one(1.0 - y);
    for k in 0..=2 * n {
        let r = rate_one(k as f64 * h / 2.0);
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::NonFiniteRate(format!("one-spike rate {r} at {}", k as f64 * h / 2.0)));
        }
    }
    let mut log_phi = Vec::with_capacity(n + 1);
    log_phi.push(0.0);
    let mut acc = 0.0;
    let mut ga = g(0.0);
    for j in 0..n {
        let a = j as f64 * h;
        let gb = g(a + h);
        acc += simpson_panel(ga, g(a + 0.5 * h), gb, h);
        log_phi.push(acc);
        ga = gb;
    }
    let phi: Vec<f64> = log_phi.iter().map(|&l| libm::exp(l)).collect();
    let int_phi = simpson_samples(&phi, h);
    let weighted: Vec<f64> = phi.iter().enumerate().map(|(j, &p)| j as f64 * h * rate_one(j as f64 * h) * p).collect();
    let int_weighted = simpson_samples(&weighted, h);
    let psi0 = 1.0 / (1.0 + rate_empty * int_phi + rate_empty * int_weighted);
    Ok(Example1Density {
        step: h,
        rate_empty,
        rate_one: Box::new(rate_one),
        psi0,
        log_phi,
        mass1: rate_empty * psi0 * int_phi,
        mass2: rate_empty * psi0 * int_weighted,
    })
}

impl Example1Density {
    /// Reads the rates off a single-neuron network with window length 1 whose
    /// rate vanishes once two spikes are in the window.
    pub fn from_model(model: &Model, step: f64) -> Result<Self> {
        let cfg = model.config();
        if cfg.num_sources() != 0 || cfg.num_neurons() != 1 || (cfg.theta() - 1.0).abs() > 0.0 {
            return Err(Error::InvalidConfig("needs one neuron, no sources and window length 1".into()));
        }
        if model.plasticity().is_some() {
            return Err(Error::InvalidConfig("needs static weights".into()));
        }
        let weights = model.weights_for(None);
        let capped = model.truncation().neurons.is_some_and(|n| n <= 2);
        if !capped {
            let n = unit_steps(step)?.min(200);
            for a in 1..=n {
                for b in 1..a {
                    let s = WindowState::from_ages(1.0, Vec::new(), alloc::vec![alloc::vec![a as f64 / n as f64, b as f64 / n as f64]])?;
                    let r = model.neuron_rate(&s, &weights, 0);
                    if r != 0.0 {
                        return Err(Error::Support(format!("rate {r} on a two-spike state; the neuron must be silent there")));
                    }
                }
            }
        }
        let rate_empty = model.neuron_rate(&cfg.empty_state(), &weights, 0);
        let m = model.clone();
        let rate_one = move |t: f64| {
            // Ages live in (0, 1]; the rate extends continuously to 0.
            let t = t.clamp(f64::MIN_POSITIVE, 1.0);
            let s = WindowState::from_ages(1.0, Vec::new(), alloc::vec![alloc::vec![t]]).expect("valid age");
            m.neuron_rate(&s, &weights, 0)
        };
        example1_density(rate_empty, rate_one, step)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn psi0(&self) -> f64 {
        self.psi0
    }

    pub fn rate_empty(&self) -> f64 {
        self.rate_empty
    }

    pub fn rate_one(&self, t: f64) -> f64 {
        (self.rate_one)(t)
    }

    /// Probability of exactly one window spike.
    pub fn mass1(&self) -> f64 {
        self.mass1
    }

    /// Probability of exactly two window spikes.
    pub fn mass2(&self) -> f64 {
        self.mass2
    }

    pub fn total_mass(&self) -> f64 {
        self.psi0 + self.mass1 + self.mass2
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.log_phi.len()).map(move |j| j as f64 * self.step)
    }

    /// `psi_1` at the grid nodes.
    pub fn psi1_table(&self) -> Vec<f64> {
        self.log_phi.iter().map(|&l| self.rate_empty * self.psi0 * libm::exp(l)).collect()
    }

    fn log_phi_at(&self, t: f64) -> f64 {
        let n = self.log_phi.len() - 1;
        let j = (libm::floor(t / self.step) as usize).min(n - 1);
        let a = j as f64 * self.step;
        let g = |y: f64| self.rate_one(y) - self.rate_one(1.0 - y);
        if t == a {
            return self.log_phi[j];
        }
        self.log_phi[j] + simpson_panel(g(a), g(0.5 * (a + t)), g(t), t - a)
    }

    /// One-spike density at time-to-expiry `t` in `[0, 1]`.
    pub fn psi1(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        self.rate_empty * self.psi0 * libm::exp(self.log_phi_at(t))
    }

    /// Two-spike density at `1 >= x1 > x2 >= 0`.
    pub fn psi2(&self, x1: f64, x2: f64) -> f64 {
        // Tolerate rounding when the newest age is computed as a sum.
        let x1 = if x1 > 1.0 && x1 < 1.0 + 1e-12 { 1.0 } else { x1 };
        if !(x1 <= 1.0 && x1 > x2 && x2 >= 0.0) {
            return 0.0;
        }
        let s = 1.0 - (x1 - x2);
        self.rate_one(s) * self.psi1(s)
    }

    /// `max |psi_1(t) - psi_1(1 - t)|` over the grid.
    pub fn symmetry_error(&self) -> f64 {
        let t = self.psi1_table();
        t.iter().zip(t.iter().rev()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest violation of `psi_1' = (R(t) - R(1 - t)) psi_1` at interior grid
    /// nodes, with a fourth-order central difference.
    pub fn ode_residual(&self) -> f64 {
        let f = self.psi1_table();
        let h = self.step;
        let mut worst: f64 = 0.0;
        for j in 2..f.len() - 2 {
            let t = j as f64 * h;
            let d = (-f[j + 2] + 8.0 * f[j + 1] - 8.0 * f[j - 1] + f[j - 2]) / (12.0 * h);
            let rhs = (self.rate_one(t) - self.rate_one(1.0 - t)) * f[j];
            worst = worst.max((d - rhs).abs());
        }
        worst
    }
}
