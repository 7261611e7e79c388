//! Stationary density of the shot-noise process `dY = -Y dt + dZ`, where `Z`
//! jumps by 1 at rate `gamma(Y)`.
//!
//! The density solves `y psi(y) = int_{(y-1)^+}^y gamma psi` and is built
//! interval by interval on `J_n = (n, n + 1)`. On `J_0` it is
//! `psi(1) y^{a} exp(int_1^y (gamma(x) - gamma(0)) / x dx)` with
//! `a = gamma(0) - 1`. On `J_n`, `n >= 1`, the running integral
//! `K_n(y) = int_n^y gamma psi` obeys
//! `K_n' = gamma(y) (T(y - 1) + K_n) / y`, where `T(s) = int_s^n gamma psi`
//! is the tail of the previous interval, and `psi = (T(y - 1) + K_n) / y`.
//! Differentiating gives the usual recursion
//! `psi' = (gamma(y) - 1) / y psi - gamma(y - 1) / y psi(y - 1)`.

use alloc::boxed::Box;
use alloc::{format, vec, vec::Vec};

use super::quad::{gauss_legendre, hermite, hermite_integral, simpson_panel};
use super::unit_steps;
use crate::{Error, Result};

type RateFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Sub-steps of the fine table on `J_0` per grid step.
const FINE: usize = 8;

/// Half-step panels near 0 integrated against the exact power law; further
/// out plain Simpson is accurate.
const POWER_PANELS: usize = 64;

/// Tabulated Example 2 density on `(0, n_max + 1)`.
pub struct Example2Density {
    gamma: RateFn,
    gamma_bar: f64,
    gamma0: f64,
    /// Limit of `(gamma(x) - gamma(0)) / x` at 0.
    slope0: f64,
    step: f64,
    steps: usize,
    n_max: usize,
    /// `a = gamma(0) - 1`.
    a: f64,
    /// `psi(1)`: the normalizing factor.
    scale: f64,
    /// `ln` of the smooth factor of `psi_0` on the fine grid of `J_0`.
    c_fine: Vec<f64>,
    /// `int_0^x psi_0 / psi(1)` on the half grid of `J_0`.
    mass0_half: Vec<f64>,
    /// Unnormalized `phi_n` and `phi_n'` at the grid nodes of `J_n`, `n >= 1`.
    phi: Vec<Vec<f64>>,
    dphi: Vec<Vec<f64>>,
    /// Unnormalized mass of each interval.
    masses: Vec<f64>,
    /// Normalized cumulative mass at the start of each interval.
    cum_start: Vec<f64>,
    /// Cumulative unnormalized mass inside `J_n`, `n >= 1`, at its nodes.
    cum_inner: Vec<Vec<f64>>,
    tail_bound: f64,
}

impl core::fmt::Debug for Example2Density {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Example2Density")
            .field("gamma_bar", &self.gamma_bar)
            .field("step", &self.step)
            .field("n_max", &self.n_max)
            .field("scale", &self.scale)
            .field("tail_bound", &self.tail_bound)
            .finish_non_exhaustive()
    }
}

/// Builds the density for jump rate `gamma <= gamma_bar`, tabulated up to
/// `n_max + 1` with grid step `step`.
pub fn example2_density<F>(gamma: F, gamma_bar: f64, n_max: usize, step: f64) -> Result<Example2Density>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let m = unit_steps(step)?;
    let h = 1.0 / m as f64;
    if !(gamma_bar.is_finite() && gamma_bar > 0.0) {
        return Err(Error::Support(format!("rate bound must be finite and positive, got {gamma_bar}")));
    }
    let gamma0 = gamma(0.0);
    if !(gamma0 > 0.0) {
        return Err(Error::NonIntegrable(format!("gamma(0) = {gamma0}; the density near 0 behaves like y^(gamma(0) - 1)")));
    }
    for k in 0..=2 * m * (n_max + 1) {
        let y = k as f64 * h / 2.0;
        let g = gamma(y);
        if !(g.is_finite() && g > 0.0 && g <= gamma_bar) {
            return Err(Error::Support(format!("gamma({y}) = {g} outside (0, {gamma_bar}]")));
        }
    }
    let a = gamma0 - 1.0;
    // One-sided second-order derivative of gamma at 0.
    let d = 1e-4;
    let slope0 = (-3.0 * gamma0 + 4.0 * gamma(d) - gamma(2.0 * d)) / (2.0 * d);

    let mut dens = Example2Density {
        gamma: Box::new(gamma),
        gamma_bar,
        gamma0,
        slope0,
        step: h,
        steps: m,
        n_max,
        a,
        scale: 1.0,
        c_fine: Vec::new(),
        mass0_half: Vec::new(),
        phi: Vec::new(),
        dphi: Vec::new(),
        masses: Vec::new(),
        cum_start: Vec::new(),
        cum_inner: Vec::new(),
        tail_bound: 0.0,
    };

    // J_0: smooth factor on the fine grid, integrated down from 1.
    let wf = h / FINE as f64;
    let nf = m * FINE;
    let mut c_fine = vec![0.0; nf + 1];
    for k in (0..nf).rev() {
        let x0 = k as f64 * wf;
        c_fine[k] = c_fine[k + 1] - simpson_panel(dens.g(x0), dens.g(x0 + 0.5 * wf), dens.g(x0 + wf), wf);
    }
    dens.c_fine = c_fine;

    // Running integrals of psi_0 and gamma psi_0 on the half grid.
    let half = 2 * m;
    let wh = h / 2.0;
    let mut mass0_half = vec![0.0; half + 1];
    let mut k0_half = vec![0.0; half + 1];
    let fine_per_half = FINE / 2;
    for k in 0..half {
        let x0 = k as f64 * wh;
        let (dm, dk) = if k < POWER_PANELS {
            (dens.power_panel(x0, x0 + wh, false), dens.power_panel(x0, x0 + wh, true))
        } else {
            let i0 = k * fine_per_half;
            let f = |i: usize| dens.phi0_fine(i);
            let mid = i0 + fine_per_half / 2;
            let i1 = i0 + fine_per_half;
            let gm = |i: usize, x: f64| (dens.gamma)(x) * f(i);
            (
                simpson_panel(f(i0), f(mid), f(i1), wh),
                simpson_panel(gm(i0, x0), gm(mid, x0 + 0.5 * wh), gm(i1, x0 + wh), wh),
            )
        };
        mass0_half[k + 1] = mass0_half[k] + dm;
        k0_half[k + 1] = k0_half[k] + dk;
    }
    dens.masses.push(mass0_half[half]);
    dens.mass0_half = mass0_half;

    // J_n, n >= 1.
    let mut prev_k = k0_half;
    let mut prev_phi_nodes: Vec<f64> = (0..=m).map(|j| dens.phi0_fine(j * FINE)).collect();
    for n in 1..=n_max {
        let total_prev = prev_k[half];
        let tail = |i: usize| total_prev - prev_k[i];
        let y0 = n as f64;
        let mut k_nodes = vec![0.0; m + 1];
        let rhs = |y: f64, t: f64, k: f64| (dens.gamma)(y) * (t + k) / y;
        for j in 0..m {
            let y = y0 + j as f64 * h;
            let kj = k_nodes[j];
            let k1 = rhs(y, tail(2 * j), kj);
            let k2 = rhs(y + 0.5 * h, tail(2 * j + 1), kj + 0.5 * h * k1);
            let k3 = rhs(y + 0.5 * h, tail(2 * j + 1), kj + 0.5 * h * k2);
            let k4 = rhs(y + h, tail(2 * j + 2), kj + h * k3);
            k_nodes[j + 1] = kj + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let mut phi = vec![0.0; m + 1];
        let mut dphi = vec![0.0; m + 1];
        for j in 0..=m {
            let y = y0 + j as f64 * h;
            phi[j] = (tail(2 * j) + k_nodes[j]) / y;
            let back = (dens.gamma)(y - 1.0) * prev_phi_nodes[j];
            dphi[j] = (((dens.gamma)(y) - 1.0) * phi[j] - back) / y;
        }
        // Half-grid running integral of gamma psi for the next interval.
        let mut k_half = vec![0.0; half + 1];
        for j in 0..m {
            let y = y0 + j as f64 * h;
            let d0 = (dens.gamma)(y) * phi[j];
            let d1 = (dens.gamma)(y + h) * phi[j + 1];
            k_half[2 * j] = k_nodes[j];
            k_half[2 * j + 1] = hermite(k_nodes[j], k_nodes[j + 1], d0, d1, h, 0.5);
        }
        k_half[half] = k_nodes[m];
        let mut cum = vec![0.0; m + 1];
        for j in 0..m {
            cum[j + 1] = cum[j] + dens.segment_integral(&phi, &dphi, j, 1.0);
        }
        dens.masses.push(cum[m]);
        dens.cum_inner.push(cum);
        prev_phi_nodes = phi.clone();
        dens.phi.push(phi);
        dens.dphi.push(dphi);
        prev_k = k_half;
    }

    let z: f64 = dens.masses.iter().sum();
    dens.scale = 1.0 / z;
    let mut acc = 0.0;
    for &mass in &dens.masses {
        dens.cum_start.push(acc);
        acc += mass / z;
    }
    let last = dens.masses[n_max] / z;
    let r = gamma_bar / (n_max as f64 + 1.0 - gamma_bar);
    dens.tail_bound = if r > 0.0 && r < 1.0 { last * r / (1.0 - r) } else { f64::INFINITY };
    Ok(dens)
}

impl Example2Density {
    fn g(&self, x: f64) -> f64 {
        if x == 0.0 {
            self.slope0
        } else {
            ((self.gamma)(x) - self.gamma0) / x
        }
    }

    /// Unnormalized `psi_0` at fine node `i`.
    fn phi0_fine(&self, i: usize) -> f64 {
        let x = i as f64 * self.step / FINE as f64;
        if i == 0 {
            return if self.a > 0.0 {
                0.0
            } else if self.a == 0.0 {
                libm::exp(self.c_fine[0])
            } else {
                f64::INFINITY
            };
        }
        libm::pow(x, self.a) * libm::exp(self.c_fine[i])
    }

    /// `ln` of the smooth factor of `psi_0` at any `x` in `[0, 1]`.
    fn c_at(&self, x: f64) -> f64 {
        let wf = self.step / FINE as f64;
        let i = (libm::floor(x / wf) as usize).min(self.c_fine.len() - 2);
        let x0 = i as f64 * wf;
        if x == x0 {
            return self.c_fine[i];
        }
        self.c_fine[i] + simpson_panel(self.g(x0), self.g(0.5 * (x0 + x)), self.g(x), x - x0)
    }

    /// `int_{x0}^{x1} x^a s(x) dx` with `s = e^c` (or `gamma e^c`) replaced
    /// by its quadratic interpolant at the ends and midpoint.
    fn power_panel(&self, x0: f64, x1: f64, with_gamma: bool) -> f64 {
        let s = |x: f64| {
            let e = libm::exp(self.c_at(x));
            if with_gamma {
                (self.gamma)(x) * e
            } else {
                e
            }
        };
        let (s0, sm, s1) = (s(x0), s(0.5 * (x0 + x1)), s(x1));
        let w = x1 - x0;
        let a = self.a;
        let int = |p: f64| (libm::pow(x1, p + 1.0) - libm::pow(x0, p + 1.0)) / (p + 1.0);
        let (i0, i1, i2) = (int(a), int(a + 1.0), int(a + 2.0));
        // Moments of tau = (x - x0) / w against x^a.
        let m0 = i0;
        let m1 = (i1 - x0 * i0) / w;
        let m2 = (i2 - 2.0 * x0 * i1 + x0 * x0 * i0) / (w * w);
        s0 * (2.0 * m2 - 3.0 * m1 + m0) + sm * (4.0 * m1 - 4.0 * m2) + s1 * (2.0 * m2 - m1)
    }

    /// Integral over the first `tau` of grid segment `j` of `J_n`, `n >= 1`.
    fn segment_integral(&self, phi: &[f64], dphi: &[f64], j: usize, tau: f64) -> f64 {
        let h = self.step;
        if dphi[j].is_finite() && dphi[j + 1].is_finite() {
            hermite_integral(phi[j], phi[j + 1], dphi[j], dphi[j + 1], h, tau)
        } else {
            let v = phi[j] + tau * (phi[j + 1] - phi[j]);
            0.5 * tau * h * (phi[j] + v)
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn gamma(&self, y: f64) -> f64 {
        (self.gamma)(y)
    }

    pub fn gamma_bar(&self) -> f64 {
        self.gamma_bar
    }

    /// `psi(1)`, the normalizing factor of `psi_0 = psi(1) y^a ...`.
    pub fn psi_at_one(&self) -> f64 {
        self.scale
    }

    /// Bound on the mass beyond `n_max + 1`, which the tables leave out.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Normalized mass of `J_n`.
    pub fn interval_mass(&self, n: usize) -> f64 {
        self.masses.get(n).map_or(0.0, |m| m * self.scale)
    }

    /// Stationary density at `y`.
    pub fn density(&self, y: f64) -> f64 {
        if !(y > 0.0) || y >= (self.n_max + 1) as f64 {
            return 0.0;
        }
        if y < 1.0 {
            return self.scale * libm::pow(y, self.a) * libm::exp(self.c_at(y));
        }
        let n = libm::floor(y) as usize;
        let (phi, dphi) = (&self.phi[n - 1], &self.dphi[n - 1]);
        let s = (y - n as f64) / self.step;
        let j = (libm::floor(s) as usize).min(self.steps - 1);
        let t = s - j as f64;
        let v = if dphi[j].is_finite() && dphi[j + 1].is_finite() {
            hermite(phi[j], phi[j + 1], dphi[j], dphi[j + 1], self.step, t)
        } else {
            phi[j] + t * (phi[j + 1] - phi[j])
        };
        self.scale * v
    }

    /// Stationary distribution function `P(Y <= y)`, ignoring the tail beyond
    /// `n_max + 1`.
    pub fn cdf(&self, y: f64) -> f64 {
        if !(y > 0.0) {
            return 0.0;
        }
        let end = (self.n_max + 1) as f64;
        if y >= end {
            return self.cum_start[self.n_max] + self.interval_mass(self.n_max);
        }
        if y < 1.0 {
            let wh = self.step / 2.0;
            let k = (libm::floor(y / wh) as usize).min(self.mass0_half.len() - 2);
            let x0 = k as f64 * wh;
            let part = if k < POWER_PANELS {
                self.power_panel(x0, y, false)
            } else {
                let f = |x: f64| libm::pow(x, self.a) * libm::exp(self.c_at(x));
                simpson_panel(f(x0), f(0.5 * (x0 + y)), f(y), y - x0)
            };
            return self.scale * (self.mass0_half[k] + part);
        }
        let n = libm::floor(y) as usize;
        let s = (y - n as f64) / self.step;
        let j = (libm::floor(s) as usize).min(self.steps - 1);
        let inner = self.cum_inner[n - 1][j] + self.segment_integral(&self.phi[n - 1], &self.dphi[n - 1], j, s - j as f64);
        self.cum_start[n] + self.scale * inner
    }

    /// Largest jump of the density across the integers `1..=n_max`.
    pub fn continuity_error(&self) -> f64 {
        (1..=self.n_max)
            .map(|n| {
                let left = if n == 1 { self.scale * libm::exp(self.c_at(1.0)) } else { self.scale * self.phi[n - 2][self.steps] };
                (left - self.scale * self.phi[n - 1][0]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `|y psi(y) - int_{(y-1)^+}^y gamma psi|` at `y`, with the integral
    /// evaluated by Gauss-Legendre on the interpolated density (and on `J_0`
    /// after the substitution `u = x^{a+1}` that removes the power law).
    pub fn balance_residual(&self, y: f64) -> f64 {
        let lo = (y - 1.0).max(0.0);
        let mut integral = 0.0;
        let a1 = self.a + 1.0;
        if lo < 1.0 {
            let hi = y.min(1.0);
            let f = |u: f64| {
                let x = libm::pow(u, 1.0 / a1);
                (self.gamma)(x) * self.scale * libm::exp(self.c_at(x)) / a1
            };
            integral += gauss_legendre(f, libm::pow(lo, a1), libm::pow(hi, a1), 200);
        }
        let mut start = lo.max(1.0);
        while start < y {
            let end = (libm::floor(start) + 1.0).min(y);
            let panels = (libm::ceil((end - start) * 100.0) as usize).max(1);
            integral += gauss_legendre(|x| (self.gamma)(x) * self.density(x), start, end, panels);
            start = end;
        }
        (y * self.density(y) - integral).abs()
    }
}
