//! Residuals of the equations a stationary density must satisfy.
//!
//! With ages measured as times to expiry, and `psi_c` the density of the
//! component with spike counts `c`:
//!
//! * silent state: `(sum_u rate_u(0)) psi_0 = sum_u psi_{e_u}(0+)`;
//! * along the diagonal of a one-spike component:
//!   `d/ds psi_c(x + s) = (total rate at x) psi_c(x) - sum_v psi_{c+e_v}(x, 0)`;
//! * at the face where the newest spike has age `theta`:
//!   `psi_c(theta, y) = rate_u(y) psi_{c-e_u}(y)`.

use alloc::{format, vec, vec::Vec};

use super::example1::Example1Density;
use crate::chain::ChainEmbedding;
use crate::network::Model;
use crate::sim::SampledDensity;
use crate::state::WindowState;
use crate::{Error, Result};

/// A candidate stationary law, queried component by component.
pub trait StationaryDensity {
    /// For all-zero `counts`, the probability of the silent state; otherwise
    /// the density of component `counts` at `ages` (per unit, most recent
    /// first, as times to expiry). `None` if the point is not covered.
    fn density(&self, counts: &[usize], ages: &[Vec<f64>]) -> Option<f64>;

    /// Standard error of [`StationaryDensity::density`], for estimates.
    fn stderr(&self, _counts: &[usize], _ages: &[Vec<f64>]) -> Option<f64> {
        None
    }
}

impl StationaryDensity for Example1Density {
    fn density(&self, counts: &[usize], ages: &[Vec<f64>]) -> Option<f64> {
        match (counts, ages) {
            ([0], _) => Some(self.psi0()),
            ([1], [a]) => Some(self.psi1(a[0])),
            ([2], [a]) => Some(self.psi2(a[0], a[1])),
            ([_], _) => Some(0.0),
            _ => None,
        }
    }
}

impl StationaryDensity for ChainEmbedding {
    fn density(&self, counts: &[usize], ages: &[Vec<f64>]) -> Option<f64> {
        if counts.iter().all(|&c| c == 0) {
            return Some(self.mass(counts));
        }
        self.density_at(ages)
    }
}

impl StationaryDensity for SampledDensity {
    fn density(&self, counts: &[usize], ages: &[Vec<f64>]) -> Option<f64> {
        self.lookup(counts, ages).map(|(d, _)| d)
    }

    fn stderr(&self, counts: &[usize], ages: &[Vec<f64>]) -> Option<f64> {
        self.lookup(counts, ages).map(|(_, s)| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Equation {
    /// Balance of the silent state.
    Silent,
    /// Transport along the diagonal inside a one-spike component.
    Diagonal,
    /// Entry through the face where the newest spike has age `theta`.
    Boundary,
}

/// Central difference used for the diagonal derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    Second,
    Fourth,
}

/// Where and how to evaluate the residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualGrid {
    /// Finite-difference step, in time units.
    pub fd_step: f64,
    /// Test points per coordinate: the centers of `points` equal cells.
    pub points: usize,
    /// Age standing in for `0+` and distance from `theta` for the face.
    pub edge: f64,
    pub stencil: Stencil,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualEntry {
    pub equation: Equation,
    pub component: Vec<usize>,
    pub point: Vec<Vec<f64>>,
    pub residual: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
}

impl ResidualReport {
    fn of(&self, eq: Equation) -> impl Iterator<Item = &ResidualEntry> {
        self.entries.iter().filter(move |e| e.equation == eq)
    }

    pub fn max_abs(&self, eq: Equation) -> f64 {
        self.of(eq).map(|e| e.residual.abs()).fold(0.0, f64::max)
    }

    pub fn mean_abs(&self, eq: Equation) -> f64 {
        let (s, n) = self.of(eq).fold((0.0, 0usize), |(s, n), e| (s + e.residual.abs(), n + 1));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }

    pub fn count(&self, eq: Equation) -> usize {
        self.of(eq).count()
    }

    /// Largest `|residual| / stderr` over entries that carry an error bar.
    pub fn max_z(&self) -> Option<f64> {
        self.entries.iter().filter_map(|e| e.stderr.map(|s| e.residual.abs() / s)).reduce(f64::max)
    }
}

fn unit_vec(units: usize, u: usize, k: usize) -> Vec<usize> {
    let mut c = vec![0; units];
    c[u] = k;
    c
}

struct Eval<'a, D: StationaryDensity> {
    psi: &'a D,
    units: usize,
}

impl<D: StationaryDensity> Eval<'_, D> {
    fn at(&self, counts: &[usize], ages: &[Vec<f64>]) -> Result<(f64, Option<f64>)> {
        let d = self.psi.density(counts, ages).ok_or_else(|| {
            Error::IncompatibleGrid(format!("density not available for component {counts:?} at {ages:?}"))
        })?;
        Ok((d, self.psi.stderr(counts, ages)))
    }

    fn ages_one(&self, u: usize, x: &[f64]) -> Vec<Vec<f64>> {
        let mut a = vec![Vec::new(); self.units];
        a[u] = x.to_vec();
        a
    }
}

/// Combines independent error bars, or `None` if any is missing.
fn combine(terms: &[(f64, Option<f64>)]) -> Option<f64> {
    let mut v = 0.0;
    for &(w, s) in terms {
        let s = s?;
        v += w * w * s * s;
    }
    Some(libm::sqrt(v))
}

/// Evaluates the silent-state, diagonal and boundary equations for `psi` on
/// the one- and two-spike components of `model`.
pub fn stationary_equation_residual<D: StationaryDensity>(
    model: &Model,
    psi: &D,
    grid: &ResidualGrid,
) -> Result<ResidualReport> {
    let cfg = model.config();
    if model.plasticity().is_some() {
        return Err(Error::InvalidConfig("residuals need static weights".into()));
    }
    let theta = cfg.theta();
    if !(grid.fd_step > 0.0 && grid.points > 0 && grid.edge >= 0.0 && grid.edge < theta) {
        return Err(Error::DegenerateGrid(format!("bad residual grid {grid:?}")));
    }
    let units = cfg.num_sources() + cfg.num_neurons();
    let weights = model.weights_for(None);
    let ev = Eval { psi, units };
    let empty = cfg.empty_state();
    let state_of = |ages: &[Vec<f64>]| -> Result<WindowState> {
        let mut a = ages.to_vec();
        let neurons = a.split_off(cfg.num_sources());
        WindowState::from_ages(theta, a, neurons)
    };
    let mut report = ResidualReport::default();

    // Silent state.
    let zero = vec![0; units];
    let (p0, s0) = ev.at(&zero, &ev.ages_one(0, &[]))?;
    let total0 = model.total_intensity(&empty, &weights);
    let mut terms = vec![(total0, s0)];
    let mut inflow = 0.0;
    for u in 0..units {
        let (d, s) = ev.at(&unit_vec(units, u, 1), &ev.ages_one(u, &[grid.edge]))?;
        inflow += d;
        terms.push((1.0, s));
    }
    report.entries.push(ResidualEntry {
        equation: Equation::Silent,
        component: zero.clone(),
        point: vec![Vec::new(); units],
        residual: total0 * p0 - inflow,
        stderr: combine(&terms),
    });

    let centers: Vec<f64> = (0..grid.points).map(|k| theta * (k as f64 + 0.5) / grid.points as f64).collect();
    let delta = grid.fd_step;
    let reach = match grid.stencil {
        Stencil::Second => delta,
        Stencil::Fourth => 2.0 * delta,
    };

    for u in 0..units {
        let c1 = unit_vec(units, u, 1);
        // Diagonal transport inside the one-spike component of unit u.
        for &x in centers.iter().filter(|&&x| x - reach > 0.0 && x + reach <= theta) {
            let f = |s: f64| ev.at(&c1, &ev.ages_one(u, &[x + s]));
            let (deriv, dterms) = match grid.stencil {
                Stencil::Second => {
                    let (a, sa) = f(delta)?;
                    let (b, sb) = f(-delta)?;
                    ((a - b) / (2.0 * delta), vec![(1.0 / (2.0 * delta), sa), (1.0 / (2.0 * delta), sb)])
                }
                Stencil::Fourth => {
                    let (a2, s2) = f(2.0 * delta)?;
                    let (a1, s1) = f(delta)?;
                    let (b1, t1) = f(-delta)?;
                    let (b2, t2) = f(-2.0 * delta)?;
                    let w = 12.0 * delta;
                    ((-a2 + 8.0 * a1 - 8.0 * b1 + b2) / w, vec![(1.0 / w, s2), (8.0 / w, s1), (8.0 / w, t1), (1.0 / w, t2)])
                }
            };
            let here = ev.ages_one(u, &[x]);
            let (p, sp) = ev.at(&c1, &here)?;
            let total = model.total_intensity(&state_of(&here)?, &weights);
            let mut terms = dterms;
            terms.push((total, sp));
            let mut entering = 0.0;
            for v in 0..units {
                let mut c2 = c1.clone();
                c2[v] += 1;
                let mut ages = here.clone();
                ages[v].push(grid.edge);
                let (d, s) = ev.at(&c2, &ages)?;
                entering += d;
                terms.push((1.0, s));
            }
            report.entries.push(ResidualEntry {
                equation: Equation::Diagonal,
                component: c1.clone(),
                point: here,
                residual: deriv - (total * p - entering),
                stderr: combine(&terms),
            });
        }

        // Entry into the one-spike component from the silent state.
        let face = theta - grid.edge;
        let (d, s) = ev.at(&c1, &ev.ages_one(u, &[face]))?;
        let rate = model.slot_rate(&empty, &weights, u);
        report.entries.push(ResidualEntry {
            equation: Equation::Boundary,
            component: c1.clone(),
            point: ev.ages_one(u, &[face]),
            residual: d - rate * p0,
            stderr: combine(&[(1.0, s), (rate, s0)]),
        });

        // Entry into two-spike components whose newest spike belongs to u.
        for v in 0..units {
            for &y in centers.iter().filter(|&&y| y < face) {
                let mut c2 = c1.clone();
                c2[v] += 1;
                let mut ages = ev.ages_one(v, &[y]);
                ages[u].insert(0, face);
                let before = ev.ages_one(v, &[y]);
                let (d, s) = ev.at(&c2, &ages)?;
                let (b, sb) = ev.at(&unit_vec(units, v, 1), &before)?;
                let rate = model.slot_rate(&state_of(&before)?, &weights, u);
                report.entries.push(ResidualEntry {
                    equation: Equation::Boundary,
                    component: c2,
                    point: ages,
                    residual: d - rate * b,
                    stderr: combine(&[(1.0, s), (rate, sb)]),
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::example1_density;
    use crate::func::{Activation, Kernel};
    use crate::network::{NetworkBuilder, Truncation};
    use crate::state::Unit;

    fn feedback(kernel: Kernel) -> Model {
        let cfg = NetworkBuilder::new(1.0)
            .neuron(Activation::Logistic { lower: 0.3, upper: 1.5, gain: 1.0, midpoint: 0.2 }, 0.0)
            .synapse(Unit::Neuron(0), 0, 1.0, kernel)
            .build()
            .unwrap();
        Model::new(cfg).with_truncation(Truncation::neurons(2)).unwrap()
    }

    #[test]
    fn closed_form_has_tiny_residuals() {
        let model = feedback(Kernel::Bump { height: 1.0 });
        let d = Example1Density::from_model(&model, 1e-3).unwrap();
        let grid = ResidualGrid { fd_step: 1e-3, points: 50, edge: 0.0, stencil: Stencil::Fourth };
        let r = stationary_equation_residual(&model, &d, &grid).unwrap();
        assert!(r.max_abs(Equation::Silent) < 1e-8, "{}", r.max_abs(Equation::Silent));
        assert!(r.max_abs(Equation::Diagonal) < 1e-8, "{}", r.max_abs(Equation::Diagonal));
        assert!(r.max_abs(Equation::Boundary) < 1e-8, "{}", r.max_abs(Equation::Boundary));
        assert_eq!(r.count(Equation::Boundary), 51);
    }

    #[test]
    fn wrong_density_is_caught() {
        let model = feedback(Kernel::Bump { height: 1.0 });
        // A constant-rate solution is not stationary for a varying rate.
        let d = example1_density(1.0, |_| 1.0, 1e-3).unwrap();
        let grid = ResidualGrid { fd_step: 1e-3, points: 20, edge: 0.0, stencil: Stencil::Fourth };
        let r = stationary_equation_residual(&model, &d, &grid).unwrap();
        assert!(r.max_abs(Equation::Diagonal) > 1e-3);
    }
}
