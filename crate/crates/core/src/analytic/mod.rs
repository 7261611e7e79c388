//! Closed-form stationary densities of single feedback neurons, a direct
//! simulation of the shot-noise process, and residuals of the stationary
//! density equations.

pub mod example1;
pub mod example2;
pub mod quad;
pub mod residual;
pub mod shotnoise;

pub use example1::{example1_density, Example1Density};
pub use example2::{example2_density, Example2Density};
pub use residual::{
    stationary_equation_residual, Equation, ResidualEntry, ResidualGrid, ResidualReport, StationaryDensity, Stencil,
};
pub use shotnoise::{simulate_shotnoise, ShotNoisePlan, ShotNoiseSamples};

use alloc::format;

use crate::{Error, Result};

/// Number of uniform steps of width `step` in `[0, 1]`, which must be a
/// whole even number.
pub(crate) fn unit_steps(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 0.25) {
        return Err(Error::DegenerateGrid(format!("step must be in (0, 0.25], got {step}")));
    }
    let n = libm::round(1.0 / step);
    if (n * step - 1.0).abs() > 1e-9 || n as usize % 2 != 0 {
        return Err(Error::DegenerateGrid(format!("1 / step must be an even integer, got {}", 1.0 / step)));
    }
    Ok(n as usize)
}
