//! Built-in activation, kernel and refractory functions.
//!
//! Functions are selected by name from a closed set so that configurations
//! stay reproducible; there is no way to inject arbitrary code.

use alloc::format;

use crate::{Error, Result};

/// Number of points used when checking declared bounds of an activation.
const VALIDATION_POINTS: usize = 2001;
/// Half-width of the influx range scanned during validation.
const VALIDATION_SPAN: f64 = 1.0e3;

/// Bounded, positive, non-decreasing map from synaptic influx to intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// `c` everywhere.
    Constant(f64),
    /// `clamp(offset + slope * x, lower, upper)`.
    LinearClipped {
        slope: f64,
        offset: f64,
        lower: f64,
        upper: f64,
    },
    /// `lower + (upper - lower) / (1 + exp(-gain * (x - midpoint)))`.
    Logistic {
        lower: f64,
        upper: f64,
        gain: f64,
        midpoint: f64,
    },
}

impl Activation {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Activation::Constant(c) => c,
            Activation::LinearClipped {
                slope,
                offset,
                lower,
                upper,
            } => (offset + slope * x).clamp(lower, upper),
            Activation::Logistic {
                lower,
                upper,
                gain,
                midpoint,
            } => lower + (upper - lower) / (1.0 + libm::exp(-gain * (x - midpoint))),
        }
    }

    /// Declared lower bound.
    pub fn lower(&self) -> f64 {
        match *self {
            Activation::Constant(c) => c,
            Activation::LinearClipped { lower, .. } | Activation::Logistic { lower, .. } => lower,
        }
    }

    /// Declared upper bound; the thinning bound for the neuron.
    pub fn upper(&self) -> f64 {
        match *self {
            Activation::Constant(c) => c,
            Activation::LinearClipped { upper, .. } | Activation::Logistic { upper, .. } => upper,
        }
    }

    /// Checks the parameters and the declared bounds on a validation grid.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.lower(), self.upper());
        if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || hi < lo {
            return Err(Error::InvalidConfig(format!(
                "activation bounds must satisfy 0 < lower <= upper < inf, got [{lo}, {hi}]"
            )));
        }
        match *self {
            Activation::Constant(_) => {}
            Activation::LinearClipped { slope, offset, .. } => {
                if !slope.is_finite() || !offset.is_finite() || slope < 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "linear activation needs finite slope >= 0 and offset, got {slope}, {offset}"
                    )));
                }
            }
            Activation::Logistic { gain, midpoint, .. } => {
                if !gain.is_finite() || !midpoint.is_finite() || gain < 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "logistic activation needs finite gain >= 0 and midpoint, got {gain}, {midpoint}"
                    )));
                }
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..VALIDATION_POINTS {
            let x = -VALIDATION_SPAN + 2.0 * VALIDATION_SPAN * k as f64 / (VALIDATION_POINTS - 1) as f64;
            let y = self.eval(x);
            if !(lo..=hi).contains(&y) || y < prev {
                return Err(Error::InvalidConfig(format!(
                    "activation leaves [{lo}, {hi}] or decreases at x = {x}"
                )));
            }
            prev = y;
        }
        Ok(())
    }
}

/// Post-synaptic response kernel, supported on `[0, theta]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Kernel {
    #[default]
    Zero,
    /// `height` on `[0, theta]`.
    Constant { height: f64 },
    /// `slope * t` on `[0, theta]`.
    Linear { slope: f64 },
    /// Piecewise linear: 0 at `t = 0`, `height` at `peak`, 0 at `theta`.
    Triangular { peak: f64, height: f64 },
    /// `height * sin^2(pi t / theta)`: continuously differentiable on the line.
    Bump { height: f64 },
}

impl Kernel {
    /// Kernel value at lag `t`; exactly zero outside `[0, theta]`.
    #[inline]
    pub fn eval(&self, t: f64, theta: f64) -> f64 {
        if !(0.0..=theta).contains(&t) {
            return 0.0;
        }
        match *self {
            Kernel::Zero => 0.0,
            Kernel::Constant { height } => height,
            Kernel::Linear { slope } => slope * t,
            Kernel::Triangular { peak, height } => {
                if t <= peak {
                    height * t / peak
                } else {
                    height * (theta - t) / (theta - peak)
                }
            }
            Kernel::Bump { height } => {
                let s = libm::sin(core::f64::consts::PI * t / theta);
                height * s * s
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Kernel::Zero)
    }

    pub fn validate(&self, theta: f64) -> Result<()> {
        let ok = match *self {
            Kernel::Zero => true,
            Kernel::Constant { height } | Kernel::Bump { height } => height.is_finite() && height >= 0.0,
            Kernel::Linear { slope } => slope.is_finite() && slope >= 0.0,
            Kernel::Triangular { peak, height } => {
                height.is_finite() && height >= 0.0 && peak > 0.0 && peak < theta
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("kernel {self:?} is not a non-negative kernel on [0, {theta}]")))
        }
    }
}

/// Refractory multiplier `r(s)` of the time `s` since the neuron's last spike.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Refractory {
    /// `r == 1`.
    #[default]
    None,
    /// Absolute refractory period: `r(s) = 1(s not in (0, delta])`.
    Hard { delta: f64 },
    /// Linear recovery: `r(s) = clamp(s / delta, 0, 1)`.
    Ramp { delta: f64 },
}

impl Refractory {
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Refractory::None => 1.0,
            Refractory::Hard { delta } => {
                if s > 0.0 && s <= delta {
                    0.0
                } else {
                    1.0
                }
            }
            Refractory::Ramp { delta } => (s / delta).clamp(0.0, 1.0),
        }
    }

    /// Length of the absolute refractory period, if any.
    pub fn hard_period(&self) -> Option<f64> {
        match *self {
            Refractory::Hard { delta } => Some(delta),
            _ => None,
        }
    }

    pub fn validate(&self, theta: f64) -> Result<()> {
        match *self {
            Refractory::None => Ok(()),
            Refractory::Hard { delta } | Refractory::Ramp { delta } => {
                // r(s) = 1 is required for s >= theta.
                if delta > 0.0 && delta < theta {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "refractory period must lie in (0, theta = {theta}), got {delta}"
                    )))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_vanish_outside_support() {
        let kernels = [
            Kernel::Constant { height: 1.0 },
            Kernel::Linear { slope: 2.0 },
            Kernel::Triangular { peak: 0.3, height: 1.0 },
            Kernel::Bump { height: 1.0 },
        ];
        for k in kernels {
            assert_eq!(k.eval(-1e-12, 1.0), 0.0);
            assert_eq!(k.eval(1.0 + 1e-12, 1.0), 0.0);
            assert_eq!(k.eval(7.0, 1.0), 0.0);
        }
        assert_eq!(Kernel::Triangular { peak: 0.3, height: 2.0 }.eval(0.3, 1.0), 2.0);
        assert!((Kernel::Bump { height: 1.0 }.eval(0.5, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn logistic_stays_inside_bounds() {
        let a = Activation::Logistic { lower: 0.1, upper: 1.0, gain: 4.0, midpoint: 0.5 };
        a.validate().unwrap();
        assert!(a.eval(1e300) <= 1.0);
        assert!(a.eval(-1e300) >= 0.1);
    }

    #[test]
    fn activation_rejects_zero_floor() {
        assert!(Activation::Constant(0.0).validate().is_err());
        let a = Activation::LinearClipped { slope: 1.0, offset: 0.0, lower: 0.0, upper: 1.0 };
        assert!(a.validate().is_err());
    }

    #[test]
    fn hard_refractory_is_indicator_of_complement() {
        let r = Refractory::Hard { delta: 0.2 };
        assert_eq!(r.eval(0.0), 1.0);
        assert_eq!(r.eval(0.1), 0.0);
        assert_eq!(r.eval(0.2), 0.0);
        assert_eq!(r.eval(0.2000001), 1.0);
        assert!(Refractory::Hard { delta: 1.5 }.validate(1.0).is_err());
    }
}
