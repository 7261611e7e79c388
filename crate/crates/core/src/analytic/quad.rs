//! Fixed-step quadrature and cubic Hermite helpers.

/// One Simpson panel of width `w`.
#[inline]
pub fn simpson_panel(fa: f64, fm: f64, fb: f64, w: f64) -> f64 {
    w / 6.0 * (fa + 4.0 * fm + fb)
}

/// Composite Simpson rule with `panels` panels on `[a, b]`.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let w = (b - a) / panels as f64;
    let mut acc = 0.0;
    let mut fa = f(a);
    for k in 0..panels {
        let x0 = a + k as f64 * w;
        let fb = f(a + (k + 1) as f64 * w);
        acc += simpson_panel(fa, f(x0 + 0.5 * w), fb, w);
        fa = fb;
    }
    acc
}

/// Composite Simpson rule on equally spaced samples (odd length).
pub fn simpson_samples(values: &[f64], step: f64) -> f64 {
    debug_assert!(values.len() % 2 == 1);
    values.windows(3).step_by(2).map(|w| simpson_panel(w[0], w[1], w[2], 2.0 * step)).sum()
}

/// Cubic Hermite interpolant on `[0, h]` at `t * h`, from end values and
/// derivatives.
#[inline]
pub fn hermite(v0: f64, v1: f64, d0: f64, d1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    v0 * (2.0 * t3 - 3.0 * t2 + 1.0) + h * d0 * (t3 - 2.0 * t2 + t) + v1 * (3.0 * t2 - 2.0 * t3) + h * d1 * (t3 - t2)
}

/// Integral of the Hermite interpolant over `[0, tau * h]`.
#[inline]
pub fn hermite_integral(v0: f64, v1: f64, d0: f64, d1: f64, h: f64, tau: f64) -> f64 {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let t4 = t3 * tau;
    h * (v0 * (t4 / 2.0 - t3 + tau)
        + h * d0 * (t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0)
        + v1 * (t3 - t4 / 2.0)
        + h * d1 * (t4 / 4.0 - t3 / 3.0))
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Composite five-point Gauss-Legendre rule. Never evaluates `f` at the ends.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let w = (b - a) / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let c = a + (k as f64 + 0.5) * w;
        let mut s = 0.0;
        for (x, wt) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            s += wt * f(c + 0.5 * w * x);
        }
        acc += 0.5 * w * s;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let f = |x: f64| 3.0 * x * x * x - x + 2.0;
        let exact = 0.75 * 16.0 - 2.0 + 4.0;
        assert!((simpson(f, 0.0, 2.0, 3) - exact).abs() < 1e-12);
        let xs: Vec<f64> = (0..=6).map(|k| f(k as f64 / 3.0)).collect();
        assert!((simpson_samples(&xs, 1.0 / 3.0) - exact).abs() < 1e-12);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |x: f64| x * x * x - 2.0 * x;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let (a, h) = (0.3, 0.2);
        for t in [0.0, 0.25, 0.5, 1.0] {
            let v = hermite(f(a), f(a + h), df(a), df(a + h), h, t);
            assert!((v - f(a + t * h)).abs() < 1e-14);
        }
        let anti = |x: f64| x.powi(4) / 4.0 - x * x;
        let got = hermite_integral(f(a), f(a + h), df(a), df(a + h), h, 0.6);
        assert!((got - (anti(a + 0.6 * h) - anti(a))).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_handles_endpoint_singularity() {
        let got = gauss_legendre(libm::sqrt, 0.0, 1.0, 100);
        assert!((got - 2.0 / 3.0).abs() < 1e-5);
        let got = gauss_legendre(|x| 1.0 / libm::sqrt(x), 0.0, 1.0, 400);
        assert!((got - 2.0).abs() < 1e-2);
        let got = gauss_legendre(libm::exp, 0.0, 1.0, 2);
        assert!((got - (core::f64::consts::E - 1.0)).abs() < 1e-13);
    }
}
