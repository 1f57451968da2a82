use serde::Serialize;

use crate::error::{Error, Result};

/// `exp(-1/u)`-based smooth step from 0 at `u <= 0` to 1 at `u >= 1`.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

pub fn smooth_step_derivative(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let v = 1.0 - u;
    let a = (-1.0 / u).exp();
    let b = (-1.0 / v).exp();
    let denom = a + b;
    (a * b * (1.0 / (u * u) + 1.0 / (v * v))) / (denom * denom)
}

/// Reference bump on the unit cube: a tensor product of a 1D profile that
/// equals 1 on `[-1/2, 1/2]` and vanishes outside `(-eta'/2, eta'/2)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BumpFunction {
    pub eta_prime: f64,
    pub dim: usize,
}

impl BumpFunction {
    pub fn new(eta_prime: f64, dim: usize) -> Result<Self> {
        if !(eta_prime > 1.0 && eta_prime.is_finite()) || dim == 0 {
            return Err(Error::InvalidParams(format!(
                "bump needs eta' > 1 and dim >= 1, got {eta_prime}, {dim}"
            )));
        }
        Ok(Self { eta_prime, dim })
    }

    fn ramp_width(&self) -> f64 {
        0.5 * (self.eta_prime - 1.0)
    }

    /// 1D profile and its derivative.
    pub fn profile(&self, t: f64) -> (f64, f64) {
        let a = t.abs();
        if a <= 0.5 {
            return (1.0, 0.0);
        }
        let u = (0.5 * self.eta_prime - a) / self.ramp_width();
        let value = smooth_step(u);
        let slope = -smooth_step_derivative(u) / self.ramp_width() * t.signum();
        (value, slope)
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        y.iter().map(|&t| self.profile(t).0).product()
    }

    pub fn value_and_gradient(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let parts: Vec<(f64, f64)> = y.iter().map(|&t| self.profile(t)).collect();
        let value = parts.iter().map(|p| p.0).product();
        let grad = (0..parts.len())
            .map(|i| {
                parts
                    .iter()
                    .enumerate()
                    .map(|(j, p)| if i == j { p.1 } else { p.0 })
                    .product()
            })
            .collect();
        (value, grad)
    }

    /// Maximum of the smooth step's derivative on `(0, 1)`, located by a dense
    /// scan refined with golden-section search.
    pub fn max_step_slope() -> f64 {
        let n = 10_000;
        let (mut best_u, mut best) = (0.5, smooth_step_derivative(0.5));
        for i in 1..n {
            let u = i as f64 / n as f64;
            let v = smooth_step_derivative(u);
            if v > best {
                best = v;
                best_u = u;
            }
        }
        let (mut a, mut b) = (best_u - 1.0 / n as f64, best_u + 1.0 / n as f64);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if smooth_step_derivative(c) > smooth_step_derivative(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best.max(smooth_step_derivative(0.5 * (a + b)))
    }

    /// Upper bound on `|grad phi|` at unit scale: `sqrt(N) max |profile'|`.
    pub fn gradient_bound(&self) -> f64 {
        (self.dim as f64).sqrt() * Self::max_step_slope() / self.ramp_width()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn core_and_support() {
        let b = BumpFunction::new(1.05, 2).unwrap();
        assert_eq!(b.value(&[0.5, -0.5]), 1.0);
        assert_eq!(b.value(&[0.0, 0.0]), 1.0);
        assert_eq!(b.value(&[0.525, 0.0]), 0.0);
        assert_eq!(b.value(&[0.0, -0.6]), 0.0);
        let mid = b.value(&[0.5125, 0.0]);
        assert!((mid - 0.5).abs() < 1e-12);
    }

    #[test]
    fn step_slope_peak_is_two_at_midpoint() {
        // symmetric step: the derivative peaks at u = 1/2 where it equals 2
        let s = BumpFunction::max_step_slope();
        assert!((s - smooth_step_derivative(0.5)).abs() < 1e-9);
        assert!((smooth_step_derivative(0.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_central_differences() {
        let b = BumpFunction::new(1.3, 2).unwrap();
        for &t in &[0.51, 0.55, 0.6, 0.63, -0.52, -0.61] {
            let eps = 1e-6;
            let fd = (b.profile(t + eps).0 - b.profile(t - eps).0) / (2.0 * eps);
            assert!((fd - b.profile(t).1).abs() < 1e-6, "{t}: {fd} vs {}", b.profile(t).1);
        }
    }

    proptest! {
        #[test]
        fn bounded_and_gradient_within_bound(x in -0.7f64..0.7, y in -0.7f64..0.7, ep in 1.01f64..1.4) {
            let b = BumpFunction::new(ep, 2).unwrap();
            let (v, g) = b.value_and_gradient(&[x, y]);
            prop_assert!((0.0..=1.0).contains(&v));
            let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
            prop_assert!(norm <= b.gradient_bound() * (1.0 + 1e-12));
            if x.abs().max(y.abs()) >= 0.5 * ep { prop_assert_eq!(v, 0.0); }
        }
    }
}
