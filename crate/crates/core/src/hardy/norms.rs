use crate::error::{Error, Result};
use crate::geometry::ScalarField;

use super::constants::phi_n;

fn gradient_norms(u: &ScalarField) -> Vec<f64> {
    u.gradient().iter().map(|g| g[0].hypot(g[1])).collect()
}

fn quadrature(u: &ScalarField, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let h2 = u.grid().h() * u.grid().h();
    let grads = gradient_norms(u);
    u.values()
        .iter()
        .zip(&grads)
        .zip(u.grid().delta())
        .map(|((&v, &g), &delta)| f(v, g, delta))
        .sum::<f64>()
        * h2
}

/// `M_p(u) = (int |grad u|^p + |u|^p / delta^p)^{1/p}` by midpoint quadrature.
pub fn m_norm(u: &ScalarField, p: f64) -> f64 {
    quadrature(u, |v, g, delta| g.powf(p) + (v.abs() / delta).powf(p)).powf(1.0 / p)
}

/// `(int |u|^q / delta^N)^{1/q}`.
pub fn weighted_lhs(u: &ScalarField, q: f64, n: usize) -> f64 {
    let nf = n as f64;
    quadrature(u, |v, _, delta| v.abs().powf(q) / delta.powf(nf)).powf(1.0 / q)
}

/// `(int |grad u|^p / delta^{N-p} + |u|^p / delta^N)^{1/p}`.
pub fn weighted_rhs(u: &ScalarField, p: f64, n: usize) -> f64 {
    let nf = n as f64;
    quadrature(u, |v, g, delta| {
        g.powf(p) / delta.powf(nf - p) + v.abs().powf(p) / delta.powf(nf)
    })
    .powf(1.0 / p)
}

/// `||u / delta||_2 / ||grad u||_2`, an empirical lower bound for the Hardy constant.
pub fn hardy_quotient(u: &ScalarField) -> Result<f64> {
    let grad = quadrature(u, |_, g, _| g * g).sqrt();
    if !(grad > 0.0) {
        return Err(Error::Degenerate("zero gradient norm in the Hardy quotient".into()));
    }
    let weighted = quadrature(u, |v, _, delta| (v / delta).powi(2)).sqrt();
    Ok(weighted / grad)
}

/// `int (e^{2u} - 1 - 2u) / delta^2`, finite for Lipschitz `u` vanishing on the boundary.
pub fn exponential_integral(u: &ScalarField) -> f64 {
    quadrature(u, |v, _, delta| ((2.0 * v).exp_m1() - 2.0 * v) / (delta * delta))
}

/// `int Phi_N(u / c1) / delta^N`.
pub fn trudinger_integral(u: &ScalarField, c1: f64, n: usize) -> Result<f64> {
    let h2 = u.grid().h() * u.grid().h();
    let nf = n as f64;
    let mut acc = 0.0;
    for (&v, &delta) in u.values().iter().zip(u.grid().delta()) {
        acc += phi_n(v / c1, n, 100_000)? / delta.powf(nf);
    }
    Ok(acc * h2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, Grid};
    use std::f64::consts::PI;

    fn sine(h: f64) -> ScalarField {
        let grid = Grid::new(&Domain::unit_square(), h).unwrap();
        ScalarField::from_fn(grid, |p| (PI * p[0]).sin() * (PI * p[1]).sin())
    }

    #[test]
    fn zero_field() {
        let grid = Grid::new(&Domain::unit_disk(), 1.0 / 16.0).unwrap();
        let u = ScalarField::zeros(grid);
        assert_eq!(m_norm(&u, 2.0), 0.0);
        assert_eq!(weighted_lhs(&u, 4.0, 2), 0.0);
        assert_eq!(weighted_rhs(&u, 2.0, 2), 0.0);
        assert!(matches!(hardy_quotient(&u), Err(Error::Degenerate(_))));
    }

    #[test]
    fn homogeneity_and_parity() {
        let u = sine(1.0 / 32.0);
        let m = m_norm(&u, 2.0);
        assert!((m_norm(&u.scaled(-3.0), 2.0) - 3.0 * m).abs() < 1e-12 * m);
        let l = weighted_lhs(&u, 4.0, 2);
        assert!((weighted_lhs(&u.scaled(2.0), 4.0, 2) - 2.0 * l).abs() < 1e-12 * l);
        assert_eq!(weighted_lhs(&u.scaled(-1.0), 4.0, 2), l);
        let r = weighted_rhs(&u, 2.0, 2);
        assert!((weighted_rhs(&u.scaled(-0.5), 2.0, 2) - 0.5 * r).abs() < 1e-12 * r);
        let hq = hardy_quotient(&u).unwrap();
        assert!((hardy_quotient(&u.scaled(-7.0)).unwrap() - hq).abs() < 1e-12 * hq);
    }

    #[test]
    fn rhs_reduces_to_m_norm_when_p_equals_n() {
        let u = sine(1.0 / 32.0);
        assert!((weighted_rhs(&u, 2.0, 2) - m_norm(&u, 2.0)).abs() < 1e-13);
    }

    #[test]
    fn m_norm_converges_under_refinement() {
        let values: Vec<f64> = [64.0, 128.0, 256.0]
            .iter()
            .map(|&n| m_norm(&sine(1.0 / n), 2.0))
            .collect();
        // Richardson extrapolation from the observed ratio of differences
        let ratio = (values[1] - values[0]) / (values[2] - values[1]);
        let order = ratio.abs().log2();
        let limit = values[2] + (values[2] - values[1]) / (2f64.powf(order) - 1.0);
        assert!(((values[2] - limit) / limit).abs() < 0.02, "{values:?} -> {limit}");
    }

    #[test]
    fn exponential_integral_is_stable() {
        let domain = Domain::unit_disk();
        let vals: Vec<f64> = [64.0, 128.0]
            .iter()
            .map(|&n| {
                let grid = Grid::new(&domain, 1.0 / n).unwrap();
                exponential_integral(&ScalarField::from_fn(grid, |p| 1.0 - p[0].hypot(p[1])))
            })
            .collect();
        assert!(vals.iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(((vals[1] - vals[0]) / vals[1]).abs() < 0.05, "{vals:?}");
    }
}
