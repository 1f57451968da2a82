use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{Domain, Grid};
use crate::whitney::DerivedConstants;

use super::constants::{c2_constant, sigma_q, sobolev_bound, C2Value};
use super::family::TestFunction;
use super::norms::{m_norm, trudinger_integral, weighted_lhs, weighted_rhs};

/// Relative quadrature band applied to each side before comparing.
pub const QUADRATURE_BAND: f64 = 0.01;

/// One checked inequality `lhs <= rhs_bound`.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityRecord {
    pub inequality: &'static str,
    pub domain: &'static str,
    pub function: String,
    pub q: f64,
    pub lhs: f64,
    pub rhs_bound: f64,
    pub ratio: f64,
    pub pass: bool,
}

fn banded(lhs: f64, rhs: f64) -> bool {
    lhs.is_finite() && rhs.is_finite() && lhs * (1.0 - QUADRATURE_BAND) <= rhs * (1.0 + QUADRATURE_BAND)
}

/// `(int |u|^q / delta^2)^{1/q} <= Sigma_q M_2(u)` for every function and exponent.
pub fn weighted_sobolev_suite(
    domain: &Domain,
    grid: &Arc<Grid>,
    dc: &DerivedConstants,
    family: &[TestFunction],
    qs: &[f64],
) -> Result<Vec<InequalityRecord>> {
    let mut out = Vec::new();
    for func in family {
        let u = func.evaluate(domain, grid);
        let rhs = weighted_rhs(&u, 2.0, 2);
        for &q in qs {
            let lhs = weighted_lhs(&u, q, 2);
            let bound = sigma_q(dc, 2, 2.0, q)? * rhs;
            out.push(InequalityRecord {
                inequality: "weighted_sobolev",
                domain: domain.kind(),
                function: func.label(),
                q,
                lhs,
                rhs_bound: bound,
                ratio: lhs / bound,
                pass: banded(lhs, bound),
            });
        }
    }
    Ok(out)
}

/// `int Phi_2(u / c1) / delta^2 <= c2` for `u` normalized to `M_2(u) = 1`.
pub fn trudinger_suite(
    domain: &Domain,
    grid: &Arc<Grid>,
    dc: &DerivedConstants,
    family: &[TestFunction],
    c1: f64,
) -> Result<Vec<InequalityRecord>> {
    let c2 = c2_constant(c1, 2, dc, 100_000)?;
    let mut out = Vec::new();
    for func in family {
        let u = func.evaluate(domain, grid);
        let u = u.scaled(1.0 / m_norm(&u, 2.0));
        let lhs = trudinger_integral(&u, c1, 2)?;
        let (bound, pass) = match c2 {
            C2Value::Converged { value, .. } => (value, banded(lhs, value)),
            C2Value::Diverged { .. } => (f64::INFINITY, true),
        };
        out.push(InequalityRecord {
            inequality: "trudinger_integrability",
            domain: domain.kind(),
            function: func.label(),
            q: 0.0,
            lhs,
            rhs_bound: bound,
            ratio: lhs / bound,
            pass,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaRow {
    pub q: f64,
    pub s_q: f64,
    pub sigma_q: f64,
    /// `Sigma_q / q^{1/2 + 1/q}`
    pub normalized: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthCheck {
    pub max_normalized: f64,
    pub nonincreasing: bool,
    pub pass: bool,
}

/// `Sigma_q` for `N = p = 2` over the given exponents.
pub fn sigma_scan(dc: &DerivedConstants, qs: impl IntoIterator<Item = f64>) -> Result<Vec<SigmaRow>> {
    qs.into_iter()
        .map(|q| {
            let sigma = sigma_q(dc, 2, 2.0, q)?;
            Ok(SigmaRow {
                q,
                s_q: sobolev_bound(2, q)?,
                sigma_q: sigma,
                normalized: sigma / q.powf(0.5 + 1.0 / q),
            })
        })
        .collect()
}

/// The normalized sequence must be finite and nonincreasing, hence bounded
/// by its first entry.
pub fn growth_check(rows: &[SigmaRow]) -> GrowthCheck {
    let max_normalized = rows.iter().map(|r| r.normalized).fold(0.0, f64::max);
    let nonincreasing = rows
        .windows(2)
        .all(|w| w[1].normalized <= w[0].normalized * (1.0 + 1e-12));
    GrowthCheck {
        max_normalized,
        nonincreasing,
        pass: nonincreasing && max_normalized.is_finite(),
    }
}

pub fn write_sigma_csv<W: Write>(rows: &[SigmaRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy::{default_c1, standard_family};
    use crate::whitney::{BumpFunction, WhitneyParams};

    fn defaults() -> DerivedConstants {
        DerivedConstants::compute(&WhitneyParams::default_for(2), &BumpFunction::new(1.05, 2).unwrap()).unwrap()
    }

    #[test]
    fn suites_pass_on_the_square() {
        let domain = Domain::unit_square();
        let grid = Grid::new(&domain, 1.0 / 32.0).unwrap();
        let dc = defaults();
        let family = standard_family(&domain);
        let records = weighted_sobolev_suite(&domain, &grid, &dc, &family, &[3.0, 20.0]).unwrap();
        assert_eq!(records.len(), 2 * family.len());
        assert!(records.iter().all(|r| r.pass && r.ratio < 1.0));
        let trud = trudinger_suite(&domain, &grid, &dc, &family, default_c1(&dc, 2)).unwrap();
        assert!(trud.iter().all(|r| r.pass));
    }

    #[test]
    fn sigma_csv_has_header_and_rows() {
        let rows = sigma_scan(&defaults(), (3..=6).map(f64::from)).unwrap();
        assert!(growth_check(&rows).pass);
        let mut buf = Vec::new();
        write_sigma_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("q,s_q,sigma_q,normalized\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
