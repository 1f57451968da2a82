//! The singular profile `v = -ln(2d)` and the renormalized energy
//! `R[phi, v] = int |grad phi|^2 + 4 e^{2v} (e^{2 phi} - 1 - 2 phi) + 2 r[v] phi`
//! on a grid, with its gradient and Hessian action.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    apply_laplacian, dot, edge_inner, laplacian_method, laplacian_of_d, smoothed_distance_field, Domain, Grid,
    LaplacianMethod, ScalarField, SmoothingProfile,
};

/// Largest `|phi|` accepted inside `e^{2 phi}`.
pub const EXPONENT_CAP: f64 = 175.0;

/// `e^x - 1 - x` without cancellation for small `x`.
pub fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x2 * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x * (1.0 / 120.0 + x * (1.0 / 720.0 + x / 5040.0)))))
    } else {
        x.exp_m1() - x
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_exponent(phi: &[f64]) -> Result<()> {
    match phi.iter().position(|v| !(v.abs() <= EXPONENT_CAP)) {
        Some(node) => Err(Error::Overflow {
            node,
            value: phi[node].abs(),
            limit: EXPONENT_CAP,
        }),
        None => Ok(()),
    }
}

/// `v`, `r[v] = -Delta v + 4 e^{2v}`, the weight `4 e^{2v}` and `d` on the unknowns.
#[derive(Clone, Debug)]
pub struct SingularPart {
    pub d: ScalarField,
    pub v: ScalarField,
    pub weight: ScalarField,
    pub r: ScalarField,
    /// `Delta d` (zero for parts not built from a distance)
    pub laplacian_d: ScalarField,
    pub profile: Option<SmoothingProfile>,
    pub method: Option<LaplacianMethod>,
}

/// `v = -ln(2d)` with `d = F(delta)`.
///
/// The residual is `r = Delta d / d + (1 - |grad d|^2) / d^2` with `|grad d| = F'(delta)`;
/// where `d = delta` the second term vanishes and `r = Delta d / d`.
pub fn build_singular_part(domain: &Domain, profile: &SmoothingProfile, grid: &Arc<Grid>) -> Result<SingularPart> {
    if grid.is_empty() {
        return Err(Error::NoInteriorNodes { h: grid.h() });
    }
    let d = smoothed_distance_field(profile, grid);
    let lap = laplacian_of_d(domain, profile, grid);
    let v = d.map(|d| -(2.0 * d).ln());
    let weight = d.map(|d| 1.0 / (d * d));
    let r_values = d
        .values()
        .iter()
        .zip(lap.values())
        .zip(grid.delta())
        .map(|((&dk, &lk), &delta)| {
            let slope = profile.eval(delta).1;
            lk / dk + (1.0 - slope * slope) / (dk * dk)
        })
        .collect();
    Ok(SingularPart {
        r: ScalarField::new(grid.clone(), r_values)?,
        d,
        v,
        weight,
        laplacian_d: lap,
        profile: Some(*profile),
        method: Some(laplacian_method(domain)),
    })
}

impl SingularPart {
    /// A part with prescribed `v` and `r`; `d = e^{-v} / 2` keeps `d e^v = 1/2`.
    pub fn from_parts(v: ScalarField, r: ScalarField) -> Result<Self> {
        v.check_same(&r)?;
        let grid = v.grid().clone();
        Ok(Self {
            d: v.map(|v| 0.5 * (-v).exp()),
            weight: v.map(|v| 4.0 * (2.0 * v).exp()),
            laplacian_d: ScalarField::zeros(grid),
            v,
            r,
            profile: None,
            method: None,
        })
    }

    /// The part built from a solution `u` of the Liouville equation, whose residual is 0.
    pub fn from_solution(u: &ScalarField) -> Result<Self> {
        Self::from_parts(u.clone(), ScalarField::zeros(u.grid().clone()))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.v.grid()
    }
}

/// The three integrals of the energy and their sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub dirichlet_term: f64,
    pub nonlinear_term: f64,
    pub linear_term: f64,
    pub total: f64,
}

/// `R[phi, v]` by midpoint quadrature; the Dirichlet integral is the edge-difference
/// sum, which is exactly `<-Laplacian phi, phi> h^2`.
pub fn energy(phi: &ScalarField, sp: &SingularPart) -> Result<EnergyBreakdown> {
    phi.check_same(&sp.v)?;
    check_exponent(phi.values())?;
    let grid = phi.grid();
    let h2 = grid.h() * grid.h();
    let dirichlet_term = phi.dirichlet_energy();
    let nonlinear_term = h2
        * compensated_sum(
            phi.values()
                .iter()
                .zip(sp.weight.values())
                .map(|(&p, &w)| w * expm1_minus_x(2.0 * p)),
        );
    let linear_term = h2 * compensated_sum(phi.values().iter().zip(sp.r.values()).map(|(&p, &r)| 2.0 * r * p));
    Ok(EnergyBreakdown {
        dirichlet_term,
        nonlinear_term,
        linear_term,
        total: dirichlet_term + nonlinear_term + linear_term,
    })
}

/// `G(phi) = -Delta phi + 4 e^{2v} (e^{2 phi} - 1) + r[v]`; the derivative of the
/// energy at `phi` in direction `psi` is `2 <G, psi> h^2`.
pub fn energy_gradient(phi: &ScalarField, sp: &SingularPart) -> Result<ScalarField> {
    phi.check_same(&sp.v)?;
    check_exponent(phi.values())?;
    let mut out = vec![0.0; phi.len()];
    gradient_into(phi.values(), sp, &mut out);
    ScalarField::new(phi.grid().clone(), out)
}

pub(crate) fn gradient_into(phi: &[f64], sp: &SingularPart, out: &mut [f64]) {
    apply_laplacian(sp.grid(), phi, out);
    for (k, o) in out.iter_mut().enumerate() {
        *o = -*o + sp.weight.values()[k] * (2.0 * phi[k]).exp_m1() + sp.r.values()[k];
    }
}

/// Hessian of `R / 2` at a fixed `phi`: `-Delta + diag(8 e^{2v} e^{2 phi})`.
#[derive(Clone, Debug)]
pub struct Hessian {
    grid: Arc<Grid>,
    diag: Vec<f64>,
}

impl Hessian {
    pub fn at(phi: &ScalarField, sp: &SingularPart) -> Result<Self> {
        phi.check_same(&sp.v)?;
        check_exponent(phi.values())?;
        let diag = phi
            .values()
            .iter()
            .zip(sp.weight.values())
            .map(|(&p, &w)| 2.0 * w * (2.0 * p).exp())
            .collect();
        Ok(Self {
            grid: phi.grid().clone(),
            diag,
        })
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        apply_laplacian(&self.grid, x, out);
        for ((o, &xk), &dk) in out.iter_mut().zip(x).zip(&self.diag) {
            *o = -*o + dk * xk;
        }
    }

    /// Diagonal of the full operator, for Jacobi preconditioning.
    pub fn diagonal(&self) -> Vec<f64> {
        let c = 4.0 / (self.grid.h() * self.grid.h());
        self.diag.iter().map(|d| d + c).collect()
    }
}

/// `-Delta psi + 8 e^{2v} e^{2 phi} psi`.
pub fn hessian_apply(phi: &ScalarField, sp: &SingularPart, psi: &ScalarField) -> Result<ScalarField> {
    psi.check_same(phi)?;
    let hess = Hessian::at(phi, sp)?;
    let mut out = vec![0.0; psi.len()];
    hess.apply(psi.values(), &mut out);
    ScalarField::new(psi.grid().clone(), out)
}

/// `R[phi + s] - R[phi]` as `2 <G(phi), s> h^2 + int |grad s|^2 + int 4 e^{2v} e^{2 phi} (e^{2s} - 1 - 2s)`.
///
/// Algebraically equal to the difference of two energy evaluations, but free of
/// the cancellation that swamps that difference near a minimizer. `gradient` must
/// be `G(phi)`.
pub fn energy_delta(phi: &[f64], s: &[f64], gradient: &[f64], sp: &SingularPart) -> Result<f64> {
    let grid = sp.grid();
    let h2 = grid.h() * grid.h();
    if let Some(node) = phi.iter().zip(s).position(|(p, s)| !((p + s).abs() <= EXPONENT_CAP)) {
        return Err(Error::Overflow {
            node,
            value: (phi[node] + s[node]).abs(),
            limit: EXPONENT_CAP,
        });
    }
    let first = 2.0 * dot(gradient, s) * h2;
    let dirichlet = edge_inner(grid, s, s);
    let nonlinear = h2
        * compensated_sum(
            phi.iter()
                .zip(s)
                .zip(sp.weight.values())
                .map(|((&p, &sk), &w)| w * (2.0 * p).exp() * expm1_minus_x(2.0 * sk)),
        );
    Ok(first + dirichlet + nonlinear)
}

/// Two evaluations of `R[phi + w] - R[w]`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyGap {
    /// difference of two energy evaluations
    pub lhs: f64,
    /// `int |grad phi|^2 + 4 e^{2(v + w)} (e^{2 phi} - 1 - 2 phi)`
    pub rhs: f64,
}

impl EnergyGap {
    pub fn relative_discrepancy(&self) -> f64 {
        let scale = self.lhs.abs().max(self.rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.lhs - self.rhs).abs() / scale
        }
    }
}

pub fn energy_gap(phi: &ScalarField, w: &ScalarField, sp: &SingularPart) -> Result<EnergyGap> {
    let lhs = energy(&phi.add(w)?, sp)?.total - energy(w, sp)?.total;
    check_exponent(phi.values())?;
    let h2 = phi.grid().h() * phi.grid().h();
    let nonlinear = h2
        * compensated_sum(
            phi.values()
                .iter()
                .zip(w.values())
                .zip(sp.weight.values())
                .map(|((&p, &wk), &weight)| weight * (2.0 * wk).exp() * expm1_minus_x(2.0 * p)),
        );
    Ok(EnergyGap {
        lhs,
        rhs: phi.dirichlet_energy() + nonlinear,
    })
}
