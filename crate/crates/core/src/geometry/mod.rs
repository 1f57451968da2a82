//! Domains, boundary distance, the smoothed distance `d` and grid operators.

mod domain;
mod grid;
mod profile;

use std::sync::Arc;

pub use domain::{point_segment_distance, Domain};
pub(crate) use grid::{apply_laplacian, dot, edge_inner};
pub use grid::{parse_spacing, Grid, NodeClass, ScalarField};
pub use profile::SmoothingProfile;

use crate::error::{Error, Result};

/// Default profile for a domain: `t0 = min(0.2, inradius / 4)`.
pub fn default_profile(domain: &Domain) -> SmoothingProfile {
    SmoothingProfile::for_inradius(domain.inradius())
}

/// `d(p) = F(delta(p))` for `p` in the domain.
pub fn smoothed_distance(domain: &Domain, profile: &SmoothingProfile, p: &[f64]) -> Result<f64> {
    if !domain.contains(p) {
        return Err(Error::OutsideDomain { point: p.to_vec() });
    }
    Ok(profile.value(domain.distance(p)))
}

/// `d` sampled at every unknown of the grid.
pub fn smoothed_distance_field(profile: &SmoothingProfile, grid: &Arc<Grid>) -> ScalarField {
    let values = grid.delta().iter().map(|&t| profile.value(t)).collect();
    ScalarField::new(grid.clone(), values).expect("one value per unknown")
}

/// How `laplacian_of_d` evaluated `Delta d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianMethod {
    /// `F''(delta) + F'(delta) Delta(delta)` with the radial closed form.
    Analytic,
    /// Five-point stencil on `d`, extended by the signed distance outside.
    FiniteDifference,
}

/// `Delta d` at the unknowns: closed form for disks and annuli, five-point
/// stencil otherwise.
pub fn laplacian_of_d(domain: &Domain, profile: &SmoothingProfile, grid: &Arc<Grid>) -> ScalarField {
    match domain {
        Domain::Disk { .. } | Domain::Annulus { .. } => {
            laplacian_of_d_analytic(domain, profile, grid).expect("radial domains have a closed form")
        }
        _ => laplacian_of_d_fd(domain, profile, grid),
    }
}

pub fn laplacian_method(domain: &Domain) -> LaplacianMethod {
    match domain {
        Domain::Disk { .. } | Domain::Annulus { .. } => LaplacianMethod::Analytic,
        _ => LaplacianMethod::FiniteDifference,
    }
}

/// Radial closed form; `Delta delta = -1/r` toward an outer circle and `+1/r`
/// toward an inner one.
pub fn laplacian_of_d_analytic(domain: &Domain, profile: &SmoothingProfile, grid: &Arc<Grid>) -> Result<ScalarField> {
    let (center, radii) = match domain {
        Domain::Disk { center, .. } => (center, None),
        Domain::Annulus {
            center,
            r_inner,
            r_outer,
        } => (center, Some((*r_inner, *r_outer))),
        _ => {
            return Err(Error::Unsupported(format!(
                "no closed-form Laplacian of d for a {}",
                domain.kind()
            )))
        }
    };
    let values = grid
        .positions()
        .zip(grid.delta())
        .map(|(p, &delta)| {
            let (_, slope, curvature) = profile.eval(delta);
            if slope == 0.0 {
                return curvature;
            }
            let r = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
            let toward_inner = radii.is_some_and(|(ri, ro)| r - ri <= ro - r);
            let lap_delta = if toward_inner { 1.0 / r } else { -1.0 / r };
            curvature + slope * lap_delta
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}

fn extended_d(domain: &Domain, profile: &SmoothingProfile, p: &[f64; 2]) -> f64 {
    let s = domain.signed_distance(p);
    if s > 0.0 {
        profile.value(s)
    } else {
        s
    }
}

/// Five-point stencil applied to `d`, using the signed distance (where `F` is the
/// identity) at stencil points outside the domain.
pub fn laplacian_of_d_fd(domain: &Domain, profile: &SmoothingProfile, grid: &Arc<Grid>) -> ScalarField {
    let h = grid.h();
    let values = grid
        .positions()
        .map(|p| {
            let c = extended_d(domain, profile, &p);
            let sum: f64 = [[h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]]
                .iter()
                .map(|o| extended_d(domain, profile, &[p[0] + o[0], p[1] + o[1]]))
                .sum();
            (sum - 4.0 * c) / (h * h)
        })
        .collect();
    ScalarField::new(grid.clone(), values).expect("one value per unknown")
}

/// Unknowns whose five-point stencil straddles a ridge of `delta` (polygon
/// nearest edge changes) while `d` is not yet saturated. Stencil values of
/// `Delta d` there are not approximations of a smooth function.
pub fn ridge_nodes(domain: &Domain, profile: &SmoothingProfile, grid: &Arc<Grid>) -> Vec<usize> {
    let h = grid.h();
    let vertices = match domain {
        Domain::Polygon { vertices } => vertices.clone(),
        Domain::Rectangle { corner_min, corner_max } => vec![
            [corner_min[0], corner_min[1]],
            [corner_max[0], corner_min[1]],
            [corner_max[0], corner_max[1]],
            [corner_min[0], corner_max[1]],
        ],
        Domain::Disk { .. } => return Vec::new(),
        Domain::Annulus {
            center,
            r_inner,
            r_outer,
        } => {
            let mid = 0.5 * (r_inner + r_outer);
            return grid
                .positions()
                .enumerate()
                .filter(|(k, p)| {
                    let r = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
                    (r - mid).abs() <= h && profile.eval(grid.delta()[*k]).1 > 0.0
                })
                .map(|(k, _)| k)
                .collect();
        }
    };
    grid.positions()
        .enumerate()
        .filter(|(k, p)| {
            if profile.eval(grid.delta()[*k] + h).1 == 0.0 {
                return false;
            }
            let e = domain::nearest_edge(&vertices, *p);
            [[h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]]
                .iter()
                .any(|o| domain::nearest_edge(&vertices, [p[0] + o[0], p[1] + o[1]]) != e)
        })
        .map(|(k, _)| k)
        .collect()
}
