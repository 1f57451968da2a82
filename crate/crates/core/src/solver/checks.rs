use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::{energy, energy_gap, SingularPart};
use crate::error::Result;
use crate::geometry::{Grid, ScalarField};

use super::SolveReport;

/// Width of the boundary layer left out of the disk comparison (`d <= 0.05`).
pub const ORACLE_LAYER: f64 = 0.05;

/// Maximal solution on the disk `|x - c| < R`: `u*(x) = ln(R / (R^2 - |x - c|^2))`.
pub fn exact_disk_solution(center: [f64; 2], radius: f64, p: [f64; 2]) -> f64 {
    let rho2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
    (radius / (radius * radius - rho2)).ln()
}

/// `Delta u* = 4 R^2 / (R^2 - rho^2)^2`, which is also `4 e^{2 u*}`.
pub fn exact_disk_laplacian(center: [f64; 2], radius: f64, p: [f64; 2]) -> f64 {
    let rho2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
    let r2 = radius * radius;
    4.0 * r2 / (r2 - rho2).powi(2)
}

/// `max |-Delta_h u* + 4 e^{2u*}|` over unknowns at boundary distance above
/// `threshold`, with `u*` sampled at the stencil points.
pub fn oracle_stencil_residual(center: [f64; 2], radius: f64, grid: &Grid, threshold: f64) -> f64 {
    let h = grid.h();
    let u = |p: [f64; 2]| exact_disk_solution(center, radius, p);
    grid.positions()
        .zip(grid.delta())
        .filter(|(_, &delta)| delta > threshold)
        .map(|(p, _)| {
            let c = u(p);
            let sum: f64 = [[h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]]
                .iter()
                .map(|o| u([p[0] + o[0], p[1] + o[1]]))
                .sum();
            let lap = (sum - 4.0 * c) / (h * h);
            (-lap + 4.0 * (2.0 * c).exp()).abs()
        })
        .fold(0.0, f64::max)
}

/// Comparison of a computed `u` with the exact maximal solution on a disk.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiskOracle {
    /// sup error over nodes with `d > excluded_layer_width`
    pub sup_error: f64,
    pub l2_error: f64,
    pub excluded_layer_width: f64,
    pub compared_nodes: usize,
    pub excluded_nodes: usize,
    /// oracle self-check: `max |-Delta_h u* + 4 e^{2u*}|` on `delta > 0.1`
    pub oracle_stencil_residual: f64,
}

pub fn disk_oracle(u: &ScalarField, d: &ScalarField, center: [f64; 2], radius: f64) -> Result<DiskOracle> {
    u.check_same(d)?;
    let grid = u.grid();
    let (mut sup, mut sq, mut compared) = (0.0f64, 0.0, 0);
    for (k, (&uk, &dk)) in u.values().iter().zip(d.values()).enumerate() {
        if dk <= ORACLE_LAYER {
            continue;
        }
        let e = (uk - exact_disk_solution(center, radius, grid.position(k))).abs();
        sup = sup.max(e);
        sq += e * e;
        compared += 1;
    }
    Ok(DiskOracle {
        sup_error: sup,
        l2_error: (sq * grid.h() * grid.h()).sqrt(),
        excluded_layer_width: ORACLE_LAYER,
        compared_nodes: compared,
        excluded_nodes: grid.len() - compared,
        oracle_stencil_residual: oracle_stencil_residual(center, radius, grid, 0.1),
    })
}

/// `|-Delta_h u + 4 e^{2u}| d^2` at unknowns with a full stencil, 0 elsewhere.
pub fn liouville_residual(u: &ScalarField, d: &ScalarField) -> Result<ScalarField> {
    u.check_same(d)?;
    let lap = u.laplacian();
    let grid = u.grid();
    let values = (0..u.len())
        .map(|k| {
            if !grid.has_full_stencil(k) {
                return 0.0;
            }
            let uk = u.values()[k];
            (-lap.values()[k] + 4.0 * (2.0 * uk).exp()).abs() * d.values()[k].powi(2)
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}

/// Largest change of `field` under the quarter turn `(i, j) -> (n - 1 - j, i)` of
/// the node lattice; `None` if the unknown set is not invariant.
pub fn rotation_deviation(field: &ScalarField) -> Option<f64> {
    let grid = field.grid();
    let (nx, ny) = grid.shape();
    if nx != ny {
        return None;
    }
    let mut dev = 0.0f64;
    for (k, &value) in field.values().iter().enumerate() {
        let (i, j) = grid.grid_coords(k);
        let turned = grid.unknown_at(nx - 1 - j, i)?;
        dev = dev.max((value - field.values()[turned]).abs());
    }
    Some(dev)
}

/// Smooth random field vanishing at the boundary: a random low-frequency
/// trigonometric sum over the bounding box, tapered by `delta / max delta` and
/// normalized to sup norm 1.
pub fn random_dirichlet_field(grid: &Arc<Grid>, rng: &mut impl Rng) -> ScalarField {
    let (nx, ny) = grid.shape();
    let modes: Vec<(f64, f64, f64, f64, f64)> = (1..=4)
        .flat_map(|k1| (1..=4).map(move |k2| (k1 as f64, k2 as f64)))
        .map(|(k1, k2)| {
            let c = rng.gen_range(-1.0..1.0) / (k1 * k1 + k2 * k2);
            (k1, k2, c, rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    // separable modes: tabulate the x and y factors once per column and row
    let table = |n: usize, k: f64, phase: f64| -> Vec<f64> {
        let last = (n - 1).max(1) as f64;
        (0..n).map(|i| (k * PI * i as f64 / last + phase).sin()).collect()
    };
    let tables: Vec<(f64, Vec<f64>, Vec<f64>)> = modes
        .iter()
        .map(|&(k1, k2, c, a, b)| (c, table(nx, k1, a), table(ny, k2, b)))
        .collect();
    let delta_max = grid.delta().iter().fold(0.0f64, |m, &t| m.max(t));
    let values: Vec<f64> = (0..grid.len())
        .zip(grid.delta())
        .map(|(k, &delta)| {
            let (i, j) = grid.grid_coords(k);
            let s: f64 = tables.iter().map(|(c, sx, sy)| c * sx[i] * sy[j]).sum();
            s * delta / delta_max
        })
        .collect();
    let field = ScalarField::new(grid.clone(), values).expect("one value per unknown");
    let sup = field.max_abs();
    if sup > 0.0 {
        field.scaled(1.0 / sup)
    } else {
        field
    }
}

/// `|grad w|_2 <= 2 H |Delta d|_2` for the converged perturbation.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct GradientBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub hardy_constant: f64,
    pub laplacian_d_norm: f64,
    /// `rhs - lhs`
    pub margin: f64,
    pub pass: bool,
}

pub fn gradient_bound_check(report: &SolveReport, sp: &SingularPart, hardy_constant: f64) -> GradientBoundCheck {
    let lhs = report.w.dirichlet_energy().sqrt();
    let laplacian_d_norm = sp.laplacian_d.l2_norm();
    let rhs = 2.0 * hardy_constant * laplacian_d_norm;
    GradientBoundCheck {
        lhs,
        rhs,
        hardy_constant,
        laplacian_d_norm,
        margin: rhs - lhs,
        pass: lhs <= rhs,
    }
}

/// `-int 2 r phi <= K |grad phi|_2` with `K = 2 H |Delta d|_2` over random fields.
#[derive(Clone, Debug, Serialize)]
pub struct KvCheck {
    pub k: f64,
    pub trials: usize,
    pub violations: usize,
    /// largest `(-int 2 r phi) / (K |grad phi|_2)`
    pub max_ratio: f64,
    pub pass: bool,
}

pub fn kv_check(sp: &SingularPart, hardy_constant: f64, trials: usize, seed: u64) -> KvCheck {
    let k = 2.0 * hardy_constant * sp.laplacian_d.l2_norm();
    let grid = sp.grid();
    let h2 = grid.h() * grid.h();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut violations, mut max_ratio) = (0, f64::NEG_INFINITY);
    for _ in 0..trials {
        let phi = random_dirichlet_field(grid, &mut rng);
        let lhs = -2.0 * h2 * phi.values().iter().zip(sp.r.values()).map(|(p, r)| p * r).sum::<f64>();
        let rhs = k * phi.dirichlet_energy().sqrt();
        if lhs > rhs {
            violations += 1;
        }
        max_ratio = max_ratio.max(lhs / rhs);
    }
    KvCheck {
        k,
        trials,
        violations,
        max_ratio,
        pass: violations == 0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AmplitudeSummary {
    pub amplitude: f64,
    /// smallest `R[w + phi] - R[w]`
    pub min_gap: f64,
    pub max_gap: f64,
    pub mean_gap: f64,
    /// gaps below `-slack`
    pub negative: usize,
    /// largest relative discrepancy between the two evaluations of the gap
    pub max_discrepancy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimizerReport {
    pub trials: usize,
    pub seed: u64,
    pub slack: f64,
    pub discrepancy_tol: f64,
    pub amplitudes: Vec<AmplitudeSummary>,
    /// `R[0] = 0 >= R[w]`
    pub energy_at_w: f64,
    pub energy_at_zero: f64,
    /// mean gap increases with the amplitude
    pub gaps_grow: bool,
    pub pass: bool,
}

pub const PERTURBATION_AMPLITUDES: [f64; 3] = [1e-3, 1e-2, 1e-1];

/// Perturbs the converged `w` by `trials` random smooth Dirichlet fields at each
/// amplitude and compares the energy gap with its closed form.
pub fn verify_minimizer(report: &SolveReport, sp: &SingularPart, trials: usize, seed: u64) -> Result<MinimizerReport> {
    let slack = 1e-8;
    let discrepancy_tol = 1e-6;
    let w = &report.w;
    let grid = w.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amplitudes = Vec::new();
    for amplitude in PERTURBATION_AMPLITUDES {
        let mut s = AmplitudeSummary {
            amplitude,
            min_gap: f64::INFINITY,
            max_gap: f64::NEG_INFINITY,
            mean_gap: 0.0,
            negative: 0,
            max_discrepancy: 0.0,
        };
        for _ in 0..trials {
            let phi = random_dirichlet_field(grid, &mut rng).scaled(amplitude);
            let gap = energy_gap(&phi, w, sp)?;
            s.min_gap = s.min_gap.min(gap.lhs);
            s.max_gap = s.max_gap.max(gap.lhs);
            s.mean_gap += gap.lhs / trials as f64;
            if gap.lhs < -slack {
                s.negative += 1;
            }
            s.max_discrepancy = s.max_discrepancy.max(gap.relative_discrepancy());
        }
        amplitudes.push(s);
    }
    let energy_at_w = energy(w, sp)?.total;
    let energy_at_zero = energy(&ScalarField::zeros(grid.clone()), sp)?.total;
    let gaps_grow = amplitudes.windows(2).all(|p| p[1].mean_gap > p[0].mean_gap);
    let pass = amplitudes
        .iter()
        .all(|s| s.negative == 0 && s.max_discrepancy < discrepancy_tol)
        && energy_at_zero >= energy_at_w
        && gaps_grow;
    Ok(MinimizerReport {
        trials,
        seed,
        slack,
        discrepancy_tol,
        amplitudes,
        energy_at_w,
        energy_at_zero,
        gaps_grow,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;

    #[test]
    fn exact_solution_satisfies_equation_pointwise() {
        // independent check of the closed form: Richardson-extrapolated central
        // differences of u* against 4 e^{2u*}
        let c = [0.1, -0.2];
        let r = 1.3;
        for p in [[0.1, -0.2], [0.5, 0.3], [-0.7, -0.6], [0.9, -0.9]] {
            let u = |q: [f64; 2]| exact_disk_solution(c, r, q);
            let lap = |e: f64| {
                (u([p[0] + e, p[1]]) + u([p[0] - e, p[1]]) + u([p[0], p[1] + e]) + u([p[0], p[1] - e]) - 4.0 * u(p))
                    / (e * e)
            };
            let fd = (4.0 * lap(1e-3) - lap(2e-3)) / 3.0;
            let target = 4.0 * (2.0 * u(p)).exp();
            assert!((fd - target).abs() < 1e-6 * target, "{p:?}: {fd} vs {target}");
            assert!((exact_disk_laplacian(c, r, p) - target).abs() < 1e-12 * target);
        }
    }

    #[test]
    fn oracle_stencil_residual_is_second_order() {
        let disk = Domain::unit_disk();
        let res: Vec<f64> = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]
            .iter()
            .map(|&h| oracle_stencil_residual([0.0, 0.0], 1.0, &Grid::new(&disk, h).unwrap(), 0.1))
            .collect();
        for pair in res.windows(2) {
            let rate = (pair[0] / pair[1]).log2();
            assert!((rate - 2.0).abs() < 0.15, "{res:?}");
        }
    }

    #[test]
    fn random_fields_vanish_at_boundary_and_are_seeded() {
        let grid = Grid::new(&Domain::l_shape(), 1.0 / 32.0).unwrap();
        let a = random_dirichlet_field(&grid, &mut ChaCha8Rng::seed_from_u64(3));
        let b = random_dirichlet_field(&grid, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a.values(), b.values());
        assert!((a.max_abs() - 1.0).abs() < 1e-15);
        let delta_max = grid.delta().iter().fold(0.0f64, |m, &t| m.max(t));
        for (v, &t) in a.values().iter().zip(grid.delta()) {
            assert!(v.abs() <= 1.0);
            // taper keeps values proportional to the boundary distance
            assert!(v.abs() * delta_max <= 5.0 * t, "{v} at delta {t}");
        }
    }

    #[test]
    fn rotation_deviation_detects_asymmetry() {
        let grid = Grid::new(&Domain::unit_disk(), 1.0 / 16.0).unwrap();
        let radial = ScalarField::from_fn(grid.clone(), |p| p[0] * p[0] + p[1] * p[1]);
        assert!(rotation_deviation(&radial).unwrap() < 1e-14);
        let skew = ScalarField::from_fn(grid.clone(), |p| p[0]);
        assert!(rotation_deviation(&skew).unwrap() > 0.5);
        let rect = Grid::new(&Domain::rectangle(&[0.0, 0.0], &[2.0, 1.0]).unwrap(), 0.25).unwrap();
        assert!(rotation_deviation(&ScalarField::zeros(rect)).is_none());
    }

    #[test]
    fn residual_of_exact_solution_decays_inside() {
        let disk = Domain::unit_disk();
        let max_inside = |h: f64| {
            let grid = Grid::new(&disk, h).unwrap();
            let u = ScalarField::from_fn(grid.clone(), |p| exact_disk_solution([0.0, 0.0], 1.0, p));
            let d = ScalarField::from_fn(grid.clone(), |p| disk.distance(&p));
            let res = liouville_residual(&u, &d).unwrap();
            grid.delta()
                .iter()
                .zip(res.values())
                .filter(|(&t, _)| t > 0.1)
                .fold(0.0f64, |m, (_, &r)| m.max(r))
        };
        let (coarse, fine) = (max_inside(1.0 / 32.0), max_inside(1.0 / 64.0));
        assert!(fine < 0.02 && coarse / fine > 3.5, "{coarse} {fine}");
    }
}
