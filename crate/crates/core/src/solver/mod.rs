//! Damped Newton minimization of the renormalized energy, reconstruction of the
//! maximal solution `u = v + w` and the checks built on it.

mod cg;
mod checks;
mod export;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::{build_singular_part, energy, energy_delta, gradient_into, EnergyBreakdown, Hessian, SingularPart};
use crate::error::{Error, Result};
use crate::geometry::{dot, Domain, Grid, ScalarField, SmoothingProfile};

pub use cg::{conjugate_gradient, CgOutcome};
pub use checks::{
    disk_oracle, exact_disk_laplacian, exact_disk_solution, gradient_bound_check, kv_check, liouville_residual,
    oracle_stencil_residual, random_dirichlet_field, rotation_deviation, verify_minimizer, AmplitudeSummary,
    DiskOracle, GradientBoundCheck, KvCheck, MinimizerReport, ORACLE_LAYER, PERTURBATION_AMPLITUDES,
};
pub use export::{heatmap_svg, write_fields_csv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    None,
    Jacobi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// stop when the discrete `L^2` norm `|G| h` falls below this
    pub gradient_tol: f64,
    pub max_newton: usize,
    /// Armijo constant
    pub sufficient_decrease: f64,
    pub backtrack_ratio: f64,
    /// smallest step length tried before the line search gives up
    pub min_step: f64,
    pub cg_rel_tol: f64,
    pub cg_max_iter: usize,
    pub preconditioner: Preconditioner,
    /// Hardy constant used for the global bound check
    pub hardy_constant: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gradient_tol: 1e-8,
            max_newton: 60,
            sufficient_decrease: 1e-4,
            backtrack_ratio: 0.5,
            min_step: 1e-12,
            cg_rel_tol: 1e-8,
            cg_max_iter: 20_000,
            preconditioner: Preconditioner::None,
            hardy_constant: 2.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gradient_tol", self.gradient_tol),
            ("sufficient_decrease", self.sufficient_decrease),
            ("min_step", self.min_step),
            ("cg_rel_tol", self.cg_rel_tol),
            ("hardy_constant", self.hardy_constant),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return Err(Error::InvalidParams(format!(
                "backtracking ratio must lie in (0, 1), got {}",
                self.backtrack_ratio
            )));
        }
        if self.sufficient_decrease >= 0.5 {
            return Err(Error::InvalidParams(
                "sufficient-decrease constant must be below 1/2".into(),
            ));
        }
        if self.max_newton == 0 || self.cg_max_iter == 0 {
            return Err(Error::InvalidParams("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// One accepted Newton step.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NewtonStep {
    /// `|G| h` before the step
    pub gradient_norm: f64,
    pub cg_iterations: usize,
    pub cg_relative_residual: f64,
    pub step_length: f64,
    pub backtracks: usize,
    /// `R[phi + t s] - R[phi]`, evaluated without cancellation
    pub decrement: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub domain: String,
    pub h: f64,
    pub unknowns: usize,
    pub transition_start: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `R[w_0]` followed by the energy after each accepted step
    pub energy_history: Vec<f64>,
    pub steps: Vec<NewtonStep>,
    pub final_gradient_norm: f64,
    /// direct evaluation at the final iterate
    pub energy: EnergyBreakdown,
    /// `max |w| / d`
    pub w_over_d_max: f64,
    /// `max |-Delta_h u + 4 e^{2u}| d^2` over unknowns with a full stencil
    pub liouville_residual: f64,
    /// the same restricted to `d > ORACLE_LAYER`
    pub liouville_residual_interior: f64,
    pub gradient_bound: GradientBoundCheck,
    pub oracle: Option<DiskOracle>,
    #[serde(skip)]
    pub w: ScalarField,
    #[serde(skip)]
    pub u: ScalarField,
}

impl SolveReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Whether the energy decreased strictly at every accepted step.
    pub fn strictly_decreasing(&self) -> bool {
        self.energy_history.windows(2).all(|p| p[1] < p[0]) && self.steps.iter().all(|s| s.decrement < 0.0)
    }
}

/// Minimizer of the energy with singular part built from `profile`, started at 0.
pub fn solve(
    domain: &Domain,
    profile: &SmoothingProfile,
    grid: &Arc<Grid>,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let sp = build_singular_part(domain, profile, grid)?;
    solve_from(domain, &sp, &ScalarField::zeros(grid.clone()), config)
}

/// Newton iteration from `w0` for a prepared singular part.
pub fn solve_from(domain: &Domain, sp: &SingularPart, w0: &ScalarField, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let min = minimize(sp, w0, config)?;
    finish(domain, sp, min, config)
}

struct Minimum {
    w: ScalarField,
    history: Vec<f64>,
    steps: Vec<NewtonStep>,
    gradient_norm: f64,
}

fn minimize(sp: &SingularPart, w0: &ScalarField, config: &SolverConfig) -> Result<Minimum> {
    w0.check_same(&sp.v)?;
    let grid = sp.grid().clone();
    let h = grid.h();
    let h2 = h * h;
    let n = grid.len();
    let mut phi = w0.clone();
    let mut history = vec![energy(&phi, sp)?.total];
    let mut steps = Vec::new();
    let mut g = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut trial = vec![0.0; n];
    for iteration in 0..=config.max_newton {
        gradient_into(phi.values(), sp, &mut g);
        let gradient_norm = dot(&g, &g).sqrt() * h;
        if gradient_norm <= config.gradient_tol {
            return Ok(Minimum {
                w: phi,
                history,
                steps,
                gradient_norm,
            });
        }
        if iteration == config.max_newton {
            return Err(Error::NotConverged {
                iterations: iteration,
                gradient_norm,
            });
        }
        let hess = Hessian::at(&phi, sp)?;
        let inverse_diagonal = match config.preconditioner {
            Preconditioner::Jacobi => Some(hess.diagonal().iter().map(|d| 1.0 / d).collect::<Vec<_>>()),
            Preconditioner::None => None,
        };
        // the Hessian of R is 2 H, its gradient 2 G h^2; Newton solves H s = -G
        rhs.iter_mut().zip(&g).for_each(|(r, g)| *r = -g);
        let mut s = vec![0.0; n];
        let cg = conjugate_gradient(
            |x, out| hess.apply(x, out),
            &rhs,
            &mut s,
            inverse_diagonal.as_deref(),
            config.cg_rel_tol,
            config.cg_max_iter,
        );
        let slope = 2.0 * dot(&g, &s) * h2;
        let energy_now = *history.last().expect("history starts non-empty");
        if !(slope < 0.0) {
            return Err(Error::LineSearchFailed {
                iteration,
                step: 0.0,
                energy: energy_now,
                slope,
            });
        }
        let mut t = 1.0;
        let mut backtracks = 0;
        let decrement = loop {
            trial.iter_mut().zip(&s).for_each(|(x, s)| *x = t * s);
            match energy_delta(phi.values(), &trial, &g, sp) {
                Ok(delta) if delta <= config.sufficient_decrease * t * slope => break delta,
                Ok(_) | Err(Error::Overflow { .. }) => {}
                Err(e) => return Err(e),
            }
            t *= config.backtrack_ratio;
            backtracks += 1;
            if t < config.min_step {
                return Err(Error::LineSearchFailed {
                    iteration,
                    step: t,
                    energy: energy_now,
                    slope,
                });
            }
        };
        phi.values_mut().iter_mut().zip(&trial).for_each(|(p, s)| *p += s);
        history.push(energy_now + decrement);
        steps.push(NewtonStep {
            gradient_norm,
            cg_iterations: cg.iterations,
            cg_relative_residual: cg.relative_residual,
            step_length: t,
            backtracks,
            decrement,
        });
    }
    unreachable!("loop returns at max_newton")
}

fn finish(domain: &Domain, sp: &SingularPart, min: Minimum, config: &SolverConfig) -> Result<SolveReport> {
    let grid = sp.grid().clone();
    let w = min.w;
    let u = sp.v.add(&w)?;
    let w_over_d_max = w
        .values()
        .iter()
        .zip(sp.d.values())
        .fold(0.0f64, |m, (w, d)| m.max(w.abs() / d));
    let residual = liouville_residual(&u, &sp.d)?;
    let oracle = match domain {
        Domain::Disk { center, radius } => Some(disk_oracle(&u, &sp.d, [center[0], center[1]], *radius)?),
        _ => None,
    };
    let mut report = SolveReport {
        domain: domain.kind().to_string(),
        h: grid.h(),
        unknowns: grid.len(),
        transition_start: sp.profile.map(|p| p.transition_start),
        converged: true,
        iterations: min.steps.len(),
        energy: energy(&w, sp)?,
        energy_history: min.history,
        steps: min.steps,
        final_gradient_norm: min.gradient_norm,
        w_over_d_max,
        liouville_residual: residual.max_abs(),
        liouville_residual_interior: residual
            .values()
            .iter()
            .zip(sp.d.values())
            .filter(|(_, &d)| d > ORACLE_LAYER)
            .fold(0.0, |m, (&r, _)| m.max(r)),
        gradient_bound: GradientBoundCheck::default(),
        oracle,
        w,
        u,
    };
    report.gradient_bound = gradient_bound_check(&report, sp, config.hardy_constant);
    Ok(report)
}
