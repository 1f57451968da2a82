use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{Domain, Grid, ScalarField, SmoothingProfile};

use super::norms::hardy_quotient;

/// Witness functions for the inequalities. Each vanishes on the boundary and
/// is Lipschitz on the closure of the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TestFunction {
    /// `(1 - |x - c|^2 / rho^2)_+^e`; the ball must lie inside the domain.
    RadialBump {
        center: [f64; 2],
        radius: f64,
        exponent: f64,
        amplitude: f64,
    },
    /// `F(delta)` for the smoothing profile with the given transition start.
    SmoothedTent { transition: f64, amplitude: f64 },
    /// `sin(k1 pi x') sin(k2 pi y')` on the bounding box; outside rectangles it
    /// is multiplied by `delta / inradius` so that it vanishes on the boundary.
    SineMode { k1: u32, k2: u32, amplitude: f64 },
    /// `delta * clamp(ln(1/delta), 0, cutoff)`.
    TruncatedLog { cutoff: f64, amplitude: f64 },
}

impl TestFunction {
    pub fn label(&self) -> String {
        match self {
            Self::RadialBump { radius, exponent, .. } => format!("bump(r={radius:.4},e={exponent})"),
            Self::SmoothedTent { transition, .. } => format!("tent(t={transition:.4})"),
            Self::SineMode { k1, k2, .. } => format!("sine({k1},{k2})"),
            Self::TruncatedLog { cutoff, .. } => format!("trunclog(L={cutoff})"),
        }
    }

    pub fn value_at(&self, domain: &Domain, p: [f64; 2]) -> f64 {
        self.value_with_inradius(domain, p, || domain.inradius())
    }

    // the polygon inradius is a numerical search, so callers evaluating many
    // points pass a cached value
    fn value_with_inradius(&self, domain: &Domain, p: [f64; 2], inradius: impl Fn() -> f64) -> f64 {
        match self {
            Self::RadialBump {
                center,
                radius,
                exponent,
                amplitude,
            } => {
                let r2 = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)) / (radius * radius);
                amplitude * (1.0 - r2).max(0.0).powf(*exponent)
            }
            Self::SmoothedTent { transition, amplitude } => {
                let profile = SmoothingProfile::new(*transition).expect("positive transition");
                amplitude * profile.value(domain.distance(&p))
            }
            Self::SineMode { k1, k2, amplitude } => {
                let (lo, hi) = domain.bounding_box();
                let x = (p[0] - lo[0]) / (hi[0] - lo[0]);
                let y = (p[1] - lo[1]) / (hi[1] - lo[1]);
                let mode = (*k1 as f64 * PI * x).sin() * (*k2 as f64 * PI * y).sin();
                let taper = match domain {
                    Domain::Rectangle { .. } => 1.0,
                    _ => domain.distance(&p) / inradius(),
                };
                amplitude * mode * taper
            }
            Self::TruncatedLog { cutoff, amplitude } => {
                let delta = domain.distance(&p);
                amplitude * delta * (-delta.ln()).clamp(0.0, *cutoff)
            }
        }
    }

    /// Analytic values at the unknowns.
    pub fn evaluate(&self, domain: &Domain, grid: &Arc<Grid>) -> ScalarField {
        let inradius = domain.inradius();
        ScalarField::from_fn(grid.clone(), |p| self.value_with_inradius(domain, p, || inradius))
    }
}

/// The fixed family used by the inequality suite on a domain.
pub fn standard_family(domain: &Domain) -> Vec<TestFunction> {
    let (centre, depth) = domain.deepest_point();
    let centre = [centre[0], centre[1]];
    let mut family = Vec::new();
    for frac in [0.5, 0.9] {
        for exponent in [1.0, 2.0] {
            family.push(TestFunction::RadialBump {
                center: centre,
                radius: frac * depth,
                exponent,
                amplitude: 1.0,
            });
        }
    }
    for frac in [0.125, 0.25, 0.5] {
        family.push(TestFunction::SmoothedTent {
            transition: frac * depth,
            amplitude: 1.0,
        });
    }
    for (k1, k2) in [(1, 1), (2, 1), (2, 3)] {
        family.push(TestFunction::SineMode { k1, k2, amplitude: 1.0 });
    }
    for cutoff in [1.0, 3.0] {
        family.push(TestFunction::TruncatedLog { cutoff, amplitude: 1.0 });
    }
    family
}

/// Denser parameter sweep used to maximise the Hardy quotient on a grid of
/// spacing `h`. Tents whose transition spans fewer than four cells are left out:
/// on such grids every node sits on the plateau and the discrete gradient
/// misses the ramp, inflating the quotient.
pub fn hardy_search_family(domain: &Domain, h: f64) -> Vec<TestFunction> {
    let (centre, depth) = domain.deepest_point();
    let centre = [centre[0], centre[1]];
    let mut family = Vec::new();
    for i in 1..=8 {
        let frac = i as f64 / 8.0 * 0.98;
        for exponent in [0.75, 1.0, 2.0] {
            family.push(TestFunction::RadialBump {
                center: centre,
                radius: frac * depth,
                exponent,
                amplitude: 1.0,
            });
        }
    }
    for i in 0..12 {
        let transition = depth * 0.02 * 1.4f64.powi(i);
        if transition >= 4.0 * h {
            family.push(TestFunction::SmoothedTent {
                transition,
                amplitude: 1.0,
            });
        }
    }
    for k1 in 1..=3 {
        for k2 in 1..=3 {
            family.push(TestFunction::SineMode { k1, k2, amplitude: 1.0 });
        }
    }
    for cutoff in [0.5, 1.0, 2.0, 3.0, 5.0, 8.0] {
        family.push(TestFunction::TruncatedLog { cutoff, amplitude: 1.0 });
    }
    family
}

#[derive(Clone, Debug, Serialize)]
pub struct HardyCase {
    pub function: TestFunction,
    pub quotient: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HardyScan {
    pub h: f64,
    /// largest quotient found: an empirical lower bound for the Hardy constant
    pub h_emp: f64,
    pub best: TestFunction,
    pub cases: Vec<HardyCase>,
}

/// Hardy quotients of every family member on `grid`, with their maximum.
pub fn hardy_scan(domain: &Domain, grid: &Arc<Grid>, family: &[TestFunction]) -> Result<HardyScan> {
    let mut cases = Vec::with_capacity(family.len());
    for func in family {
        let u = func.evaluate(domain, grid);
        cases.push(HardyCase {
            function: func.clone(),
            quotient: hardy_quotient(&u)?,
        });
    }
    let best = cases
        .iter()
        .max_by(|a, b| a.quotient.total_cmp(&b.quotient))
        .expect("nonempty family");
    Ok(HardyScan {
        h: grid.h(),
        h_emp: best.quotient,
        best: best.function.clone(),
        cases,
    })
}
