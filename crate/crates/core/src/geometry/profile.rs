use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothed distance `d = F(delta)`.
///
/// `F` is the identity on `[0, t0]`, a polynomial blend on `[t0, 3 t0]`
/// with `F', F''` continuous, and the constant `2 t0` beyond. On the blend,
/// with `s = (t - t0) / (2 t0)`,
/// `F = t0 + 2 t0 (s - s^3 + s^4 / 2)` and `F' = 1 - 3 s^2 + 2 s^3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingProfile {
    pub transition_start: f64,
}

impl SmoothingProfile {
    pub fn new(transition_start: f64) -> Result<Self> {
        if !(transition_start.is_finite() && transition_start > 0.0) {
            return Err(Error::InvalidParams(format!(
                "transition start must be positive, got {transition_start}"
            )));
        }
        Ok(Self { transition_start })
    }

    /// `t0 = min(0.2, inradius / 4)`.
    pub fn for_inradius(inradius: f64) -> Self {
        Self {
            transition_start: (0.25 * inradius).min(0.2),
        }
    }

    pub fn cap(&self) -> f64 {
        2.0 * self.transition_start
    }

    pub fn saturation_start(&self) -> f64 {
        3.0 * self.transition_start
    }

    /// `(F(t), F'(t), F''(t))` for `t >= 0`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let t0 = self.transition_start;
        if t <= t0 {
            (t, 1.0, 0.0)
        } else if t >= 3.0 * t0 {
            (2.0 * t0, 0.0, 0.0)
        } else {
            let s = (t - t0) / (2.0 * t0);
            let s2 = s * s;
            let value = t0 + 2.0 * t0 * (s - s2 * s + 0.5 * s2 * s2);
            let slope = 1.0 - 3.0 * s2 + 2.0 * s2 * s;
            let curvature = (-6.0 * s + 6.0 * s2) / (2.0 * t0);
            (value, slope, curvature)
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }
}
