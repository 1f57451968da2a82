//! Dyadic Whitney-type decomposition, its partition of unity and the
//! associated geometric constants.
//!
//! A cube `Q(x, s)` of the dyadic family at level `k` has side `s = 2^-k`.
//! `Q_sigma` denotes the concentric cube of side `sigma s`. A cube is selected
//! when `Q_eta` lies in the domain but the `eta`-dilation of its parent does not.

mod bump;
mod decompose;
mod verify;

use serde::{Deserialize, Serialize};

pub use bump::{smooth_step, smooth_step_derivative, BumpFunction};
pub use decompose::{decompose, PartitionEntry, PartitionSample, TruncationReport, WhitneyDecomposition};
pub use verify::{verify_properties, PropertyCheck, PropertyReport};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneyParams {
    pub eta: f64,
    pub eta_prime: f64,
    pub dim: usize,
    /// Coarsest level searched. The effective root level is never coarser than
    /// needed for a root cube to exceed the domain's diameter.
    pub k_min: Option<i32>,
    pub k_max: i32,
}

impl WhitneyParams {
    pub fn new(eta: f64, eta_prime: f64, dim: usize, k_max: i32) -> Result<Self> {
        let params = Self {
            eta,
            eta_prime,
            dim,
            k_min: None,
            k_max,
        };
        params.validate()?;
        Ok(params)
    }

    /// `(eta, eta') = (2, 1.05)`, `k_max = 14`.
    pub fn default_for(dim: usize) -> Self {
        Self {
            eta: 2.0,
            eta_prime: 1.05,
            dim,
            k_min: None,
            k_max: 14,
        }
    }

    pub fn with_k_max(mut self, k_max: i32) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn with_k_min(mut self, k_min: i32) -> Self {
        self.k_min = Some(k_min);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidParams(format!(
                "dimension must be at least 2, got {}",
                self.dim
            )));
        }
        let root_n = (self.dim as f64).sqrt();
        if !(self.eta.is_finite()
            && self.eta_prime.is_finite()
            && self.eta / root_n > self.eta_prime
            && self.eta_prime > 1.0)
        {
            return Err(Error::InvalidParams(format!(
                "need eta/sqrt(N) > eta' > 1, got eta = {}, eta' = {}, N = {}",
                self.eta, self.eta_prime, self.dim
            )));
        }
        if self.eta_prime >= 3.0 {
            return Err(Error::Unsupported(
                "eta' >= 3 (dilated cubes would reach past neighbouring cubes)".into(),
            ));
        }
        if let Some(k_min) = self.k_min {
            if k_min > self.k_max {
                return Err(Error::InvalidParams(format!(
                    "k_min {k_min} exceeds k_max {}",
                    self.k_max
                )));
            }
        }
        Ok(())
    }
}

/// `[0, 2^-k]^N + m 2^-k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    #[serde(rename = "k")]
    pub level: i32,
    #[serde(rename = "m")]
    pub index: Vec<i64>,
}

impl DyadicCube {
    pub fn new(level: i32, index: Vec<i64>) -> Self {
        Self { level, index }
    }

    pub fn side(&self) -> f64 {
        side_at(self.level)
    }

    pub fn center(&self) -> Vec<f64> {
        let s = self.side();
        self.index.iter().map(|&m| (m as f64 + 0.5) * s).collect()
    }

    pub fn parent(&self) -> Self {
        Self {
            level: self.level - 1,
            index: self.index.iter().map(|&m| m.div_euclid(2)).collect(),
        }
    }

    pub fn children(&self) -> impl Iterator<Item = Self> + '_ {
        let n = self.index.len();
        (0..1usize << n).map(move |bits| Self {
            level: self.level + 1,
            index: self
                .index
                .iter()
                .enumerate()
                .map(|(i, &m)| 2 * m + ((bits >> i) & 1) as i64)
                .collect(),
        })
    }

    /// Whether `p` lies in the closed cube `Q(x, sigma s)`.
    pub fn dilation_contains(&self, sigma: f64, p: &[f64]) -> bool {
        let s = self.side();
        let half = 0.5 * sigma * s;
        self.index
            .iter()
            .zip(p)
            .all(|(&m, &x)| (x - (m as f64 + 0.5) * s).abs() <= half)
    }
}

pub(crate) fn side_at(level: i32) -> f64 {
    2f64.powi(-level)
}

/// Constants of the decomposition, all computed from `(eta, eta', N)` and the bump.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// lower bound of `delta / s` on dilated supports: `(eta - eta' sqrt N) / 2`
    pub lambda: f64,
    /// upper bound of `delta / s` on dilated supports: `(eta + 1/2 + eta'/2) sqrt N`
    pub mu: f64,
    /// bound on `s_Q |grad phi_Q|`
    pub c3: f64,
    /// side-ratio bound for intersecting dilated cubes
    pub c6: f64,
    /// level offsets enumerated: `ceil(log2 c6)`
    pub j1: i32,
    /// centre radius bound `(1 + c6) eta' sqrt(N) / 2`, in units of the side
    pub j2: f64,
    /// overlap bound obtained by enumeration
    pub p: u64,
    /// per-level counts behind `p`, for offsets `-j1..=j1`
    pub p_per_level: Vec<u64>,
    /// `sup |grad phi|` bound of the reference bump at unit scale
    pub bump_gradient: f64,
}

impl DerivedConstants {
    pub fn compute(params: &WhitneyParams, bump: &BumpFunction) -> Result<Self> {
        params.validate()?;
        let n = params.dim as f64;
        let root_n = n.sqrt();
        let (eta, ep) = (params.eta, params.eta_prime);
        let lambda = 0.5 * (eta - ep * root_n);
        let mu = (eta + 0.5 + 0.5 * ep) * root_n;
        let c6 = (2.0 * eta + 1.0 + ep) * root_n / (eta - ep * root_n);
        let j1 = c6.log2().ceil() as i32;
        let j2 = 0.5 * (1.0 + c6) * ep * root_n;
        let p_per_level: Vec<u64> = (-j1..=j1)
            .map(|j| {
                // intersecting dilations force |x - x'| <= (s + s') eta' sqrt(N) / 2
                let radius = (0.5 * (1.0 + 2f64.powi(j)) * ep * root_n).min(j2);
                max_centres_in_ball(j, radius, params.dim)
            })
            .collect();
        let p: u64 = p_per_level.iter().sum();
        let bump_gradient = bump.gradient_bound();
        // |grad(phi_hat/psi)| <= G/s + P G c6 / s since psi >= 1 and neighbours have side > s/c6
        let c3 = bump_gradient * (1.0 + p as f64 * c6);
        Ok(Self {
            lambda,
            mu,
            c3,
            c6,
            j1,
            j2,
            p,
            p_per_level,
            bump_gradient,
        })
    }
}

/// Largest number of level-`j` dyadic centres (side `2^j` relative to a unit
/// cube centred at the origin) inside the closed ball of the given radius,
/// maximised over every admissible alignment of the two lattices.
fn max_centres_in_ball(j: i32, radius: f64, dim: usize) -> u64 {
    let a = 2f64.powi(j);
    // relative offsets (m + 1/2) a - (n + 1/2) reduced modulo a
    let offsets: Vec<f64> = if j <= 0 {
        vec![(0.5 * a - 0.5).rem_euclid(a)]
    } else {
        let cells = 1i64 << j;
        (0..cells).map(|r| (0.5 * a - 0.5 - r as f64).rem_euclid(a)).collect()
    };
    let mut best = 0;
    let mut choice = vec![0usize; dim];
    loop {
        let shift: Vec<f64> = choice.iter().map(|&c| offsets[c]).collect();
        best = best.max(count_lattice(&shift, a, radius * radius * (1.0 + 1e-12), 0));
        let mut axis = 0;
        loop {
            if axis == dim {
                return best;
            }
            choice[axis] += 1;
            if choice[axis] < offsets.len() {
                break;
            }
            choice[axis] = 0;
            axis += 1;
        }
    }
}

fn count_lattice(shift: &[f64], a: f64, budget: f64, axis: usize) -> u64 {
    if axis == shift.len() {
        return 1;
    }
    let r = budget.max(0.0).sqrt();
    let lo = ((-r - shift[axis]) / a).ceil() as i64;
    let hi = ((r - shift[axis]) / a).floor() as i64;
    (lo..=hi)
        .map(|m| {
            let c = shift[axis] + m as f64 * a;
            let rest = budget - c * c;
            if rest < 0.0 {
                0
            } else {
                count_lattice(shift, a, rest, axis + 1)
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_precondition() {
        assert!(WhitneyParams::new(2.0, 1.05, 2, 12).is_ok());
        // eta / sqrt 2 = 1.0607 < 1.1
        assert!(WhitneyParams::new(1.5, 1.1, 2, 12).is_err());
        assert!(WhitneyParams::new(2.0, 1.0, 2, 12).is_err());
        assert!(WhitneyParams::new(2.0, 1.05, 1, 12).is_err());
        assert!(WhitneyParams::default_for(2)
            .with_k_max(3)
            .with_k_min(5)
            .validate()
            .is_err());
    }

    #[test]
    fn cube_geometry() {
        let q = DyadicCube::new(3, vec![5, -3]);
        assert_eq!(q.side(), 0.125);
        assert_eq!(q.center(), vec![5.5 * 0.125, -2.5 * 0.125]);
        let parent = q.parent();
        assert_eq!(parent, DyadicCube::new(2, vec![2, -2]));
        // parent centre is a vertex of the child: |x - x~| = s sqrt(N) / 2
        let (x, xp) = (q.center(), parent.center());
        let dist = ((x[0] - xp[0]).powi(2) + (x[1] - xp[1]).powi(2)).sqrt();
        assert!((dist - 0.5 * q.side() * 2f64.sqrt()).abs() < 1e-15);
        let children: Vec<_> = parent.children().collect();
        assert_eq!(children.len(), 4);
        assert!(children.contains(&q));
        assert!(children.iter().all(|c| c.parent() == parent));
        let negative = DyadicCube::new(-1, vec![0, -1]);
        assert_eq!(negative.side(), 2.0);
    }

    #[test]
    fn constants_for_defaults() {
        let params = WhitneyParams::default_for(2);
        let bump = BumpFunction::new(params.eta_prime, 2).unwrap();
        let c = DerivedConstants::compute(&params, &bump).unwrap();
        let r2 = 2f64.sqrt();
        assert!((c.lambda - 0.5 * (2.0 - 1.05 * r2)).abs() < 1e-15);
        assert!((c.mu - 3.025 * r2).abs() < 1e-15);
        assert!((c.c6 - 6.05 * r2 / (2.0 - 1.05 * r2)).abs() < 1e-12);
        assert_eq!(c.j1, 5);
        assert!(c.lambda > 0.0 && c.p >= 1);
        // same-size neighbours: the 3x3 block
        assert_eq!(c.p_per_level[c.j1 as usize], 9);
    }

    #[test]
    fn lattice_count_brute_force() {
        // direct enumeration over a generous index window
        for (j, radius) in [(-2, 0.9), (0, 1.6), (1, 3.2), (2, 5.0)] {
            let a = 2f64.powi(j);
            let mut best = 0;
            let alignments: Vec<i64> = if j > 0 { (0..(1 << j)).collect() } else { vec![0] };
            for &n0 in &alignments {
                for &n1 in &alignments {
                    let mut count = 0;
                    for m0 in -100i64..100 {
                        for m1 in -100i64..100 {
                            let dx = (m0 as f64 + 0.5) * a - (n0 as f64 + 0.5);
                            let dy = (m1 as f64 + 0.5) * a - (n1 as f64 + 0.5);
                            if dx * dx + dy * dy <= radius * radius {
                                count += 1;
                            }
                        }
                    }
                    best = best.max(count);
                }
            }
            assert_eq!(max_centres_in_ball(j, radius, 2), best, "j = {j}");
        }
    }
}
