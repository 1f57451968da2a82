//! Bounded open sets with exact boundary distance.
//!
//! Disks, annuli and rectangles work in any dimension (balls, spherical
//! shells and boxes); polygons are planar. Every query takes a point as a
//! coordinate slice whose length must equal [`Domain::dim`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Domain {
    Disk {
        center: Vec<f64>,
        radius: f64,
    },
    Annulus {
        center: Vec<f64>,
        r_inner: f64,
        r_outer: f64,
    },
    Rectangle {
        corner_min: Vec<f64>,
        corner_max: Vec<f64>,
    },
    /// Simple polygon, vertices listed counterclockwise.
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
}

impl Domain {
    pub fn disk(center: &[f64], radius: f64) -> Result<Self> {
        Self::Disk {
            center: center.to_vec(),
            radius,
        }
        .validated()
    }

    pub fn annulus(center: &[f64], r_inner: f64, r_outer: f64) -> Result<Self> {
        Self::Annulus {
            center: center.to_vec(),
            r_inner,
            r_outer,
        }
        .validated()
    }

    pub fn rectangle(corner_min: &[f64], corner_max: &[f64]) -> Result<Self> {
        Self::Rectangle {
            corner_min: corner_min.to_vec(),
            corner_max: corner_max.to_vec(),
        }
        .validated()
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        Self::Polygon { vertices }.validated()
    }

    pub fn unit_disk() -> Self {
        Self::disk(&[0.0, 0.0], 1.0).expect("unit disk is valid")
    }

    pub fn unit_square() -> Self {
        Self::rectangle(&[0.0, 0.0], &[1.0, 1.0]).expect("unit square is valid")
    }

    /// The unit square with its upper-right quarter removed.
    pub fn l_shape() -> Self {
        Self::polygon(vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 0.5],
            [0.5, 0.5],
            [0.5, 1.0],
            [0.0, 1.0],
        ])
        .expect("L-shape is valid")
    }

    /// Parses a JSON descriptor such as `{"shape": "disk", "center": [0,0], "radius": 1.0}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let domain: Domain = serde_json::from_str(text)?;
        domain.validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Domain::Disk { center, radius } => {
                if center.is_empty() || !finite(center) {
                    return Err(Error::InvalidDomain("disk center must be finite and nonempty".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidDomain(format!(
                        "disk radius must be positive, got {radius}"
                    )));
                }
            }
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                if center.is_empty() || !finite(center) {
                    return Err(Error::InvalidDomain(
                        "annulus center must be finite and nonempty".into(),
                    ));
                }
                if !(r_inner.is_finite() && r_outer.is_finite() && 0.0 < *r_inner && r_inner < r_outer) {
                    return Err(Error::InvalidDomain(format!(
                        "annulus radii must satisfy 0 < r_inner < r_outer, got {r_inner}, {r_outer}"
                    )));
                }
            }
            Domain::Rectangle { corner_min, corner_max } => {
                if corner_min.is_empty() || corner_min.len() != corner_max.len() {
                    return Err(Error::InvalidDomain(
                        "rectangle corners must have equal nonzero length".into(),
                    ));
                }
                if !finite(corner_min) || !finite(corner_max) {
                    return Err(Error::InvalidDomain("rectangle corners must be finite".into()));
                }
                if corner_min.iter().zip(corner_max).any(|(a, b)| a >= b) {
                    return Err(Error::InvalidDomain(
                        "rectangle needs corner_min < corner_max componentwise".into(),
                    ));
                }
            }
            Domain::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::InvalidDomain("polygon needs at least 3 vertices".into()));
                }
                if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
                    return Err(Error::InvalidDomain("polygon vertices must be finite".into()));
                }
                if signed_area(vertices) <= 0.0 {
                    return Err(Error::InvalidDomain("polygon vertices must be counterclockwise".into()));
                }
                if !is_simple(vertices) {
                    return Err(Error::InvalidDomain("polygon edges intersect".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Disk { center, .. } | Domain::Annulus { center, .. } => center.len(),
            Domain::Rectangle { corner_min, .. } => corner_min.len(),
            Domain::Polygon { .. } => 2,
        }
    }

    /// Short human-readable name used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Domain::Disk { .. } => "disk",
            Domain::Annulus { .. } => "annulus",
            Domain::Rectangle { .. } => "rectangle",
            Domain::Polygon { .. } => "polygon",
        }
    }

    /// Membership in the open set.
    pub fn contains(&self, p: &[f64]) -> bool {
        debug_assert_eq!(p.len(), self.dim());
        match self {
            Domain::Disk { center, radius } => norm_sq_diff(p, center) < radius * radius,
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let r2 = norm_sq_diff(p, center);
                r_inner * r_inner < r2 && r2 < r_outer * r_outer
            }
            Domain::Rectangle { corner_min, corner_max } => p
                .iter()
                .zip(corner_min.iter().zip(corner_max))
                .all(|(x, (a, b))| a < x && x < b),
            Domain::Polygon { vertices } => {
                let q = [p[0], p[1]];
                point_in_polygon(vertices, q) && polygon_boundary_distance(vertices, q) > 0.0
            }
        }
    }

    /// Euclidean distance from `p` to the boundary, for points on either side.
    pub fn distance(&self, p: &[f64]) -> f64 {
        debug_assert_eq!(p.len(), self.dim());
        match self {
            Domain::Disk { center, radius } => (norm_sq_diff(p, center).sqrt() - radius).abs(),
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let r = norm_sq_diff(p, center).sqrt();
                (r - r_inner).abs().min((r - r_outer).abs())
            }
            Domain::Rectangle { corner_min, corner_max } => {
                let inside = p
                    .iter()
                    .zip(corner_min.iter().zip(corner_max))
                    .all(|(x, (a, b))| a <= x && x <= b);
                if inside {
                    p.iter()
                        .zip(corner_min.iter().zip(corner_max))
                        .map(|(x, (a, b))| (x - a).min(b - x))
                        .fold(f64::INFINITY, f64::min)
                } else {
                    p.iter()
                        .zip(corner_min.iter().zip(corner_max))
                        .map(|(x, (a, b))| {
                            let e = (a - x).max(x - b).max(0.0);
                            e * e
                        })
                        .sum::<f64>()
                        .sqrt()
                }
            }
            Domain::Polygon { vertices } => polygon_boundary_distance(vertices, [p[0], p[1]]),
        }
    }

    /// Distance to the boundary, positive inside and negative outside.
    pub fn signed_distance(&self, p: &[f64]) -> f64 {
        let d = self.distance(p);
        if self.contains(p) {
            d
        } else {
            -d
        }
    }

    /// Axis-aligned bounding box `(min, max)` of the closure.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Disk { center, radius: r } | Domain::Annulus { center, r_outer: r, .. } => (
                center.iter().map(|c| c - r).collect(),
                center.iter().map(|c| c + r).collect(),
            ),
            Domain::Rectangle { corner_min, corner_max } => (corner_min.clone(), corner_max.clone()),
            Domain::Polygon { vertices } => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for v in vertices {
                    for i in 0..2 {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Upper bound on the diameter: the bounding-box diagonal.
    pub fn diameter_bound(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        norm_sq_diff(&hi, &lo).sqrt()
    }

    /// Largest value of the boundary distance over the domain.
    ///
    /// Exact for disks, annuli and rectangles. For polygons the maximum is
    /// located by a coarse scan followed by pattern-search refinement, so the
    /// result is a lower bound accurate to about `1e-9` of the diameter.
    pub fn inradius(&self) -> f64 {
        match self {
            Domain::Disk { radius, .. } => *radius,
            Domain::Annulus { r_inner, r_outer, .. } => 0.5 * (r_outer - r_inner),
            Domain::Rectangle { corner_min, corner_max } => corner_min
                .iter()
                .zip(corner_max)
                .map(|(a, b)| 0.5 * (b - a))
                .fold(f64::INFINITY, f64::min),
            Domain::Polygon { .. } => self.deepest_point().1,
        }
    }

    /// A point maximizing the boundary distance, with that distance.
    pub fn deepest_point(&self) -> (Vec<f64>, f64) {
        match self {
            Domain::Disk { center, radius } => (center.clone(), *radius),
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let mut p = center.clone();
                p[0] += 0.5 * (r_inner + r_outer);
                (p, 0.5 * (r_outer - r_inner))
            }
            Domain::Rectangle { corner_min, corner_max } => {
                let p: Vec<f64> = corner_min.iter().zip(corner_max).map(|(a, b)| 0.5 * (a + b)).collect();
                let d = self.distance(&p);
                (p, d)
            }
            Domain::Polygon { .. } => {
                let (lo, hi) = self.bounding_box();
                let n = 128;
                let mut best = (vec![0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])], f64::NEG_INFINITY);
                for i in 0..=n {
                    for j in 0..=n {
                        let p = [
                            lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64,
                            lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64,
                        ];
                        if self.contains(&p) {
                            let d = self.distance(&p);
                            if d > best.1 {
                                best = (p.to_vec(), d);
                            }
                        }
                    }
                }
                let mut step = (hi[0] - lo[0]).max(hi[1] - lo[1]) / n as f64;
                let tol = 1e-10 * self.diameter_bound();
                while step > tol {
                    let mut improved = false;
                    for (dx, dy) in [
                        (1.0, 0.0),
                        (-1.0, 0.0),
                        (0.0, 1.0),
                        (0.0, -1.0),
                        (1.0, 1.0),
                        (1.0, -1.0),
                        (-1.0, 1.0),
                        (-1.0, -1.0),
                    ] {
                        let q = [best.0[0] + dx * step, best.0[1] + dy * step];
                        if self.contains(&q) {
                            let d = self.distance(&q);
                            if d > best.1 {
                                best = (q.to_vec(), d);
                                improved = true;
                            }
                        }
                    }
                    if !improved {
                        step *= 0.5;
                    }
                }
                best
            }
        }
    }

    /// Whether the closed axis-aligned cube with the given center and side lies in the open set.
    pub fn contains_cube(&self, center: &[f64], side: f64) -> bool {
        debug_assert_eq!(center.len(), self.dim());
        let half = 0.5 * side;
        match self {
            Domain::Disk { center: c, radius } => farthest_sq(center, half, c) < radius * radius,
            Domain::Annulus {
                center: c,
                r_inner,
                r_outer,
            } => farthest_sq(center, half, c) < r_outer * r_outer && nearest_sq(center, half, c) > r_inner * r_inner,
            Domain::Rectangle { corner_min, corner_max } => center
                .iter()
                .zip(corner_min.iter().zip(corner_max))
                .all(|(x, (a, b))| *a < x - half && x + half < *b),
            Domain::Polygon { vertices } => {
                let lo = [center[0] - half, center[1] - half];
                let hi = [center[0] + half, center[1] + half];
                let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
                if !corners.iter().all(|c| self.contains(c)) {
                    return false;
                }
                let n = vertices.len();
                (0..n).all(|i| !segment_meets_box(vertices[i], vertices[(i + 1) % n], lo, hi))
            }
        }
    }

    /// Whether the closed cube certainly misses the open set.
    ///
    /// Conservative: `false` means "may intersect".
    pub fn cube_misses(&self, center: &[f64], side: f64) -> bool {
        let half_diag = 0.5 * side * (center.len() as f64).sqrt();
        !self.contains(center) && self.distance(center) >= half_diag
    }
}

fn norm_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared distance from `c` to the farthest point of the cube.
fn farthest_sq(center: &[f64], half: f64, c: &[f64]) -> f64 {
    center
        .iter()
        .zip(c)
        .map(|(x, y)| {
            let e = (x - y).abs() + half;
            e * e
        })
        .sum()
}

/// Squared distance from `c` to the nearest point of the cube.
fn nearest_sq(center: &[f64], half: f64, c: &[f64]) -> f64 {
    center
        .iter()
        .zip(c)
        .map(|(x, y)| {
            let e = ((x - y).abs() - half).max(0.0);
            e * e
        })
        .sum()
}

pub(crate) fn signed_area(vertices: &[[f64; 2]]) -> f64 {
    let n = vertices.len();
    0.5 * (0..n)
        .map(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

/// Distance from a point to the segment `[a, b]`.
pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = ap[0] - t * ab[0];
    let dy = ap[1] - t * ab[1];
    (dx * dx + dy * dy).sqrt()
}

fn polygon_boundary_distance(vertices: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| point_segment_distance(p, vertices[i], vertices[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Index of the polygon edge nearest to `p` (lowest index on ties).
pub(crate) fn nearest_edge(vertices: &[[f64; 2]], p: [f64; 2]) -> usize {
    let n = vertices.len();
    let mut best = (0, f64::INFINITY);
    for i in 0..n {
        let d = point_segment_distance(p, vertices[i], vertices[(i + 1) % n]);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Crossing-number test; boundary points may land on either side.
fn point_in_polygon(vertices: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

pub(crate) fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn is_simple(vertices: &[[f64; 2]]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let (a1, a2) = (vertices[i], vertices[(i + 1) % n]);
        if a1 == a2 {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (b1, b2) = (vertices[j], vertices[(j + 1) % n]);
            if adjacent {
                // adjacent edges may only share their common vertex
                let shared = if j == i + 1 { a2 } else { a1 };
                let (other_a, other_b) = if j == i + 1 { (a1, b2) } else { (a2, b1) };
                let collinear_overlap = orient(a1, a2, other_b) == 0.0 && on_segment(a1, a2, other_b)
                    || orient(b1, b2, other_a) == 0.0 && on_segment(b1, b2, other_a);
                if collinear_overlap && other_a != shared && other_b != shared {
                    return false;
                }
                continue;
            }
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// Separating-axis test between the closed segment `[a, b]` and the closed box `[lo, hi]`.
fn segment_meets_box(a: [f64; 2], b: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> bool {
    for i in 0..2 {
        if a[i].max(b[i]) < lo[i] || a[i].min(b[i]) > hi[i] {
            return false;
        }
    }
    let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let signs: Vec<f64> = corners.iter().map(|&c| orient(a, b, c)).collect();
    let all_pos = signs.iter().all(|&s| s > 0.0);
    let all_neg = signs.iter().all(|&s| s < 0.0);
    !(all_pos || all_neg)
}
