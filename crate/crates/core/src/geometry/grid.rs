//! Uniform Cartesian grids restricted to a planar domain, and nodal fields on them.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Domain;

pub(crate) const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    /// Unknown of the discrete problem: inside, with `delta >= h/2`.
    Interior,
    /// Inside but closer than `h/2` to the boundary; Dirichlet value 0.
    BoundaryAdjacent,
    Exterior,
}

/// Node-centered grid with spacing `h` covering the bounding box of a planar domain.
#[derive(Debug)]
pub struct Grid {
    domain: Domain,
    origin: [f64; 2],
    h: f64,
    nx: usize,
    ny: usize,
    class: Vec<NodeClass>,
    /// grid node of each unknown
    nodes: Vec<usize>,
    /// unknown index of each grid node, or NONE
    unknown_of: Vec<u32>,
    /// E, W, N, S neighbours of each unknown (unknown indices or NONE)
    neighbors: Vec<[u32; 4]>,
    delta: Vec<f64>,
}

impl Grid {
    pub fn new(domain: &Domain, h: f64) -> Result<Arc<Self>> {
        if domain.dim() != 2 {
            return Err(Error::Unsupported(format!(
                "grids are planar; domain has dimension {}",
                domain.dim()
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParams(format!("grid spacing must be positive, got {h}")));
        }
        let (lo, hi) = domain.bounding_box();
        let count = |a: f64, b: f64| ((b - a) / h - 1e-9).ceil() as usize + 1;
        let (nx, ny) = (count(lo[0], hi[0]), count(lo[1], hi[1]));
        let origin = [lo[0], lo[1]];

        let mut class = Vec::with_capacity(nx * ny);
        let mut nodes = Vec::new();
        let mut unknown_of = vec![NONE; nx * ny];
        let mut delta = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let p = [origin[0] + i as f64 * h, origin[1] + j as f64 * h];
                let c = if domain.contains(&p) {
                    let dist = domain.distance(&p);
                    if dist >= 0.5 * h {
                        unknown_of[j * nx + i] = nodes.len() as u32;
                        nodes.push(j * nx + i);
                        delta.push(dist);
                        NodeClass::Interior
                    } else {
                        NodeClass::BoundaryAdjacent
                    }
                } else {
                    NodeClass::Exterior
                };
                class.push(c);
            }
        }
        if nodes.is_empty() {
            return Err(Error::NoInteriorNodes { h });
        }
        let neighbors = nodes
            .iter()
            .map(|&n| {
                let (i, j) = (n % nx, n / nx);
                let at = |ii: isize, jj: isize| -> u32 {
                    if ii < 0 || jj < 0 || ii >= nx as isize || jj >= ny as isize {
                        NONE
                    } else {
                        unknown_of[jj as usize * nx + ii as usize]
                    }
                };
                let (i, j) = (i as isize, j as isize);
                [at(i + 1, j), at(i - 1, j), at(i, j + 1), at(i, j - 1)]
            })
            .collect();
        Ok(Arc::new(Self {
            domain: domain.clone(),
            origin,
            h,
            nx,
            ny,
            class,
            nodes,
            unknown_of,
            neighbors,
            delta,
        }))
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Number of unknowns (interior nodes).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.class
    }

    pub fn class_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for c in &self.class {
            match c {
                NodeClass::Interior => counts.0 += 1,
                NodeClass::BoundaryAdjacent => counts.1 += 1,
                NodeClass::Exterior => counts.2 += 1,
            }
        }
        counts
    }

    pub fn node_position(&self, node: usize) -> [f64; 2] {
        [
            self.origin[0] + (node % self.nx) as f64 * self.h,
            self.origin[1] + (node / self.nx) as f64 * self.h,
        ]
    }

    /// Position of unknown `k`.
    pub fn position(&self, k: usize) -> [f64; 2] {
        self.node_position(self.nodes[k])
    }

    pub fn positions(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(|k| self.position(k))
    }

    pub fn grid_node(&self, k: usize) -> usize {
        self.nodes[k]
    }

    /// Unknown index at grid coordinates `(i, j)`, if that node is interior.
    pub fn unknown_at(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.nx || j >= self.ny {
            return None;
        }
        match self.unknown_of[j * self.nx + i] {
            NONE => None,
            k => Some(k as usize),
        }
    }

    pub fn grid_coords(&self, k: usize) -> (usize, usize) {
        let n = self.nodes[k];
        (n % self.nx, n / self.nx)
    }

    /// Boundary distance at each unknown.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub(crate) fn neighbors(&self, k: usize) -> [u32; 4] {
        self.neighbors[k]
    }

    /// All four stencil neighbours are unknowns.
    pub fn has_full_stencil(&self, k: usize) -> bool {
        self.neighbors[k].iter().all(|&n| n != NONE)
    }

    /// Per-node mask in row-major grid order: 1 for unknowns, 0 elsewhere.
    pub fn mask(&self) -> Vec<u8> {
        self.class.iter().map(|c| u8::from(*c == NodeClass::Interior)).collect()
    }
}

/// Parses a spacing such as `"1/256"`, `"0.01"` or `"1e-2"`.
pub fn parse_spacing(text: &str) -> Result<f64> {
    let bad = || Error::InvalidParams(format!("cannot parse grid spacing {text:?}"));
    let h = match text.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            num / den
        }
        None => text.trim().parse().map_err(|_| bad())?,
    };
    if !(h.is_finite() && h > 0.0) {
        return Err(bad());
    }
    Ok(h)
}

/// Values at the unknowns of a grid; every other node is implicitly 0.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct FieldDump<'a> {
    h: f64,
    origin: [f64; 2],
    nx: usize,
    ny: usize,
    values: &'a [f64],
    mask: Vec<u8>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParams(format!(
                "field has {} values for {} unknowns",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = grid.positions().map(f).collect();
        Self { grid, values }
    }

    /// Nodewise map sharing this field's grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Plain nodal inner product `sum a_k b_k` (no `h^2` factor).
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(dot(&self.values, &other.values))
    }

    /// Discrete `L^2(Omega)` norm, midpoint rule.
    pub fn l2_norm(&self) -> f64 {
        (dot(&self.values, &self.values) * self.grid.h * self.grid.h).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Midpoint quadrature `sum f(node) h^2` over the unknowns.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.h * self.grid.h
    }

    /// Five-point Laplacian with zero values off the unknown set.
    pub fn laplacian(&self) -> Self {
        let mut out = vec![0.0; self.values.len()];
        apply_laplacian(&self.grid, &self.values, &mut out);
        Self {
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// `sum over grid edges of (difference)^2`, the discrete `int |grad u|^2`.
    ///
    /// Edges to non-unknown neighbours count once with the neighbour at 0, so this
    /// equals `<-Laplacian u, u> h^2` exactly up to rounding.
    pub fn dirichlet_energy(&self) -> f64 {
        dirichlet_energy(&self.grid, &self.values)
    }

    /// Central-difference gradient; one-sided where a neighbour is not an unknown.
    pub fn gradient(&self) -> Vec<[f64; 2]> {
        let h = self.grid.h;
        (0..self.values.len())
            .map(|k| {
                let nb = self.grid.neighbors(k);
                let u = self.values[k];
                let component = |plus: u32, minus: u32| match (plus != NONE, minus != NONE) {
                    (true, true) => (self.values[plus as usize] - self.values[minus as usize]) / (2.0 * h),
                    (true, false) => (self.values[plus as usize] - u) / h,
                    (false, true) => (u - self.values[minus as usize]) / h,
                    (false, false) => 0.0,
                };
                [component(nb[0], nb[1]), component(nb[2], nb[3])]
            })
            .collect()
    }

    /// CSV with columns `x, y, value`, one row per unknown.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "value"])?;
        for (k, v) in self.values.iter().enumerate() {
            let p = self.grid.position(k);
            w.write_record(&[format!("{}", p[0]), format!("{}", p[1]), format!("{v}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON dump `{"h", "origin", "nx", "ny", "values", "mask"}`; values follow the
    /// row-major order of the nodes whose mask entry is 1.
    pub fn to_json(&self) -> Result<String> {
        let dump = FieldDump {
            h: self.grid.h,
            origin: self.grid.origin,
            nx: self.grid.nx,
            ny: self.grid.ny,
            values: &self.values,
            mask: self.grid.mask(),
        };
        Ok(serde_json::to_string(&dump)?)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn apply_laplacian(grid: &Grid, u: &[f64], out: &mut [f64]) {
    let inv_h2 = 1.0 / (grid.h * grid.h);
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = -4.0 * u[k];
        for n in grid.neighbors[k] {
            if n != NONE {
                acc += u[n as usize];
            }
        }
        *o = acc * inv_h2;
    }
}

/// `sum over grid edges of (difference of a) * (difference of b)`; the bilinear
/// form behind `dirichlet_energy`, equal to `<-Laplacian a, b> h^2`.
pub(crate) fn edge_inner(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.len() {
        let [e, w, n, s] = grid.neighbors[k];
        for nb in [e, n] {
            let (da, db) = if nb != NONE {
                (a[k] - a[nb as usize], b[k] - b[nb as usize])
            } else {
                (a[k], b[k])
            };
            acc += da * db;
        }
        for nb in [w, s] {
            if nb == NONE {
                acc += a[k] * b[k];
            }
        }
    }
    acc
}

pub(crate) fn dirichlet_energy(grid: &Grid, u: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        let [e, w, n, s] = grid.neighbors[k];
        // interior edges counted from their west/south end
        for nb in [e, n] {
            let diff = if nb != NONE { uk - u[nb as usize] } else { uk };
            acc += diff * diff;
        }
        for nb in [w, s] {
            if nb == NONE {
                acc += uk * uk;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(grid: &Arc<Grid>, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::new(
            grid.clone(),
            (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn spacing_parser() {
        assert_eq!(parse_spacing("1/256").unwrap(), 1.0 / 256.0);
        assert_eq!(parse_spacing("0.125").unwrap(), 0.125);
        assert!(parse_spacing("1/0").is_err());
        assert!(parse_spacing("abc").is_err());
        assert!(parse_spacing("-0.1").is_err());
    }

    #[test]
    fn classification() {
        let h = 1.0 / 16.0;
        let grid = Grid::new(&Domain::unit_disk(), h).unwrap();
        assert!(grid.delta().iter().all(|&d| d >= 0.5 * h));
        for (node, c) in grid.classes().iter().enumerate() {
            let p = grid.node_position(node);
            let inside = Domain::unit_disk().contains(&p);
            match c {
                NodeClass::Interior => assert!(inside),
                NodeClass::BoundaryAdjacent => assert!(inside && Domain::unit_disk().distance(&p) < 0.5 * h),
                NodeClass::Exterior => assert!(!inside),
            }
        }
        let (i, _, _) = grid.class_counts();
        assert_eq!(i, grid.len());
    }

    #[test]
    fn too_coarse_grid() {
        let thin = Domain::rectangle(&[0.0, 0.0], &[1.0, 0.1]).unwrap();
        assert!(matches!(Grid::new(&thin, 0.5), Err(Error::NoInteriorNodes { .. })));
    }

    #[test]
    fn laplacian_of_zero() {
        let grid = Grid::new(&Domain::unit_square(), 1.0 / 8.0).unwrap();
        assert!(ScalarField::zeros(grid).laplacian().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_exact_for_quadratics() {
        let grid = Grid::new(&Domain::unit_disk(), 1.0 / 32.0).unwrap();
        let q = ScalarField::from_fn(grid.clone(), |p| p[0] * p[0] + p[1] * p[1]);
        let affine = ScalarField::from_fn(grid.clone(), |p| 3.0 * p[0] - 2.0 * p[1] + 0.5);
        let (lq, la) = (q.laplacian(), affine.laplacian());
        for k in (0..grid.len()).filter(|&k| grid.has_full_stencil(k)) {
            assert!((lq.values()[k] - 4.0).abs() < 1e-9);
            assert!(la.values()[k].abs() < 1e-9);
        }
    }

    #[test]
    fn laplacian_of_sine_mode() {
        let h = 1.0 / 128.0;
        let grid = Grid::new(&Domain::unit_square(), h).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |p| (PI * p[0]).sin() * (PI * p[1]).sin());
        let lu = u.laplacian();
        let mut worst = 0.0f64;
        for k in 0..grid.len() {
            let exact = -2.0 * PI * PI * u.values()[k];
            worst = worst.max((lu.values()[k] - exact).abs() / (2.0 * PI * PI));
        }
        // relative to the maximum of the exact Laplacian
        assert!(worst < 5e-3, "{worst}");
    }

    #[test]
    fn laplacian_symmetric_and_summation_by_parts() {
        let grid = Grid::new(&Domain::l_shape(), 1.0 / 32.0).unwrap();
        let a = random_field(&grid, 1);
        let b = random_field(&grid, 2);
        let lab = a.laplacian().dot(&b).unwrap();
        let alb = a.dot(&b.laplacian()).unwrap();
        assert!((lab - alb).abs() <= 1e-12 * lab.abs().max(1.0));
        let h2 = grid.h() * grid.h();
        let sbp = -a.laplacian().dot(&a).unwrap() * h2;
        assert!((sbp - a.dirichlet_energy()).abs() <= 1e-12 * sbp);
    }

    #[test]
    fn gradient_of_affine_in_bulk() {
        let grid = Grid::new(&Domain::unit_square(), 1.0 / 16.0).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |p| 2.0 * p[0] - p[1]);
        for (k, g) in u.gradient().iter().enumerate() {
            if grid.has_full_stencil(k) {
                assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exports() {
        let grid = Grid::new(&Domain::unit_square(), 0.25).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |p| p[0]);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("x,y,value"));
        assert_eq!(text.lines().count(), grid.len() + 1);
        let v: serde_json::Value = serde_json::from_str(&u.to_json().unwrap()).unwrap();
        assert_eq!(v["values"].as_array().unwrap().len(), grid.len());
        let ones = v["mask"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|m| m.as_u64() == Some(1))
            .count();
        assert_eq!(ones, grid.len());
    }
}
