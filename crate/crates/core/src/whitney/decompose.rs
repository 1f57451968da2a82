use std::fmt::Write as _;

use rustc_hash::FxHashMap;
use serde::Serialize;

use super::{side_at, BumpFunction, DerivedConstants, DyadicCube, WhitneyParams};
use crate::error::{Error, Result};
use crate::geometry::Domain;

/// Cubes abandoned at the finest level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationReport {
    pub k_max: i32,
    pub truncated_cubes: usize,
    /// total volume of the truncated cubes, an upper bound for the uncovered shell
    pub shell_measure_bound: f64,
    /// every point with `delta > epsilon_cut` is covered: `mu 2^-k_max`
    pub epsilon_cut: f64,
}

#[derive(Debug)]
pub struct WhitneyDecomposition {
    domain: Domain,
    params: WhitneyParams,
    root_level: i32,
    cubes: Vec<DyadicCube>,
    /// per level (offset by `root_level`): cube index vector -> position in `cubes`
    lookup: Vec<FxHashMap<Box<[i64]>, u32>>,
    constants: DerivedConstants,
    truncation: TruncationReport,
}

#[derive(Clone, Debug)]
pub struct PartitionEntry {
    pub cube: usize,
    pub weight: f64,
    pub gradient: Vec<f64>,
}

/// Partition of unity evaluated at one point.
#[derive(Clone, Debug)]
pub struct PartitionSample {
    /// `psi(p) = sum_Q phi((p - x_Q)/s_Q)`
    pub psi: f64,
    pub entries: Vec<PartitionEntry>,
}

/// Builds the selected cube family by recursive dyadic subdivision.
pub fn decompose(domain: &Domain, params: &WhitneyParams) -> Result<WhitneyDecomposition> {
    params.validate()?;
    if domain.dim() != params.dim {
        return Err(Error::InvalidParams(format!(
            "domain dimension {} differs from parameter dimension {}",
            domain.dim(),
            params.dim
        )));
    }
    let bump = BumpFunction::new(params.eta_prime, params.dim)?;
    let constants = DerivedConstants::compute(params, &bump)?;

    // root cubes must exceed the diameter so that no ancestor can be selected
    let needed = -(domain.diameter_bound().log2().ceil() as i32);
    let root_level = params.k_min.map_or(needed, |k| k.min(needed));
    if root_level > params.k_max {
        return Err(Error::InvalidParams(format!(
            "k_max {} is coarser than the root level {root_level}",
            params.k_max
        )));
    }
    let (lo, hi) = domain.bounding_box();
    let root_side = side_at(root_level);
    let ranges: Vec<(i64, i64)> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| ((a / root_side).floor() as i64, (b / root_side).floor() as i64))
        .collect();

    let mut stack = Vec::new();
    let mut index: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    'roots: loop {
        stack.push(DyadicCube::new(root_level, index.clone()));
        for (axis, r) in ranges.iter().enumerate() {
            index[axis] += 1;
            if index[axis] <= r.1 {
                continue 'roots;
            }
            index[axis] = r.0;
        }
        break;
    }

    let mut cubes = Vec::new();
    let mut truncated = 0usize;
    while let Some(cube) = stack.pop() {
        let s = cube.side();
        let center = cube.center();
        if domain.cube_misses(&center, s) {
            continue;
        }
        if domain.contains_cube(&center, params.eta * s) {
            // reached only through ancestors whose eta-dilation leaves the domain
            let parent = cube.parent();
            if !domain.contains_cube(&parent.center(), params.eta * parent.side()) {
                cubes.push(cube);
            }
            continue;
        }
        if cube.level >= params.k_max {
            truncated += 1;
            continue;
        }
        stack.extend(cube.children());
    }
    cubes.sort();

    let truncation = TruncationReport {
        k_max: params.k_max,
        truncated_cubes: truncated,
        shell_measure_bound: truncated as f64 * side_at(params.k_max).powi(params.dim as i32),
        epsilon_cut: constants.mu * side_at(params.k_max),
    };
    if cubes.is_empty() {
        return Err(Error::EmptyDecomposition(truncation));
    }

    let mut lookup = vec![FxHashMap::default(); (params.k_max - root_level + 1) as usize];
    for (i, cube) in cubes.iter().enumerate() {
        lookup[(cube.level - root_level) as usize].insert(cube.index.clone().into_boxed_slice(), i as u32);
    }
    Ok(WhitneyDecomposition {
        domain: domain.clone(),
        params: params.clone(),
        root_level,
        cubes,
        lookup,
        constants,
        truncation,
    })
}

impl WhitneyDecomposition {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn params(&self) -> &WhitneyParams {
        &self.params
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.constants
    }

    pub fn truncation(&self) -> &TruncationReport {
        &self.truncation
    }

    pub fn root_level(&self) -> i32 {
        self.root_level
    }

    /// Selected cubes in `(level, index)` order.
    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn epsilon_cut(&self) -> f64 {
        self.truncation.epsilon_cut
    }

    pub fn find(&self, level: i32, index: &[i64]) -> Option<usize> {
        if level < self.root_level || level > self.params.k_max {
            return None;
        }
        self.lookup[(level - self.root_level) as usize]
            .get(index)
            .map(|&i| i as usize)
    }

    /// Selected cubes whose closed `sigma`-dilation contains `p`, for `sigma < 3`.
    pub fn cubes_containing(&self, p: &[f64], sigma: f64) -> Vec<usize> {
        debug_assert!(sigma < 3.0);
        let n = p.len();
        let mut found = Vec::new();
        let mut idx = vec![0i64; n];
        for level in self.root_level..=self.params.k_max {
            let map = &self.lookup[(level - self.root_level) as usize];
            if map.is_empty() {
                continue;
            }
            let s = side_at(level);
            let base: Vec<i64> = p.iter().map(|&x| (x / s).floor() as i64).collect();
            // offsets in {-1, 0, 1}^N
            let total = 3usize.pow(n as u32);
            for code in 0..total {
                let mut c = code;
                for axis in 0..n {
                    idx[axis] = base[axis] + (c % 3) as i64 - 1;
                    c /= 3;
                }
                if let Some(&i) = map.get(idx.as_slice()) {
                    if self.cubes[i as usize].dilation_contains(sigma, p) {
                        found.push(i as usize);
                    }
                }
            }
        }
        found
    }

    /// Number of selected cubes whose `eta'`-dilation contains `p`.
    pub fn overlap_count(&self, p: &[f64]) -> usize {
        self.cubes_containing(p, self.params.eta_prime).len()
    }

    /// A selected cube containing `p` (undilated), if any.
    pub fn covering_cube(&self, p: &[f64]) -> Option<usize> {
        self.cubes_containing(p, 1.0).into_iter().next()
    }

    fn check_bump(&self, bump: &BumpFunction) -> Result<()> {
        if bump.eta_prime != self.params.eta_prime || bump.dim != self.params.dim {
            return Err(Error::InvalidParams(format!(
                "bump (eta' = {}, N = {}) does not match the decomposition (eta' = {}, N = {})",
                bump.eta_prime, bump.dim, self.params.eta_prime, self.params.dim
            )));
        }
        Ok(())
    }

    /// `phi_Q(p) = phi((p - x_Q)/s_Q) / psi(p)` with gradients, over cubes active at `p`.
    pub fn partition_at(&self, bump: &BumpFunction, p: &[f64]) -> Result<PartitionSample> {
        self.check_bump(bump)?;
        let delta = self.domain.distance(p);
        let uncovered = || Error::PartialCoverage {
            point: p.to_vec(),
            delta,
            cutoff: self.epsilon_cut(),
        };
        if !self.domain.contains(p) || delta <= self.epsilon_cut() {
            return Err(uncovered());
        }
        let n = p.len();
        let mut raw = Vec::new();
        let mut psi = 0.0;
        let mut grad_psi = vec![0.0; n];
        let mut y = vec![0.0; n];
        for i in self.cubes_containing(p, self.params.eta_prime) {
            let cube = &self.cubes[i];
            let s = cube.side();
            for (axis, (&x, &m)) in p.iter().zip(&cube.index).enumerate() {
                y[axis] = (x - (m as f64 + 0.5) * s) / s;
            }
            let (v, mut g) = bump.value_and_gradient(&y);
            if v == 0.0 {
                continue;
            }
            g.iter_mut().for_each(|gi| *gi /= s);
            psi += v;
            grad_psi.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            raw.push((i, v, g));
        }
        if psi < 1.0 - 1e-12 {
            return Err(uncovered());
        }
        let entries = raw
            .into_iter()
            .map(|(cube, v, g)| PartitionEntry {
                cube,
                weight: v / psi,
                gradient: g
                    .iter()
                    .zip(&grad_psi)
                    .map(|(gi, gp)| gi / psi - v * gp / (psi * psi))
                    .collect(),
            })
            .collect();
        Ok(PartitionSample { psi, entries })
    }

    /// Sparse `(cube, weight)` list of the partition of unity at `p`.
    pub fn partition_weights(&self, bump: &BumpFunction, p: &[f64]) -> Result<Vec<(usize, f64)>> {
        Ok(self
            .partition_at(bump, p)?
            .entries
            .into_iter()
            .map(|e| (e.cube, e.weight))
            .collect())
    }

    /// `phi_Q(p)` for one cube (0 outside its support).
    pub fn partition_value(&self, bump: &BumpFunction, cube: usize, p: &[f64]) -> Result<f64> {
        Ok(self
            .partition_at(bump, p)?
            .entries
            .iter()
            .find(|e| e.cube == cube)
            .map_or(0.0, |e| e.weight))
    }

    /// JSON export: cube list plus constants and truncation report.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Export<'a> {
            domain: &'a Domain,
            params: &'a WhitneyParams,
            root_level: i32,
            cubes: &'a [DyadicCube],
            constants: &'a DerivedConstants,
            truncation: &'a TruncationReport,
        }
        Ok(serde_json::to_string_pretty(&Export {
            domain: &self.domain,
            params: &self.params,
            root_level: self.root_level,
            cubes: &self.cubes,
            constants: &self.constants,
            truncation: &self.truncation,
        })?)
    }

    /// SVG of a planar decomposition, one rectangle per cube, coloured by level.
    pub fn to_svg(&self, width_px: f64) -> Result<String> {
        if self.params.dim != 2 {
            return Err(Error::Unsupported("SVG rendering is planar only".into()));
        }
        let (lo, hi) = self.domain.bounding_box();
        let scale = width_px / (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let (w, h) = ((hi[0] - lo[0]) * scale, (hi[1] - lo[1]) * scale);
        let levels = (self.params.k_max - self.root_level).max(1) as f64;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.3} {h:.3}">"#
        );
        for cube in &self.cubes {
            let s = cube.side();
            let x0 = cube.index[0] as f64 * s;
            let y1 = (cube.index[1] + 1) as f64 * s;
            let hue = 240.0 * (cube.level - self.root_level) as f64 / levels;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.4}" y="{:.4}" width="{:.4}" height="{:.4}" fill="hsl({hue:.0},70%,60%)" stroke="black" stroke-width="{:.4}"/>"#,
                (x0 - lo[0]) * scale,
                (hi[1] - y1) * scale,
                s * scale,
                s * scale,
                (0.05 * s * scale).min(0.5)
            );
        }
        svg.push_str("</svg>\n");
        Ok(svg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_decomposition(k_max: i32) -> WhitneyDecomposition {
        decompose(
            &Domain::unit_square(),
            &WhitneyParams::default_for(2).with_k_max(k_max).with_k_min(0),
        )
        .unwrap()
    }

    #[test]
    fn selection_rule_holds() {
        let d = square_decomposition(9);
        let eta = d.params().eta;
        for cube in d.cubes() {
            assert!(d.domain().contains_cube(&cube.center(), eta * cube.side()));
            let parent = cube.parent();
            assert!(!d.domain().contains_cube(&parent.center(), eta * parent.side()));
        }
    }

    #[test]
    fn deterministic() {
        let a = square_decomposition(8);
        let b = square_decomposition(8);
        assert_eq!(a.cubes(), b.cubes());
    }

    #[test]
    fn no_selected_ancestors() {
        let d = decompose(&Domain::l_shape(), &WhitneyParams::default_for(2).with_k_max(9)).unwrap();
        for cube in d.cubes() {
            let mut a = cube.parent();
            while a.level >= d.root_level() {
                assert!(
                    d.find(a.level, &a.index).is_none(),
                    "{cube:?} has selected ancestor {a:?}"
                );
                a = a.parent();
            }
        }
    }

    #[test]
    fn thin_domain_is_empty() {
        let thin = Domain::rectangle(&[0.0, 0.0], &[1.0, 1e-4]).unwrap();
        match decompose(&thin, &WhitneyParams::default_for(2).with_k_max(8)) {
            Err(Error::EmptyDecomposition(report)) => assert!(report.truncated_cubes > 0),
            other => panic!("expected empty decomposition, got {other:?}"),
        }
    }

    #[test]
    fn refuses_bad_params() {
        let mut params = WhitneyParams::default_for(2);
        params.eta_prime = 1.5;
        assert!(decompose(&Domain::unit_square(), &params).is_err());
    }

    #[test]
    fn overlap_matches_exhaustive_search() {
        let d = square_decomposition(8);
        let ep = d.params().eta_prime;
        for p in [[0.5, 0.5], [0.1, 0.3], [0.01, 0.99], [0.251, 0.75], [0.2, 0.2]] {
            let brute = d.cubes().iter().filter(|c| c.dilation_contains(ep, &p)).count();
            assert_eq!(d.overlap_count(&p), brute);
            assert!(brute >= 1);
        }
    }

    #[test]
    fn weights_form_partition() {
        let d = square_decomposition(8);
        let bump = BumpFunction::new(d.params().eta_prime, 2).unwrap();
        for p in [[0.5, 0.5], [0.1, 0.3], [0.03, 0.97], [0.25, 0.75]] {
            let w = d.partition_weights(&bump, &p).unwrap();
            let sum: f64 = w.iter().map(|e| e.1).sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|e| (0.0..=1.0).contains(&e.1)));
        }
        assert!(matches!(
            d.partition_weights(&bump, &[1e-6, 0.5]),
            Err(Error::PartialCoverage { .. })
        ));
        let wrong = BumpFunction::new(1.1, 2).unwrap();
        assert!(d.partition_weights(&wrong, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn isolated_core_has_unit_weight() {
        let d = square_decomposition(8);
        let bump = BumpFunction::new(d.params().eta_prime, 2).unwrap();
        // the largest cubes sit in the middle of the square
        let big = d.cubes().iter().position(|c| c.level == d.cubes()[0].level).unwrap();
        let x = d.cubes()[big].center();
        let w = d.partition_weights(&bump, &x).unwrap();
        assert_eq!(w, vec![(big, 1.0)]);
    }

    #[test]
    fn json_and_svg() {
        let d = square_decomposition(5);
        let v: serde_json::Value = serde_json::from_str(&d.to_json().unwrap()).unwrap();
        assert_eq!(v["cubes"].as_array().unwrap().len(), d.len());
        assert!(v["cubes"][0]["k"].is_i64() && v["cubes"][0]["m"].is_array());
        let svg = d.to_svg(400.0).unwrap();
        assert_eq!(svg.matches("<rect").count(), d.len());
    }

    #[test]
    fn three_dimensional_ball() {
        let ball = Domain::disk(&[0.0, 0.0, 0.0], 1.0).unwrap();
        let params = WhitneyParams::new(2.5, 1.05, 3, 5).unwrap();
        let d = decompose(&ball, &params).unwrap();
        assert!(!d.is_empty());
        assert!(d.covering_cube(&[0.1, 0.2, -0.1]).is_some());
    }
}
