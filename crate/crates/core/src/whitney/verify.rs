use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{side_at, BumpFunction, WhitneyDecomposition};

/// One verified property. `margin` is `limit - observed` oriented so that a
/// nonnegative value means the property held everywhere it was checked.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub checked: u64,
    pub violations: u64,
    pub observed: f64,
    pub limit: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub cubes: usize,
    pub samples: usize,
    pub seed: u64,
    pub epsilon_cut: f64,
    /// empirical maximum of the overlap count
    pub overlap_max: usize,
    pub p_bound: u64,
    /// largest `s_Q |grad phi_Q|` seen (central differences)
    pub gradient_max: f64,
    pub checks: Vec<PropertyCheck>,
    pub pass: bool,
}

impl PropertyReport {
    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tally {
    name: &'static str,
    checked: u64,
    violations: u64,
    observed: f64,
    limit: f64,
    upper: bool,
}

impl Tally {
    /// `upper`: the property is `value <= limit`; otherwise `value >= limit`.
    fn new(name: &'static str, limit: f64, upper: bool) -> Self {
        Self {
            name,
            checked: 0,
            violations: 0,
            observed: if upper { f64::NEG_INFINITY } else { f64::INFINITY },
            limit,
            upper,
        }
    }

    fn record(&mut self, value: f64, ok: bool) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
        }
        self.observed = if self.upper {
            self.observed.max(value)
        } else {
            self.observed.min(value)
        };
    }

    fn finish(self) -> PropertyCheck {
        let margin = if self.checked == 0 {
            0.0
        } else if self.upper {
            self.limit - self.observed
        } else {
            self.observed - self.limit
        };
        PropertyCheck {
            name: self.name,
            checked: self.checked,
            violations: self.violations,
            observed: self.observed,
            limit: self.limit,
            margin,
        }
    }
}

const FD_SUBSAMPLE: usize = 5000;

/// Deterministic per-cube checks plus Monte Carlo checks on `sample_count`
/// uniform points with `delta > epsilon_cut`. Failures are report entries.
pub fn verify_properties(
    decomp: &WhitneyDecomposition,
    bump: &BumpFunction,
    sample_count: usize,
    seed: u64,
) -> PropertyReport {
    let domain = decomp.domain();
    let params = decomp.params();
    let c = decomp.constants();
    let root_n = (params.dim as f64).sqrt();
    let n = params.dim;

    let mut selection = Tally::new("selection_rule", 0.0, true);
    let mut nesting = Tally::new("no_selected_ancestor", 0.0, true);
    let mut support = Tally::new("support_in_domain", 0.0, true);
    let mut centre_low = Tally::new("center_ratio_lower", 0.5 * params.eta, false);
    let mut centre_high = Tally::new("center_ratio_upper", (params.eta + 0.5) * root_n, true);
    for cube in decomp.cubes() {
        let x = cube.center();
        let s = cube.side();
        let parent = cube.parent();
        let rule = domain.contains_cube(&x, params.eta * s)
            && !domain.contains_cube(&parent.center(), params.eta * parent.side());
        selection.record(f64::from(u8::from(!rule)), rule);
        let mut a = parent;
        let mut clean = true;
        while a.level >= decomp.root_level() {
            if decomp.find(a.level, &a.index).is_some() {
                clean = false;
            }
            a = a.parent();
        }
        nesting.record(f64::from(u8::from(!clean)), clean);
        let inside = domain.contains_cube(&x, params.eta_prime * s);
        support.record(f64::from(u8::from(!inside)), inside);
        let ratio = domain.distance(&x) / s;
        centre_low.record(ratio, ratio > 0.5 * params.eta);
        centre_high.record(ratio, ratio <= (params.eta + 0.5) * root_n);
    }

    let mut ratio = Tally::new("neighbour_side_ratio", c.c6, true);
    for (i, small) in decomp.cubes().iter().enumerate() {
        let xs = small.center();
        let ss = small.side();
        for level in decomp.root_level()..=small.level {
            let s = side_at(level);
            let reach = 0.5 * params.eta_prime * (s + ss);
            let bounds: Vec<(i64, i64)> = xs
                .iter()
                .map(|&x| {
                    (
                        ((x - reach) / s - 0.5).ceil() as i64,
                        ((x + reach) / s - 0.5).floor() as i64,
                    )
                })
                .collect();
            let mut idx: Vec<i64> = bounds.iter().map(|b| b.0).collect();
            'scan: loop {
                if let Some(j) = decomp.find(level, &idx) {
                    if j != i && (level < small.level || j > i) {
                        let big = &decomp.cubes()[j];
                        let xb = big.center();
                        let meets = xs.iter().zip(&xb).all(|(a, b)| (a - b).abs() <= reach);
                        if meets {
                            let r = big.side() / ss;
                            ratio.record(r, (1.0..c.c6).contains(&r));
                        }
                    }
                }
                for axis in 0..n {
                    idx[axis] += 1;
                    if idx[axis] <= bounds[axis].1 {
                        continue 'scan;
                    }
                    idx[axis] = bounds[axis].0;
                }
                break;
            }
        }
    }

    let eps_cut = decomp.epsilon_cut();
    let (lo, hi) = domain.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coverage = Tally::new("coverage", 0.0, true);
    let mut ratio_low = Tally::new("delta_over_side_lower", c.lambda, false);
    let mut ratio_high = Tally::new("delta_over_side_upper", c.mu, true);
    let mut overlap = Tally::new("overlap", c.p as f64, true);
    let mut sum_dev = Tally::new("partition_sum", 1e-12, true);
    let mut weight_range = Tally::new("weights_in_unit_interval", 0.0, true);
    let mut psi_range = Tally::new("psi_upper", c.p as f64, true);
    let mut power_sum = Tally::new("power_sum_at_most_one", 1.0 + 1e-12, true);
    let mut power_mean = Tally::new("power_mean_bound", 0.0, true);
    let mut gradient = Tally::new("partition_gradient", c.c3, true);
    let mut grad_agreement = Tally::new("gradient_fd_agreement", 1e-5, true);
    let p_f = c.p as f64;

    let mut p = vec![0.0; n];
    let mut accepted = 0usize;
    while accepted < sample_count {
        for (axis, x) in p.iter_mut().enumerate() {
            *x = rng.gen_range(lo[axis]..hi[axis]);
        }
        if !domain.contains(&p) {
            continue;
        }
        let delta = domain.distance(&p);
        if delta <= eps_cut {
            continue;
        }
        accepted += 1;

        let covered = decomp.covering_cube(&p).is_some();
        coverage.record(f64::from(u8::from(!covered)), covered);
        let active = decomp.cubes_containing(&p, params.eta_prime);
        for &i in &active {
            let r = delta / decomp.cubes()[i].side();
            ratio_low.record(r, r >= c.lambda);
            ratio_high.record(r, r <= c.mu);
        }
        overlap.record(active.len() as f64, active.len() as u64 <= c.p);

        let Ok(sample) = decomp.partition_at(bump, &p) else {
            sum_dev.record(f64::INFINITY, false);
            continue;
        };
        psi_range.record(sample.psi, sample.psi >= 1.0 - 1e-12 && sample.psi <= p_f);
        let total: f64 = sample.entries.iter().map(|e| e.weight).sum();
        sum_dev.record((total - 1.0).abs(), (total - 1.0).abs() <= 1e-12);
        let bad = sample
            .entries
            .iter()
            .filter(|e| !(0.0..=1.0).contains(&e.weight))
            .count();
        weight_range.record(bad as f64, bad == 0);
        for q in [1.0, 2.0, 3.0] {
            let sum_q: f64 = sample.entries.iter().map(|e| e.weight.powf(q)).sum();
            power_sum.record(sum_q, sum_q <= 1.0 + 1e-12);
            // (sum phi)^q <= P^q sum phi^q, recorded as the relative slack
            let lhs = total.powf(q);
            let rhs = p_f.powf(q) * sum_q;
            power_mean.record(lhs - rhs, lhs <= rhs * (1.0 + 1e-12));
        }

        if accepted <= FD_SUBSAMPLE {
            for e in &sample.entries {
                let s = decomp.cubes()[e.cube].side();
                let step = 1e-6 * s / c.c6;
                let mut fd = vec![0.0; n];
                let mut ok = true;
                for axis in 0..n {
                    let mut plus = p.clone();
                    let mut minus = p.clone();
                    plus[axis] += step;
                    minus[axis] -= step;
                    match (
                        decomp.partition_value(bump, e.cube, &plus),
                        decomp.partition_value(bump, e.cube, &minus),
                    ) {
                        (Ok(a), Ok(b)) => fd[axis] = (a - b) / (2.0 * step),
                        _ => ok = false,
                    }
                }
                if !ok {
                    continue;
                }
                let scaled = s * fd.iter().map(|g| g * g).sum::<f64>().sqrt();
                gradient.record(scaled, scaled <= c.c3);
                let analytic = s * e.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
                let diff = s * fd
                    .iter()
                    .zip(&e.gradient)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let rel = diff / analytic.max(1.0);
                grad_agreement.record(rel, rel <= 1e-5);
            }
        }
    }

    let overlap_max = if overlap.checked > 0 {
        overlap.observed as usize
    } else {
        0
    };
    let gradient_max = if gradient.checked > 0 { gradient.observed } else { 0.0 };
    let checks: Vec<PropertyCheck> = [
        selection,
        nesting,
        support,
        centre_low,
        centre_high,
        ratio,
        coverage,
        ratio_low,
        ratio_high,
        overlap,
        sum_dev,
        weight_range,
        psi_range,
        power_sum,
        power_mean,
        gradient,
        grad_agreement,
    ]
    .into_iter()
    .map(Tally::finish)
    .collect();
    let pass = checks.iter().all(|c| c.violations == 0);
    PropertyReport {
        cubes: decomp.len(),
        samples: sample_count,
        seed,
        epsilon_cut: eps_cut,
        overlap_max,
        p_bound: c.p,
        gradient_max,
        checks,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::whitney::{decompose, WhitneyParams};

    #[test]
    fn small_square_passes() {
        let d = decompose(&Domain::unit_square(), &WhitneyParams::default_for(2).with_k_max(8)).unwrap();
        let bump = BumpFunction::new(1.05, 2).unwrap();
        let report = verify_properties(&d, &bump, 20_000, 1);
        for c in &report.checks {
            assert_eq!(c.violations, 0, "{c:?}");
        }
        assert!(report.pass);
        assert!(report.overlap_max >= 1 && (report.overlap_max as u64) <= report.p_bound);
        assert!(report.check("neighbour_side_ratio").unwrap().checked > 0);
    }

    #[test]
    fn broken_decomposition_is_reported_not_thrown() {
        // an absurd sample count of zero still yields a report
        let d = decompose(&Domain::unit_disk(), &WhitneyParams::default_for(2).with_k_max(6)).unwrap();
        let bump = BumpFunction::new(1.05, 2).unwrap();
        let report = verify_properties(&d, &bump, 0, 1);
        assert_eq!(report.check("coverage").unwrap().checked, 0);
        assert!(report.pass);
    }
}
