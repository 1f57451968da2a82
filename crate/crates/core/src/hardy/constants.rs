use std::f64::consts::{E, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::whitney::DerivedConstants;

/// Volume of the unit ball in `R^n` (`omega_2 = pi`).
pub fn omega(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => omega(n - 2) * 2.0 * PI / n as f64,
    }
}

/// `N' = N / (N - 1)`.
pub fn conjugate_exponent(n: usize) -> f64 {
    n as f64 / (n as f64 - 1.0)
}

/// Bound on the embedding norm of `W_0^{1,N}(Q(1))` into `L^q`:
/// `(omega_N q)^{1 - 1/N + 1/q}`, valid for `q >= N`.
pub fn sobolev_bound(n: usize, q: f64) -> Result<f64> {
    if n < 2 || !(q >= n as f64) {
        return Err(Error::InvalidParams(format!(
            "Sobolev bound needs N >= 2 and q >= N, got N = {n}, q = {q}"
        )));
    }
    let nf = n as f64;
    Ok((omega(n) * q).powf(1.0 - 1.0 / nf + 1.0 / q))
}

/// `Sigma_q = 2 P S_q lambda^{-N/q} [mu^{N-p} + P c3^p mu^N]^{1/p}`.
///
/// Only `p = N` has an explicit `S_q` bound; other exponents are refused.
pub fn sigma_q(dc: &DerivedConstants, n: usize, p: f64, q: f64) -> Result<f64> {
    let nf = n as f64;
    if p != nf {
        return Err(Error::Unsupported(format!(
            "no explicit Sobolev constant for p = {p} < N = {n}"
        )));
    }
    if !(q > p) {
        return Err(Error::InvalidParams(format!("need q > p, got q = {q}, p = {p}")));
    }
    Ok(sigma_q_with(dc, n, p, q, dc.p as f64, sobolev_bound(n, q)?))
}

/// Same formula with `P` and `S_q` supplied.
pub fn sigma_q_with(dc: &DerivedConstants, n: usize, p: f64, q: f64, big_p: f64, s_q: f64) -> f64 {
    let nf = n as f64;
    let bracket = dc.mu.powf(nf - p) + big_p * dc.c3.powf(p) * dc.mu.powf(nf);
    2.0 * big_p * s_q * dc.lambda.powf(-nf / q) * bracket.powf(1.0 / p)
}

/// `A = {2P [1 + P (c3 mu)^N]^{1/N}}^{N'}`.
pub fn constant_a(dc: &DerivedConstants, n: usize) -> f64 {
    let nf = n as f64;
    let big_p = dc.p as f64;
    let inner = 2.0 * big_p * (1.0 + big_p * (dc.c3 * dc.mu).powf(nf)).powf(1.0 / nf);
    inner.powf(conjugate_exponent(n))
}

/// `e omega_N N' A`: the series for `c2` converges iff `c1^{N'}` exceeds this.
pub fn c2_threshold(dc: &DerivedConstants, n: usize) -> f64 {
    E * omega(n) * conjugate_exponent(n) * constant_a(dc, n)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum C2Value {
    Converged {
        value: f64,
        terms: usize,
        /// upper bound on the omitted tail
        tail_bound: f64,
        /// whether `tail_bound < 1e-12 value` was reached within the term budget
        certified: bool,
    },
    Diverged {
        c1_power: f64,
        threshold: f64,
    },
}

impl C2Value {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Converged { value, .. } => Some(*value),
            Self::Diverged { .. } => None,
        }
    }
}

/// `c2 = sum_{q >= N-1} lambda^{-N} N' omega_N x^q q^q / (q-1)!` with
/// `x = N' omega_N A / c1^{N'}`.
///
/// Consecutive terms have ratio `x (1 + 1/q)^{q+1}`, which decreases to `x e`;
/// once it is below 1 the tail after term `q` is at most `a_{q+1} / (1 - rho_{q+1})`.
pub fn c2_constant(c1: f64, n: usize, dc: &DerivedConstants, terms: usize) -> Result<C2Value> {
    if n < 2 || !(c1 > 0.0) || terms == 0 {
        return Err(Error::InvalidParams(format!(
            "c2 needs N >= 2, c1 > 0, terms >= 1; got {n}, {c1}, {terms}"
        )));
    }
    let np = conjugate_exponent(n);
    let c1_power = c1.powf(np);
    let threshold = c2_threshold(dc, n);
    if c1_power <= threshold {
        return Ok(C2Value::Diverged { c1_power, threshold });
    }
    let nf = n as f64;
    let ln_x = (np * omega(n) * constant_a(dc, n)).ln() - np * c1.ln();
    let ln_prefactor = -nf * dc.lambda.ln() + (np * omega(n)).ln();
    let ln_term = |q: usize, ln_fact_prev: f64| ln_prefactor + q as f64 * (ln_x + (q as f64).ln()) - ln_fact_prev;
    let ratio = |q: usize| {
        let qf = q as f64;
        (ln_x + (qf + 1.0) * (1.0 / qf).ln_1p()).exp()
    };

    let first = n - 1;
    // ln((q - 1)!) for q = first
    let mut ln_fact: f64 = (1..first).map(|k| (k as f64).ln()).sum();
    let mut sum = 0.0;
    let mut q = first;
    let mut used = 0;
    loop {
        let term = ln_term(q, ln_fact).exp();
        if !term.is_finite() {
            return Err(Error::SeriesOverflow(c1));
        }
        sum += term;
        used += 1;
        // next term index q + 1 uses ln(q!)
        ln_fact += (q as f64).ln();
        let rho = ratio(q + 1);
        if rho < 1.0 {
            let next = ln_term(q + 1, ln_fact).exp();
            let tail = next / (1.0 - rho);
            if tail < 1e-12 * sum || used >= terms {
                return Ok(C2Value::Converged {
                    value: sum,
                    terms: used,
                    tail_bound: tail,
                    certified: tail < 1e-12 * sum,
                });
            }
        } else if used >= terms {
            return Ok(C2Value::Converged {
                value: sum,
                terms: used,
                tail_bound: f64::INFINITY,
                certified: false,
            });
        }
        q += 1;
    }
}

/// Partial sum of `Phi_N(t) = sum_{k >= N-1} |t|^{k N'} / k!`, continued until the
/// tail is certified below `1e-16` of the sum.
pub fn phi_n(t: f64, n: usize, terms: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("Phi_N needs N >= 2, got {n}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let np = conjugate_exponent(n);
    let z = t.abs().powf(np);
    if !z.is_finite() || z > 700.0 {
        return Err(Error::SeriesOverflow(t));
    }
    // first term z^{N-1} / (N-1)!, then term_{k+1} = term_k z / (k + 1)
    let mut k = n - 1;
    let mut term = (1..=k).fold(1.0, |acc, j| acc * z / j as f64);
    let mut sum = 0.0;
    for _ in 0..terms {
        sum += term;
        k += 1;
        term *= z / k as f64;
        // everything after `term` shrinks at least by z / (k + 1)
        let rho = z / (k as f64 + 1.0);
        if rho < 1.0 && term / (1.0 - rho) < 1e-16 * sum {
            return if sum.is_finite() {
                Ok(sum)
            } else {
                Err(Error::SeriesOverflow(t))
            };
        }
    }
    Err(Error::SeriesTruncated(terms))
}

/// Every constant that enters the inequalities, for one `(N, p, q)`.
#[derive(Clone, Debug, Serialize)]
pub struct TheoreticalConstants {
    pub n: usize,
    pub n_prime: f64,
    pub p: f64,
    pub q: f64,
    pub omega_n: f64,
    pub s_q: f64,
    pub sigma_q: f64,
    pub a: f64,
    pub c2_threshold: f64,
    pub c1: f64,
    pub c2: C2Value,
    pub hardy: f64,
    pub lambda: f64,
    pub mu: f64,
    pub c3: f64,
    pub c6: f64,
    pub p_bound: u64,
}

/// Default `c1`: the value with `c1^{N'}` twice the convergence threshold.
pub fn default_c1(dc: &DerivedConstants, n: usize) -> f64 {
    (2.0 * c2_threshold(dc, n)).powf(1.0 / conjugate_exponent(n))
}

impl TheoreticalConstants {
    pub fn compute(dc: &DerivedConstants, n: usize, q: f64, c1: Option<f64>, hardy: f64) -> Result<Self> {
        let p = n as f64;
        let c1 = c1.unwrap_or_else(|| default_c1(dc, n));
        Ok(Self {
            n,
            n_prime: conjugate_exponent(n),
            p,
            q,
            omega_n: omega(n),
            s_q: sobolev_bound(n, q)?,
            sigma_q: sigma_q(dc, n, p, q)?,
            a: constant_a(dc, n),
            c2_threshold: c2_threshold(dc, n),
            c1,
            c2: c2_constant(c1, n, dc, 100_000)?,
            hardy,
            lambda: dc.lambda,
            mu: dc.mu,
            c3: dc.c3,
            c6: dc.c6,
            p_bound: dc.p,
        })
    }
}
