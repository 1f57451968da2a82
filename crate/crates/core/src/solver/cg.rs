use serde::Serialize;

use crate::geometry::dot;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Conjugate gradients for an SPD operator, optionally preconditioned by the
/// inverse of a positive diagonal. `x` holds the initial guess and receives the
/// result. Stops when `|b - A x| <= rel_tol |b|`.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    inverse_diagonal: Option<&[f64]>,
    rel_tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let precondition = |r: &[f64], z: &mut [f64]| match inverse_diagonal {
        Some(m) => z.iter_mut().zip(r).zip(m).for_each(|((z, r), m)| *z = r * m),
        None => z.copy_from_slice(r),
    };
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = ax;
    let mut res = dot(&r, &r).sqrt() / b_norm;
    let mut it = 0;
    while res > rel_tol && it < max_iter {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        res = dot(&r, &r).sqrt() / b_norm;
    }
    CgOutcome {
        iterations: it,
        relative_residual: res,
        converged: res <= rel_tol,
    }
}
