//! Jacobi-preconditioned conjugate gradients for Hermitian positive
//! (semi-)definite operators. Tracks the true relative residual and guards
//! against negative curvature so a misassembled operator fails loudly
//! instead of silently diverging.

use crate::sparse::{norm2, vdot, LinearOp};
use crate::{C64, Error, Result};

pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions { tol: 1e-10, max_iter: 50_000 }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    /// ||b - A x|| / ||b|| recomputed from scratch at exit
    pub relative_residual: f64,
}

/// Solve A x = b. The preconditioner is the reciprocal real diagonal when the
/// operator exposes one (entries <= 0 fall back to identity); convergence is
/// declared on the recurrence residual and then re-verified against the true
/// residual, restarting from the current iterate if rounding drift shows up.
pub fn solve_cg(op: &dyn LinearOp, b: &[C64], opts: &CgOptions) -> Result<CgOutcome> {
    let n = op.dim();
    assert_eq!(b.len(), n);
    let norm_b = norm2(b);
    if norm_b == 0.0 {
        return Ok(CgOutcome { x: vec![C64::new(0.0, 0.0); n], iterations: 0, relative_residual: 0.0 });
    }
    let inv_diag: Option<Vec<f64>> = op.diagonal().map(|d| {
        d.into_iter().map(|v| if v > 0.0 { 1.0 / v } else { 1.0 }).collect()
    });
    let precond = |r: &[C64], z: &mut Vec<C64>| {
        z.clear();
        match &inv_diag {
            Some(m) => z.extend(r.iter().zip(m).map(|(ri, mi)| ri * *mi)),
            None => z.extend_from_slice(r),
        }
    };

    let mut x = vec![C64::new(0.0, 0.0); n];
    let mut r = b.to_vec();
    let mut z = Vec::with_capacity(n);
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = vdot(&r, &z).re;
    let mut ap = vec![C64::new(0.0, 0.0); n];
    let mut total_iters = 0usize;
    let mut restarts = 0usize;

    loop {
        for _ in 0..opts.max_iter.saturating_sub(total_iters) {
            op.apply_into(&p, &mut ap);
            let pap = vdot(&p, &ap).re;
            let scale = vdot(&p, &p).re;
            if pap <= f64::EPSILON * scale {
                // Hermitian PSD operators can only produce this on a vector
                // (numerically) in the kernel; accept the iterate if it
                // already meets the tolerance, otherwise report the geometry.
                let true_res = residual_norm(op, &x, b) / norm_b;
                if true_res <= opts.tol {
                    return Ok(CgOutcome { x, iterations: total_iters, relative_residual: true_res });
                }
                return Err(Error::NegativeCurvature { value: pap });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            total_iters += 1;
            if norm2(&r) <= opts.tol * norm_b {
                break;
            }
            precond(&r, &mut z);
            let rz_new = vdot(&r, &z).re;
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let true_res = residual_norm(op, &x, b) / norm_b;
        if true_res <= opts.tol {
            return Ok(CgOutcome { x, iterations: total_iters, relative_residual: true_res });
        }
        if total_iters >= opts.max_iter || restarts >= 3 {
            return Err(Error::CgNonConvergence { iterations: total_iters, residual: true_res });
        }
        // recurrence drifted from the true residual: restart from x
        restarts += 1;
        op.apply_into(&x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        precond(&r, &mut z);
        p.copy_from_slice(&z);
        rz = vdot(&r, &z).re;
    }
}

pub fn residual_norm(op: &dyn LinearOp, x: &[C64], b: &[C64]) -> f64 {
    let mut ax = vec![C64::new(0.0, 0.0); b.len()];
    op.apply_into(x, &mut ax);
    let mut acc = 0.0;
    for i in 0..b.len() {
        acc += (b[i] - ax[i]).norm_sqr();
    }
    acc.sqrt()
}
