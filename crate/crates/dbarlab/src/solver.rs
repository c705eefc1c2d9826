//! Least-norm solve for the first-order problem: find v with M_dbar v = g
//! and v orthogonal to the kernel. The normal equations use the composition
//! route S = M M^H (exact adjoint structure), CG stays inside range(M), and
//! v = M^H u inherits kernel-orthogonality from that; the returned residual
//! and defect are both recomputed from the final v, not trusted from CG.

use crate::cg::{solve_cg, CgOptions};
use crate::grid::{inner_product, sample_one, GridField, TensorGrid};
use crate::operators::{assemble_dbar, assemble_s_composition};
use crate::sparse::norm2;
use crate::weights::WeightModel;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// relative CG tolerance on the normal equations
    pub tol: f64,
    pub max_iter: usize,
    /// size of the sampled-kernel basis used for the defect measurement
    pub kernel_basis_size: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iter: 50_000, kernel_basis_size: 8 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub v: GridField,
    /// ||M_dbar v - g|| / ||g||, recomputed after the solve
    pub residual: f64,
    /// largest projection of v/||v|| onto the sampled kernel basis
    pub orthogonality_defect: f64,
    pub cg_iterations: usize,
    pub norm_v: f64,
}

/// orthonormal samples of weighted holomorphic monomials z^j e^{-phi},
/// j = 0 .. count-1, Gram-Schmidt in the grid inner product (two passes)
pub fn kernel_test_basis(
    grid: &TensorGrid,
    w: &WeightModel,
    count: usize,
) -> Result<Vec<GridField>> {
    let mut basis: Vec<GridField> = Vec::with_capacity(count);
    for j in 0..count {
        let mut f = sample_one(grid, |z| {
            let phi = match w.eval_derivatives(z) {
                Ok(b) => b.phi,
                Err(_) => f64::NAN,
            };
            z.powu(j as u32) * (-phi).exp()
        });
        if f.values.iter().any(|v| v.re.is_nan() || v.im.is_nan()) {
            return Err(Error::InvalidConfig(
                "weight not evaluable on the requested grid".into(),
            ));
        }
        let before = f.norm();
        if before == 0.0 {
            return Err(Error::RankDeficient { requested: count, usable: j });
        }
        for _pass in 0..2 {
            for b in &basis {
                let c = inner_product(&f, b)?;
                for (fv, bv) in f.values.iter_mut().zip(&b.values) {
                    *fv -= c * bv;
                }
            }
        }
        let after = f.norm();
        if after <= 1e-8 * before {
            return Err(Error::RankDeficient { requested: count, usable: j });
        }
        let s = 1.0 / after;
        for v in &mut f.values {
            *v *= s;
        }
        basis.push(f);
    }
    Ok(basis)
}

pub fn solve_canonical(
    grid: &TensorGrid,
    w: &WeightModel,
    g: &GridField,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    if g.grid != *grid {
        return Err(Error::GridMismatch);
    }
    let norm_g = norm2(&g.values);
    if norm_g == 0.0 {
        return Ok(SolveResult {
            v: GridField::zeros(grid),
            residual: 0.0,
            orthogonality_defect: 0.0,
            cg_iterations: 0,
            norm_v: 0.0,
        });
    }
    let dbar = assemble_dbar(grid, w)?;
    let s = assemble_s_composition(&dbar);
    let cg = solve_cg(
        &s.matrix,
        &g.values,
        &CgOptions { tol: opts.tol, max_iter: opts.max_iter },
    )?;
    let v_vals = dbar.matrix.adjoint().apply(&cg.x);
    let back = dbar.matrix.apply(&v_vals);
    let mut res = 0.0;
    for i in 0..back.len() {
        res += (back[i] - g.values[i]).norm_sqr();
    }
    let residual = res.sqrt() / norm_g;
    let v = GridField::from_values(grid, v_vals)?;
    let norm_v = v.norm();
    let defect = if norm_v == 0.0 {
        0.0
    } else {
        let kappa = kernel_test_basis(grid, w, opts.kernel_basis_size)?;
        let mut worst = 0.0f64;
        for b in &kappa {
            worst = worst.max(inner_product(&v, b)?.norm() / norm_v);
        }
        worst
    };
    Ok(SolveResult {
        v,
        residual,
        orthogonality_defect: defect,
        cg_iterations: cg.iterations,
        norm_v,
    })
}
