//! Discrete (0,1)- and (0,2)-form calculus for decoupled multivariable
//! weights. A (0,1)-form is one `GridField` per complex variable; a
//! (0,2)-form stores the coefficients of the ascending wedge basis
//! (j < k), so it has n(n-1)/2 components.
//!
//! All derivatives are centered differences with Dirichlet boundary;
//! mixed second derivatives are compositions of first differences, which
//! keeps every identity here valid to O(h^2) and the wedge of an exact
//! form at rounding level.

use crate::grid::{GridField, TensorGrid};
use crate::weights::{DecoupledWeight, DerivativeBundle};
use crate::{C64, Error, Result};

/// position of dzbar_j ^ dzbar_k (0-based, j < k) in the ascending basis
pub fn wedge_index(n: usize, j: usize, k: usize) -> usize {
    debug_assert!(j < k && k < n);
    j * n - j * (j + 1) / 2 + (k - j - 1)
}

pub fn wedge_len(n: usize) -> usize {
    n * (n - 1) / 2
}

/// centered difference along one real axis, zero outside the grid
fn axis_derivative(grid: &TensorGrid, values: &[C64], axis: usize) -> Vec<C64> {
    let n = grid.node_count();
    let m = grid.per_axis;
    let s = grid.stride(axis);
    let inv2h = 0.5 / grid.spacing;
    let mut out = vec![C64::new(0.0, 0.0); n];
    let mut idx = vec![0usize; grid.real_dims()];
    for r in 0..n {
        grid.decode(r, &mut idx);
        let fwd = if idx[axis] + 1 < m { values[r + s] } else { C64::new(0.0, 0.0) };
        let bwd = if idx[axis] > 0 { values[r - s] } else { C64::new(0.0, 0.0) };
        out[r] = (fwd - bwd) * inv2h;
    }
    out
}

/// d/dzbar_j = (d/dx_j + i d/dy_j) / 2
fn dzbar(grid: &TensorGrid, values: &[C64], j: usize) -> Vec<C64> {
    let dx = axis_derivative(grid, values, 2 * j);
    let dy = axis_derivative(grid, values, 2 * j + 1);
    dx.iter()
        .zip(&dy)
        .map(|(a, b)| 0.5 * (a + C64::i() * b))
        .collect()
}

/// d/dz_j = (d/dx_j - i d/dy_j) / 2
fn dz(grid: &TensorGrid, values: &[C64], j: usize) -> Vec<C64> {
    let dx = axis_derivative(grid, values, 2 * j);
    let dy = axis_derivative(grid, values, 2 * j + 1);
    dx.iter()
        .zip(&dy)
        .map(|(a, b)| 0.5 * (a - C64::i() * b))
        .collect()
}

/// per-factor derivative bundles cached on the factor's own 2D plane
struct PlaneCache {
    m: usize,
    planes: Vec<Vec<DerivativeBundle>>,
}

impl PlaneCache {
    fn build(grid: &TensorGrid, w: &DecoupledWeight) -> Result<PlaneCache> {
        if grid.n_complex != w.n() {
            return Err(Error::GridMismatch);
        }
        let m = grid.per_axis;
        let mut planes = Vec::with_capacity(w.n());
        for f in &w.factors {
            let mut plane = Vec::with_capacity(m * m);
            for ix in 0..m {
                let x = grid.axis_coord(ix);
                for iy in 0..m {
                    plane.push(f.eval_derivatives(C64::new(x, grid.axis_coord(iy)))?);
                }
            }
            planes.push(plane);
        }
        Ok(PlaneCache { m, planes })
    }

    fn at(&self, j: usize, idx: &[usize]) -> &DerivativeBundle {
        &self.planes[j][idx[2 * j] * self.m + idx[2 * j + 1]]
    }
}

fn check_components(grid: &TensorGrid, g: &[GridField], expect: usize) -> Result<()> {
    if g.len() != expect {
        return Err(Error::GridMismatch);
    }
    for c in g {
        if c.grid != *grid {
            return Err(Error::GridMismatch);
        }
    }
    Ok(())
}

/// scalar v -> (0,1)-form with components dv/dzbar_j + phi_zbar_j v
pub fn apply_dbar_function(
    grid: &TensorGrid,
    w: &DecoupledWeight,
    v: &GridField,
) -> Result<Vec<GridField>> {
    check_components(grid, std::slice::from_ref(v), 1)?;
    let cache = PlaneCache::build(grid, w)?;
    let n = grid.node_count();
    let mut idx = vec![0usize; grid.real_dims()];
    let mut out = Vec::with_capacity(w.n());
    for j in 0..w.n() {
        let mut comp = dzbar(grid, &v.values, j);
        for r in 0..n {
            grid.decode(r, &mut idx);
            comp[r] += cache.at(j, &idx).phi_zbar * v.values[r];
        }
        out.push(GridField::from_values(grid, comp)?);
    }
    Ok(out)
}

/// (0,1)-form -> (0,2)-form; the (j,k) coefficient (j < k) is
/// (dg_k/dzbar_j + phi_zbar_j g_k) - (dg_j/dzbar_k + phi_zbar_k g_j)
pub fn apply_dbar_form(
    grid: &TensorGrid,
    w: &DecoupledWeight,
    g: &[GridField],
) -> Result<Vec<GridField>> {
    let nv = w.n();
    check_components(grid, g, nv)?;
    let cache = PlaneCache::build(grid, w)?;
    let n = grid.node_count();
    let mut idx = vec![0usize; grid.real_dims()];
    let mut out = Vec::with_capacity(wedge_len(nv));
    for j in 0..nv {
        for k in (j + 1)..nv {
            let dgk_j = dzbar(grid, &g[k].values, j);
            let dgj_k = dzbar(grid, &g[j].values, k);
            let mut coeff = vec![C64::new(0.0, 0.0); n];
            for r in 0..n {
                grid.decode(r, &mut idx);
                let pj = cache.at(j, &idx).phi_zbar;
                let pk = cache.at(k, &idx).phi_zbar;
                coeff[r] = (dgk_j[r] + pj * g[k].values[r]) - (dgj_k[r] + pk * g[j].values[r]);
            }
            out.push(GridField::from_values(grid, coeff)?);
        }
    }
    Ok(out)
}

/// second-order operator on (0,1)-forms in its general arrangement:
/// component k sums over j the terms
/// phi_{z_j zbar_k} g_j - d2 g_j / dz_j dzbar_k
/// + (dg_j/dzbar_k) phi_{z_j} - (dg_j/dz_j) phi_{zbar_k}
/// + phi_{z_j} phi_{zbar_k} g_j
pub fn apply_ddstar_general(
    grid: &TensorGrid,
    w: &DecoupledWeight,
    g: &[GridField],
) -> Result<Vec<GridField>> {
    let nv = w.n();
    check_components(grid, g, nv)?;
    let cache = PlaneCache::build(grid, w)?;
    let n = grid.node_count();
    let mut idx = vec![0usize; grid.real_dims()];
    let mut out = Vec::with_capacity(nv);
    for k in 0..nv {
        let mut acc = vec![C64::new(0.0, 0.0); n];
        for j in 0..nv {
            let dgj_k = dzbar(grid, &g[j].values, k);
            let dgj_j = dz(grid, &g[j].values, j);
            let mixed = dz(grid, &dgj_k, j);
            for r in 0..n {
                grid.decode(r, &mut idx);
                let bj = cache.at(j, &idx);
                let bk = cache.at(k, &idx);
                // decoupled weight: the cross Hessian vanishes off-diagonal
                let hess = if j == k { bj.phi_zzbar } else { 0.0 };
                acc[r] += hess * g[j].values[r] - mixed[r] + dgj_k[r] * bj.phi_z
                    - dgj_j[r] * bk.phi_zbar
                    + bj.phi_z * bk.phi_zbar * g[j].values[r];
            }
        }
        out.push(GridField::from_values(grid, acc)?);
    }
    Ok(out)
}

/// the kernel-restricted arrangement of the same operator: component k is
/// sum over j of 2 phi_{z_j zbar_k} g_j - phi_{z_j zbar_j} g_k
/// - d2 g_k / dz_j dzbar_j + (dg_k/dzbar_j) phi_{z_j}
/// - (dg_k/dz_j) phi_{zbar_j} + phi_{z_j} phi_{zbar_j} g_k
pub fn apply_ddstar_ker(
    grid: &TensorGrid,
    w: &DecoupledWeight,
    g: &[GridField],
) -> Result<Vec<GridField>> {
    let nv = w.n();
    check_components(grid, g, nv)?;
    let cache = PlaneCache::build(grid, w)?;
    let n = grid.node_count();
    let mut idx = vec![0usize; grid.real_dims()];
    let mut out = Vec::with_capacity(nv);
    for k in 0..nv {
        let mut acc = vec![C64::new(0.0, 0.0); n];
        for j in 0..nv {
            let dgk_j = dzbar(grid, &g[k].values, j);
            let dgk_zj = dz(grid, &g[k].values, j);
            let mixed = dz(grid, &dgk_j, j);
            for r in 0..n {
                grid.decode(r, &mut idx);
                let bj = cache.at(j, &idx);
                let cross = if j == k { 2.0 * cache.at(j, &idx).phi_zzbar } else { 0.0 };
                acc[r] += cross * g[j].values[r] - bj.phi_zzbar * g[k].values[r] - mixed[r]
                    + dgk_j[r] * bj.phi_z
                    - dgk_zj[r] * bj.phi_zbar
                    + bj.phi_z * bj.phi_zbar * g[k].values[r];
            }
        }
        out.push(GridField::from_values(grid, acc)?);
    }
    Ok(out)
}

pub fn sup_norm(fields: &[GridField]) -> f64 {
    fields
        .iter()
        .flat_map(|f| f.values.iter())
        .map(|v| v.norm())
        .fold(0.0, f64::max)
}
