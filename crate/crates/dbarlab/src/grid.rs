//! Uniform tensor-product lattice on the truncated box (-R, R)^{2n} with
//! Dirichlet boundary (fields extend by zero), interior-node sampling, and
//! h^d quadrature. Axis order is (x_1, y_1, ..., x_n, y_n), row-major with
//! the first axis outermost; node coordinates are exactly k * h.

use crate::{C64, Error, Result};
use std::io::{BufRead, Write};

pub const DEFAULT_NODE_BUDGET: usize = 8_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    pub half_width: f64,
    pub spacing: f64,
    pub n_complex: usize,
    /// interior nodes per axis: 2R/h - 1 (always odd)
    pub per_axis: usize,
}

pub fn build_grid(half_width: f64, spacing: f64, n_complex: usize) -> Result<TensorGrid> {
    build_grid_with_budget(half_width, spacing, n_complex, DEFAULT_NODE_BUDGET)
}

pub fn build_grid_with_budget(
    half_width: f64,
    spacing: f64,
    n_complex: usize,
    budget: usize,
) -> Result<TensorGrid> {
    if !(half_width > 0.0) || !(spacing > 0.0) || n_complex == 0 {
        return Err(Error::InvalidConfig(format!(
            "grid needs R > 0, h > 0, n >= 1 (got R = {half_width}, h = {spacing}, n = {n_complex})"
        )));
    }
    let ratio = half_width / spacing;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::NonIntegralSpacing { r: half_width, h: spacing });
    }
    let per_axis = 2 * (m as usize) - 1;
    let nodes = (per_axis as u128).pow(2 * n_complex as u32);
    if nodes > budget as u128 {
        return Err(Error::NodeBudget { nodes, budget });
    }
    Ok(TensorGrid { half_width, spacing, n_complex, per_axis })
}

impl TensorGrid {
    pub fn real_dims(&self) -> usize {
        2 * self.n_complex
    }

    pub fn node_count(&self) -> usize {
        self.per_axis.pow(self.real_dims() as u32)
    }

    /// coordinate of index i along any axis: (i - (per_axis-1)/2) * h exactly
    pub fn axis_coord(&self, i: usize) -> f64 {
        (i as i64 - (self.per_axis as i64 - 1) / 2) as f64 * self.spacing
    }

    /// stride of axis a in the flat row-major index
    pub fn stride(&self, axis: usize) -> usize {
        self.per_axis.pow((self.real_dims() - 1 - axis) as u32)
    }

    pub fn decode(&self, flat: usize, idx: &mut [usize]) {
        let mut rem = flat;
        for a in 0..self.real_dims() {
            let s = self.stride(a);
            idx[a] = rem / s;
            rem %= s;
        }
    }

    /// complex coordinates (z_1, ..., z_n) of a node
    pub fn node_point(&self, flat: usize, z: &mut [C64]) {
        let d = self.real_dims();
        let mut rem = flat;
        for a in 0..d {
            let s = self.stride(a);
            let i = rem / s;
            rem %= s;
            let c = self.axis_coord(i);
            if a % 2 == 0 {
                z[a / 2] = C64::new(c, 0.0);
            } else {
                z[a / 2] += C64::new(0.0, c);
            }
        }
    }

    /// quadrature weight per node, h^d
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.real_dims() as i32)
    }
}

#[derive(Debug, Clone)]
pub struct GridField {
    pub grid: TensorGrid,
    pub values: Vec<C64>,
}

impl GridField {
    pub fn zeros(grid: &TensorGrid) -> Self {
        GridField { grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.node_count()] }
    }

    pub fn from_values(grid: &TensorGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch);
        }
        Ok(GridField { grid: grid.clone(), values })
    }

    pub fn norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (self.grid.cell_volume() * s).sqrt()
    }
}

/// pointwise sampling of a function of (z_1, ..., z_n) at interior nodes
pub fn sample(grid: &TensorGrid, f: impl Fn(&[C64]) -> C64) -> GridField {
    let n = grid.n_complex;
    let mut z = vec![C64::new(0.0, 0.0); n];
    let mut values = Vec::with_capacity(grid.node_count());
    for flat in 0..grid.node_count() {
        grid.node_point(flat, &mut z);
        values.push(f(&z));
    }
    GridField { grid: grid.clone(), values }
}

/// one-complex-variable convenience wrapper
pub fn sample_one(grid: &TensorGrid, f: impl Fn(C64) -> C64) -> GridField {
    sample(grid, |z| f(z[0]))
}

/// (f, g) = h^d sum f conj(g)
pub fn inner_product(f: &GridField, g: &GridField) -> Result<C64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    let mut acc = C64::new(0.0, 0.0);
    for (a, b) in f.values.iter().zip(&g.values) {
        acc += a * b.conj();
    }
    Ok(acc * f.grid.cell_volume())
}

/// CSV layout: comment headers, then one `re,im` pair per line in flat
/// row-major order. The grid header line pins R, h and n.
pub fn write_field_csv(
    w: &mut impl Write,
    field: &GridField,
    extra_header: &[String],
) -> std::io::Result<()> {
    for line in extra_header {
        writeln!(w, "# {line}")?;
    }
    let g = &field.grid;
    writeln!(w, "# R={} h={} n={}", g.half_width, g.spacing, g.n_complex)?;
    writeln!(w, "re,im")?;
    for v in &field.values {
        writeln!(w, "{},{}", v.re, v.im)?;
    }
    Ok(())
}

/// Read a field written by [`write_field_csv`]; the stored R/h/n must match
/// `expect` when provided.
pub fn read_field_csv(r: &mut impl BufRead, expect: Option<&TensorGrid>) -> Result<GridField> {
    let mut grid: Option<TensorGrid> = None;
    let mut values = Vec::new();
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t == "re,im" {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            let rest = rest.trim();
            if rest.starts_with("R=") {
                let mut rr = None;
                let mut hh = None;
                let mut nn = None;
                for part in rest.split_whitespace() {
                    if let Some(v) = part.strip_prefix("R=") {
                        rr = v.parse::<f64>().ok();
                    } else if let Some(v) = part.strip_prefix("h=") {
                        hh = v.parse::<f64>().ok();
                    } else if let Some(v) = part.strip_prefix("n=") {
                        nn = v.parse::<usize>().ok();
                    }
                }
                match (rr, hh, nn) {
                    (Some(rr), Some(hh), Some(nn)) => grid = Some(build_grid(rr, hh, nn)?),
                    _ => return Err(Error::Parse(format!("bad grid header: {t}"))),
                }
            }
            continue;
        }
        let mut it = t.split(',');
        let re = it
            .next()
            .ok_or_else(|| Error::Parse(format!("bad field row: {t}")))?
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad field row {t:?}: {e}")))?;
        let im = it
            .next()
            .ok_or_else(|| Error::Parse(format!("bad field row: {t}")))?
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad field row {t:?}: {e}")))?;
        values.push(C64::new(re, im));
    }
    let grid = grid.ok_or_else(|| Error::Parse("field csv has no grid header".into()))?;
    if let Some(e) = expect {
        if *e != grid {
            return Err(Error::GridMismatch);
        }
    }
    GridField::from_values(&grid, values)
}
