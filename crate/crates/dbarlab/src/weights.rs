//! Weight functions phi and their derivative oracles. Closed-form kinds
//! (zero, radial power, polynomial in x and y) differentiate exactly;
//! lattice-sampled weights use second-order finite differences. Decoupled
//! sums phi(z_1,...,z_n) = sum_j phi_j(z_j) carry one factor per complex
//! variable, so every mixed derivative across factors vanishes.

use crate::{C64, Error, Result};

/// Exact point data for one complex variable. Constructed from real data
/// (phi, phi_x, phi_y, lap) so the identities A1 = -phi_y, A2 = phi_x and
/// lap = 4 phi_zzbar hold to the last bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeBundle {
    pub phi: f64,
    pub phi_z: C64,
    pub phi_zbar: C64,
    pub phi_zzbar: f64,
    pub laplacian: f64,
    pub a1: f64,
    pub a2: f64,
}

impl DerivativeBundle {
    pub fn from_real_parts(phi: f64, phi_x: f64, phi_y: f64, laplacian: f64) -> Self {
        DerivativeBundle {
            phi,
            phi_z: C64::new(0.5 * phi_x, -0.5 * phi_y),
            phi_zbar: C64::new(0.5 * phi_x, 0.5 * phi_y),
            phi_zzbar: 0.25 * laplacian,
            laplacian,
            a1: -phi_y,
            a2: phi_x,
        }
    }

    pub fn zero() -> Self {
        Self::from_real_parts(0.0, 0.0, 0.0, 0.0)
    }
}

/// One polynomial term coeff * x^px * y^py.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolyTerm {
    pub px: u32,
    pub py: u32,
    pub coeff: f64,
}

/// One-variable weight model. Multivariable weights are decoupled sums of
/// these (see [`DecoupledWeight`]).
#[derive(Debug, Clone)]
pub enum WeightModel {
    Zero,
    /// phi(z) = |z|^m, m >= 2 (not C^2 at the origin below that).
    RadialPower { m: f64 },
    Polynomial { terms: Vec<PolyTerm> },
    GridSampled(SampledWeight),
}

impl WeightModel {
    pub fn radial_power(m: f64) -> Result<Self> {
        if !(m >= 2.0) {
            return Err(Error::RadialPowerExponent { m });
        }
        Ok(WeightModel::RadialPower { m })
    }

    pub fn eval_derivatives(&self, z: C64) -> Result<DerivativeBundle> {
        let (x, y) = (z.re, z.im);
        match self {
            WeightModel::Zero => Ok(DerivativeBundle::zero()),
            WeightModel::RadialPower { m } => {
                // phi = (x^2+y^2)^{m/2}; phi_x = m x r^{m-2}; lap = m^2 r^{m-2}.
                // powf(0, 0) = 1 covers m = 2 at the origin exactly.
                let r2 = x * x + y * y;
                let rp = r2.powf((m - 2.0) / 2.0);
                Ok(DerivativeBundle::from_real_parts(
                    r2 * rp,
                    m * x * rp,
                    m * y * rp,
                    m * m * rp,
                ))
            }
            WeightModel::Polynomial { terms } => {
                let mut phi = 0.0;
                let mut phi_x = 0.0;
                let mut phi_y = 0.0;
                let mut lap = 0.0;
                for t in terms {
                    let (a, b, c) = (t.px as i32, t.py as i32, t.coeff);
                    phi += c * x.powi(a) * y.powi(b);
                    if a >= 1 {
                        phi_x += c * a as f64 * x.powi(a - 1) * y.powi(b);
                    }
                    if b >= 1 {
                        phi_y += c * b as f64 * x.powi(a) * y.powi(b - 1);
                    }
                    if a >= 2 {
                        lap += c * (a * (a - 1)) as f64 * x.powi(a - 2) * y.powi(b);
                    }
                    if b >= 2 {
                        lap += c * (b * (b - 1)) as f64 * x.powi(a) * y.powi(b - 2);
                    }
                }
                Ok(DerivativeBundle::from_real_parts(phi, phi_x, phi_y, lap))
            }
            WeightModel::GridSampled(s) => s.eval_derivatives(x, y),
        }
    }

    /// Magnetic vector potential A = (-phi_y, phi_x).
    pub fn vector_potential(&self, z: C64) -> Result<(f64, f64)> {
        let b = self.eval_derivatives(z)?;
        Ok((b.a1, b.a2))
    }

    pub fn phi(&self, z: C64) -> Result<f64> {
        Ok(self.eval_derivatives(z)?.phi)
    }
}

/// Weight given by phi samples on a centered square lattice: `per_axis`
/// values per axis at coordinates (i - (per_axis-1)/2) * spacing, row-major
/// with x outermost. Derivative queries must land on (or within 1e-9 of) a
/// lattice node; centered second-order differences inside, one-sided
/// second-order at the edges.
#[derive(Debug, Clone)]
pub struct SampledWeight {
    per_axis: usize,
    spacing: f64,
    values: Vec<f64>,
}

impl SampledWeight {
    pub fn new(per_axis: usize, spacing: f64, values: Vec<f64>) -> Result<Self> {
        if per_axis < 4 {
            return Err(Error::InvalidConfig(format!(
                "sampled weight needs at least 4 nodes per axis for one-sided second-order stencils, got {per_axis}"
            )));
        }
        if spacing <= 0.0 || !spacing.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sampled weight spacing must be positive, got {spacing}"
            )));
        }
        if values.len() != per_axis * per_axis {
            return Err(Error::InvalidConfig(format!(
                "sampled weight expects {} = {per_axis}^2 values, got {}",
                per_axis * per_axis,
                values.len()
            )));
        }
        Ok(SampledWeight { per_axis, spacing, values })
    }

    /// Parse whitespace/comma separated phi values, row-major over a square
    /// lattice; the node count must be a perfect square.
    pub fn from_csv_text(text: &str, spacing: f64) -> Result<Self> {
        let mut values = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            for tok in line.split(',') {
                let tok = tok.trim();
                if tok.is_empty() {
                    continue;
                }
                values.push(tok.parse::<f64>().map_err(|e| {
                    Error::Parse(format!("sampled weight line {}: {tok:?}: {e}", ln + 1))
                })?);
            }
        }
        let m = (values.len() as f64).sqrt().round() as usize;
        if m * m != values.len() {
            return Err(Error::Parse(format!(
                "sampled weight: {} values is not a square lattice",
                values.len()
            )));
        }
        SampledWeight::new(m, spacing, values)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// coordinate of the outermost lattice node along each axis
    pub fn half_width(&self) -> f64 {
        (self.per_axis as f64 - 1.0) / 2.0 * self.spacing
    }

    fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.per_axis + iy]
    }

    fn locate(&self, coord: f64) -> Result<usize> {
        let m = self.per_axis as f64;
        let idx = coord / self.spacing + (m - 1.0) / 2.0;
        let i = idx.round();
        if (idx - i).abs() > 1e-6 || i < 0.0 || i > m - 1.0 {
            return Err(Error::OutOfDomain { x: coord, y: f64::NAN });
        }
        Ok(i as usize)
    }

    fn eval_derivatives(&self, x: f64, y: f64) -> Result<DerivativeBundle> {
        let ix = self.locate(x).map_err(|_| Error::OutOfDomain { x, y })?;
        let iy = self.locate(y).map_err(|_| Error::OutOfDomain { x, y })?;
        let h = self.spacing;
        let m = self.per_axis;

        // f = value along one axis with the other index frozen
        let fx = |i: usize| self.at(i, iy);
        let fy = |j: usize| self.at(ix, j);

        let d1 = |f: &dyn Fn(usize) -> f64, i: usize| -> f64 {
            if i == 0 {
                (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
            } else if i == m - 1 {
                (3.0 * f(m - 1) - 4.0 * f(m - 2) + f(m - 3)) / (2.0 * h)
            } else {
                (f(i + 1) - f(i - 1)) / (2.0 * h)
            }
        };
        let d2 = |f: &dyn Fn(usize) -> f64, i: usize| -> f64 {
            if i == 0 {
                (2.0 * f(0) - 5.0 * f(1) + 4.0 * f(2) - f(3)) / (h * h)
            } else if i == m - 1 {
                (2.0 * f(m - 1) - 5.0 * f(m - 2) + 4.0 * f(m - 3) - f(m - 4)) / (h * h)
            } else {
                (f(i + 1) - 2.0 * f(i) + f(i - 1)) / (h * h)
            }
        };

        Ok(DerivativeBundle::from_real_parts(
            self.at(ix, iy),
            d1(&fx, ix),
            d1(&fy, iy),
            d2(&fx, ix) + d2(&fy, iy),
        ))
    }
}

/// phi(z_1,...,z_n) = sum_j phi_j(z_j); one factor per complex variable.
#[derive(Debug, Clone)]
pub struct DecoupledWeight {
    pub factors: Vec<WeightModel>,
}

impl DecoupledWeight {
    pub fn new(factors: Vec<WeightModel>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidConfig("decoupled weight needs at least one factor".into()));
        }
        Ok(DecoupledWeight { factors })
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }

    /// Per-factor bundles at the point's matching coordinates; by
    /// decoupling these carry all nonzero derivatives of phi.
    pub fn factor_bundles(&self, z: &[C64]) -> Result<Vec<DerivativeBundle>> {
        if z.len() != self.factors.len() {
            return Err(Error::InvalidConfig(format!(
                "point has {} complex coordinates, weight has {} factors",
                z.len(),
                self.factors.len()
            )));
        }
        self.factors
            .iter()
            .zip(z)
            .map(|(w, &zj)| w.eval_derivatives(zj))
            .collect()
    }

    pub fn phi(&self, z: &[C64]) -> Result<f64> {
        Ok(self.factor_bundles(z)?.iter().map(|b| b.phi).sum())
    }
}
