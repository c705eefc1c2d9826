//! Scalar diagnostics of a weight: ball integrals of the curvature
//! expression (lap phi)^2 + lap phi, a doubling test for the measure
//! lap(phi) dA, and the pointwise field/potential samples used in the
//! multivariable setting.
//!
//! All ball quadratures are midpoint sums over a square lattice anchored
//! at the ball center, so a constant integrand gives the same value at
//! every center and concentric masses share their boundary error.

use crate::weights::{DecoupledWeight, WeightModel};
use crate::{C64, Error, Result};

/// per-ball accumulation: mass of lap dA, the curvature integral, and the
/// most negative laplacian value seen
struct BallSums {
    mass: f64,
    curvature: f64,
    min_lap: f64,
    min_at: (f64, f64),
}

fn ball_sums(w: &WeightModel, cx: f64, cy: f64, radius: f64, qh: f64) -> Result<BallSums> {
    // sampled weights are only evaluable on their own lattice; quadrature
    // then walks that lattice instead of a center-anchored one
    if let WeightModel::GridSampled(s) = w {
        let mut out = BallSums { mass: 0.0, curvature: 0.0, min_lap: f64::INFINITY, min_at: (0.0, 0.0) };
        let hs = s.spacing();
        let half = s.half_width();
        let steps = (radius / hs).ceil() as i64;
        let (ci, cj) = ((cx / hs).round() as i64, (cy / hs).round() as i64);
        for i in (ci - steps)..=(ci + steps) {
            for j in (cj - steps)..=(cj + steps) {
                let (x, y) = (i as f64 * hs, j as f64 * hs);
                if x.abs() > half || y.abs() > half {
                    continue;
                }
                let (dx, dy) = (x - cx, y - cy);
                if dx * dx + dy * dy > radius * radius {
                    continue;
                }
                accumulate(w, x, y, hs * hs, &mut out)?;
            }
        }
        return Ok(out);
    }
    let mut out = BallSums { mass: 0.0, curvature: 0.0, min_lap: f64::INFINITY, min_at: (0.0, 0.0) };
    let steps = (radius / qh).ceil() as i64;
    for i in -steps..=steps {
        for j in -steps..=steps {
            let (dx, dy) = (i as f64 * qh, j as f64 * qh);
            if dx * dx + dy * dy > radius * radius {
                continue;
            }
            accumulate(w, cx + dx, cy + dy, qh * qh, &mut out)?;
        }
    }
    Ok(out)
}

fn accumulate(w: &WeightModel, x: f64, y: f64, cell: f64, out: &mut BallSums) -> Result<()> {
    let lap = w.eval_derivatives(C64::new(x, y))?.laplacian;
    if lap < out.min_lap {
        out.min_lap = lap;
        out.min_at = (x, y);
    }
    out.mass += lap * cell;
    out.curvature += (lap * lap + lap) * cell;
    Ok(())
}

/// integral of (lap phi)^2 + lap phi over the unit ball at `center`,
/// midpoint rule with spacing `quad_h` (at most 0.05)
pub fn iwatsuka_integral(w: &WeightModel, center: (f64, f64), quad_h: f64) -> Result<f64> {
    if !(quad_h > 0.0 && quad_h <= 0.05) {
        return Err(Error::InvalidConfig(format!(
            "ball quadrature spacing must lie in (0, 0.05], got {quad_h}"
        )));
    }
    Ok(ball_sums(w, center.0, center.1, 1.0, quad_h)?.curvature)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DoublingReport {
    /// sup over sampled centers and radii of mass(2r) / mass(r)
    pub max_ratio: f64,
    /// smallest unit-ball mass over the sampled centers
    pub min_unit_mass: f64,
    pub in_class_w: bool,
}

/// doubling behaviour of lap(phi) dA sampled on a half-spaced center
/// lattice inside |z| <= region_radius - 2 with radii 1/4, 1/2, 1.
/// Requires subharmonicity; pairs with zero inner mass are skipped.
pub fn doubling_check(w: &WeightModel, region_radius: f64) -> Result<DoublingReport> {
    if region_radius < 2.0 {
        return Err(Error::InvalidConfig(format!(
            "doubling check needs region radius >= 2, got {region_radius}"
        )));
    }
    let reach = region_radius - 2.0;
    let mut centers = vec![];
    let steps = (reach / 0.5).floor() as i64;
    for i in -steps..=steps {
        for j in -steps..=steps {
            let (x, y) = (i as f64 * 0.5, j as f64 * 0.5);
            if x * x + y * y <= reach * reach + 1e-12 {
                centers.push((x, y));
            }
        }
    }
    let mut max_ratio = 0.0f64;
    let mut min_unit_mass = f64::INFINITY;
    for &(x, y) in &centers {
        for r in [0.25, 0.5, 1.0] {
            let qh = r / 64.0;
            let inner = ball_sums(w, x, y, r, qh)?;
            let outer = ball_sums(w, x, y, 2.0 * r, qh)?;
            let min_lap = inner.min_lap.min(outer.min_lap);
            if min_lap < -1e-9 {
                let at = if inner.min_lap <= outer.min_lap { inner.min_at } else { outer.min_at };
                return Err(Error::NotSubharmonic {
                    min_laplacian: min_lap,
                    x: at.0,
                    y: at.1,
                });
            }
            if inner.mass > 0.0 {
                max_ratio = max_ratio.max(outer.mass / inner.mass);
            }
            if r == 1.0 {
                min_unit_mass = min_unit_mass.min(inner.mass);
            }
        }
    }
    if !min_unit_mass.is_finite() {
        min_unit_mass = 0.0;
    }
    let in_class_w = max_ratio.is_finite() && max_ratio > 0.0 && min_unit_mass >= 1e-3;
    Ok(DoublingReport { max_ratio, min_unit_mass, in_class_w })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MagneticFieldSample {
    /// one entry per complex variable
    pub components: Vec<f64>,
    pub magnitude: f64,
}

/// one-variable convention: the field strength is lap(phi) itself
pub fn magnetic_field_one_variable(w: &WeightModel, z: C64) -> Result<MagneticFieldSample> {
    let lap = w.eval_derivatives(z)?.laplacian;
    Ok(MagneticFieldSample { components: vec![lap], magnitude: lap })
}

/// several variables: component j is lap_j(phi_j)/4 on that variable's
/// plane and |B| is the euclidean norm of those components
pub fn magnetic_field(w: &DecoupledWeight, z: &[C64]) -> Result<MagneticFieldSample> {
    if z.len() != w.n() {
        return Err(Error::GridMismatch);
    }
    let mut components = Vec::with_capacity(w.n());
    for (f, zj) in w.factors.iter().zip(z) {
        components.push(0.25 * f.eval_derivatives(*zj)?.laplacian);
    }
    let magnitude = components.iter().map(|c| c * c).sum::<f64>().sqrt();
    Ok(MagneticFieldSample { components, magnitude })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EffectivePotentialSample {
    pub v_k: f64,
    pub delta: f64,
    pub v_eff: f64,
}

/// scalar potential of the k-th component operator (k is 1-based) plus the
/// delta-weighted field-strength term: V_k + delta |B| / (n - 1). The n = 1
/// case has no (n - 1) normalization and is rejected.
pub fn effective_potential(
    w: &DecoupledWeight,
    k: usize,
    delta: f64,
    z: &[C64],
) -> Result<EffectivePotentialSample> {
    let n = w.n();
    if n < 2 {
        return Err(Error::EffectivePotentialOneVar);
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!(
            "component index k={k} out of range 1..={n}"
        )));
    }
    if z.len() != n {
        return Err(Error::GridMismatch);
    }
    let mut v_k = 0.0;
    for (j, (f, zj)) in w.factors.iter().zip(z).enumerate() {
        let lap = f.eval_derivatives(*zj)?.laplacian;
        let c = if j + 1 == k { 0.5 - 0.25 } else { -0.25 };
        v_k += c * lap;
    }
    let field = magnetic_field(w, z)?;
    let v_eff = v_k + delta * field.magnitude / (n as f64 - 1.0);
    Ok(EffectivePotentialSample { v_k, delta, v_eff })
}
