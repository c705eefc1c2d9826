//! Closed-form ground truth for the Gaussian weight phi = |z|^2: monomial
//! norms, canonical solutions on monomials, Landau levels, and tensor-sum
//! spectra for decoupled weights. Every closed form here is cross-checked
//! against independent numeric quadrature in the unit tests.

use crate::{Error, Result};
use std::f64::consts::PI;

/// Largest n for which c_n = pi n! / 2^{n+1} stays inside f64 range.
pub const MONOMIAL_CAP: u32 = 170;

/// c_n = ||z^n||^2 = pi * n! / 2^{n+1} for the measure e^{-2|z|^2} dA.
/// Direct product up to n = 20, log-space beyond (n! overflows f64 long
/// before the cap; the log route holds relative error near 1e-14).
pub fn monomial_norm(n: u32) -> Result<f64> {
    if n > MONOMIAL_CAP {
        return Err(Error::MonomialOverflow { n, cap: MONOMIAL_CAP });
    }
    if n <= 20 {
        let mut c = PI / 2.0;
        for k in 1..=n {
            c *= k as f64 / 2.0;
        }
        Ok(c)
    } else {
        let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
        Ok((PI.ln() + ln_fact - (n as f64 + 1.0) * 2f64.ln()).exp())
    }
}

/// Same integral by composite Simpson on pi * \int_0^inf t^n e^{-2t} dt
/// (substitution t = r^2 applied analytically). Used only as a cross-check.
pub fn monomial_norm_quadrature(n: u32) -> f64 {
    // integrand peaks at t = n/2; the exponential tail past t_max is below
    // e^{-2*40} relative to the peak for every n here.
    let t_max = n as f64 / 2.0 + 40.0;
    let steps = 40_000usize; // even
    let dt = t_max / steps as f64;
    let f = |t: f64| -> f64 {
        if t == 0.0 {
            if n == 0 { 1.0 } else { 0.0 }
        } else {
            (n as f64 * t.ln() - 2.0 * t).exp()
        }
    };
    let mut acc = f(0.0) + f(t_max);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * dt);
    }
    PI * acc * dt / 3.0
}

/// Canonical minimal-norm solution data for the monomial datum z^n:
/// u_n = zbar z^n - (n/2) z^{n-1}, the orthogonal complement of zbar z^n
/// against the holomorphic line z^{n-1}.
#[derive(Debug, Clone)]
pub struct MonomialSolution {
    pub n: u32,
    /// coefficient of z^{n-1} subtracted from zbar z^n; zero for n = 0.
    pub projection_coeff: f64,
    pub norm_sq_u: f64,
    /// sigma_n = ||u_n|| / ||z^n||; equals 1/sqrt(2) for every n.
    pub sigma: f64,
}

pub fn canonical_solution_monomial(n: u32) -> Result<MonomialSolution> {
    let c_n = monomial_norm(n)?;
    // ||u_n||^2 = c_{n+1} - (n/2) c_n, which collapses to c_n / 2 because
    // c_{n+1} = ((n+1)/2) c_n. The halved form is exact in floating point,
    // so sigma^2 = (c_n/2)/c_n = 1/2 without rounding.
    let norm_sq_u = c_n / 2.0;
    Ok(MonomialSolution {
        n,
        projection_coeff: n as f64 / 2.0,
        norm_sq_u,
        sigma: (norm_sq_u / c_n).sqrt(),
    })
}

/// Levels of S for the constant-field weight with lap(phi) = b:
/// b(k+1)/2, k = 0, 1, ... (each of infinite multiplicity in the plane).
pub fn landau_levels(b: f64, count: usize) -> Result<Vec<f64>> {
    if b <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "landau_levels requires field strength b > 0, got {b}"
        )));
    }
    Ok((0..count).map(|k| b * (k as f64 + 1.0) / 2.0).collect())
}

/// Smallest `count` sums mu + sum_{j != k} nu_j where mu ranges over the
/// DbarD spectrum of factor k and nu_j over the DDbar spectra of the other
/// factors. This is the exact spectrum of S_k for a decoupled weight.
///
/// `k` is 1-based. Keeping only the smallest `count` partial sums at each
/// combine step is exact: sums are monotone in every coordinate.
pub fn tensor_sum_spectrum(
    dbar_d_spectra: &[Vec<f64>],
    d_dbar_spectra: &[Vec<f64>],
    k: usize,
    count: usize,
) -> Result<Vec<f64>> {
    let n = dbar_d_spectra.len();
    if n == 0 || d_dbar_spectra.len() != n {
        return Err(Error::EmptyFactors);
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!(
            "tensor_sum_spectrum: factor index k = {k} out of 1..={n}"
        )));
    }
    let mut acc = dbar_d_spectra[k - 1].clone();
    if acc.is_empty() {
        return Err(Error::EmptyFactors);
    }
    acc.sort_by(|a, b| a.total_cmp(b));
    acc.truncate(count);
    for (j, spec) in d_dbar_spectra.iter().enumerate() {
        if j + 1 == k {
            continue;
        }
        if spec.is_empty() {
            return Err(Error::EmptyFactors);
        }
        let mut nu = spec.clone();
        nu.sort_by(|a, b| a.total_cmp(b));
        nu.truncate(count);
        let mut sums: Vec<f64> = acc
            .iter()
            .flat_map(|a| nu.iter().map(move |b| a + b))
            .collect();
        sums.sort_by(|a, b| a.total_cmp(b));
        sums.truncate(count);
        acc = sums;
    }
    Ok(acc)
}
