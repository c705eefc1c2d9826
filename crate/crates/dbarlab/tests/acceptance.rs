//! Acceptance gate: eleven end-to-end checks with tolerances pinned in this
//! file, one printed pass/fail line each. Everything runs serially inside a
//! single test so the heavy eigensolves never compete for memory; the long
//! non-compactness probe dominates the runtime.

use dbarlab::cg::{solve_cg, CgOptions};
use dbarlab::diagnostics::{doubling_check, effective_potential, iwatsuka_integral};
use dbarlab::fock::{canonical_solution_monomial, monomial_norm_quadrature};
use dbarlab::forms::{apply_dbar_form, apply_ddstar_general, apply_ddstar_ker};
use dbarlab::grid::{build_grid, inner_product, sample, sample_one, GridField, TensorGrid};
use dbarlab::operators::{
    assemble_d_direct, assemble_dbar, assemble_s_composition, assemble_s_stencil,
    assemble_sk_stencil,
};
use dbarlab::solver::{kernel_test_basis, solve_canonical, SolveOptions};
use dbarlab::spectral::{
    compactness_probe, lowest_eigenpairs, singular_values_from_spectrum, EigenOptions,
    ProbeOptions, Verdict,
};
use dbarlab::sparse::{norm2, vdot};
use dbarlab::weights::{DecoupledWeight, PolyTerm, WeightModel};
use dbarlab::C64;
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

fn fock() -> WeightModel {
    WeightModel::radial_power(2.0).unwrap()
}

fn fail(msg: impl Into<String>) -> String {
    msg.into()
}

/// ground eigenvalue of the stencil operator for phi = |z|^2 at R = 6,
/// h = 0.1; shared between checks 1 and 3
fn fock_lambda1() -> f64 {
    static CELL: OnceLock<f64> = OnceLock::new();
    *CELL.get_or_init(|| {
        let grid = build_grid(6.0, 0.1, 1).unwrap();
        let op = assemble_s_stencil(&grid, &fock()).unwrap();
        let opts = EigenOptions { tol: 1e-6, seed: 0, ..EigenOptions::default() };
        let mut prog = progress("ground level");
        let res = lowest_eigenpairs(&op, 1, &opts, Some(&mut prog)).unwrap();
        res.eigenvalues[0]
    })
}

fn progress(tag: &'static str) -> impl FnMut(f64) {
    let mut last = f64::NEG_INFINITY;
    move |f: f64| {
        if f - last >= 0.10 || (f >= 1.0 && last < 1.0) {
            last = f;
            eprintln!("[{tag}] progress {f:.2}");
        }
    }
}

// 1. ground level of the quadratic weight sits at the first Landau level 2
fn c01_fock_ground_level() -> Result<String, String> {
    let l1 = fock_lambda1();
    if !(1.94..=2.06).contains(&l1) {
        return Err(fail(format!("lambda1 = {l1:.6} outside [1.94, 2.06]")));
    }
    Ok(format!("lambda1 = {l1:.5} in [1.94, 2.06]"))
}

// 2. quadratic weight: the count in the band [1.8, 2.2] grows like the box
//    area and the probe reads the growth as non-compactness
fn c02_noncompact_signature() -> Result<String, String> {
    let mut opts = ProbeOptions {
        lambda_cap: 3.0,
        band: (1.8, 2.2),
        k_max: 64,
        ..ProbeOptions::default()
    };
    opts.eig.tol = 1e-5;
    // the 39-state band at R = 5 plus everything below the cap resolves
    // individually before the count settles; that takes a deep basis
    opts.eig.max_lanczos_dim = 900;
    opts.eig.seed = 0;
    let mut prog = progress("noncompact probe");
    let report = compactness_probe(&fock(), 0.025, &[4.0, 5.0], &opts, Some(&mut prog))
        .map_err(|e| fail(format!("probe failed: {e}")))?;
    let (b0, b1) = (report.band_counts[0], report.band_counts[1]);
    if b0 == 0 {
        return Err(fail(format!(
            "empty band at R = 4; trace: {:?}",
            report.verdict_rule_trace
        )));
    }
    let ratio = b1 as f64 / b0 as f64;
    let target = 25.0 / 16.0;
    if (ratio / target - 1.0).abs() > 0.25 {
        return Err(fail(format!(
            "band growth ratio {ratio:.4} not within 25% of {target:.4} (counts {b0}, {b1})"
        )));
    }
    if report.verdict != Verdict::NoncompactConsistent {
        return Err(fail(format!(
            "verdict {} != noncompact-consistent; trace: {:?}",
            report.verdict, report.verdict_rule_trace
        )));
    }
    Ok(format!(
        "band counts ({b0}, {b1}), ratio {ratio:.3} vs {target:.4}, verdict {}",
        report.verdict
    ))
}

// 3. top singular value 1/sqrt(lambda1) against the closed form 1/sqrt(2),
//    and the closed-form table itself against independent quadrature
fn c03_top_singular_value() -> Result<String, String> {
    let sigma1 = 1.0 / fock_lambda1().sqrt();
    if !(0.69..=0.72).contains(&sigma1) {
        return Err(fail(format!("sigma1 = {sigma1:.6} outside [0.69, 0.72]")));
    }
    for n in 0..=30u32 {
        let sol = canonical_solution_monomial(n).map_err(|e| fail(e.to_string()))?;
        if sol.sigma != FRAC_1_SQRT_2 {
            return Err(fail(format!("closed-form sigma_{n} = {} is not exactly 1/sqrt(2)", sol.sigma)));
        }
        // ||u_n||^2 = c_{n+1} - n c_n + (n/2)^2 c_{n-1}, all by quadrature
        let cn = monomial_norm_quadrature(n);
        let mut u2 = monomial_norm_quadrature(n + 1) - n as f64 * cn;
        if n > 0 {
            let half_n = n as f64 / 2.0;
            u2 += half_n * half_n * monomial_norm_quadrature(n - 1);
        }
        let sq = (u2 / cn).sqrt();
        if (sq - FRAC_1_SQRT_2).abs() > 1e-6 {
            return Err(fail(format!("quadrature sigma_{n} = {sq} is off by more than 1e-6")));
        }
    }
    Ok(format!("sigma1 = {sigma1:.5}; sigma_n exact and quadrature-matched for n <= 30"))
}

// 4. quartic weight: counts below 20 stop growing with the box, the probe
//    reads compactness, and the singular values decrease strictly
fn c04_compact_signature() -> Result<String, String> {
    let mut opts = ProbeOptions {
        lambda_cap: 20.0,
        band: (1.8, 2.2),
        k_max: 48,
        ..ProbeOptions::default()
    };
    opts.eig.tol = 1e-5;
    opts.eig.max_lanczos_dim = 560;
    opts.eig.seed = 0;
    let w = WeightModel::radial_power(4.0).unwrap();
    let mut prog = progress("compact probe");
    let report = compactness_probe(&w, 0.1, &[4.0, 5.0, 6.0], &opts, Some(&mut prog))
        .map_err(|e| fail(format!("probe failed: {e}")))?;
    let c = &report.counts;
    if c[1] != c[2] {
        return Err(fail(format!("counts below 20 differ at the top radii: {c:?}")));
    }
    if report.verdict != Verdict::CompactConsistent {
        return Err(fail(format!(
            "verdict {} != compact-consistent; trace: {:?}",
            report.verdict, report.verdict_rule_trace
        )));
    }
    let sigmas = singular_values_from_spectrum(&report.spectra[2])
        .map_err(|e| fail(e.to_string()))?;
    // skip any near-ties at the very top, then demand strict decrease
    let cluster_end = sigmas
        .iter()
        .position(|&s| s < sigmas[0] * (1.0 - 1e-3))
        .unwrap_or(sigmas.len());
    let start = cluster_end.saturating_sub(1);
    for i in start..sigmas.len().saturating_sub(1) {
        if !(sigmas[i + 1] < sigmas[i]) {
            return Err(fail(format!(
                "singular values not strictly decreasing at {i}: {} then {}",
                sigmas[i],
                sigmas[i + 1]
            )));
        }
    }
    Ok(format!(
        "counts {c:?}, verdict {}, {} singular values strictly decreasing",
        report.verdict,
        sigmas.len()
    ))
}

// 5. curvature-ball integrals of the quadratic weight are the constant 20 pi
fn c05_iwatsuka_constancy() -> Result<String, String> {
    let w = fock();
    let exact = 20.0 * PI;
    let reach = 2.0f64;
    let mut values = Vec::new();
    let steps = (reach / 0.5) as i64;
    for iy in -steps..=steps {
        for ix in -steps..=steps {
            let (x, y) = (ix as f64 * 0.5, iy as f64 * 0.5);
            if x * x + y * y > reach * reach + 1e-12 {
                continue;
            }
            let v = iwatsuka_integral(&w, (x, y), 0.02).map_err(|e| fail(e.to_string()))?;
            if (v - exact).abs() > 0.02 * exact {
                return Err(fail(format!("integral {v:.4} at ({x}, {y}) off 20 pi by more than 2%")));
            }
            values.push(v);
        }
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let rel_std = var.sqrt() / mean;
    if rel_std >= 0.02 {
        return Err(fail(format!("relative std {rel_std:.4} >= 2%")));
    }
    Ok(format!(
        "{} centers, mean {mean:.4} vs {exact:.4}, rel std {rel_std:.2e}",
        values.len()
    ))
}

// 6. structural exactness of the discretization
fn c06_structural_exactness() -> Result<String, String> {
    // (a) the direct D assembly equals the conjugate transpose of Dbar,
    //     entry for entry, for both a radial and a cross-term weight
    let grid = build_grid(4.0, 0.2, 1).unwrap();
    let cross = WeightModel::Polynomial {
        terms: vec![
            PolyTerm { px: 2, py: 0, coeff: 1.0 },
            PolyTerm { px: 0, py: 2, coeff: 0.7 },
            PolyTerm { px: 1, py: 1, coeff: 0.375 },
        ],
    };
    for w in [fock(), cross] {
        let dbar = assemble_dbar(&grid, &w).map_err(|e| fail(e.to_string()))?;
        let d = assemble_d_direct(&grid, &w).map_err(|e| fail(e.to_string()))?;
        if d.matrix != dbar.matrix.adjoint() {
            return Err(fail(format!("M_D != M_Dbar^H entrywise for {w:?}")));
        }
    }

    // (b) quadratic form identity ||D u||^2 = (S u, u) on random fields
    let small = build_grid(2.0, 0.2, 1).unwrap();
    let dbar = assemble_dbar(&small, &fock()).map_err(|e| fail(e.to_string()))?;
    let s = assemble_s_composition(&dbar);
    let mh = dbar.matrix.adjoint();
    let mut rng = ChaCha20Rng::seed_from_u64(42);
    let n = small.node_count();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let u: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let du = mh.apply(&u);
        let lhs = norm2(&du).powi(2);
        let su = s.matrix.apply(&u);
        let rhs = vdot(&u, &su).re;
        let rel = (lhs - rhs).abs() / lhs.max(1e-300);
        worst = worst.max(rel);
    }
    if worst > 1e-10 {
        return Err(fail(format!("quadratic form identity off by {worst:.3e} > 1e-10")));
    }

    // (c) the two routes to S agree at second order on a smooth field
    let mut errs = Vec::new();
    for h in [0.2, 0.1, 0.05] {
        let g = build_grid(4.0, h, 1).unwrap();
        let f = sample_one(&g, |z| C64::new((z.re + 0.3) * (-2.0 * z.norm_sqr()).exp(), 0.0));
        let dbar = assemble_dbar(&g, &fock()).map_err(|e| fail(e.to_string()))?;
        let comp = assemble_s_composition(&dbar);
        let sten = assemble_s_stencil(&g, &fock()).map_err(|e| fail(e.to_string()))?;
        let a = comp.matrix.apply(&f.values);
        let b = sten.matrix.apply(&f.values);
        let mut acc = 0.0;
        for i in 0..a.len() {
            acc += (a[i] - b[i]).norm_sqr();
        }
        errs.push((g.cell_volume() * acc).sqrt());
    }
    let p1 = (errs[0] / errs[1]).log2();
    let p2 = (errs[1] / errs[2]).log2();
    if !(p1 >= 1.8 && p2 >= 1.8) {
        return Err(fail(format!("two-route Richardson orders {p1:.3}, {p2:.3} below 1.8")));
    }
    Ok(format!(
        "adjoint exact; form identity to {worst:.1e}; route orders {p1:.2}, {p2:.2}"
    ))
}

// 7. canonical solve: manufactured datum, minimality, kernel orthogonality,
//    and the monomial datum energy ratio
fn c07_canonical_solve() -> Result<String, String> {
    let grid = build_grid(4.0, 0.2, 1).unwrap();
    let w = fock();
    let v0 = sample_one(&grid, |z| {
        C64::new(z.re + 0.3, 0.2 * z.im) * (-1.2 * z.norm_sqr()).exp()
    });
    let dbar = assemble_dbar(&grid, &w).map_err(|e| fail(e.to_string()))?;
    let mh = dbar.matrix.adjoint();
    let g = GridField::from_values(&grid, dbar.matrix.apply(&v0.values)).unwrap();
    let opts = SolveOptions { tol: 1e-10, ..SolveOptions::default() };
    let sol = solve_canonical(&grid, &w, &g, &opts).map_err(|e| fail(e.to_string()))?;
    if sol.residual > 1e-8 {
        return Err(fail(format!("residual {:.3e} > 1e-8", sol.residual)));
    }
    if sol.norm_v > v0.norm() * (1.0 + 1e-6) {
        return Err(fail(format!(
            "norm {} exceeds the particular solution {}",
            sol.norm_v,
            v0.norm()
        )));
    }

    // orthogonality against the discrete kernel: project the sampled
    // monomial basis onto ker(M_dbar) with P = I - M^H S^{-1} M, then
    // orthonormalize and take the worst normalized overlap
    let s = assemble_s_composition(&dbar);
    let kappa = kernel_test_basis(&grid, &w, 8).map_err(|e| fail(e.to_string()))?;
    // the composition operator carries a spurious near-kernel (checkerboard
    // modes the centered differences cannot see), and Jacobi-CG's true
    // residual floors between 1e-12 and 3e-9 on it depending on the rhs.
    // 1e-8 stays above every observed floor; the projection error it admits
    // enters the defect as residual * ||u||, near 1e-9 here, two decades
    // under the assertion
    let cg_opts = CgOptions { tol: 1e-8, max_iter: 200_000 };
    let mut kernel_basis: Vec<Vec<C64>> = Vec::new();
    for kap in &kappa {
        let mk = dbar.matrix.apply(&kap.values);
        let u = solve_cg(&s.matrix, &mk, &cg_opts).map_err(|e| fail(e.to_string()))?;
        let corr = mh.apply(&u.x);
        let mut p: Vec<C64> = kap.values.clone();
        for i in 0..p.len() {
            p[i] -= corr[i];
        }
        for _pass in 0..2 {
            for b in &kernel_basis {
                let c = vdot(b, &p);
                for i in 0..p.len() {
                    p[i] -= c * b[i];
                }
            }
        }
        let nn = norm2(&p);
        if nn > 1e-8 {
            let inv = 1.0 / nn;
            for x in &mut p {
                *x *= inv;
            }
            kernel_basis.push(p);
        }
    }
    if kernel_basis.len() < 4 {
        return Err(fail("kernel projection produced fewer than 4 usable directions"));
    }
    let nv = norm2(&sol.v.values);
    let mut defect = 0.0f64;
    for b in &kernel_basis {
        defect = defect.max(vdot(b, &sol.v.values).norm() / nv);
    }
    if defect > 1e-7 {
        return Err(fail(format!("discrete-kernel defect {defect:.3e} > 1e-7")));
    }

    // the energy ratio carries an O(h^2) bias (0.521 measured at h = 0.2),
    // so the 3% band needs the fine grid
    let fine = build_grid(6.0, 0.1, 1).unwrap();
    let gz = sample_one(&fine, |z| z * (-z.norm_sqr()).exp());
    let out =
        solve_canonical(&fine, &w, &gz, &SolveOptions::default()).map_err(|e| fail(e.to_string()))?;
    let ratio = (out.norm_v / gz.norm()).powi(2);
    if (ratio - 0.5).abs() > 0.015 {
        return Err(fail(format!("monomial energy ratio {ratio:.5} not 0.5 +- 3%")));
    }
    Ok(format!(
        "residual {:.1e}, minimality {:.7}, kernel defect {defect:.1e}, ratio {ratio:.4}",
        sol.residual,
        sol.norm_v / v0.norm()
    ))
}

// 8. two-variable quadratic weight: component operator ground level, the
//    constant effective potential, and the one-variable error path
fn c08_multivariable() -> Result<String, String> {
    let dw = DecoupledWeight::new(vec![fock(), fock()]).unwrap();
    let grid = build_grid(3.0, 0.3, 2).unwrap();
    let op = assemble_sk_stencil(&grid, &dw, 1).map_err(|e| fail(e.to_string()))?;
    let opts = EigenOptions { tol: 1e-5, seed: 0, ..EigenOptions::default() };
    let mut prog = progress("multivar ground");
    let res = lowest_eigenpairs(&op, 1, &opts, Some(&mut prog)).map_err(|e| fail(e.to_string()))?;
    let l1 = res.eigenvalues[0];
    if (l1 - 2.0).abs() > 0.2 {
        return Err(fail(format!("lambda1 = {l1:.4} not within 10% of 2")));
    }

    let delta = 0.7;
    let want = delta * 2.0f64.sqrt();
    let pts: [[C64; 2]; 3] = [
        [C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        [C64::new(0.3, 0.1), C64::new(-0.2, 0.4)],
        [C64::new(1.0, -1.0), C64::new(0.5, 0.25)],
    ];
    for z in &pts {
        for k in 1..=2 {
            let s = effective_potential(&dw, k, delta, z).map_err(|e| fail(e.to_string()))?;
            if (s.v_eff - want).abs() > 1e-12 {
                return Err(fail(format!(
                    "v_eff = {} at {z:?} (k = {k}) differs from delta sqrt(2) beyond 1e-12",
                    s.v_eff
                )));
            }
        }
    }

    let one = DecoupledWeight::new(vec![fock()]).unwrap();
    match effective_potential(&one, 1, delta, &[C64::new(0.0, 0.0)]) {
        Err(dbarlab::Error::EffectivePotentialOneVar) => {}
        other => {
            return Err(fail(format!(
                "one-variable effective potential returned {other:?} instead of the documented error"
            )))
        }
    }
    Ok(format!("lambda1 = {l1:.4}; v_eff constant at delta sqrt(2); n=1 rejected"))
}

// 9. the two arrangements of DDstar agree at second order on a kernel form,
//    and the discrete wedge of that form vanishes at second order
fn c09_form_identities() -> Result<String, String> {
    fn window_sup(grid: &TensorGrid, a: &[GridField], b: Option<&[GridField]>, cut: f64) -> f64 {
        let mut idx = vec![0usize; grid.real_dims()];
        let mut worst = 0.0f64;
        for r in 0..grid.node_count() {
            grid.decode(r, &mut idx);
            if idx.iter().any(|&i| grid.axis_coord(i).abs() > cut) {
                continue;
            }
            for (ci, comp) in a.iter().enumerate() {
                let d = match b {
                    Some(bb) => comp.values[r] - bb[ci].values[r],
                    None => comp.values[r],
                };
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    let dw = DecoupledWeight::new(vec![fock(), fock()]).unwrap();
    let mut arr_err = Vec::new();
    let mut wedge_err = Vec::new();
    for h in [0.25, 0.125] {
        let grid = build_grid(2.5, h, 2).unwrap();
        let g0 = sample(&grid, |z| {
            C64::new((-(z[0].norm_sqr() + z[1].norm_sqr())).exp(), 0.0)
        });
        let g1 = sample(&grid, |_| C64::new(0.0, 0.0));
        let comps = [g0, g1];
        let gen = apply_ddstar_general(&grid, &dw, &comps).map_err(|e| fail(e.to_string()))?;
        let ker = apply_ddstar_ker(&grid, &dw, &comps).map_err(|e| fail(e.to_string()))?;
        arr_err.push(window_sup(&grid, &gen, Some(&ker), 1.75));
        let wedge = apply_dbar_form(&grid, &dw, &comps).map_err(|e| fail(e.to_string()))?;
        wedge_err.push(window_sup(&grid, &wedge, None, 1.75));
    }
    let p_arr = (arr_err[0] / arr_err[1]).log2();
    let p_wedge = (wedge_err[0] / wedge_err[1]).log2();
    if p_arr < 1.8 {
        return Err(fail(format!(
            "arrangement difference order {p_arr:.3} < 1.8 (sups {arr_err:?})"
        )));
    }
    if p_wedge < 1.8 {
        return Err(fail(format!(
            "wedge decay order {p_wedge:.3} < 1.8 (sups {wedge_err:?})"
        )));
    }
    Ok(format!("arrangement order {p_arr:.2}, wedge order {p_wedge:.2}"))
}

// 10. doubling diagnostics classify the quadratic weight in and the zero
//     weight out
fn c10_doubling() -> Result<String, String> {
    let rep = doubling_check(&fock(), 4.0).map_err(|e| fail(e.to_string()))?;
    if (rep.max_ratio - 4.0).abs() > 0.04 {
        return Err(fail(format!("max doubling ratio {} not 4 +- 1%", rep.max_ratio)));
    }
    let want_mass = 4.0 * PI;
    if (rep.min_unit_mass - want_mass).abs() > 0.02 * want_mass {
        return Err(fail(format!(
            "min unit-ball mass {} not 4 pi +- 2%",
            rep.min_unit_mass
        )));
    }
    if !rep.in_class_w {
        return Err(fail("quadratic weight not classified in the doubling class"));
    }
    let flat = doubling_check(&WeightModel::Zero, 4.0).map_err(|e| fail(e.to_string()))?;
    if flat.in_class_w {
        return Err(fail("zero weight wrongly classified in the doubling class"));
    }
    Ok(format!(
        "ratio {:.4}, unit mass {:.4} vs {:.4}, flat weight excluded",
        rep.max_ratio, rep.min_unit_mass, want_mass
    ))
}

// 11. the lattice inner product reproduces the Gaussian integral
fn c11_quadrature_sanity() -> Result<String, String> {
    let grid = build_grid(4.0, 0.05, 1).unwrap();
    let f = sample_one(&grid, |z| C64::new((-z.norm_sqr()).exp(), 0.0));
    let ff = inner_product(&f, &f).map_err(|e| fail(e.to_string()))?.re;
    let exact = PI / 2.0;
    if (ff - exact).abs() > 1e-4 {
        return Err(fail(format!("(f, f) = {ff:.8} vs pi/2 = {exact:.8}")));
    }
    Ok(format!("(f, f) = {ff:.8} vs pi/2, diff {:.1e}", (ff - exact).abs()))
}

#[test]
fn acceptance_criteria() {
    let checks: &[(&str, fn() -> Result<String, String>)] = &[
        ("01 fock-ground-level", c01_fock_ground_level),
        ("02 noncompact-signature", c02_noncompact_signature),
        ("03 top-singular-value", c03_top_singular_value),
        ("04 compact-signature", c04_compact_signature),
        ("05 iwatsuka-constancy", c05_iwatsuka_constancy),
        ("06 structural-exactness", c06_structural_exactness),
        ("07 canonical-solve", c07_canonical_solve),
        ("08 multivariable", c08_multivariable),
        ("09 form-identities", c09_form_identities),
        ("10 doubling-diagnostics", c10_doubling),
        ("11 quadrature-sanity", c11_quadrature_sanity),
    ];
    let mut failed = 0usize;
    for (label, check) in checks {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let text = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {text}"))
        });
        match outcome {
            Ok(detail) => println!("acceptance {label}: pass ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("acceptance {label}: FAIL ({detail})");
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
