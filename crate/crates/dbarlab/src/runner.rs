//! Batch orchestration: read config, hash it, validate, compute, then write
//! result files. Nothing touches the output directory until the whole
//! computation has succeeded, so a failing run leaves no partial outputs.
//! CSV payloads are deterministic for a fixed config and seed; manifest.json
//! (written last) carries the config echo, version, seed and wall time.

use crate::config::{DataConfig, RunConfig, TaskKind};
use crate::diagnostics::{doubling_check, iwatsuka_integral, magnetic_field};
use crate::fock::{canonical_solution_monomial, landau_levels, monomial_norm};
use crate::grid::{build_grid, read_field_csv, sample_one, write_field_csv, GridField, TensorGrid};
use crate::operators::{assemble_s_stencil, assemble_sk_stencil};
use crate::solver::{solve_canonical, SolveOptions};
use crate::spectral::{
    compactness_probe, lowest_eigenpairs, singular_values_from_spectrum, EigenOptions,
    ProbeOptions, SpectralResult,
};
use crate::weights::WeightModel;
use crate::{C64, Error, Result};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct CliArgs {
    pub task: TaskKind,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

struct TaskOutput {
    /// (file name, payload); written in listed order, manifest afterwards
    files: Vec<(&'static str, Vec<u8>)>,
    summary: serde_json::Value,
    warnings: Vec<String>,
}

/// `progress <fraction>` lines on stderr, throttled to ~2% increments
fn stderr_progress() -> impl FnMut(f64) {
    let mut last = f64::NEG_INFINITY;
    move |f: f64| {
        if f - last >= 0.02 || (f >= 1.0 && last < 1.0) {
            last = f;
            eprintln!("progress {f:.2}");
        }
    }
}

fn config_header(hash: &str) -> String {
    format!("# config_sha256 {hash}\n")
}

pub fn run(args: &CliArgs) -> Result<()> {
    let bytes = std::fs::read(&args.config)?;
    let hash = format!("{:x}", Sha256::digest(&bytes));
    let config = RunConfig::from_json(&bytes)?;
    config.validate(args.task)?;
    let seed = args.seed.or(config.seed).unwrap_or(0);

    let t0 = Instant::now();
    let out = match args.task {
        TaskKind::Spectrum => run_spectrum(&config, &hash, seed, false)?,
        TaskKind::Singvals => run_spectrum(&config, &hash, seed, true)?,
        TaskKind::Solve => run_solve(&config, &hash)?,
        TaskKind::Probe => run_probe(&config, &hash, seed)?,
        TaskKind::Diagnose => run_diagnose(&config, &hash)?,
        TaskKind::Oracle => run_oracle(&config, &hash)?,
        TaskKind::Multivar => run_multivar(&config, &hash, seed)?,
    };
    let wall_time_s = t0.elapsed().as_secs_f64();

    std::fs::create_dir_all(&args.out)?;
    for (name, data) in &out.files {
        std::fs::write(args.out.join(name), data)?;
    }
    let manifest = serde_json::json!({
        "task": args.task.name(),
        "config_sha256": hash,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": wall_time_s,
        "seed": seed,
        "summary": out.summary,
        "warnings": out.warnings,
        "config": config,
    });
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    manifest_bytes.push(b'\n');
    std::fs::write(args.out.join("manifest.json"), manifest_bytes)?;
    Ok(())
}

fn eigen_options_from(config: &RunConfig, seed: u64, base: EigenOptions) -> EigenOptions {
    let p = &config.params;
    let mut o = base;
    o.seed = seed;
    if let Some(t) = p.tol {
        o.tol = t;
    }
    if let Some(m) = p.max_lanczos_dim {
        o.max_lanczos_dim = m;
    }
    if let Some(s) = p.shift {
        o.shift = s;
    }
    o
}

fn eigenvalue_csv(hash: &str, res: &SpectralResult) -> Vec<u8> {
    let mut s = config_header(hash);
    s.push_str("index,eigenvalue,residual\n");
    for (i, (l, r)) in res.eigenvalues.iter().zip(&res.residual_norms).enumerate() {
        let _ = writeln!(s, "{i},{l},{r}");
    }
    s.into_bytes()
}

fn spectral_warnings(op_warnings: &[String], res: &SpectralResult) -> Vec<String> {
    let mut w = op_warnings.to_vec();
    if res.truncated {
        w.push(
            "eigenvalues below the cap exceeded the pair budget; the list is truncated".into(),
        );
    }
    w
}

fn run_spectrum(config: &RunConfig, hash: &str, seed: u64, singvals: bool) -> Result<TaskOutput> {
    let w = config.build_one_variable()?;
    let (r, h) = config.single_grid()?;
    let grid = build_grid(r, h, 1)?;
    let op = assemble_s_stencil(&grid, &w)?;
    let mut opts = eigen_options_from(config, seed, EigenOptions::default());
    opts.stop_above = config.params.lambda_cap;
    let k = config.params.k.unwrap_or(8);
    let mut prog = stderr_progress();
    let res = lowest_eigenpairs(&op, k, &opts, Some(&mut prog))?;
    let warnings = spectral_warnings(&op.warnings, &res);

    let mut files: Vec<(&'static str, Vec<u8>)> = Vec::new();
    let summary;
    if singvals {
        let sigmas = singular_values_from_spectrum(&res.eigenvalues)?;
        let mut s = config_header(hash);
        s.push_str("index,sigma\n");
        for (i, v) in sigmas.iter().enumerate() {
            let _ = writeln!(s, "{i},{v}");
        }
        files.push(("singular_values.csv", s.into_bytes()));
        summary = serde_json::json!({
            "count": sigmas.len(),
            "sigma_max": sigmas[0],
            "lambda_min": res.eigenvalues[0],
            "iterations": res.iterations,
            "nodes": grid.node_count(),
        });
    } else {
        files.push(("eigenvalues.csv", eigenvalue_csv(hash, &res)));
        if config.params.export_operator == Some(true) {
            let mut coo = config_header(hash).into_bytes();
            op.matrix.write_coordinate(&mut coo)?;
            files.push(("operator.coo", coo));
        }
        summary = serde_json::json!({
            "count": res.eigenvalues.len(),
            "lambda_min": res.eigenvalues[0],
            "iterations": res.iterations,
            "nodes": grid.node_count(),
        });
    }
    Ok(TaskOutput { files, summary, warnings })
}

fn monomial_datum(grid: &TensorGrid, w: &WeightModel, n: u32) -> Result<GridField> {
    let f = sample_one(grid, |z| {
        let phi = match w.eval_derivatives(z) {
            Ok(b) => b.phi,
            Err(_) => f64::NAN,
        };
        z.powu(n) * (-phi).exp()
    });
    if f.values.iter().any(|v| v.re.is_nan() || v.im.is_nan()) {
        return Err(Error::InvalidConfig(
            "weight not evaluable on the requested grid".into(),
        ));
    }
    Ok(f)
}

fn run_solve(config: &RunConfig, hash: &str) -> Result<TaskOutput> {
    let w = config.build_one_variable()?;
    let (r, h) = config.single_grid()?;
    let grid = build_grid(r, h, 1)?;
    let g = match config.params.data.as_ref() {
        Some(DataConfig::Monomial { n }) => monomial_datum(&grid, &w, *n)?,
        Some(DataConfig::Csv { path }) => {
            let file = std::fs::File::open(path)?;
            read_field_csv(&mut std::io::BufReader::new(file), Some(&grid))?
        }
        None => return Err(Error::InvalidConfig("solve needs params.data".into())),
    };
    let mut opts = SolveOptions::default();
    if let Some(t) = config.params.tol {
        opts.tol = t;
    }
    if let Some(m) = config.params.max_iter {
        opts.max_iter = m;
    }
    if let Some(kb) = config.params.kernel_basis_size {
        opts.kernel_basis_size = kb;
    }
    let res = solve_canonical(&grid, &w, &g, &opts)?;

    let mut payload = Vec::new();
    write_field_csv(&mut payload, &res.v, &[format!("config_sha256 {hash}")])?;
    let norm_g = g.norm();
    let ratio_sq = if norm_g > 0.0 {
        (res.norm_v / norm_g).powi(2)
    } else {
        0.0
    };
    let summary = serde_json::json!({
        "residual": res.residual,
        "orthogonality_defect": res.orthogonality_defect,
        "norm_v": res.norm_v,
        "norm_g": norm_g,
        "ratio_sq": ratio_sq,
        "cg_iterations": res.cg_iterations,
        "nodes": grid.node_count(),
    });
    Ok(TaskOutput {
        files: vec![("solution.csv", payload)],
        summary,
        warnings: Vec::new(),
    })
}

fn run_probe(config: &RunConfig, hash: &str, seed: u64) -> Result<TaskOutput> {
    let w = config.build_one_variable()?;
    let (radii, h) = config.probe_grid()?;
    let p = &config.params;
    let mut opts = ProbeOptions::default();
    if let Some(c) = p.lambda_cap {
        opts.lambda_cap = c;
    }
    if let Some([lo, hi]) = p.band {
        opts.band = (lo, hi);
    }
    if let Some(k) = p.k_max {
        opts.k_max = k;
    }
    opts.eig = eigen_options_from(config, seed, opts.eig);
    let mut prog = stderr_progress();
    let report = compactness_probe(&w, h, &radii, &opts, Some(&mut prog))?;

    let json = serde_json::json!({
        "config_sha256": hash,
        "h": h,
        "lambda_cap": opts.lambda_cap,
        "band": [opts.band.0, opts.band.1],
        "radii": report.radii,
        "counts": report.counts,
        "band_counts": report.band_counts,
        "verdict": report.verdict.to_string(),
        "verdict_rule_trace": report.verdict_rule_trace,
        "spectra": report.spectra,
    });
    let mut payload = serde_json::to_vec_pretty(&json)?;
    payload.push(b'\n');
    let summary = serde_json::json!({
        "verdict": report.verdict.to_string(),
        "counts": report.counts,
        "band_counts": report.band_counts,
    });
    Ok(TaskOutput {
        files: vec![("probe_report.json", payload)],
        summary,
        warnings: Vec::new(),
    })
}

fn run_diagnose(config: &RunConfig, hash: &str) -> Result<TaskOutput> {
    let w = config.build_one_variable()?;
    let (r, _h) = config.single_grid()?;
    let quad_h = config.params.quad_h.unwrap_or(0.02);

    // curvature-ball integrals at centers |c| <= r - 2 on a 0.5-spaced
    // lattice, same reach as the doubling sweep
    let reach = r - 2.0;
    if reach < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "diagnose needs grid.r >= 2 so unit balls at the centers stay inside (got r = {r})"
        )));
    }
    let steps = (reach / 0.5).floor() as i64;
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for iy in -steps..=steps {
        for ix in -steps..=steps {
            let (x, y) = (ix as f64 * 0.5, iy as f64 * 0.5);
            if x * x + y * y <= reach * reach + 1e-12 {
                rows.push((x, y, iwatsuka_integral(&w, (x, y), quad_h)?));
            }
        }
    }
    let doubling = doubling_check(&w, r)?;

    let mut s = config_header(hash);
    s.push_str("x,y,iwatsuka_ball_integral\n");
    for (x, y, v) in &rows {
        let _ = writeln!(s, "{x},{y},{v}");
    }

    let mean = rows.iter().map(|r| r.2).sum::<f64>() / rows.len() as f64;
    let var = rows.iter().map(|r| (r.2 - mean).powi(2)).sum::<f64>() / rows.len() as f64;
    let rel_std = if mean != 0.0 {
        var.sqrt() / mean.abs()
    } else {
        0.0
    };
    let summary = serde_json::json!({
        "centers": rows.len(),
        "iwatsuka_mean": mean,
        "iwatsuka_rel_std": rel_std,
        "quad_h": quad_h,
        "doubling": doubling,
    });
    Ok(TaskOutput {
        files: vec![("diagnostics.csv", s.into_bytes())],
        summary,
        warnings: Vec::new(),
    })
}

fn run_oracle(config: &RunConfig, hash: &str) -> Result<TaskOutput> {
    let count = config.params.count.unwrap_or(30) as u32;
    let mut s = config_header(hash);
    s.push_str("n,c_n,norm_u_sq,sigma\n");
    let mut sigma_first = 0.0;
    for n in 0..count {
        let c_n = monomial_norm(n)?;
        let sol = canonical_solution_monomial(n)?;
        if n == 0 {
            sigma_first = sol.sigma;
        }
        let _ = writeln!(s, "{n},{c_n},{},{}", sol.norm_sq_u, sol.sigma);
    }
    let ground = landau_levels(4.0, 1)?[0];
    let summary = serde_json::json!({
        "rows": count,
        "sigma": sigma_first,
        "landau_ground_level": ground,
    });
    Ok(TaskOutput {
        files: vec![("oracle.csv", s.into_bytes())],
        summary,
        warnings: Vec::new(),
    })
}

fn run_multivar(config: &RunConfig, hash: &str, seed: u64) -> Result<TaskOutput> {
    let dw = config.build_decoupled()?;
    let (r, h) = config.single_grid()?;
    let grid = build_grid(r, h, dw.n())?;
    let component_k = config.params.component_k.unwrap_or(1);
    let op = assemble_sk_stencil(&grid, &dw, component_k)?;
    let mut opts = eigen_options_from(config, seed, EigenOptions::default());
    opts.stop_above = config.params.lambda_cap;
    let k = config.params.k.unwrap_or(8);
    let mut prog = stderr_progress();
    let res = lowest_eigenpairs(&op, k, &opts, Some(&mut prog))?;
    let warnings = spectral_warnings(&op.warnings, &res);

    let mut summary = serde_json::json!({
        "count": res.eigenvalues.len(),
        "lambda_min": res.eigenvalues[0],
        "iterations": res.iterations,
        "component_k": component_k,
        "n": dw.n(),
        "nodes": grid.node_count(),
    });
    if let Some(delta) = config.params.delta {
        let origin = vec![C64::new(0.0, 0.0); dw.n()];
        let veff = crate::diagnostics::effective_potential(&dw, component_k, delta, &origin)?;
        let field = magnetic_field(&dw, &origin)?;
        let extra = summary.as_object_mut().unwrap();
        extra.insert("v_eff_origin".into(), serde_json::json!(veff.v_eff));
        extra.insert("v_k_origin".into(), serde_json::json!(veff.v_k));
        extra.insert("field_magnitude_origin".into(), serde_json::json!(field.magnitude));
    }
    Ok(TaskOutput {
        files: vec![("eigenvalues.csv", eigenvalue_csv(hash, &res))],
        summary,
        warnings,
    })
}
