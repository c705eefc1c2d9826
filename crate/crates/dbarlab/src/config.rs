//! JSON run configuration. The published schema (config.schema.json at the
//! repository root) mirrors these types one-to-one; everything is validated
//! here before any computation starts, so a bad config can never leave
//! partial outputs behind.

use crate::weights::{DecoupledWeight, PolyTerm, SampledWeight, WeightModel};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Spectrum,
    Singvals,
    Solve,
    Probe,
    Diagnose,
    Oracle,
    Multivar,
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Spectrum => "spectrum",
            TaskKind::Singvals => "singvals",
            TaskKind::Solve => "solve",
            TaskKind::Probe => "probe",
            TaskKind::Diagnose => "diagnose",
            TaskKind::Oracle => "oracle",
            TaskKind::Multivar => "multivar",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    Zero,
    RadialPower { m: f64 },
    Polynomial { terms: Vec<PolyTerm> },
    GridSampled { path: String, spacing: f64 },
    Decoupled { factors: Vec<WeightConfig> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// half-width of the truncation box; every task except probe
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// list of half-widths, probe only
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// datum z^n e^{-phi} (the conjugated image of the monomial z^n)
    Monomial { n: u32 },
    /// datum read from a field CSV written by this tool
    Csv { path: String },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskParams {
    /// eigenpair count (spectrum, singvals, multivar)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_lanczos_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    /// spectral counting cap (probe); optional early stop elsewhere
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_cap: Option<f64>,
    /// closed band [lo, hi] whose occupation the probe tracks
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<[f64; 2]>,
    /// per-radius budget of pairs below the cap (probe)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// ball quadrature step (diagnose)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_h: Option<f64>,
    /// effective-potential coupling (multivar)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// 1-based distinguished factor for the multivariable operator
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component_k: Option<usize>,
    /// oracle table length
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// size of the sampled-kernel basis for the orthogonality defect (solve)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_basis_size: Option<usize>,
    /// CG iteration budget (solve)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    /// also dump the assembled operator in coordinate form
    #[serde(skip_serializing_if = "Option::is_none")]
    pub export_operator: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// optional echo of the task; must agree with the subcommand when present
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskKind>,
    pub weight: WeightConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub params: TaskParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn require_positive(name: &str, v: Option<f64>) -> Result<()> {
    if let Some(x) = v {
        if !(x > 0.0) || !x.is_finite() {
            return Err(invalid(format!("{name} must be a positive finite number, got {x}")));
        }
    }
    Ok(())
}

fn check_weight(w: &WeightConfig, nested: bool) -> Result<()> {
    match w {
        WeightConfig::Zero => Ok(()),
        WeightConfig::RadialPower { m } => {
            if !m.is_finite() {
                return Err(invalid(format!("radial_power exponent must be finite, got {m}")));
            }
            Ok(())
        }
        WeightConfig::Polynomial { terms } => {
            if terms.is_empty() {
                return Err(invalid("polynomial weight needs at least one term"));
            }
            if terms.iter().any(|t| !t.coeff.is_finite()) {
                return Err(invalid("polynomial weight has a non-finite coefficient"));
            }
            Ok(())
        }
        WeightConfig::GridSampled { path, spacing } => {
            if path.is_empty() {
                return Err(invalid("grid_sampled weight needs a non-empty path"));
            }
            require_positive("grid_sampled.spacing", Some(*spacing))
        }
        WeightConfig::Decoupled { factors } => {
            if nested {
                return Err(invalid("decoupled weights cannot nest"));
            }
            if factors.is_empty() {
                return Err(invalid("decoupled weight needs at least one factor"));
            }
            for f in factors {
                check_weight(f, true)?;
            }
            Ok(())
        }
    }
}

impl RunConfig {
    pub fn from_json(bytes: &[u8]) -> Result<RunConfig> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn factor_count(&self) -> usize {
        match &self.weight {
            WeightConfig::Decoupled { factors } => factors.len(),
            _ => 1,
        }
    }

    /// Full structural validation against the task actually being run.
    /// No file IO happens here; sampled-weight files are read by the
    /// builders below, still before any computation.
    pub fn validate(&self, task: TaskKind) -> Result<()> {
        if let Some(t) = self.task {
            if t != task {
                return Err(invalid(format!(
                    "config names task '{}' but the command line asked for '{}'",
                    t.name(),
                    task.name()
                )));
            }
        }
        check_weight(&self.weight, false)?;

        let decoupled = matches!(self.weight, WeightConfig::Decoupled { .. });
        if task == TaskKind::Multivar && !decoupled {
            return Err(invalid("multivar requires a decoupled weight (one factor per variable)"));
        }
        if task != TaskKind::Multivar && decoupled {
            return Err(invalid(format!(
                "task '{}' works in one variable; decoupled weights are for multivar",
                task.name()
            )));
        }

        if task == TaskKind::Oracle {
            if let Some(c) = self.params.count {
                if c == 0 {
                    return Err(invalid("oracle count must be at least 1"));
                }
            }
        } else {
            let grid = self
                .grid
                .as_ref()
                .ok_or_else(|| invalid(format!("task '{}' needs a grid", task.name())))?;
            require_positive("grid.h", Some(grid.h))?;
            if task == TaskKind::Probe {
                if grid.r.is_some() {
                    return Err(invalid("probe takes grid.radii, not grid.r"));
                }
                let radii = grid
                    .radii
                    .as_ref()
                    .ok_or_else(|| invalid("probe needs grid.radii (at least two)"))?;
                if radii.len() < 2 {
                    return Err(invalid("probe needs at least two radii"));
                }
                for r in radii {
                    require_positive("grid.radii entry", Some(*r))?;
                }
                if radii.windows(2).any(|p| p[1] <= p[0]) {
                    return Err(invalid("grid.radii must be strictly increasing"));
                }
            } else {
                if grid.radii.is_some() {
                    return Err(invalid("grid.radii is only for probe; use grid.r"));
                }
                require_positive(
                    "grid.r",
                    Some(grid.r.ok_or_else(|| invalid(format!("task '{}' needs grid.r", task.name())))?),
                )?;
            }
        }

        require_positive("params.tol", self.params.tol)?;
        require_positive("params.lambda_cap", self.params.lambda_cap)?;
        require_positive("params.quad_h", self.params.quad_h)?;
        if let Some(s) = self.params.shift {
            if !s.is_finite() {
                return Err(invalid("params.shift must be finite"));
            }
        }
        if let Some(d) = self.params.delta {
            if !d.is_finite() {
                return Err(invalid("params.delta must be finite"));
            }
        }
        if let Some([lo, hi]) = self.params.band {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid(format!("params.band must satisfy lo < hi, got [{lo}, {hi}]")));
            }
        }
        for (name, v) in [
            ("params.k", self.params.k),
            ("params.k_max", self.params.k_max),
            ("params.max_lanczos_dim", self.params.max_lanczos_dim),
            ("params.kernel_basis_size", self.params.kernel_basis_size),
            ("params.max_iter", self.params.max_iter),
        ] {
            if v == Some(0) {
                return Err(invalid(format!("{name} must be at least 1")));
            }
        }
        if let Some(k) = self.params.component_k {
            let n = self.factor_count();
            if k == 0 || k > n {
                return Err(invalid(format!(
                    "params.component_k = {k} out of range 1..={n}"
                )));
            }
        }
        if task == TaskKind::Solve && self.params.data.is_none() {
            return Err(invalid("solve needs params.data (monomial or csv datum)"));
        }
        if let Some(DataConfig::Csv { path }) = &self.params.data {
            if path.is_empty() {
                return Err(invalid("params.data csv path must be non-empty"));
            }
        }
        Ok(())
    }

    /// Single-variable weight model. Reads the sample file for
    /// grid_sampled weights.
    pub fn build_one_variable(&self) -> Result<WeightModel> {
        build_model(&self.weight)
    }

    pub fn build_decoupled(&self) -> Result<DecoupledWeight> {
        match &self.weight {
            WeightConfig::Decoupled { factors } => {
                let models = factors.iter().map(build_model).collect::<Result<Vec<_>>>()?;
                DecoupledWeight::new(models)
            }
            _ => Err(invalid("expected a decoupled weight")),
        }
    }

    /// (half-width, spacing) for the single-box tasks
    pub fn single_grid(&self) -> Result<(f64, f64)> {
        let g = self.grid.as_ref().ok_or_else(|| invalid("missing grid"))?;
        Ok((g.r.ok_or_else(|| invalid("missing grid.r"))?, g.h))
    }

    /// (radii, spacing) for probe
    pub fn probe_grid(&self) -> Result<(Vec<f64>, f64)> {
        let g = self.grid.as_ref().ok_or_else(|| invalid("missing grid"))?;
        Ok((
            g.radii.clone().ok_or_else(|| invalid("missing grid.radii"))?,
            g.h,
        ))
    }
}

fn build_model(wc: &WeightConfig) -> Result<WeightModel> {
    match wc {
        WeightConfig::Zero => Ok(WeightModel::Zero),
        WeightConfig::RadialPower { m } => WeightModel::radial_power(*m),
        WeightConfig::Polynomial { terms } => Ok(WeightModel::Polynomial { terms: terms.clone() }),
        WeightConfig::GridSampled { path, spacing } => {
            let text = std::fs::read_to_string(path)?;
            Ok(WeightModel::GridSampled(SampledWeight::from_csv_text(&text, *spacing)?))
        }
        WeightConfig::Decoupled { .. } => Err(invalid(
            "decoupled weight where a single-variable weight was expected",
        )),
    }
}
