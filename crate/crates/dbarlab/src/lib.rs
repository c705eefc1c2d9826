//! Numerical laboratory for the weighted dbar problem on the complex plane
//! (and decoupled weights on C^n), discretized as magnetic Schrödinger
//! operators on a truncated uniform lattice.
//!
//! The conjugated operators are `Dbar = d/dzbar + phi_zbar` and its formal
//! adjoint `D = -d/dz + phi_z`; the Schrödinger form is
//! `S = Dbar D = (1/4) [ -(dx - i A1)^2 - (dy - i A2)^2 + lap(phi) ]`
//! with vector potential `A = (-phi_y, phi_x)`. The canonical (minimal-norm)
//! solution of `Dbar v = g` is `v = D S^{-1} g`, and the singular values of
//! the solution operator are the inverse square roots of the eigenvalues
//! of `S`.

pub mod cg;
pub mod config;
pub mod diagnostics;
pub mod fock;
pub mod forms;
pub mod grid;
pub mod operators;
pub mod runner;
pub mod solver;
pub mod sparse;
pub mod spectral;
pub mod weights;

pub type C64 = num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("grid: R/h must be a positive integer (R = {r}, h = {h})")]
    NonIntegralSpacing { r: f64, h: f64 },

    #[error("grid: node budget exceeded ({nodes} nodes > budget {budget})")]
    NodeBudget { nodes: u128, budget: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("point ({x}, {y}) outside the sampled weight's domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("radial power weight requires exponent m >= 2 (got {m}); phi is not C^2 at 0 below that")]
    RadialPowerExponent { m: f64 },

    #[error("operator is not flagged hermitian; eigensolver contract requires it")]
    NotHermitian,

    #[error(
        "eigensolver converged only {converged} of {requested} pairs \
         (krylov dim {dim}); partial results attached"
    )]
    EigenNonConvergence {
        converged: usize,
        requested: usize,
        dim: usize,
        partial: Box<spectral::SpectralResult>,
    },

    #[error("cg failed to converge after {iterations} iterations (relative residual {residual:.3e})")]
    CgNonConvergence { iterations: usize, residual: f64 },

    #[error("cg detected negative curvature ({value:.3e}); operator is not positive semidefinite")]
    NegativeCurvature { value: f64 },

    #[error("operator is not positive definite: eigenvalue {lambda:.6e} <= 0")]
    NotPositiveDefinite { lambda: f64 },

    #[error("kernel test basis is rank deficient on this grid: requested K = {requested}, usable {usable}; reduce K")]
    RankDeficient { requested: usize, usable: usize },

    #[error("weight is not subharmonic: lap(phi) = {min_laplacian:.3e} < 0 at ({x}, {y})")]
    NotSubharmonic { min_laplacian: f64, x: f64, y: f64 },

    #[error("effective potential V_eff = V_k + delta/(n-1)|B| is undefined for n = 1 (division by n - 1); it requires n >= 2")]
    EffectivePotentialOneVar,

    #[error("tensor sum oracle needs at least one factor spectrum, none supplied")]
    EmptyFactors,

    #[error("monomial norm overflows f64 beyond n = {cap} (requested n = {n})")]
    MonomialOverflow { n: u32, cap: u32 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code classification: 2 = invalid input/config, 3 = non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EigenNonConvergence { .. }
            | Error::CgNonConvergence { .. }
            | Error::NegativeCurvature { .. } => 3,
            _ => 2,
        }
    }
}
