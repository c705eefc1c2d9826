use clap::{Args, Parser, Subcommand};
use dbarlab::config::TaskKind;
use dbarlab::runner::{run, CliArgs};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "dbarlab",
    version,
    about = "Spectra, singular values and canonical solves for weighted dbar problems \
             discretized as magnetic Schrödinger operators"
)]
struct Cli {
    #[command(subcommand)]
    task: Task,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration (see config.schema.json)
    #[arg(long)]
    config: PathBuf,
    /// output directory; created if missing, written only on success
    #[arg(long)]
    out: PathBuf,
    /// RNG seed; overrides the config's seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Task {
    /// Lowest eigenvalues of the Schrödinger form S = Dbar D
    Spectrum(RunArgs),
    /// Singular values of the canonical solution operator (1/sqrt(lambda))
    Singvals(RunArgs),
    /// Minimal-norm solution of Dbar v = g
    Solve(RunArgs),
    /// Eigenvalue-count growth across box radii: compactness classification
    Probe(RunArgs),
    /// Curvature-ball integrals and doubling-class membership of the weight
    Diagnose(RunArgs),
    /// Closed-form Gaussian-weight table: monomial norms and sigma_n
    Oracle(RunArgs),
    /// Lowest eigenvalues of the k-th component operator for decoupled weights
    Multivar(RunArgs),
}

fn main() {
    let cli = Cli::parse();
    let (task, a) = match cli.task {
        Task::Spectrum(a) => (TaskKind::Spectrum, a),
        Task::Singvals(a) => (TaskKind::Singvals, a),
        Task::Solve(a) => (TaskKind::Solve, a),
        Task::Probe(a) => (TaskKind::Probe, a),
        Task::Diagnose(a) => (TaskKind::Diagnose, a),
        Task::Oracle(a) => (TaskKind::Oracle, a),
        Task::Multivar(a) => (TaskKind::Multivar, a),
    };
    let args = CliArgs {
        task,
        config: a.config,
        out: a.out,
        seed: a.seed,
    };
    if let Err(e) = run(&args) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
