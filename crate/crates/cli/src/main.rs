use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mongeflow_cli::{exit, run, Command, ExperimentConfig, Overrides};

/// Asymptotic directions, Monge-Ampere equations and Burgers projections on
/// diffeomorphism groups of surfaces.
///
/// Exit status: 0 when every requested check passes, 1 when a check fails
/// or a solver diverges, 2 on usage or config errors.
#[derive(Parser)]
#[command(name = "mongeflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Residual checks on a field (asymptotic, Monge-Ampere, boundary, ...).
    Verify(Common),
    /// Randomized search for solutions of the Monge-Ampere equation.
    Search(Common),
    /// Order of tangency between the Euler and Burgers geodesics.
    Tangency(Common),
    /// Damped Newton solve of the transport Monge-Ampere equation.
    Transport(Common),
    /// Displacement interpolation as a projected Burgers flow.
    Submersion(Common),
    /// Metric, curvature and Gauss-Bonnet data of a chart.
    SurfaceInfo(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    times: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Verify(a) => (Command::Verify, a),
        Cmd::Search(a) => (Command::Search, a),
        Cmd::Tangency(a) => (Command::Tangency, a),
        Cmd::Transport(a) => (Command::Transport, a),
        Cmd::Submersion(a) => (Command::Submersion, a),
        Cmd::SurfaceInfo(a) => (Command::SurfaceInfo, a),
    };
    let code = match execute(cmd, args) {
        Ok(true) => exit::PASS,
        Ok(false) => exit::CHECK_FAILED,
        Err(e) => {
            eprintln!("mongeflow: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cmd: Command, a: Common) -> Result<bool, mongeflow_cli::CliError> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    cfg.apply(&Overrides {
        seed: a.seed,
        tol: a.tol,
        max_iters: a.max_iters,
        epsilon: a.epsilon,
        times: a.times,
        restarts: a.restarts,
        output_dir: a.output_dir,
    });
    let out = run(cmd, &cfg)?;
    println!(
        "{}: {} ({})",
        cmd.name(),
        if out.passed { "pass" } else { "fail" },
        out.report_path.display()
    );
    Ok(out.passed)
}
