use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use homlab::config::ExperimentConfig;
use homlab::pipeline::Pipeline;
use homlab::report::Status;
use homlab::{run, Command, RunOptions, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "homlab", version, about = "Periodic homogenization and unique continuation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the configured one).
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,

    /// Also write SVG charts.
    #[arg(long, global = true)]
    plots: bool,

    /// Load calibrated constants from <outdir>/constants.json if present.
    #[arg(long, global = true)]
    use_cached: bool,

    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Cell correctors, homogenized tensor, flux correctors.
    Cell,
    /// Two-scale convergence sweep over eps.
    Convergence,
    /// Weighted inequality sweeps, expansion residual, Caccioppoli constants.
    Carleman,
    /// Three-ball constants and exponents.
    Threeball,
    /// Doubling ratios and the growth condition.
    Doubling,
    /// Homogeneous polynomials against the growth condition.
    Counterexample,
    /// Calibrate the weighted-inequality constant.
    Calibrate,
    /// Every pipeline in dependency order.
    All,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Cell => Command::Single(Pipeline::Cell),
            Cmd::Convergence => Command::Single(Pipeline::Convergence),
            Cmd::Carleman => Command::Single(Pipeline::Carleman),
            Cmd::Threeball => Command::Single(Pipeline::ThreeBall),
            Cmd::Doubling => Command::Single(Pipeline::Doubling),
            Cmd::Counterexample => Command::Single(Pipeline::Counterexample),
            Cmd::Calibrate => Command::Single(Pipeline::Calibrate),
            Cmd::All => Command::All,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(path) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(EXIT_CONFIG as u8);
    };
    let cfg = match ExperimentConfig::load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let opts = RunOptions { outdir: cli.outdir, plots: cli.plots, use_cached: cli.use_cached };
    let outcome = run(cli.command.into(), cfg, &opts);
    for stage in &outcome.summary.stages {
        println!("{:<15} {:<5} {:>8.1}s", stage.name, format!("{:?}", stage.status).to_lowercase(), stage.seconds);
        for c in stage.checks.iter().filter(|c| !c.pass) {
            println!("    failed {}: {} (bound {})", c.name, c.value, c.bound);
        }
    }
    if let Some(err) = &outcome.summary.error {
        eprintln!("error in {} ({}): {}", err.stage, err.kind, err.message);
    } else if outcome.summary.status == Status::Pass {
        println!("all checks passed");
    }
    ExitCode::from(outcome.exit_code as u8)
}
