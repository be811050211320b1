//! `lab <experiment> --config <path> [--out <dir>] [--seed <u64>]`

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dtnlab::experiments::{describe_fits, export_report, run_scenario, ExperimentKind, Overrides, ScenarioConfig};
use dtnlab::{LabError, StageExt};

#[derive(Parser)]
#[command(name = "lab", version, about = "Dirichlet-to-Neumann laboratory scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML scenario file; its `out` and `seed` take precedence over the flags.
    #[arg(long)]
    config: PathBuf,
    /// Output directory when the config has none.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed when the config has none.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// DtN symmetry, conservation, energy pairing and Steklov spectrum.
    DtnValidate(RunArgs),
    /// Oscillating-datum and singular-solution estimates of the boundary conductivity.
    RecoverSigma(RunArgs),
    /// Norm scalings, exterior decay and concentration of oscillating solutions.
    DecayProfile(RunArgs),
    /// Boundary gaps against DtN gaps over a shrinking family.
    StabilitySweep(RunArgs),
    /// Liouville-transform residuals under refinement.
    Liouville(RunArgs),
    /// First Dirichlet eigenpair and collar ratio.
    Spectral(RunArgs),
    /// Smooth approximants and DtN continuity.
    Density(RunArgs),
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Command::DtnValidate(a) => (ExperimentKind::DtnValidate, a),
            Command::RecoverSigma(a) => (ExperimentKind::RecoverSigma, a),
            Command::DecayProfile(a) => (ExperimentKind::DecayProfile, a),
            Command::StabilitySweep(a) => (ExperimentKind::StabilitySweep, a),
            Command::Liouville(a) => (ExperimentKind::Liouville, a),
            Command::Spectral(a) => (ExperimentKind::Spectral, a),
            Command::Density(a) => (ExperimentKind::Density, a),
        }
    }
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<(), LabError> {
    let flags = Overrides { out: args.out, seed: args.seed };
    let config = ScenarioConfig::load(&args.config).and_then(|c| c.resolve(kind, &flags)).stage("config")?;
    eprintln!("{kind}: seed {} -> {}", config.seed_value(), config.out_dir().display());
    let bundle = run_scenario(&config)?;
    let manifest = export_report(&bundle)?;
    print!("{}", describe_fits(&bundle.summary));
    println!("summary: {}", bundle.dir.join("summary.json").display());
    println!("plots: {}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    let (kind, args) = Cli::parse().command.split();
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
