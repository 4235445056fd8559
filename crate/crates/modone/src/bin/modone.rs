//! Thin command-line front end over `modone::experiment`.
//!
//! Exit status: 0 all checks pass, 1 at least one check failed, 2 invalid
//! configuration or runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use modone::experiment::{self, ExperimentConfig, ExperimentKind, RunOptions, RunOutcome};
use modone::Result;

#[derive(Parser)]
#[command(
    name = "modone",
    version,
    about = "Coupled fractional-sum limit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the config (and MODONE_SEED) seed
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory for CSV/JSON artifacts
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; affects speed only, never results
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit raw sample batches without statistical verdicts
    Simulate(Common),
    /// KS uniformity of each fractional coordinate
    TestUniformity(Common),
    /// Grid chi-square, Weyl sums and the K-component KS, jointly
    JointLimit(Common),
    /// Total-variation distance of standardized sums to the Gaussian limit over M
    TvClt(Common),
    /// Transformed density against its limit over a xi grid
    DensitySweep(Common),
    /// Mantissa uniformity under a fixed or data-adapted base
    Benford(Common),
    /// Stratified-resampling variance decomposition vs direct simulation
    ResampleVariance(Common),
    /// Integrability certificate for 1/|phi|^(q+1) near the anchor
    CheckIntegrability(Common),
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::Simulate(c) => (ExperimentKind::Simulate, c),
            Command::TestUniformity(c) => (ExperimentKind::Uniformity, c),
            Command::JointLimit(c) => (ExperimentKind::JointLimit, c),
            Command::TvClt(c) => (ExperimentKind::TvClt, c),
            Command::DensitySweep(c) => (ExperimentKind::DensitySweep, c),
            Command::Benford(c) => (ExperimentKind::Benford, c),
            Command::ResampleVariance(c) => (ExperimentKind::ResampleVariance, c),
            Command::CheckIntegrability(c) => (ExperimentKind::Integrability, c),
        }
    }
}

fn load_and_run(kind: ExperimentKind, common: &Common) -> Result<RunOutcome> {
    let mut config = ExperimentConfig::load(&common.config)?;
    config.experiment = kind;
    let opts = RunOptions {
        seed_override: common.seed,
        out_override: common.out.clone(),
        threads: common.threads,
    };
    experiment::run(&config, &opts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = cli.command.split();
    let outcome = load_and_run(kind, &common);
    match &outcome {
        Ok(o) => {
            for r in &o.reports {
                let verdict = if r.pass { "PASS" } else { "FAIL" };
                println!(
                    "{verdict} {} statistic {:.6e} threshold {:.6e} (n={})",
                    r.name, r.statistic, r.threshold, r.n
                );
            }
            println!("artifacts: {}", o.out_dir.display());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(experiment::exit_code(&outcome) as u8)
}
