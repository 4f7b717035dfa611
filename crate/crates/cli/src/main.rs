//! `leanexp`: batch planning runs driven by JSON spec files.
//!
//! Every subcommand reads one spec, writes a JSON envelope and/or CSV tables
//! into the output directory, and exits with 0 on success, 2 when the spec is
//! invalid, 3 when a numerical routine fails and 1 on I/O errors.

mod commands;
mod figures;
mod output;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::figures::Family;
use crate::output::{Format, Provenance};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Core(#[from] leanexp::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Spec(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "leanexp", version, about = "Return-maximizing A/B test portfolio design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON spec file.
    #[arg(long)]
    spec: PathBuf,
    /// Directory for output files; created if missing.
    #[arg(long, env = "LEANEXP_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Random seed; overrides a `seed` key in the spec.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "both")]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a Gaussian prior to past experiment results.
    FitPrior(Common),
    /// Production function f(n) on a grid under the optimal, p-value and minimax rules.
    ProductionCurve(Common),
    /// Optimal allocation of a unit pool across ideas.
    Allocate(Common),
    /// Optimal ship thresholds as cutoffs, t-statistics and one-sided levels.
    Thresholds(Common),
    /// Implementation costs and loss aversions implied by target levels.
    CostAnalysis(Common),
    /// Split shared units between programs, or solve the multi-pool problem.
    MultiProgram(Common),
    /// Split a budget of new ideas between programs.
    ShareIdeas(Common),
    /// Spread ideas over periods with time weights.
    Sequential(Common),
    /// Choose how many mutually exclusive ideas to test.
    Exclusive(Common),
    /// Minimax constant and worst-case regret of allocations.
    Minimax(Common),
    /// Plot-ready CSV data for one figure family.
    Figures {
        #[arg(long, value_enum)]
        family: Family,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    let (name, common, family) = match &cli.command {
        Command::FitPrior(c) => ("fit-prior", c, None),
        Command::ProductionCurve(c) => ("production-curve", c, None),
        Command::Allocate(c) => ("allocate", c, None),
        Command::Thresholds(c) => ("thresholds", c, None),
        Command::CostAnalysis(c) => ("cost-analysis", c, None),
        Command::MultiProgram(c) => ("multi-program", c, None),
        Command::ShareIdeas(c) => ("share-ideas", c, None),
        Command::Sequential(c) => ("sequential", c, None),
        Command::Exclusive(c) => ("exclusive", c, None),
        Command::Minimax(c) => ("minimax", c, None),
        Command::Figures { family, common } => ("figures", common, Some(*family)),
    };
    let path = &common.spec;
    let (out, sha256, spec_seed) = match family {
        Some(f) => figures::run(f, path, common.seed)?,
        None => commands::run(name, path, common.seed)?,
    };
    let seed = common.seed.or(spec_seed).unwrap_or(0);
    let prov = Provenance {
        subcommand: match family {
            Some(f) => format!("figures {}", f.name()),
            None => name.to_string(),
        },
        spec_sha256: sha256,
        seed,
    };
    let stem = match family {
        Some(f) => f.name().replace('-', "_"),
        None => name.replace('-', "_"),
    };
    output::emit(&out, &prov, &common.out_dir, &stem, common.format)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{p}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
