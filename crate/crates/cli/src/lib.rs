//! Configuration-driven front end for the `tdual-core` workbench.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use tdual_core::ktheory::TwistPair;

use commands::{CliError, Overrides};
use config::WorkbenchConfig;
use report::{Format, Report};

#[derive(Debug, Parser)]
#[command(name = "tdual", version, about = "Topological T-duality workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "text")]
    pub format: Format,
    /// Exit with status 2 when a result is undetermined.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Seed for randomized inputs; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress the deviation ledger.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cohomology of the base with constant and twisted coefficients.
    Cohomology,
    /// Spectral sequence pages and cohomology of the total space.
    Bundle,
    /// T-dual pair and exchange relations.
    Dualize,
    /// Seeded property suite for the Hori transform.
    HoriSelftest,
    /// Twisted K-theory and flux-move orbits.
    Ktheory {
        /// Orbit of this pair, as `j,k`.
        #[arg(long, value_parser = parse_pair)]
        orbit: Option<TwistPair>,
        /// Catalog family id.
        #[arg(long)]
        family: Option<String>,
    },
    /// Reference tables annotated with the deviation ledger.
    Tables {
        #[arg(long)]
        family: Option<String>,
    },
}

fn parse_pair(s: &str) -> Result<TwistPair, String> {
    let (j, k) = s.split_once(',').ok_or("expected j,k")?;
    let p = |x: &str| x.trim().parse::<i64>().map_err(|e| format!("{x:?}: {e}"));
    Ok(TwistPair::new(p(j)?, p(k)?))
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Cohomology => "cohomology",
            Command::Bundle => "bundle",
            Command::Dualize => "dualize",
            Command::HoriSelftest => "hori-selftest",
            Command::Ktheory { .. } => "ktheory",
            Command::Tables { .. } => "tables",
        }
    }
}

/// Runs a command on a parsed config.
pub fn execute(command: &Command, cfg: WorkbenchConfig, mut ov: Overrides) -> Result<Report, CliError> {
    match command {
        Command::Cohomology => commands::cohomology_cmd(cfg, &ov),
        Command::Bundle => commands::bundle_cmd(cfg, &ov),
        Command::Dualize => commands::dualize_cmd(cfg, &ov),
        Command::HoriSelftest => commands::selftest_cmd(cfg, &ov),
        Command::Ktheory { orbit, family } => {
            ov.orbit = *orbit;
            ov.family = family.clone();
            commands::ktheory_cmd(cfg, &ov)
        }
        Command::Tables { family } => {
            ov.family = family.clone();
            commands::tables_cmd(cfg, &ov)
        }
    }
}

/// Output text and exit status of a full invocation.
pub struct Outcome {
    pub output: String,
    pub error: Option<String>,
    pub code: i32,
}

pub fn run(cli: &Cli) -> Outcome {
    let cfg = match &cli.config {
        Some(path) => WorkbenchConfig::load(path),
        None if matches!(cli.command, Command::HoriSelftest | Command::Tables { .. } | Command::Ktheory { .. }) => {
            Ok(WorkbenchConfig::default())
        }
        None => Err(config::ConfigError::field("--config", "required for this command")),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => return Outcome { output: String::new(), error: Some(e.to_string()), code: 1 },
    };
    let ov = Overrides { seed: cli.seed, strict: cli.strict, ..Default::default() };
    let result = std::panic::catch_unwind(|| execute(&cli.command, cfg, ov));
    let report = match result {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => return Outcome { output: String::new(), error: Some(e.to_string()), code: e.exit_code() },
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            return Outcome { output: String::new(), error: Some(format!("internal error: {msg}")), code: 3 };
        }
    };
    let output = report.render(cli.format, cli.quiet);
    let (code, error) = if !report.internal_failures.is_empty() {
        (3, Some(format!("internal error: {}", report.internal_failures.join("; "))))
    } else if cli.strict && report.undetermined {
        (2, Some("undetermined result under --strict".into()))
    } else {
        (0, None)
    };
    Outcome { output, error, code }
}
