use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use onefifth::experiment::{
    execute, parse_config_text, parse_override, write_outputs, Command, Entry, ExperimentConfig,
};
use onefifth::Error;

#[derive(Parser)]
#[command(
    name = "onefifth",
    version,
    about = "(1+1)-ES with the one-fifth success rule: runs, estimates and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Simulate trajectories and write per-replicate CSV files.
    Run(Common),
    /// Estimate success probability and convergence rate by every route.
    Estimate(Common),
    /// Monte Carlo scan of the drift ratio over radii and directions.
    Drift(Common),
    /// Kolmogorov-Smirnov check of the central limit theorem for ln sigma.
    Clt(CltArgs),
    /// Check homogeneity, Euler identity and positivity of objective functions.
    ValidateFn(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Also write full state vectors as JSON.
    #[arg(long)]
    full_state: bool,
    /// Permit gamma <= 1 and other non-convergent parameter choices.
    #[arg(long)]
    allow_divergent: bool,
    /// Keep every K-th trajectory record.
    #[arg(long, value_name = "K")]
    stride: Option<usize>,
    /// Configuration overrides, applied after the file.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct CltArgs {
    /// Synthetic mode: i.i.d. Bernoulli successes instead of the chain.
    #[arg(long)]
    iid: bool,
    #[command(flatten)]
    common: Common,
}

fn load(common: &Common, extra: &[(&str, &str)]) -> onefifth::Result<ExperimentConfig> {
    let mut entries: Vec<Entry> = Vec::new();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            location: path.display().to_string(),
            message: e.to_string(),
        })?;
        entries = parse_config_text(&text, &path.display().to_string())?;
    }
    for o in &common.overrides {
        entries.push(parse_override(o)?);
    }
    let flag = |key: &str, value: String| Entry {
        key: key.into(),
        value,
        location: format!("--{key}"),
    };
    if let Some(seed) = common.seed {
        entries.push(flag("seed", seed.to_string()));
    }
    if let Some(stride) = common.stride {
        entries.push(flag("stride", stride.to_string()));
    }
    if common.full_state {
        entries.push(flag("full_state", "true".into()));
    }
    if common.allow_divergent {
        entries.push(flag("allow_divergent", "true".into()));
    }
    for (key, value) in extra {
        entries.push(flag(key, value.to_string()));
    }
    ExperimentConfig::from_entries(&entries)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut extra = Vec::new();
    let (command, common) = match &cli.command {
        Sub::Run(c) => (Command::Run, c),
        Sub::Estimate(c) => (Command::Estimate, c),
        Sub::Drift(c) => (Command::Drift, c),
        Sub::Clt(c) => {
            if c.iid {
                extra.push(("iid", "true"));
            }
            (Command::Clt, &c.common)
        }
        Sub::ValidateFn(c) => (Command::ValidateFn, c),
    };
    let config = match load(common, &extra) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let artifacts = match execute(&command, &config) {
        Ok(a) => a,
        Err(e @ Error::Config { .. }) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    for line in &artifacts.summary {
        println!("{line}");
    }
    match write_outputs(&common.out, &command, &config, &artifacts) {
        Ok(files) => {
            println!("wrote {} file(s) to {}", files.len(), common.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
