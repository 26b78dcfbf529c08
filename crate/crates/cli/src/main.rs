//! `spaceform` command-line driver.
//!
//! Exit codes: 0 when every check passes, 2 when a check fails, 1 on any
//! operational error (bad config, parse error, geometry error, i/o).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "spaceform", version, about = "Constant holomorphic sectional curvature toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the `seed` key of the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check Rm = c·R₀ on sampled points and frames.
    VerifySpaceForm(Common),
    /// Develop a sample shell into the model space and check the pullback.
    Develop(Common),
    /// Holonomy of loops around the punctures.
    Monodromy(Common),
    /// Extend the metric across the excluded set.
    Extend(Common),
    /// Real counterexample and cone-singularity profiles.
    Probe(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::VerifySpaceForm(c) => ("verify-space-form", c),
        Command::Develop(c) => ("develop", c),
        Command::Monodromy(c) => ("monodromy", c),
        Command::Extend(c) => ("extend", c),
        Command::Probe(c) => ("probe", c),
    };
    match execute(name, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(name: &str, common: &Common) -> Result<bool, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| format!("cannot read {}: {e}", common.config.display()))?;
    let mut cfg = config::RunConfig::parse(&text)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate(name)?;
    let outcome = commands::run(name, &cfg, &common.out)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    println!("{name}: {}", if outcome.pass { "pass" } else { "FAIL" });
    Ok(outcome.pass)
}
