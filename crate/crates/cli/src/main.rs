use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use leadstep::config::{ProtocolConfig, TrialConfig};
use leadstep::harness::{run_protocol, run_trial, write_protocol};

mod analyze;
mod inputs;
mod plot;

#[derive(Parser)]
#[command(
    name = "leadstep",
    version,
    about = "Simulate, analyze and plot robot-led waltz trials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write its tick log and event log.
    Simulate {
        /// Trial configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Overrides the partner noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; falls back to `out` in the config, then `out/`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every block of a protocol in seeded order.
    Block {
        /// Protocol configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Overrides the block-order seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Summarize tick logs and questionnaire files into metric and series CSVs.
    Analyze {
        /// Tick logs, questionnaire CSVs, or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
        /// Protocol whose trial labels are expected in questionnaires.
        #[arg(long)]
        protocol: Option<PathBuf>,
    },
    /// Render SVG charts from tick logs, series CSVs or questionnaires.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn simulate(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = TrialConfig::from_file(&config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let log = run_trial(&cfg)?;
    let (csv, events) = log.write_to_dir(&dir, &log.file_stem())?;
    let stop = log
        .events_of("stop")
        .next()
        .map(|e| format!("stopped at {:.3} s", e.time));
    println!(
        "{}: {} ticks, {} steps placed, {}",
        log.label,
        log.ticks.len(),
        log.events_of("foot_placed").count(),
        stop.unwrap_or_else(|| "completed".into())
    );
    println!("wrote {} and {}", csv.display(), events.display());
    Ok(())
}

fn block(config: PathBuf, seed: Option<u64>, out: PathBuf) -> Result<()> {
    let mut protocol = ProtocolConfig::from_file(&config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        protocol.seed = s;
    }
    let runs = run_protocol(&protocol)?;
    let files = write_protocol(&runs, &out)?;
    for run in &runs {
        let order: Vec<&str> = run.order.iter().map(|&i| run.logs[i].label.as_str()).collect();
        println!("{}: {}", run.name, order.join(", "));
        for log in &run.logs {
            if let Some(e) = log.events_of("stop").next() {
                println!("  {} stopped at {:.3} s", log.label, e.time);
            }
        }
    }
    println!("wrote {} trial logs under {}", files.len(), out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, seed, out } => simulate(config, seed, out),
        Command::Block { config, seed, out } => block(config, seed, out),
        Command::Analyze { inputs, out, protocol } => analyze::run(&inputs, &out, protocol.as_deref()),
        Command::Plot { inputs, out } => plot::run(&inputs, &out),
    }
}
