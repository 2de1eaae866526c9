//! `crnsim`: batch runner for cognitive radio dissemination campaigns.
//!
//!   crnsim run [--config FILE] [--out DIR] [--strategies SURF,RD,SB,CA] [--runs K] [--seed S] [--threads T]
//!   crnsim sweep-beta [--config FILE] --betas 2,6,10,14,18 [--out DIR]
//!   crnsim dump-topology [--config FILE] --seed S [--run I]

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use crnsim::experiment::{self, ExperimentConfig, RunOptions};
use crnsim::strategy::StrategyKind;

#[derive(Parser)]
#[command(name = "crnsim", version, about = "Multi-hop cognitive radio dissemination simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every selected strategy and write hops.csv, delivery.csv, summary.csv.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated strategies, e.g. SURF,CA.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<StrategyKind>>,
        /// Write one JSON line per hop of every run to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run SURF for each tenancy factor and write beta_sweep.csv.
    SweepBeta {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        betas: Vec<usize>,
    },
    /// Print the network of one run as JSON.
    DumpTopology {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed.
        #[arg(long)]
        seed: u64,
        /// Run index within the campaign.
        #[arg(long, default_value_t = 0)]
        run: u64,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config; missing fields take the 5-channel defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "CRNSIM_THREADS")]
    threads: Option<usize>,
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = load_config(self.config.as_ref())?;
        if let Some(runs) = self.runs {
            cfg.runs = runs;
        }
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn options(&self, keep_traces: bool) -> Result<RunOptions> {
        if self.threads == Some(0) {
            bail!("--threads must be at least 1");
        }
        Ok(RunOptions {
            threads: self.threads,
            keep_traces,
        })
    }
}

fn run(common: Common, strategies: Option<Vec<StrategyKind>>, trace: Option<PathBuf>) -> Result<()> {
    let mut cfg = common.config()?;
    if let Some(s) = strategies {
        cfg.strategies = s;
    }
    cfg.validate()?;
    let outcomes = experiment::run_campaign(&cfg, common.options(trace.is_some())?)?;
    let results: Vec<_> = outcomes.iter().map(|o| o.result.clone()).collect();
    experiment::write_campaign(&common.out, &results)?;

    if let Some(path) = trace {
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        for o in &outcomes {
            experiment::write_trace_lines(&mut w, o.result.strategy, &o.traces)?;
        }
        w.flush()?;
    }

    for r in &results {
        let last = r.final_receivers();
        println!(
            "{:<4} channels={} beta={} runs={} receivers@{}={:.2} reached={:.1}% delivery={:.3} tx/node={:.2}",
            r.strategy.as_str(),
            r.channels,
            r.beta,
            r.runs,
            r.hops.len(),
            last.mean,
            r.pct_nodes_reached.mean,
            r.mean_delivery_ratio(),
            r.mean_tx_per_node
        );
    }
    Ok(())
}

fn sweep(common: Common, betas: Vec<usize>) -> Result<()> {
    let cfg = common.config()?;
    let results = experiment::beta_sweep(&cfg, &betas, common.options(false)?)?;
    experiment::write_beta_sweep(&common.out, &results)?;
    for r in &results {
        println!(
            "beta={:<3} reached={:.1}% collision_rate={:.3}",
            r.beta, r.pct_nodes_reached.mean, r.collision_rate
        );
    }
    Ok(())
}

fn dump(config: Option<PathBuf>, seed: u64, run: u64, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = load_config(config.as_ref())?;
    cfg.master_seed = seed;
    cfg.validate()?;
    let (topology, _, _) = cfg.environment(run)?;
    let json = topology.to_json()?;
    match out {
        Some(p) => std::fs::write(&p, json + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            common,
            strategies,
            trace,
        } => run(common, strategies, trace),
        Command::SweepBeta { common, betas } => sweep(common, betas),
        Command::DumpTopology {
            config,
            seed,
            run,
            out,
        } => dump(config, seed, run, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("crnsim: error: {e:#}");
            ExitCode::from(2)
        }
    }
}
