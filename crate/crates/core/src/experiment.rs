//! Seeded experiment campaigns.
//!
//! Each run `i` of a campaign derives two 64-bit seeds from the master
//! seed with [`child_seed`]:
//!
//! * the environment seed, `child_seed(master, 0, i)`, drives the topology,
//!   the source node and PR activity, so every strategy (and every `beta`
//!   in a sweep) is evaluated on the same networks;
//! * the strategy seed, `child_seed(master, tag, i)` with tag 1..=4 for
//!   SURF, RD, SB, CA, drives the channel and slot choices.
//!
//! Runs are independent and may execute on a worker pool. Results are
//! folded in run order, so output does not depend on the thread count.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::engine::{run_dissemination, DisseminationTrace, RunStreams, SimRng};
use crate::metrics::{self, ExperimentResult, RunSummary};
use crate::spectrum::PrActivityModel;
use crate::strategy::{OccupancyMode, StrategyConfig, StrategyKind, DEFAULT_TIE_TOLERANCE};
use crate::topology::{spread_pr_nodes, ttl_for, Topology, TopologyParams};
use crate::{Result, SimError};

/// Attempts before giving up when connected topologies are required.
pub const MAX_TOPOLOGY_ATTEMPTS: usize = 10_000;

/// splitmix64 output function applied to `state`.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(splitmix64(master) ^ stream) ^ run)`.
///
/// Each step is a bijection on `u64`, so for a fixed master seed and
/// stream, distinct run indices always get distinct seeds.
pub fn child_seed(master: u64, stream: u64, run: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ run)
}

pub const ENVIRONMENT_STREAM: u64 = 0;

pub fn strategy_stream(kind: StrategyKind) -> u64 {
    match kind {
        StrategyKind::Surf => 1,
        StrategyKind::Rd => 2,
        StrategyKind::Sb => 3,
        StrategyKind::Ca => 4,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TtlSetting {
    #[default]
    Auto,
    Fixed(usize),
}

impl Serialize for TtlSetting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TtlSetting::Auto => s.serialize_str("auto"),
            TtlSetting::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for TtlSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(TtlSetting::Fixed(n)),
            Raw::Word(w) if w.eq_ignore_ascii_case("auto") => Ok(TtlSetting::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "ttl must be a hop count or \"auto\", got {w:?}"
            ))),
        }
    }
}

/// Campaign parameters. Defaults describe the 5-channel scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_cr: usize,
    pub n_pr: usize,
    pub channels: usize,
    pub acs_size: usize,
    pub beta: usize,
    pub tau_t: usize,
    pub radius: f64,
    pub area_side: f64,
    pub ttl: TtlSetting,
    pub runs: usize,
    pub master_seed: u64,
    pub strategies: Vec<StrategyKind>,
    /// Probability that a PR node is active in a round.
    pub activity_prob: f64,
    pub occupancy_mode: OccupancyMode,
    pub tie_tolerance: f64,
    /// Redraw topologies until connected.
    pub require_connectivity: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_cr: 70,
            n_pr: 30,
            channels: 5,
            acs_size: 3,
            beta: 10,
            tau_t: 6,
            radius: 250.0,
            area_side: 707.0,
            ttl: TtlSetting::Auto,
            runs: 1000,
            master_seed: 1,
            strategies: StrategyKind::ALL.to_vec(),
            activity_prob: 0.5,
            occupancy_mode: OccupancyMode::Normalized,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
            require_connectivity: false,
        }
    }
}

impl ExperimentConfig {
    /// The 15-channel scenario.
    pub fn fifteen_channels() -> Self {
        Self {
            channels: 15,
            acs_size: 8,
            beta: 18,
            ..Self::default()
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn topology_params(&self) -> TopologyParams {
        TopologyParams {
            n: self.n_cr,
            area_side: self.area_side,
            radius: self.radius,
            channels: self.channels,
            acs_size: self.acs_size,
            pr_count: self.n_pr,
        }
    }

    pub fn resolved_ttl(&self) -> Result<usize> {
        match self.ttl {
            TtlSetting::Auto => ttl_for(self.area_side, self.radius),
            TtlSetting::Fixed(n) => Ok(n),
        }
    }

    pub fn strategy_config(&self, kind: StrategyKind, beta: usize) -> Result<StrategyConfig<f64>> {
        Ok(StrategyConfig::new(kind, beta)?
            .with_mode(self.occupancy_mode)
            .with_tie_tolerance(self.tie_tolerance))
    }

    pub fn pr_model(&self) -> Result<PrActivityModel> {
        PrActivityModel::new(self.activity_prob, spread_pr_nodes(self.n_pr, self.channels))
    }

    pub fn validate(&self) -> Result<()> {
        self.topology_params().validate()?;
        if self.beta == 0 {
            return Err(SimError::config("beta must be at least 1"));
        }
        if self.tau_t == 0 {
            return Err(SimError::config("tau_t must be at least 1"));
        }
        if self.runs == 0 {
            return Err(SimError::config("runs must be at least 1"));
        }
        if self.strategies.is_empty() {
            return Err(SimError::config("no strategies selected"));
        }
        if !(0.0..=1.0).contains(&self.activity_prob) {
            return Err(SimError::config(format!(
                "activity_prob {} outside [0, 1]",
                self.activity_prob
            )));
        }
        if self.tie_tolerance.is_nan() || self.tie_tolerance < 0.0 {
            return Err(SimError::config("tie_tolerance must be non-negative"));
        }
        self.resolved_ttl()?;
        Ok(())
    }

    /// Network, source node and PR stream of run `run`.
    pub fn environment(&self, run: u64) -> Result<(Topology, usize, u64)> {
        let seed = child_seed(self.master_seed, ENVIRONMENT_STREAM, run);
        let mut rng = SimRng::seed_from_u64(seed);
        let params = self.topology_params();
        let topology = if self.require_connectivity {
            Topology::generate_connected(&params, MAX_TOPOLOGY_ATTEMPTS, &mut rng)?
        } else {
            Topology::generate(&params, &mut rng)?
        };
        let source = rng.gen_range(0..topology.len());
        Ok((topology, source, seed))
    }

    /// Executes run `run` of strategy `kind` with tenancy factor `beta`.
    pub fn simulate(&self, kind: StrategyKind, beta: usize, run: u64) -> Result<DisseminationTrace> {
        let (topology, source, env_seed) = self.environment(run)?;
        let cfg = self.strategy_config(kind, beta)?;
        let mut streams = RunStreams::new(
            env_seed,
            child_seed(self.master_seed, strategy_stream(kind), run),
        );
        run_dissemination(
            &topology,
            &cfg,
            self.resolved_ttl()?,
            &self.pr_model()?,
            self.tau_t,
            source,
            &mut streams,
        )
    }
}

/// Execution options that do not affect results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` lets the pool decide.
    pub threads: Option<usize>,
    pub keep_traces: bool,
}

/// Aggregate of one strategy, with raw traces when requested.
#[derive(Debug, Clone)]
pub struct StrategyOutcome {
    pub result: ExperimentResult,
    pub traces: Vec<DisseminationTrace>,
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| SimError::config(format!("thread pool: {e}")))
}

pub fn run_strategy(
    config: &ExperimentConfig,
    kind: StrategyKind,
    beta: usize,
    opts: RunOptions,
) -> Result<StrategyOutcome> {
    config.validate()?;
    let ttl = config.resolved_ttl()?;
    let n = config.n_cr;
    let runs: Vec<(RunSummary, Option<DisseminationTrace>)> = pool(opts.threads)?.install(|| {
        (0..config.runs as u64)
            .into_par_iter()
            .map(|run| {
                let trace = config.simulate(kind, beta, run)?;
                let summary = RunSummary::from_trace(&trace, n, ttl);
                Ok((summary, opts.keep_traces.then_some(trace)))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let (summaries, traces): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let result = ExperimentResult::aggregate(kind, config.channels, beta, n, ttl, &summaries)?;
    Ok(StrategyOutcome {
        result,
        traces: traces.into_iter().flatten().collect(),
    })
}

/// Every configured strategy, in configuration order.
pub fn run_campaign(config: &ExperimentConfig, opts: RunOptions) -> Result<Vec<StrategyOutcome>> {
    config.validate()?;
    config
        .strategies
        .iter()
        .map(|&kind| run_strategy(config, kind, config.beta, opts))
        .collect()
}

/// SURF campaigns for each tenancy factor in `betas`.
pub fn beta_sweep(config: &ExperimentConfig, betas: &[usize], opts: RunOptions) -> Result<Vec<ExperimentResult>> {
    if betas.is_empty() {
        return Err(SimError::config("empty beta list"));
    }
    config.validate()?;
    betas
        .iter()
        .map(|&beta| run_strategy(config, StrategyKind::Surf, beta, opts).map(|o| o.result))
        .collect()
}

pub const HOPS_FILE: &str = "hops.csv";
pub const DELIVERY_FILE: &str = "delivery.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const BETA_SWEEP_FILE: &str = "beta_sweep.csv";

/// Writes `files` into `dir`; if any write fails, already written files are
/// removed.
pub fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, contents) {
            for p in written.iter().chain(std::iter::once(&path)) {
                let _ = fs::remove_file(p);
            }
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(written)
}

pub fn write_campaign(dir: &Path, results: &[ExperimentResult]) -> Result<Vec<PathBuf>> {
    write_outputs(
        dir,
        &[
            (HOPS_FILE, metrics::hops_csv(results)),
            (DELIVERY_FILE, metrics::delivery_csv(results)),
            (SUMMARY_FILE, metrics::summary_csv(results)),
        ],
    )
}

pub fn write_beta_sweep(dir: &Path, results: &[ExperimentResult]) -> Result<Vec<PathBuf>> {
    write_outputs(dir, &[(BETA_SWEEP_FILE, metrics::beta_sweep_csv(results))])
}

/// One JSON line per hop of each trace.
pub fn write_trace_lines<W: Write>(
    out: &mut W,
    kind: StrategyKind,
    traces: &[DisseminationTrace],
) -> Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        strategy: StrategyKind,
        run: usize,
        source: usize,
        #[serde(flatten)]
        hop: &'a crate::engine::HopRecord,
    }
    for (run, trace) in traces.iter().enumerate() {
        for hop in &trace.hops {
            serde_json::to_writer(
                &mut *out,
                &Line {
                    strategy: kind,
                    run,
                    source: trace.source,
                    hop,
                },
            )?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
