//! Per-hop and per-node statistics over many runs, and their CSV forms.

use std::fmt::Write as _;

use crate::engine::DisseminationTrace;
use crate::strategy::StrategyKind;
use crate::{NodeId, Real, Result, SimError};

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.96;

/// Value written in place of an undefined statistic.
pub const MISSING: &str = "NA";

/// Distinct non-source nodes reached by each hop, padded with the last
/// value up to `ttl` entries.
pub fn accumulative_receivers(trace: &DisseminationTrace, ttl: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(ttl.max(trace.hops.len()));
    let mut total = 0;
    for hop in &trace.hops {
        total += hop.new_receivers.len();
        out.push(total);
    }
    while out.len() < ttl {
        out.push(total);
    }
    out
}

/// Fraction of the runs in which each node received the message. Runs
/// where the node was the source do not count; a node that was the source
/// of every run has no ratio.
pub fn delivery_ratio<T: Real>(traces: &[DisseminationTrace], n: usize) -> Vec<Option<T>> {
    let mut eligible = vec![0usize; n];
    let mut received = vec![0usize; n];
    for trace in traces {
        for (v, count) in eligible.iter_mut().enumerate() {
            if v != trace.source {
                *count += 1;
            }
        }
        for v in trace.receivers() {
            received[v] += 1;
        }
    }
    eligible
        .iter()
        .zip(&received)
        .map(|(&e, &r)| (e > 0).then(|| T::of_usize(r) / T::of_usize(e)))
        .collect()
}

/// Mean and 95% half-width `1.96 * s / sqrt(n)`, `s` the sample standard
/// deviation.
pub fn ci95<T: Real>(samples: &[T]) -> Result<(T, T)> {
    if samples.len() < 2 {
        return Err(SimError::TooFewSamples(samples.len()));
    }
    let n = T::of_usize(samples.len());
    let mean = samples.iter().fold(T::zero(), |acc, &x| acc + x) / n;
    let ss = samples
        .iter()
        .fold(T::zero(), |acc, &x| acc + (x - mean) * (x - mean));
    let sd = (ss / (n - T::one())).sqrt();
    Ok((mean, T::of(Z95) * sd / n.sqrt()))
}

/// A mean with an optional interval; the interval is absent below two
/// samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub mean: T,
    pub ci95: Option<T>,
}

impl<T: Real> Estimate<T> {
    pub fn from_samples(samples: &[T]) -> Option<Self> {
        match samples {
            [] => None,
            [x] => Some(Self { mean: *x, ci95: None }),
            _ => ci95(samples).ok().map(|(mean, hw)| Self {
                mean,
                ci95: Some(hw),
            }),
        }
    }
}

/// What aggregation needs from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub source: NodeId,
    pub accumulative: Vec<usize>,
    pub reached: Vec<bool>,
    pub transmissions: usize,
    pub transmitting_nodes: usize,
    pub max_tx_per_node: usize,
    pub collisions: usize,
    pub receptions: usize,
}

impl RunSummary {
    pub fn from_trace(trace: &DisseminationTrace, n: usize, ttl: usize) -> Self {
        let mut reached = vec![false; n];
        for v in trace.receivers() {
            reached[v] = true;
        }
        Self {
            source: trace.source,
            accumulative: accumulative_receivers(trace, ttl),
            reached,
            transmissions: trace.transmissions(),
            transmitting_nodes: trace.transmitting_nodes(),
            max_tx_per_node: trace.tx_count.iter().copied().max().unwrap_or(0),
            collisions: trace.collisions(),
            receptions: trace.receptions(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub strategy: StrategyKind,
    pub channels: usize,
    pub beta: usize,
    pub runs: usize,
    pub n: usize,
    /// Mean accumulative receivers at hops 1..=ttl.
    pub hops: Vec<Estimate<f64>>,
    /// Per-node delivery ratio, `None` where undefined.
    pub delivery: Vec<Option<Estimate<f64>>>,
    /// Copies per node that sent at least one.
    pub mean_tx_per_node: f64,
    pub max_tx_per_node: usize,
    /// Percentage of non-source nodes reached by the last hop.
    pub pct_nodes_reached: Estimate<f64>,
    /// Collided listener slots over collided plus successful ones.
    pub collision_rate: f64,
}

impl ExperimentResult {
    /// Folds run summaries in the given order.
    pub fn aggregate(
        strategy: StrategyKind,
        channels: usize,
        beta: usize,
        n: usize,
        ttl: usize,
        runs: &[RunSummary],
    ) -> Result<Self> {
        if runs.is_empty() {
            return Err(SimError::config("no runs to aggregate"));
        }
        let hops = (0..ttl)
            .map(|h| {
                let samples: Vec<f64> = runs
                    .iter()
                    .map(|r| r.accumulative.get(h).or(r.accumulative.last()).copied().unwrap_or(0) as f64)
                    .collect();
                Estimate::from_samples(&samples).expect("at least one run")
            })
            .collect();

        let delivery = (0..n)
            .map(|v| {
                let samples: Vec<f64> = runs
                    .iter()
                    .filter(|r| r.source != v)
                    .map(|r| if r.reached[v] { 1.0 } else { 0.0 })
                    .collect();
                Estimate::from_samples(&samples)
            })
            .collect();

        let others = n.saturating_sub(1).max(1) as f64;
        let reached: Vec<f64> = runs
            .iter()
            .map(|r| 100.0 * r.reached.iter().filter(|&&b| b).count() as f64 / others)
            .collect();

        let tx: usize = runs.iter().map(|r| r.transmissions).sum();
        let tx_nodes: usize = runs.iter().map(|r| r.transmitting_nodes).sum();
        let collisions: usize = runs.iter().map(|r| r.collisions).sum();
        let receptions: usize = runs.iter().map(|r| r.receptions).sum();

        Ok(Self {
            strategy,
            channels,
            beta,
            runs: runs.len(),
            n,
            hops,
            delivery,
            mean_tx_per_node: if tx_nodes == 0 { 0.0 } else { tx as f64 / tx_nodes as f64 },
            max_tx_per_node: runs.iter().map(|r| r.max_tx_per_node).max().unwrap_or(0),
            pct_nodes_reached: Estimate::from_samples(&reached).expect("at least one run"),
            collision_rate: if collisions + receptions == 0 {
                0.0
            } else {
                collisions as f64 / (collisions + receptions) as f64
            },
        })
    }

    /// Mean accumulative receivers at the last hop.
    pub fn final_receivers(&self) -> Estimate<f64> {
        self.hops.last().copied().unwrap_or(Estimate { mean: 0.0, ci95: None })
    }

    /// Delivery ratio averaged over nodes that have one.
    pub fn mean_delivery_ratio(&self) -> f64 {
        let defined: Vec<f64> = self.delivery.iter().flatten().map(|e| e.mean).collect();
        if defined.is_empty() {
            0.0
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        }
    }
}

fn fmt_value(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_ci(ci: Option<f64>) -> String {
    ci.map_or_else(|| MISSING.to_string(), fmt_value)
}

pub const HOPS_HEADER: &str = "strategy,channels,beta,hop,mean_acc_receivers,ci95";
pub const DELIVERY_HEADER: &str = "strategy,channels,beta,node_id,delivery_ratio,ci95";
pub const SUMMARY_HEADER: &str =
    "strategy,channels,beta,runs,mean_tx_per_node,pct_nodes_reached,ci95";
pub const BETA_SWEEP_HEADER: &str = "beta,pct_nodes_reached,collision_rate,ci95";

pub fn hops_csv(results: &[ExperimentResult]) -> String {
    let mut out = format!("{HOPS_HEADER}\n");
    for r in results {
        for (h, e) in r.hops.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.strategy,
                r.channels,
                r.beta,
                h + 1,
                fmt_value(e.mean),
                fmt_ci(e.ci95)
            );
        }
    }
    out
}

pub fn delivery_csv(results: &[ExperimentResult]) -> String {
    let mut out = format!("{DELIVERY_HEADER}\n");
    for r in results {
        for (v, e) in r.delivery.iter().enumerate() {
            let (mean, ci) = match e {
                Some(e) => (fmt_value(e.mean), fmt_ci(e.ci95)),
                None => (MISSING.to_string(), MISSING.to_string()),
            };
            let _ = writeln!(out, "{},{},{},{v},{mean},{ci}", r.strategy, r.channels, r.beta);
        }
    }
    out
}

pub fn summary_csv(results: &[ExperimentResult]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.strategy,
            r.channels,
            r.beta,
            r.runs,
            fmt_value(r.mean_tx_per_node),
            fmt_value(r.pct_nodes_reached.mean),
            fmt_ci(r.pct_nodes_reached.ci95)
        );
    }
    out
}

pub fn beta_sweep_csv(results: &[ExperimentResult]) -> String {
    let mut out = format!("{BETA_SWEEP_HEADER}\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.beta,
            fmt_value(r.pct_nodes_reached.mean),
            fmt_value(r.collision_rate),
            fmt_ci(r.pct_nodes_reached.ci95)
        );
    }
    out
}
