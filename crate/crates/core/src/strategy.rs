//! Channel selection policies.
//!
//! SURF weighs every channel of a node's available set by
//! `P_w = exp(-PR_o) * CR_o`, where `CR_o` rewards neighbour counts close to
//! the tenancy factor `beta`, and picks the heaviest one. Sender and
//! receivers run the same rule on local information, so they tend to meet on
//! the same channel without exchanging anything.
//!
//! The baselines are:
//!
//! * RD: one uniformly random channel to send on and one to listen on.
//! * SB: send on an essential channel set (a greedy cover of the
//!   neighbours' channel sets), listen on one random channel.
//! * CA: send like SB, but listen on every available channel at once.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::num::approx_eq;
use crate::spectrum::ChannelView;
use crate::topology::NodeView;
use crate::{ChannelId, Real, Result, SimError};

/// Default relative tolerance for treating two weights as identical.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "SURF")]
    Surf,
    #[serde(rename = "RD")]
    Rd,
    #[serde(rename = "SB")]
    Sb,
    #[serde(rename = "CA")]
    Ca,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Surf,
        StrategyKind::Rd,
        StrategyKind::Sb,
        StrategyKind::Ca,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Surf => "SURF",
            StrategyKind::Rd => "RD",
            StrategyKind::Sb => "SB",
            StrategyKind::Ca => "CA",
        }
    }

    /// Whether each node sends exactly one copy per forward.
    pub fn is_single_transmission(self) -> bool {
        matches!(self, StrategyKind::Surf | StrategyKind::Rd)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SURF" => Ok(StrategyKind::Surf),
            "RD" => Ok(StrategyKind::Rd),
            "SB" => Ok(StrategyKind::Sb),
            "CA" => Ok(StrategyKind::Ca),
            other => Err(SimError::config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// How the occupancy branches are scaled.
///
/// `Normalized` divides the available slot count by the frame length so all
/// three branches are fractions and the score is continuous at `beta`.
/// `Literal` keeps the raw slot count in the first and third branches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OccupancyMode {
    #[default]
    Normalized,
    Literal,
}

impl FromStr for OccupancyMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normalized" => Ok(OccupancyMode::Normalized),
            "literal" => Ok(OccupancyMode::Literal),
            other => Err(SimError::config(format!("unknown occupancy mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig<T> {
    pub kind: StrategyKind,
    /// Tenancy factor: neighbour count at which a channel scores best.
    pub beta: usize,
    pub occupancy_mode: OccupancyMode,
    /// Relative tolerance under which two weights count as a tie.
    pub tie_tolerance: T,
}

impl<T: Real> StrategyConfig<T> {
    pub fn new(kind: StrategyKind, beta: usize) -> Result<Self> {
        if beta == 0 {
            return Err(SimError::config("beta must be at least 1"));
        }
        Ok(Self {
            kind,
            beta,
            occupancy_mode: OccupancyMode::Normalized,
            tie_tolerance: T::of(DEFAULT_TIE_TOLERANCE),
        })
    }

    pub fn with_mode(mut self, mode: OccupancyMode) -> Self {
        self.occupancy_mode = mode;
        self
    }

    pub fn with_tie_tolerance(mut self, tol: T) -> Self {
        self.tie_tolerance = tol;
        self
    }
}

/// Channels a node sends on and listens on during one hop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDecision {
    pub tx_channels: Vec<ChannelId>,
    pub rx_channels: Vec<ChannelId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedChannel<T> {
    pub channel_id: ChannelId,
    pub p_w: T,
    pub pr_occupancy: T,
    pub cr_occupancy: T,
}

/// CR occupancy score of a channel with `cr_n` competing neighbours.
///
/// Below `beta` the score grows as the count approaches `beta`; at `beta` it
/// equals the CR share of the channel; above `beta` it decays with the
/// number of competitors.
pub fn cr_occupancy<T: Real>(
    cr_n: usize,
    beta: usize,
    available_slots: usize,
    total_slots: usize,
    cr_available_share: T,
    mode: OccupancyMode,
) -> T {
    let (numerator, frame_scale) = match mode {
        OccupancyMode::Normalized => (
            T::of_usize(available_slots) / T::of_usize(total_slots),
            T::one(),
        ),
        OccupancyMode::Literal => (T::of_usize(available_slots), T::of_usize(total_slots)),
    };
    match cr_n.cmp(&beta) {
        std::cmp::Ordering::Less => numerator / T::of_usize(beta - cr_n),
        std::cmp::Ordering::Equal => cr_available_share,
        std::cmp::Ordering::Greater => numerator / (frame_scale * T::of_usize(cr_n)),
    }
}

/// Channel weight `exp(-pr_occupancy) * cr_occupancy`.
pub fn surf_weight<T: Real>(pr_occupancy: T, cr_occupancy: T) -> Result<T> {
    if !(pr_occupancy >= T::zero() && pr_occupancy <= T::one()) {
        return Err(SimError::domain(format!(
            "PR occupancy {pr_occupancy} outside [0, 1]"
        )));
    }
    if cr_occupancy.is_nan() || cr_occupancy < T::zero() {
        return Err(SimError::domain(format!(
            "negative CR occupancy {cr_occupancy}"
        )));
    }
    Ok((-pr_occupancy).exp() * cr_occupancy)
}

pub fn weigh<T: Real>(view: &ChannelView<T>, cfg: &StrategyConfig<T>) -> Result<WeightedChannel<T>> {
    if view.total_slots == 0 {
        return Err(SimError::config("frame has zero slots"));
    }
    let cr_o = cr_occupancy(
        view.cr_neighbors,
        cfg.beta,
        view.available_slots,
        view.total_slots,
        view.cr_available_share,
        cfg.occupancy_mode,
    );
    Ok(WeightedChannel {
        channel_id: view.channel_id,
        p_w: surf_weight(view.pr_occupancy, cr_o)?,
        pr_occupancy: view.pr_occupancy,
        cr_occupancy: cr_o,
    })
}

/// Picks the heaviest channel. Weights within `tie_tolerance` are equal;
/// among equals the lower PR occupancy wins, and a uniform draw settles
/// whatever remains.
pub fn select_weighted<T: Real, R: Rng + ?Sized>(
    channels: &[WeightedChannel<T>],
    tie_tolerance: T,
    rng: &mut R,
) -> Result<ChannelId> {
    let best = channels
        .iter()
        .map(|c| c.p_w)
        .fold(None, |acc: Option<T>, w| Some(acc.map_or(w, |a| a.max(w))))
        .ok_or(SimError::NoChannel)?;
    let heaviest: Vec<&WeightedChannel<T>> = channels
        .iter()
        .filter(|c| approx_eq(c.p_w, best, tie_tolerance))
        .collect();
    let least_pr = heaviest
        .iter()
        .map(|c| c.pr_occupancy)
        .fold(T::infinity(), T::min);
    let finalists: Vec<ChannelId> = heaviest
        .iter()
        .filter(|c| approx_eq(c.pr_occupancy, least_pr, tie_tolerance))
        .map(|c| c.channel_id)
        .collect();
    match finalists.as_slice() {
        [only] => Ok(*only),
        many => many.choose(rng).copied().ok_or(SimError::NoChannel),
    }
}

pub fn surf_select<T: Real, R: Rng + ?Sized>(
    views: &[ChannelView<T>],
    cfg: &StrategyConfig<T>,
    rng: &mut R,
) -> Result<ChannelId> {
    if views.is_empty() {
        return Err(SimError::NoChannel);
    }
    for (i, v) in views.iter().enumerate() {
        if views[..i].iter().any(|w| w.channel_id == v.channel_id) {
            return Err(SimError::domain(format!(
                "channel {} listed twice",
                v.channel_id
            )));
        }
    }
    let weighted = views
        .iter()
        .map(|v| weigh(v, cfg))
        .collect::<Result<Vec<_>>>()?;
    select_weighted(&weighted, cfg.tie_tolerance, rng)
}

pub fn rd_select<R: Rng + ?Sized>(acs: &[ChannelId], rng: &mut R) -> Result<ChannelId> {
    acs.choose(rng).copied().ok_or(SimError::NoChannel)
}

/// Result of the greedy cover over neighbour channel sets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EssentialChannelSet {
    /// Chosen channels, ascending.
    pub channels: Vec<ChannelId>,
    /// Indices of neighbours sharing no channel with the node.
    pub uncoverable: Vec<usize>,
}

/// Greedy set cover of the neighbours by the node's own channels.
///
/// Repeatedly takes the channel shared with the most still-uncovered
/// neighbours, lowest channel id on ties, until every coverable neighbour
/// shares a chosen channel.
pub fn essential_channel_set(own_acs: &[ChannelId], neighbor_acs: &[Vec<ChannelId>]) -> EssentialChannelSet {
    let mut own: Vec<ChannelId> = own_acs.to_vec();
    own.sort_unstable();
    own.dedup();

    let mut uncoverable = Vec::new();
    let mut uncovered: Vec<&[ChannelId]> = Vec::new();
    for (i, acs) in neighbor_acs.iter().enumerate() {
        if acs.iter().any(|c| own.binary_search(c).is_ok()) {
            uncovered.push(acs);
        } else {
            uncoverable.push(i);
        }
    }

    let mut chosen = Vec::new();
    while !uncovered.is_empty() {
        let mut best: Option<(ChannelId, usize)> = None;
        for &c in &own {
            let gain = uncovered.iter().filter(|acs| acs.contains(&c)).count();
            if gain > best.map_or(0, |(_, g)| g) {
                best = Some((c, gain));
            }
        }
        // every remaining neighbour shares a channel with `own`
        let (c, _) = best.expect("coverable neighbour left without a covering channel");
        chosen.push(c);
        uncovered.retain(|acs| !acs.contains(&c));
    }
    chosen.sort_unstable();
    EssentialChannelSet {
        channels: chosen,
        uncoverable,
    }
}

/// Channels a node sends on this hop.
pub fn transmit_channels<T: Real, R: Rng + ?Sized>(
    node: &NodeView<T>,
    cfg: &StrategyConfig<T>,
    rng: &mut R,
) -> Result<Vec<ChannelId>> {
    match cfg.kind {
        StrategyKind::Surf => Ok(vec![surf_select(&node.channel_views, cfg, rng)?]),
        StrategyKind::Rd => Ok(vec![rd_select(&node.acs, rng)?]),
        StrategyKind::Sb | StrategyKind::Ca => {
            Ok(essential_channel_set(&node.acs, &node.neighbor_acs).channels)
        }
    }
}

/// Channels a node listens on this hop.
pub fn listen_channels<T: Real, R: Rng + ?Sized>(
    node: &NodeView<T>,
    cfg: &StrategyConfig<T>,
    rng: &mut R,
) -> Result<Vec<ChannelId>> {
    match cfg.kind {
        StrategyKind::Surf => Ok(vec![surf_select(&node.channel_views, cfg, rng)?]),
        StrategyKind::Rd | StrategyKind::Sb => Ok(vec![rd_select(&node.acs, rng)?]),
        StrategyKind::Ca => Ok(node.acs.clone()),
    }
}

/// Sending and listening channels of one node for the current hop.
///
/// SURF uses one selection for both roles. RD draws the two independently.
pub fn decide<T: Real, R: Rng + ?Sized>(
    node: &NodeView<T>,
    cfg: &StrategyConfig<T>,
    rng: &mut R,
) -> Result<ChannelDecision> {
    if cfg.kind == StrategyKind::Surf {
        let c = surf_select(&node.channel_views, cfg, rng)?;
        return Ok(ChannelDecision {
            tx_channels: vec![c],
            rx_channels: vec![c],
        });
    }
    Ok(ChannelDecision {
        tx_channels: transmit_channels(node, cfg, rng)?,
        rx_channels: listen_channels(node, cfg, rng)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn view(channel_id: ChannelId, occupied: usize, cr_neighbors: usize) -> ChannelView<f64> {
        let pr = occupied as f64 / 6.0;
        ChannelView {
            channel_id,
            pr_occupancy: pr,
            available_slots: 6 - occupied,
            total_slots: 6,
            cr_available_share: 1.0 - pr,
            cr_neighbors,
        }
    }

    #[test]
    fn occupancy_branches() {
        let share = 2.0 / 3.0;
        let n = OccupancyMode::Normalized;
        assert_relative_eq!(cr_occupancy(5, 10, 4, 6, share, n), 0.133333, epsilon = 1e-6);
        assert_relative_eq!(cr_occupancy(10, 10, 4, 6, share, n), 0.666667, epsilon = 1e-6);
        assert_relative_eq!(cr_occupancy(20, 10, 4, 6, share, n), 0.033333, epsilon = 1e-6);
        assert_relative_eq!(
            cr_occupancy(5, 10, 4, 6, share, OccupancyMode::Literal),
            0.8,
            epsilon = 1e-12
        );
        // literal third branch: 4 / (6 * 20)
        assert_relative_eq!(
            cr_occupancy(20, 10, 4, 6, share, OccupancyMode::Literal),
            4.0 / 120.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn occupancy_in_single_precision() {
        let v: f32 = cr_occupancy(5, 10, 4, 6, 2.0 / 3.0, OccupancyMode::Normalized);
        assert_relative_eq!(v, 0.133333, epsilon = 1e-6);
    }

    #[test]
    fn weight_values() {
        assert_eq!(surf_weight(0.0_f64, 1.0).unwrap(), 1.0);
        assert_eq!(surf_weight(0.7_f64, 0.0).unwrap(), 0.0);
        // e^(-1/3) * 2/3, evaluated independently: 0.4776875
        assert_relative_eq!(surf_weight(1.0_f64 / 3.0, 2.0 / 3.0).unwrap(), 0.477_688, epsilon = 1e-6);
        assert!(surf_weight(1.5_f64, 1.0).is_err());
        assert!(surf_weight(0.5_f64, -1.0).is_err());
    }

    #[test]
    fn surf_prefers_neighbour_count_near_beta() {
        let cfg = StrategyConfig::<f64>::new(StrategyKind::Surf, 10).unwrap();
        // ch1: PR_o=0.5, CR_n=9 -> 0.5 * e^-0.5 = 0.3033
        // ch2: PR_o=1/6, CR_n=2 -> (5/6)/8 * e^(-1/6) = 0.0882
        let views = [view(1, 3, 9), view(2, 1, 2)];
        let w1 = weigh(&views[0], &cfg).unwrap();
        let w2 = weigh(&views[1], &cfg).unwrap();
        assert_relative_eq!(w1.p_w, 0.3033, epsilon = 1e-4);
        assert_relative_eq!(w2.p_w, 0.0882, epsilon = 1e-4);
        assert_eq!(surf_select(&views, &cfg, &mut rng(1)).unwrap(), 1);
    }

    #[test]
    fn equal_weights_fall_back_to_lower_pr_occupancy() {
        let ln2 = std::f64::consts::LN_2;
        let a = WeightedChannel {
            channel_id: 0,
            p_w: surf_weight(0.0, 0.5).unwrap(),
            pr_occupancy: 0.0,
            cr_occupancy: 0.5,
        };
        let b = WeightedChannel {
            channel_id: 1,
            p_w: surf_weight(ln2, 1.0).unwrap(),
            pr_occupancy: ln2,
            cr_occupancy: 1.0,
        };
        assert_relative_eq!(a.p_w, b.p_w, epsilon = 1e-12);
        for seed in 0..20 {
            assert_eq!(select_weighted(&[b, a], 1e-9, &mut rng(seed)).unwrap(), 0);
        }
    }

    #[test]
    fn full_ties_are_broken_at_random() {
        let cfg = StrategyConfig::<f64>::new(StrategyKind::Surf, 10).unwrap();
        let views = [view(3, 2, 4), view(5, 2, 4)];
        let mut seen = [false; 2];
        let mut r = rng(7);
        for _ in 0..200 {
            match surf_select(&views, &cfg, &mut r).unwrap() {
                3 => seen[0] = true,
                5 => seen[1] = true,
                other => panic!("unexpected channel {other}"),
            }
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn surf_select_edge_cases() {
        let cfg = StrategyConfig::<f64>::new(StrategyKind::Surf, 10).unwrap();
        assert_eq!(surf_select(&[view(4, 6, 0)], &cfg, &mut rng(0)).unwrap(), 4);
        assert!(matches!(
            surf_select::<f64, _>(&[], &cfg, &mut rng(0)),
            Err(SimError::NoChannel)
        ));
        assert!(surf_select(&[view(1, 0, 0), view(1, 2, 3)], &cfg, &mut rng(0)).is_err());
    }

    #[test]
    fn zero_beta_rejected() {
        assert!(StrategyConfig::<f64>::new(StrategyKind::Surf, 0).is_err());
    }

    #[test]
    fn random_selection() {
        assert_eq!(rd_select(&[7], &mut rng(0)).unwrap(), 7);
        assert!(matches!(rd_select(&[], &mut rng(0)), Err(SimError::NoChannel)));
        let mut r = rng(11);
        let mut counts = [0usize; 3];
        let draws = 100_000;
        for _ in 0..draws {
            counts[rd_select(&[1, 2, 3], &mut r).unwrap() - 1] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 1.0 / 3.0).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn cover_examples() {
        let ecs = essential_channel_set(&[1, 2, 3], &[vec![1], vec![2], vec![1, 2]]);
        assert_eq!(ecs.channels, vec![1, 2]);
        assert!(ecs.uncoverable.is_empty());
        assert_eq!(essential_channel_set(&[1, 2], &[vec![1]]).channels, vec![1]);
        assert_eq!(essential_channel_set(&[1, 2], &[]), EssentialChannelSet::default());
        let ecs = essential_channel_set(&[1, 2], &[vec![3, 4], vec![2]]);
        assert_eq!(ecs.channels, vec![2]);
        assert_eq!(ecs.uncoverable, vec![0]);
    }

    #[test]
    fn cover_ties_take_lowest_channel() {
        let ecs = essential_channel_set(&[4, 2, 9], &[vec![2, 4, 9]]);
        assert_eq!(ecs.channels, vec![2]);
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.as_str().parse::<StrategyKind>().unwrap(), k);
        }
        assert_eq!("surf".parse::<StrategyKind>().unwrap(), StrategyKind::Surf);
        assert!("XX".parse::<StrategyKind>().is_err());
        assert_eq!("literal".parse::<OccupancyMode>().unwrap(), OccupancyMode::Literal);
    }

    fn node(acs: Vec<ChannelId>, views: Vec<ChannelView<f64>>, neighbor_acs: Vec<Vec<ChannelId>>) -> NodeView<f64> {
        NodeView {
            node_id: 0,
            acs,
            channel_views: views,
            neighbor_acs,
        }
    }

    #[test]
    fn decisions_per_kind() {
        let surf = StrategyConfig::<f64>::new(StrategyKind::Surf, 10).unwrap();
        let n = node(vec![1, 2], vec![view(1, 3, 9), view(2, 1, 2)], vec![]);
        let d = decide(&n, &surf, &mut rng(0)).unwrap();
        assert_eq!((d.tx_channels, d.rx_channels), (vec![1], vec![1]));

        let ca = StrategyConfig::<f64>::new(StrategyKind::Ca, 10).unwrap();
        let n = node(vec![1, 2, 3], vec![], vec![vec![1], vec![2], vec![1, 2]]);
        let d = decide(&n, &ca, &mut rng(0)).unwrap();
        assert_eq!(d.rx_channels, vec![1, 2, 3]);
        assert_eq!(d.tx_channels, vec![1, 2]);

        let sb = StrategyConfig::<f64>::new(StrategyKind::Sb, 10).unwrap();
        for seed in 0..10 {
            let d = decide(&n, &sb, &mut rng(seed)).unwrap();
            assert_eq!(d.tx_channels, vec![1, 2]);
            assert_eq!(d.rx_channels.len(), 1);
            assert!(n.acs.contains(&d.rx_channels[0]));
        }

        let rd = StrategyConfig::<f64>::new(StrategyKind::Rd, 10).unwrap();
        let mut r = rng(3);
        let mut differ = false;
        for _ in 0..100 {
            let d = decide(&n, &rd, &mut r).unwrap();
            assert_eq!((d.tx_channels.len(), d.rx_channels.len()), (1, 1));
            differ |= d.tx_channels != d.rx_channels;
        }
        assert!(differ, "RD draws sending and listening channels independently");
    }

    #[test]
    fn empty_acs_propagates_errors() {
        let n = node(vec![], vec![], vec![]);
        for kind in [StrategyKind::Surf, StrategyKind::Rd, StrategyKind::Sb] {
            let cfg = StrategyConfig::<f64>::new(kind, 10).unwrap();
            assert!(matches!(decide(&n, &cfg, &mut rng(0)), Err(SimError::NoChannel)), "{kind}");
        }
    }
}
