//! One TTL-bounded dissemination run.
//!
//! Rounds are synchronous, one hop per round. In each round:
//!
//! 1. PR activity is redrawn on every channel.
//! 2. Nodes that received the message in the previous round (the source in
//!    round one) send it on each of their chosen channels, in a slot drawn
//!    uniformly from that channel's free slots. A channel with no free slot
//!    suppresses the copy.
//! 3. Nodes without the message pick the channels they listen on.
//! 4. A listener hears a copy if the sender is in range, the listener is
//!    tuned to the channel, the slot is free of PR activity, and no other
//!    in-range sender used the same channel and slot.
//!
//! Every node forwards once, in the round after its first reception.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::spectrum::{PrActivityModel, SlotFrame};
use crate::strategy::{listen_channels, transmit_channels, StrategyConfig};
use crate::topology::Topology;
use crate::{ChannelId, NodeId, Real, Result, SimError};

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Transmission {
    pub sender: NodeId,
    pub channel: ChannelId,
    pub slot: usize,
    pub hop: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Reception {
    pub receiver: NodeId,
    pub sender: NodeId,
    pub channel: ChannelId,
    pub slot: usize,
}

/// A copy that could not be sent because PR activity filled the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Suppressed {
    pub sender: NodeId,
    pub channel: ChannelId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReceptionOutcome {
    pub receptions: Vec<Reception>,
    /// Listener/channel/slot triples lost to two or more audible senders.
    pub collisions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HopRecord {
    pub hop: usize,
    pub transmissions: Vec<Transmission>,
    pub suppressed: Vec<Suppressed>,
    pub receptions: Vec<Reception>,
    /// Nodes reached for the first time in this hop, ascending.
    pub new_receivers: Vec<NodeId>,
    pub collisions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DisseminationTrace {
    pub source: NodeId,
    pub ttl: usize,
    pub hops: Vec<HopRecord>,
    /// Copies sent by each node over the whole run.
    pub tx_count: Vec<usize>,
}

impl DisseminationTrace {
    pub fn collisions(&self) -> usize {
        self.hops.iter().map(|h| h.collisions).sum()
    }

    pub fn receptions(&self) -> usize {
        self.hops.iter().map(|h| h.receptions.len()).sum()
    }

    pub fn transmissions(&self) -> usize {
        self.tx_count.iter().sum()
    }

    pub fn transmitting_nodes(&self) -> usize {
        self.tx_count.iter().filter(|&&c| c > 0).count()
    }

    /// Every node reached, source excluded, in reception order.
    pub fn receivers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.hops.iter().flat_map(|h| h.new_receivers.iter().copied())
    }
}

/// Independent random streams of one run.
///
/// PR activity has its own stream so that runs of different strategies on
/// the same environment seed see identical frames. Sender and listener
/// choices are split for the same reason: strategies that send alike also
/// draw identical slots.
#[derive(Debug, Clone)]
pub struct RunStreams {
    pub pr: SimRng,
    pub tx: SimRng,
    pub rx: SimRng,
}

impl RunStreams {
    pub fn new(environment_seed: u64, strategy_seed: u64) -> Self {
        let mut pr = SimRng::seed_from_u64(environment_seed);
        pr.set_stream(1);
        let mut tx = SimRng::seed_from_u64(strategy_seed);
        tx.set_stream(2);
        let mut rx = SimRng::seed_from_u64(strategy_seed);
        rx.set_stream(3);
        Self { pr, tx, rx }
    }
}

/// Applies the reception rules to one round of transmissions.
///
/// `listeners` pairs each listening node with the channels it is tuned to;
/// `frames` is indexed by channel id, a missing frame meaning no PR activity.
pub fn resolve_receptions(
    transmissions: &[Transmission],
    listeners: &[(NodeId, Vec<ChannelId>)],
    topology: &Topology,
    frames: &[SlotFrame],
) -> ReceptionOutcome {
    let mut outcome = ReceptionOutcome::default();
    let mut audible: Vec<&Transmission> = Vec::new();
    for (listener, rx_channels) in listeners {
        audible.clear();
        audible.extend(transmissions.iter().filter(|t| {
            t.sender != *listener
                && rx_channels.contains(&t.channel)
                && topology.in_range(*listener, t.sender)
        }));
        audible.sort_by_key(|t| (t.channel, t.slot, t.sender));
        for group in audible.chunk_by(|a, b| a.channel == b.channel && a.slot == b.slot) {
            let t = group[0];
            if frames.get(t.channel).is_some_and(|f| f.is_occupied(t.slot)) {
                continue;
            }
            if group.len() == 1 {
                outcome.receptions.push(Reception {
                    receiver: *listener,
                    sender: t.sender,
                    channel: t.channel,
                    slot: t.slot,
                });
            } else {
                outcome.collisions += 1;
            }
        }
    }
    outcome
}

/// Floods one message from `source` for at most `ttl` hops.
pub fn run_dissemination<T: Real>(
    topology: &Topology,
    cfg: &StrategyConfig<T>,
    ttl: usize,
    pr_model: &PrActivityModel,
    total_slots: usize,
    source: NodeId,
    streams: &mut RunStreams,
) -> Result<DisseminationTrace> {
    let n = topology.len();
    if source >= n {
        return Err(SimError::UnknownNode(source));
    }
    if total_slots == 0 {
        return Err(SimError::config("frames need at least one slot"));
    }
    if pr_model.pr_nodes_per_channel().len() != topology.channels() {
        return Err(SimError::config(format!(
            "PR model covers {} channels, topology has {}",
            pr_model.pr_nodes_per_channel().len(),
            topology.channels()
        )));
    }

    let mut has_message = vec![false; n];
    has_message[source] = true;
    let mut tx_count = vec![0; n];
    let mut frontier = vec![source];
    let mut hops = Vec::new();

    for hop in 1..=ttl {
        if frontier.is_empty() {
            break;
        }
        let frames = pr_model.draw_frames(total_slots, &mut streams.pr);

        let mut transmissions = Vec::new();
        let mut suppressed = Vec::new();
        for &sender in &frontier {
            let view = topology.node_view::<T>(sender, &frames)?;
            for channel in transmit_channels(&view, cfg, &mut streams.tx)? {
                let free: Vec<usize> = frames[channel].free_slots().collect();
                match free.choose(&mut streams.tx) {
                    Some(&slot) => {
                        transmissions.push(Transmission {
                            sender,
                            channel,
                            slot,
                            hop,
                        });
                        tx_count[sender] += 1;
                    }
                    None => suppressed.push(Suppressed { sender, channel }),
                }
            }
        }

        // only nodes next to an actual sender can hear anything
        let mut listeners = Vec::new();
        for v in (0..n).filter(|&v| !has_message[v]) {
            if !transmissions.iter().any(|t| topology.in_range(v, t.sender)) {
                continue;
            }
            let view = topology.node_view::<T>(v, &frames)?;
            listeners.push((v, listen_channels(&view, cfg, &mut streams.rx)?));
        }

        let outcome = resolve_receptions(&transmissions, &listeners, topology, &frames);
        let mut new_receivers: Vec<NodeId> = outcome.receptions.iter().map(|r| r.receiver).collect();
        new_receivers.sort_unstable();
        new_receivers.dedup();
        for &v in &new_receivers {
            has_message[v] = true;
        }
        frontier = new_receivers.clone();
        hops.push(HopRecord {
            hop,
            transmissions,
            suppressed,
            receptions: outcome.receptions,
            new_receivers,
            collisions: outcome.collisions,
        });
    }

    Ok(DisseminationTrace {
        source,
        ttl,
        hops,
        tx_count,
    })
}
