//! Slotted channels and primary-radio (PR) occupancy.
//!
//! Every channel is divided into `total_slots` time slots per round. PR
//! activity occupies some of them; the rest are available to CR nodes.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{ChannelId, Real, Result, SimError};

/// PR occupancy of one channel during one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotFrame {
    total_slots: usize,
    occupied: BTreeSet<usize>,
}

impl SlotFrame {
    pub fn new(total_slots: usize, occupied: impl IntoIterator<Item = usize>) -> Result<Self> {
        let occupied: BTreeSet<usize> = occupied.into_iter().collect();
        if let Some(&bad) = occupied.iter().find(|&&s| s >= total_slots) {
            return Err(SimError::domain(format!(
                "slot {bad} outside frame of {total_slots} slots"
            )));
        }
        Ok(Self {
            total_slots,
            occupied,
        })
    }

    /// A frame with no PR activity.
    pub fn empty(total_slots: usize) -> Self {
        Self {
            total_slots,
            occupied: BTreeSet::new(),
        }
    }

    pub fn total_slots(&self) -> usize {
        self.total_slots
    }

    pub fn occupied(&self) -> &BTreeSet<usize> {
        &self.occupied
    }

    pub fn occupied_slots(&self) -> usize {
        self.occupied.len()
    }

    pub fn available_slots(&self) -> usize {
        self.total_slots - self.occupied.len()
    }

    pub fn is_occupied(&self, slot: usize) -> bool {
        self.occupied.contains(&slot)
    }

    /// Slots not used by PR activity, in increasing order.
    pub fn free_slots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.total_slots).filter(move |s| !self.occupied.contains(s))
    }
}

/// Fraction of the frame occupied by PR activity.
pub fn pr_occupancy<T: Real>(frame: &SlotFrame) -> Result<T> {
    if frame.total_slots == 0 {
        return Err(SimError::config("frame has zero slots"));
    }
    Ok(T::of_usize(frame.occupied_slots()) / T::of_usize(frame.total_slots))
}

/// Share of the channel left for CR nodes, `1 - pr_occupancy`.
pub fn cr_available_share<T: Real>(pr_occupancy: T) -> Result<T> {
    if !(pr_occupancy >= T::zero() && pr_occupancy <= T::one()) {
        return Err(SimError::domain(format!(
            "PR occupancy {pr_occupancy} outside [0, 1]"
        )));
    }
    Ok(T::one() - pr_occupancy)
}

/// Draws one round of PR activity on a channel.
///
/// Each of the `pr_count` PR nodes is active with probability
/// `activity_probability` and, when active, occupies one uniformly chosen
/// slot. Two PR nodes on the same slot occupy it once.
pub fn generate_pr_activity<R: Rng + ?Sized>(
    pr_count: usize,
    total_slots: usize,
    activity_probability: f64,
    rng: &mut R,
) -> SlotFrame {
    let mut frame = SlotFrame::empty(total_slots);
    if total_slots == 0 {
        return frame;
    }
    for _ in 0..pr_count {
        if rng.gen::<f64>() < activity_probability {
            frame.occupied.insert(rng.gen_range(0..total_slots));
        }
    }
    frame
}

/// Stochastic PR activity across all channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PrActivityModel {
    activity_probability: f64,
    pr_nodes_per_channel: Vec<usize>,
}

impl PrActivityModel {
    pub fn new(activity_probability: f64, pr_nodes_per_channel: Vec<usize>) -> Result<Self> {
        if !(0.0..=1.0).contains(&activity_probability) {
            return Err(SimError::config(format!(
                "activity probability {activity_probability} outside [0, 1]"
            )));
        }
        Ok(Self {
            activity_probability,
            pr_nodes_per_channel,
        })
    }

    pub fn activity_probability(&self) -> f64 {
        self.activity_probability
    }

    pub fn pr_nodes_per_channel(&self) -> &[usize] {
        &self.pr_nodes_per_channel
    }

    /// One frame per channel, indexed by channel id.
    pub fn draw_frames<R: Rng + ?Sized>(&self, total_slots: usize, rng: &mut R) -> Vec<SlotFrame> {
        self.pr_nodes_per_channel
            .iter()
            .map(|&count| generate_pr_activity(count, total_slots, self.activity_probability, rng))
            .collect()
    }
}

/// One CR node's local knowledge of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelView<T> {
    pub channel_id: ChannelId,
    pub pr_occupancy: T,
    pub available_slots: usize,
    pub total_slots: usize,
    pub cr_available_share: T,
    pub cr_neighbors: usize,
}

impl<T: Real> ChannelView<T> {
    pub fn from_frame(channel_id: ChannelId, frame: &SlotFrame, cr_neighbors: usize) -> Result<Self> {
        let pr_occupancy = pr_occupancy::<T>(frame)?;
        Ok(Self {
            channel_id,
            pr_occupancy,
            available_slots: frame.available_slots(),
            total_slots: frame.total_slots(),
            cr_available_share: cr_available_share(pr_occupancy)?,
            cr_neighbors,
        })
    }
}
