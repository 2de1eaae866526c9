//! Random unit-disk networks of CR nodes.

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::spectrum::{ChannelView, SlotFrame};
use crate::{ChannelId, NodeId, Real, Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyParams {
    pub n: usize,
    pub area_side: f64,
    pub radius: f64,
    pub channels: usize,
    pub acs_size: usize,
    pub pr_count: usize,
}

impl TopologyParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(SimError::config("need at least one CR node"));
        }
        if self.channels == 0 {
            return Err(SimError::config("need at least one channel"));
        }
        if self.acs_size == 0 || self.acs_size > self.channels {
            return Err(SimError::config(format!(
                "available channel set size {} must be in 1..={}",
                self.acs_size, self.channels
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(SimError::config("radius must be positive"));
        }
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            return Err(SimError::config("area side must be positive"));
        }
        Ok(())
    }
}

/// PR nodes spread round-robin over the channels.
pub fn spread_pr_nodes(pr_count: usize, channels: usize) -> Vec<usize> {
    (0..channels)
        .map(|c| pr_count / channels + usize::from(c < pr_count % channels))
        .collect()
}

/// Hop budget needed to cross the deployment square, `ceil(2a / R)`.
pub fn ttl_for(area_side: f64, radius: f64) -> Result<usize> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(SimError::config(format!("radius {radius} must be positive")));
    }
    if !(area_side >= 0.0 && area_side.is_finite()) {
        return Err(SimError::config(format!("area side {area_side} must be non-negative")));
    }
    Ok((2.0 * area_side / radius).ceil() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<Point>,
    radius: f64,
    area_side: f64,
    channels: usize,
    adjacency: Vec<Vec<NodeId>>,
    acs: Vec<Vec<ChannelId>>,
    pr_assignment: Vec<usize>,
}

/// On-disk form. Adjacency is derived, so it is not stored.
#[derive(Serialize, Deserialize)]
struct TopologyFile {
    radius: f64,
    area_side: f64,
    channels: usize,
    positions: Vec<Point>,
    acs: Vec<Vec<ChannelId>>,
    pr_assignment: Vec<usize>,
}

impl Topology {
    /// Uniform node placement, unit-disk links, uniform random channel sets.
    pub fn generate<R: Rng + ?Sized>(params: &TopologyParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let positions = (0..params.n)
            .map(|_| {
                Point::new(
                    rng.gen::<f64>() * params.area_side,
                    rng.gen::<f64>() * params.area_side,
                )
            })
            .collect();
        let acs = (0..params.n)
            .map(|_| {
                let mut set = index::sample(rng, params.channels, params.acs_size).into_vec();
                set.sort_unstable();
                set
            })
            .collect();
        Self::from_parts(
            positions,
            params.radius,
            params.area_side,
            params.channels,
            acs,
            spread_pr_nodes(params.pr_count, params.channels),
        )
    }

    /// Like [`Topology::generate`], but redraws until the graph is connected.
    pub fn generate_connected<R: Rng + ?Sized>(
        params: &TopologyParams,
        max_attempts: usize,
        rng: &mut R,
    ) -> Result<Self> {
        for _ in 0..max_attempts {
            let t = Self::generate(params, rng)?;
            if t.is_connected() {
                return Ok(t);
            }
        }
        Err(SimError::config(format!(
            "no connected topology after {max_attempts} attempts"
        )))
    }

    /// Builds a topology from explicit parts, deriving adjacency.
    pub fn from_parts(
        positions: Vec<Point>,
        radius: f64,
        area_side: f64,
        channels: usize,
        acs: Vec<Vec<ChannelId>>,
        pr_assignment: Vec<usize>,
    ) -> Result<Self> {
        if acs.len() != positions.len() {
            return Err(SimError::config(format!(
                "{} channel sets for {} nodes",
                acs.len(),
                positions.len()
            )));
        }
        if pr_assignment.len() != channels {
            return Err(SimError::config(format!(
                "PR assignment covers {} channels, expected {channels}",
                pr_assignment.len()
            )));
        }
        if radius.is_nan() || radius <= 0.0 {
            return Err(SimError::config("radius must be positive"));
        }
        let mut acs = acs;
        for set in &mut acs {
            set.sort_unstable();
            set.dedup();
            if let Some(&c) = set.iter().find(|&&c| c >= channels) {
                return Err(SimError::config(format!(
                    "channel {c} outside 0..{channels}"
                )));
            }
        }

        let r2 = radius * radius;
        let n = positions.len();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if positions[i].distance_sq(&positions[j]) <= r2 {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        Ok(Self {
            positions,
            radius,
            area_side,
            channels,
            adjacency,
            acs,
            pr_assignment,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn area_side(&self) -> f64 {
        self.area_side
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adjacency[node]
    }

    pub fn acs(&self, node: NodeId) -> &[ChannelId] {
        &self.acs[node]
    }

    pub fn pr_assignment(&self) -> &[usize] {
        &self.pr_assignment
    }

    pub fn in_range(&self, a: NodeId, b: NodeId) -> bool {
        self.positions[a].distance_sq(&self.positions[b]) <= self.radius * self.radius
    }

    pub fn mean_degree(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.adjacency.iter().map(Vec::len).sum::<usize>() as f64 / self.len() as f64
    }

    pub fn is_connected(&self) -> bool {
        if self.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    reached += 1;
                    queue.push_back(u);
                }
            }
        }
        reached == self.len()
    }

    /// Neighbours of `node` whose channel set contains `channel`.
    pub fn cr_neighbor_count(&self, node: NodeId, channel: ChannelId) -> Result<usize> {
        let own = self.acs.get(node).ok_or(SimError::UnknownNode(node))?;
        if own.binary_search(&channel).is_err() {
            return Err(SimError::ChannelNotAvailable { node, channel });
        }
        Ok(self.adjacency[node]
            .iter()
            .filter(|&&u| self.acs[u].binary_search(&channel).is_ok())
            .count())
    }

    /// Local view of `node`, given this round's frame for every channel
    /// (indexed by channel id).
    pub fn node_view<T: Real>(&self, node: NodeId, frames: &[SlotFrame]) -> Result<NodeView<T>> {
        let acs = self.acs.get(node).ok_or(SimError::UnknownNode(node))?.clone();
        let channel_views = acs
            .iter()
            .map(|&c| {
                let frame = frames.get(c).ok_or(SimError::MissingFrame { channel: c })?;
                ChannelView::from_frame(c, frame, self.cr_neighbor_count(node, c)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let neighbor_acs = self.adjacency[node]
            .iter()
            .map(|&u| self.acs[u].clone())
            .collect();
        Ok(NodeView {
            node_id: node,
            acs,
            channel_views,
            neighbor_acs,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = TopologyFile {
            radius: self.radius,
            area_side: self.area_side,
            channels: self.channels,
            positions: self.positions.clone(),
            acs: self.acs.clone(),
            pr_assignment: self.pr_assignment.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: TopologyFile = serde_json::from_str(s)?;
        Self::from_parts(f.positions, f.radius, f.area_side, f.channels, f.acs, f.pr_assignment)
    }
}

/// What one CR node knows locally in a given round.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeView<T> {
    pub node_id: NodeId,
    pub acs: Vec<ChannelId>,
    /// One entry per channel of `acs`, same order.
    pub channel_views: Vec<ChannelView<T>>,
    pub neighbor_acs: Vec<Vec<ChannelId>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_params(channels: usize, acs_size: usize) -> TopologyParams {
        TopologyParams {
            n: 70,
            area_side: 707.0,
            radius: 250.0,
            channels,
            acs_size,
            pr_count: 30,
        }
    }

    #[test]
    fn generated_sets_have_configured_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = Topology::generate(&default_params(5, 3), &mut rng).unwrap();
        assert_eq!(t.len(), 70);
        for v in 0..t.len() {
            assert_eq!(t.acs(v).len(), 3);
            assert!(t.acs(v).iter().all(|&c| c < 5));
        }
        assert_eq!(t.pr_assignment(), &[6, 6, 6, 6, 6]);

        let t = Topology::generate(&default_params(15, 8), &mut rng).unwrap();
        assert!((0..70).all(|v| t.acs(v).len() == 8));
        assert_eq!(t.pr_assignment().iter().sum::<usize>(), 30);
        assert_eq!(t.pr_assignment(), &[2; 15]);
    }

    #[test]
    fn uneven_pr_spread_differs_by_at_most_one() {
        let spread = spread_pr_nodes(30, 7);
        assert_eq!(spread.iter().sum::<usize>(), 30);
        assert!(spread.iter().max().unwrap() - spread.iter().min().unwrap() <= 1);
    }

    #[test]
    fn unit_disk_rule() {
        let make = |y: f64| {
            Topology::from_parts(
                vec![Point::new(0.0, 0.0), Point::new(0.0, y)],
                250.0,
                707.0,
                1,
                vec![vec![0], vec![0]],
                vec![0],
            )
            .unwrap()
        };
        assert_eq!(make(200.0).neighbors(0), &[1]);
        assert!(make(300.0).neighbors(0).is_empty());
        assert_eq!(make(250.0).neighbors(1), &[0]);
    }

    #[test]
    fn single_node_has_no_neighbors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = Topology::generate(&TopologyParams { n: 1, ..default_params(5, 3) }, &mut rng).unwrap();
        assert!(t.neighbors(0).is_empty());
        assert!(t.is_connected());
    }

    #[test]
    fn oversized_channel_set_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = Topology::generate(&default_params(5, 6), &mut rng).unwrap_err();
        assert!(matches!(err, SimError::InvalidConfig(_)));
    }

    #[test]
    fn ttl_values() {
        assert_eq!(ttl_for(707.0, 250.0).unwrap(), 6);
        assert_eq!(ttl_for(500.0, 500.0).unwrap(), 2);
        assert_eq!(ttl_for(707.0, 707.0).unwrap(), 2);
        assert!(ttl_for(707.0, 0.0).is_err());
        assert!(ttl_for(707.0, -1.0).is_err());
    }

    fn star(center_acs: Vec<ChannelId>, leaves: Vec<Vec<ChannelId>>, channels: usize) -> Topology {
        let mut positions = vec![Point::new(0.0, 0.0)];
        positions.extend((0..leaves.len()).map(|i| {
            let a = i as f64 * 2.0 * std::f64::consts::PI / leaves.len() as f64;
            Point::new(100.0 * a.cos(), 100.0 * a.sin())
        }));
        let mut acs = vec![center_acs];
        acs.extend(leaves);
        // radius 150 keeps leaves mostly linked, the counts below only use the center
        Topology::from_parts(positions, 150.0, 707.0, channels, acs, vec![0; channels]).unwrap()
    }

    #[test]
    fn neighbor_counts() {
        let t = star(vec![1, 2], vec![vec![1, 2], vec![2, 3], vec![3, 4]], 5);
        assert_eq!(t.cr_neighbor_count(0, 2).unwrap(), 2);
        assert_eq!(t.cr_neighbor_count(0, 1).unwrap(), 1);
        assert!(matches!(
            t.cr_neighbor_count(0, 3),
            Err(SimError::ChannelNotAvailable { node: 0, channel: 3 })
        ));
        assert!(matches!(t.cr_neighbor_count(9, 1), Err(SimError::UnknownNode(9))));
    }

    #[test]
    fn complete_graph_neighbor_count() {
        let positions: Vec<Point> = (0..5).map(|i| Point::new(i as f64, 0.0)).collect();
        let t = Topology::from_parts(positions, 250.0, 707.0, 2, vec![vec![1]; 5], vec![0, 0]).unwrap();
        // brute force: every other node is in range and shares channel 1
        for v in 0..5 {
            let brute = (0..5).filter(|&u| u != v && t.acs(u).contains(&1)).count();
            assert_eq!(t.cr_neighbor_count(v, 1).unwrap(), brute);
            assert_eq!(brute, 4);
        }
    }

    #[test]
    fn views_combine_frames_and_counts() {
        let t = star(vec![1], vec![vec![1]; 4], 2);
        let frames = vec![SlotFrame::empty(6), SlotFrame::new(6, [0, 2]).unwrap()];
        let view = t.node_view::<f64>(0, &frames).unwrap();
        assert_eq!(view.channel_views.len(), 1);
        let cv = view.channel_views[0];
        assert_eq!(cv.channel_id, 1);
        assert_relative_eq!(cv.pr_occupancy, 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(cv.available_slots, 4);
        assert_relative_eq!(cv.cr_available_share, 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(cv.cr_neighbors, 4);
        assert_eq!(view.neighbor_acs.len(), 4);

        assert!(matches!(
            t.node_view::<f64>(0, &frames[..1]),
            Err(SimError::MissingFrame { channel: 1 })
        ));
    }

    #[test]
    fn isolated_and_degenerate_views() {
        let t = Topology::from_parts(
            vec![Point::new(0.0, 0.0), Point::new(600.0, 600.0)],
            250.0,
            707.0,
            1,
            vec![vec![0], vec![]],
            vec![6],
        )
        .unwrap();
        let frames = vec![SlotFrame::empty(6)];
        let v = t.node_view::<f64>(0, &frames).unwrap();
        assert_eq!(v.channel_views[0].cr_neighbors, 0);
        assert_eq!(v.channel_views[0].pr_occupancy, 0.0);
        let v = t.node_view::<f64>(1, &frames).unwrap();
        assert!(v.acs.is_empty() && v.channel_views.is_empty());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = Topology::generate(&default_params(5, 3), &mut rng).unwrap();
        let back = Topology::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn connectivity_redraw() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = Topology::generate_connected(&default_params(5, 3), 1000, &mut rng).unwrap();
        assert!(t.is_connected());
        let sparse = TopologyParams { radius: 1.0, ..default_params(5, 3) };
        assert!(Topology::generate_connected(&sparse, 3, &mut rng).is_err());
    }
}
