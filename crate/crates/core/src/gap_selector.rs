//! Candidate gaps, per-gap merge probabilities, the coarse gap search tree,
//! and scalar yield beliefs.
//!
//! A gap's merge probability is the product of three factors: the rear
//! car's willingness to yield, a Gaussian in the distance to the gap, and a
//! logistic in the gap length. The tree search then values attempting a
//! gap with the option of falling back to another one if the attempt fails.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{AgentId, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapModelParams {
    /// Width of the distance Gaussian (m).
    pub sigma: f64,
    /// Preferred signed offset to the gap center (m).
    pub d0: f64,
    /// Extra distance charged to gaps ahead of the ego (m).
    pub front_penalty: f64,
    /// Logistic steepness on the normalized gap length.
    pub steepness: f64,
    /// Length unit used to normalize `g - ego_length` (m).
    pub gap_scale: f64,
    /// Switch cost per meter between gap centers.
    pub switch_cost_per_m: f64,
    pub switch_cost_cap: f64,
    /// Belief smoothing factor.
    pub alpha: f64,
    pub initial_p_yield: f64,
    /// Rear-car deceleration that counts as a yield observation (m/s², ≤ 0).
    pub yield_accel_threshold: f64,
    /// Growth of the rear car's own front gap that counts as a yield (m).
    pub yield_gap_growth: f64,
}

impl Default for GapModelParams {
    fn default() -> Self {
        Self {
            sigma: 25.0,
            d0: 0.0,
            front_penalty: 6.0,
            steepness: 0.3,
            gap_scale: 1.0,
            switch_cost_per_m: 0.04,
            switch_cost_cap: 0.5,
            alpha: 0.9,
            initial_p_yield: 0.5,
            yield_accel_threshold: -0.5,
            yield_gap_growth: 0.2,
        }
    }
}

/// Identifies a gap by its bounding cars; stable across replans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GapId {
    pub front: Option<AgentId>,
    pub rear: Option<AgentId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub id: GapId,
    /// Bumper-to-bumper clearance; infinite for the open ends.
    pub length: f64,
    /// Signed offset from the ego center to the gap center, positive ahead.
    pub distance: f64,
    /// Longitudinal position of the gap center.
    pub center_x: f64,
    /// Speed at which the gap center travels.
    pub speed: f64,
}

impl Gap {
    pub fn is_ahead(&self) -> bool {
        self.distance > 0.0
    }
}

/// Lists the gaps in the target lane from the head of the column to its
/// tail. Open-ended gaps are centered one standstill distance plus half an
/// ego length beyond the last bumper. An empty lane yields one open gap
/// abeam the ego.
pub fn enumerate_gaps(world: &WorldState) -> Vec<Gap> {
    let ego = &world.ego;
    let ex = ego.state.x;
    let standoff = world.traffic_model.min_gap + ego.geometry.length / 2.0;
    let traffic = &world.traffic;
    let mut gaps = Vec::with_capacity(traffic.len() + 1);

    let make = |front: Option<AgentId>, rear: Option<AgentId>, length: f64, center_x: f64, speed: f64| Gap {
        id: GapId { front, rear },
        length,
        distance: center_x - ex,
        center_x,
        speed,
    };

    let Some(head) = traffic.first() else {
        gaps.push(make(None, None, f64::INFINITY, ex, ego.state.speed));
        return gaps;
    };
    gaps.push(make(
        None,
        Some(head.id),
        f64::INFINITY,
        head.vehicle.front_x() + standoff,
        head.vehicle.state.speed,
    ));
    for pair in traffic.windows(2) {
        let (front, rear) = (&pair[0].vehicle, &pair[1].vehicle);
        let clearance = front.rear_x() - rear.front_x();
        gaps.push(make(
            Some(pair[0].id),
            Some(pair[1].id),
            clearance.max(0.0),
            0.5 * (front.rear_x() + rear.front_x()),
            0.5 * (front.state.speed + rear.state.speed),
        ));
    }
    let tail = traffic.last().expect("non-empty");
    gaps.push(make(
        Some(tail.id),
        None,
        f64::INFINITY,
        tail.vehicle.rear_x() - standoff,
        tail.vehicle.state.speed,
    ));
    gaps
}

/// Gaussian preference over the signed distance to a gap.
pub fn p_merge_given_distance(d: f64, gap_is_ahead: bool, params: &GapModelParams) -> f64 {
    let d_eff = if gap_is_ahead { d + params.front_penalty } else { d };
    let z = (d_eff - params.d0) / params.sigma;
    (-z * z).exp()
}

/// Logistic preference over the gap length. Open gaps give 1.
pub fn p_merge_given_gap(g: f64, ego_length: f64, params: &GapModelParams) -> f64 {
    if g == f64::INFINITY {
        return 1.0;
    }
    let g_norm = (g - ego_length) / params.gap_scale;
    1.0 / (1.0 + (-params.steepness * g_norm).exp())
}

/// Per-agent probability that negotiating with that agent succeeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapBelief {
    pub p_yield: BTreeMap<AgentId, f64>,
    pub alpha: f64,
    pub initial: f64,
}

impl GapBelief {
    pub fn new(alpha: f64, initial: f64) -> Self {
        Self {
            p_yield: BTreeMap::new(),
            alpha,
            initial,
        }
    }

    pub fn from_params(params: &GapModelParams) -> Self {
        Self::new(params.alpha, params.initial_p_yield)
    }

    /// Belief for an agent, falling back to the initial value.
    pub fn get(&self, agent: AgentId) -> f64 {
        self.p_yield.get(&agent).copied().unwrap_or(self.initial)
    }
}

/// Exponential smoothing toward the observation; only `agent` changes.
pub fn update_belief(beliefs: &GapBelief, agent: AgentId, observation: bool) -> GapBelief {
    let mut next = beliefs.clone();
    let o = if observation { 1.0 } else { 0.0 };
    let p = beliefs.alpha * beliefs.get(agent) + (1.0 - beliefs.alpha) * o;
    next.p_yield.insert(agent, p.clamp(0.0, 1.0));
    next
}

pub fn p_merge(gap: &Gap, beliefs: &GapBelief, ego_length: f64, params: &GapModelParams) -> f64 {
    let p_yield = gap.id.rear.map_or(1.0, |a| beliefs.get(a));
    let p_d = p_merge_given_distance(gap.distance, gap.is_ahead(), params);
    let p_g = p_merge_given_gap(gap.length, ego_length, params);
    (p_yield * p_d * p_g).clamp(0.0, 1.0)
}

/// One observed state of a traffic car.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSample {
    pub t: f64,
    pub x: f64,
    pub speed: f64,
    /// Clearance to the car ahead; infinite for the column head.
    pub gap_ahead: f64,
}

impl AgentSample {
    pub fn of(world: &WorldState, index: usize) -> Self {
        let agent = &world.traffic[index];
        let gap_ahead = index.checked_sub(1).map_or(f64::INFINITY, |i| {
            world.traffic[i].vehicle.rear_x() - agent.vehicle.front_x()
        });
        Self {
            t: world.time,
            x: agent.vehicle.state.x,
            speed: agent.vehicle.state.speed,
            gap_ahead,
        }
    }
}

/// Mean acceleration across a sample window.
pub fn mean_accel(history: &[AgentSample]) -> Option<f64> {
    let (first, last) = (history.first()?, history.last()?);
    let span = last.t - first.t;
    (span > 0.0).then(|| (last.speed - first.speed) / span)
}

/// Whether the rear car of an engaged gap behaved like a yielder over the
/// window: it braked, or the gap in front of it opened up.
pub fn classify_yield_observation(history: &[AgentSample], params: &GapModelParams) -> bool {
    if history.len() < 2 {
        return false;
    }
    let braked = mean_accel(history).is_some_and(|a| a <= params.yield_accel_threshold);
    let (first, last) = (history[0], history[history.len() - 1]);
    let growth = last.gap_ahead - first.gap_ahead;
    let opened = growth.is_finite() && growth >= params.yield_gap_growth;
    braked || opened
}

/// A gap reduced to what the tree search needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub p: f64,
    pub center_x: f64,
    /// Signed offset from the ego; drives tie-breaking.
    pub distance: f64,
}

pub fn switch_cost(a: &TreeNode, b: &TreeNode, params: &GapModelParams) -> f64 {
    (params.switch_cost_per_m * (a.center_x - b.center_x).abs()).min(params.switch_cost_cap)
}

/// Result of the gap tree search. `order` indexes the input slice: the
/// root target first, then the greedy fallback chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapPlan {
    pub order: Vec<usize>,
    pub value: f64,
    pub depth: usize,
}

impl GapPlan {
    pub fn target(&self) -> usize {
        self.order[0]
    }
}

/// Tie-break order between two equally valued gaps: nearer first, then the
/// one behind, then the lower index.
pub fn tie_order(nodes: &[TreeNode], a: usize, b: usize) -> Ordering {
    let (da, db) = (nodes[a].distance, nodes[b].distance);
    da.abs()
        .total_cmp(&db.abs())
        .then_with(|| da.total_cmp(&db))
        .then_with(|| a.cmp(&b))
}

/// Picks the better of two candidates: higher value, else [`tie_order`].
fn better(nodes: &[TreeNode], best: Option<(usize, f64)>, i: usize, v: f64) -> Option<(usize, f64)> {
    match best {
        None => Some((i, v)),
        Some((j, w)) if v > w || (v == w && tie_order(nodes, i, j) == Ordering::Less) => Some((i, v)),
        keep => keep,
    }
}

/// Value of attempting `i` with `budget` attempts left when `available`
/// (a bit set) holds the gaps not yet tried, `i` included.
fn value(nodes: &[TreeNode], i: usize, available: u64, budget: usize, params: &GapModelParams) -> f64 {
    let p = nodes[i].p;
    if budget <= 1 {
        return p;
    }
    let rest = available & !(1 << i);
    let cont = best_fallback(nodes, i, rest, budget - 1, params).map_or(0.0, |(_, v)| v);
    p + (1.0 - p) * cont.max(0.0)
}

fn best_fallback(
    nodes: &[TreeNode],
    from: usize,
    rest: u64,
    budget: usize,
    params: &GapModelParams,
) -> Option<(usize, f64)> {
    let mut best = None;
    for j in 0..nodes.len() {
        if rest & (1 << j) == 0 {
            continue;
        }
        let v = value(nodes, j, rest, budget, params) - switch_cost(&nodes[from], &nodes[j], params);
        best = better(nodes, best, j, v);
    }
    best
}

/// Depth-limited search over attempt orders. Depth 1 is a plain argmax.
pub fn search_gap_tree(nodes: &[TreeNode], depth: usize, params: &GapModelParams) -> Result<GapPlan> {
    if nodes.is_empty() {
        return Err(Error::NoGaps);
    }
    if depth == 0 {
        return Err(Error::InvalidConfig("gap tree depth must be at least 1".into()));
    }
    if nodes.len() > 64 {
        return Err(Error::InvalidConfig("at most 64 gaps are supported".into()));
    }
    let all = if nodes.len() == 64 { u64::MAX } else { (1u64 << nodes.len()) - 1 };
    let mut root = None;
    for i in 0..nodes.len() {
        root = better(nodes, root, i, value(nodes, i, all, depth, params));
    }
    let (first, v) = root.expect("non-empty");

    let mut order = vec![first];
    let mut available = all & !(1 << first);
    let mut budget = depth;
    while budget > 1 {
        let from = *order.last().expect("non-empty");
        match best_fallback(nodes, from, available, budget - 1, params) {
            Some((j, w)) if w > 0.0 => {
                order.push(j);
                available &= !(1 << j);
                budget -= 1;
            }
            _ => break,
        }
    }
    Ok(GapPlan {
        order,
        value: v,
        depth,
    })
}

/// Tree nodes for a set of enumerated gaps under the current beliefs.
pub fn tree_nodes(gaps: &[Gap], beliefs: &GapBelief, ego_length: f64, params: &GapModelParams) -> Vec<TreeNode> {
    gaps.iter()
        .map(|g| TreeNode {
            p: p_merge(g, beliefs, ego_length, params),
            center_x: g.center_x,
            distance: g.distance,
        })
        .collect()
}
