//! Traffic-participant policies: IDM car following plus the stochastic
//! two-threshold merge response.
//!
//! Each traffic car carries two lateral thresholds, both measured from the
//! lane marking. Once the ego is aligned with the car's front gap, its
//! penetration past the reaction threshold makes the car block (close the
//! gap to its own lead) and penetration past the yield threshold makes it
//! fall back behind the ego.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{footprint, ControlInput};
use crate::world::{AgentId, TrafficAgent, WorldState};

/// Hardest braking any IDM follower will command (m/s²).
pub const MAX_BRAKING: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    pub desired_speed: f64,
    pub time_headway: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub min_gap: f64,
    pub exponent: f64,
}

impl IdmParams {
    /// Canonical published values with the given desired speed.
    pub fn canonical(desired_speed: f64) -> Self {
        Self {
            desired_speed,
            time_headway: 1.5,
            max_accel: 1.0,
            comfortable_decel: 1.5,
            min_gap: 2.0,
            exponent: 4.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.desired_speed > 0.0
            && self.time_headway > 0.0
            && self.max_accel > 0.0
            && self.comfortable_decel > 0.0
            && self.min_gap > 0.0
            && self.exponent >= 1.0
    }

    /// Desired dynamic gap s*(v, Δv).
    pub fn desired_gap(&self, v: f64, v_lead: f64) -> f64 {
        self.min_gap
            + v * self.time_headway
            + v * (v - v_lead) / (2.0 * (self.max_accel * self.comfortable_decel).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmOutput {
    pub accel: f64,
    /// The gap was non-positive and maximum braking was commanded.
    pub emergency: bool,
}

/// IDM acceleration, clamped to `[-MAX_BRAKING, a]`. A free road is
/// `gap = f64::INFINITY`.
pub fn idm_accel(v: f64, v_lead: f64, gap: f64, p: &IdmParams) -> IdmOutput {
    if gap <= 0.0 {
        return IdmOutput {
            accel: -MAX_BRAKING,
            emergency: true,
        };
    }
    let free = 1.0 - (v / p.desired_speed).powf(p.exponent);
    let interaction = (p.desired_gap(v, v_lead).max(0.0) / gap).powi(2);
    IdmOutput {
        accel: (p.max_accel * (free - interaction)).clamp(-MAX_BRAKING, p.max_accel),
        emergency: false,
    }
}

/// Speed of a homogeneous platoon at the given clearance, i.e. the root of
/// `idm_accel(v, v, gap) = 0`, found by bisection.
pub fn equilibrium_speed(gap: f64, p: &IdmParams) -> f64 {
    if gap <= p.min_gap {
        return 0.0;
    }
    let f = |v: f64| {
        let free = 1.0 - (v / p.desired_speed).powf(p.exponent);
        free - (p.desired_gap(v, v) / gap).powi(2)
    };
    let (mut lo, mut hi) = (0.0, p.desired_speed);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentThresholds {
    /// Penetration at which the car starts reacting (m, 0 = lane marking).
    pub reaction: f64,
    /// Penetration at which the car yields (m, 0 = lane marking).
    pub yield_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRanges {
    pub reaction: (f64, f64),
    pub yield_at: (f64, f64),
}

impl Default for ThresholdRanges {
    fn default() -> Self {
        Self {
            reaction: (-1.5, 0.4),
            yield_at: (-2.2, 1.1),
        }
    }
}

impl ThresholdRanges {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AgentThresholds {
        let reaction = rng.random_range(self.reaction.0..self.reaction.1);
        let yield_at = rng.random_range(self.yield_at.0..self.yield_at.1);
        AgentThresholds { reaction, yield_at }
    }
}

/// Draws a threshold pair from the default ranges.
pub fn sample_thresholds<R: Rng + ?Sized>(rng: &mut R) -> AgentThresholds {
    ThresholdRanges::default().sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AgentMode {
    Normal,
    Blocking,
    Yielding,
}

/// Mode from threshold logic alone. An inverted threshold pair leaves the
/// blocking band empty.
pub fn mode_for_penetration(penetration: f64, thresholds: &AgentThresholds) -> AgentMode {
    if penetration < thresholds.reaction {
        AgentMode::Normal
    } else if penetration < thresholds.yield_at {
        AgentMode::Blocking
    } else {
        AgentMode::Yielding
    }
}

/// Threshold logic plus yield commitment: a yielding car keeps yielding for
/// as long as the ego stays aligned with its front gap.
pub fn resolve_mode(
    penetration: f64,
    thresholds: &AgentThresholds,
    previous: AgentMode,
    was_aligned: bool,
    aligned: bool,
) -> AgentMode {
    if !aligned {
        return AgentMode::Normal;
    }
    if previous == AgentMode::Yielding && was_aligned {
        return AgentMode::Yielding;
    }
    mode_for_penetration(penetration, thresholds)
}

/// Behavior constants shared by every traffic car.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    pub time_headway: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub min_gap: f64,
    pub exponent: f64,
    pub thresholds: ThresholdRanges,
    /// Headway multiplier while blocking.
    pub blocking_headway_factor: f64,
    /// Desired-speed multiplier while blocking.
    pub blocking_speed_factor: f64,
    /// A car brakes for an ego whose body comes within this lateral distance
    /// of its own lane band, regardless of mode.
    pub intrusion_margin: f64,
}

impl Default for TrafficModel {
    fn default() -> Self {
        let c = IdmParams::canonical(1.0);
        Self {
            time_headway: c.time_headway,
            max_accel: c.max_accel,
            comfortable_decel: c.comfortable_decel,
            min_gap: c.min_gap,
            exponent: c.exponent,
            thresholds: ThresholdRanges::default(),
            blocking_headway_factor: 0.5,
            blocking_speed_factor: 1.2,
            intrusion_margin: 0.2,
        }
    }
}

impl TrafficModel {
    pub fn idm(&self, desired_speed: f64) -> IdmParams {
        IdmParams {
            desired_speed,
            time_headway: self.time_headway,
            max_accel: self.max_accel,
            comfortable_decel: self.comfortable_decel,
            min_gap: self.min_gap,
            exponent: self.exponent,
        }
    }
}

/// Whether the ego is longitudinally between this car and its lead.
pub fn ego_aligned(world: &WorldState, index: usize) -> bool {
    let agent = &world.traffic[index];
    let ex = world.ego.state.x;
    if ex < agent.vehicle.state.x {
        return false;
    }
    match index.checked_sub(1) {
        Some(lead) => ex < world.traffic[lead].vehicle.state.x,
        None => true,
    }
}

/// Signed lateral position of the ego's near edge relative to the lane
/// marking, or `-∞` when the ego is not aligned with the agent's front gap.
pub fn ego_penetration(world: &WorldState, agent: AgentId) -> f64 {
    match world.index_of(agent) {
        Some(i) if ego_aligned(world, i) => penetration_of(world),
        _ => f64::NEG_INFINITY,
    }
}

fn penetration_of(world: &WorldState) -> f64 {
    world.ego.footprint().max_y() - world.lane.marking_y()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentDecision {
    pub control: ControlInput,
    pub mode: AgentMode,
    pub aligned: bool,
    pub emergency: bool,
}

/// Lead gap and lead speed seen by the agent at `index` in its own lane.
fn own_lead(world: &WorldState, index: usize) -> (f64, f64) {
    let agent = &world.traffic[index];
    let front = agent.vehicle.state.x + agent.vehicle.geometry.length / 2.0;
    if let Some(lead) = index.checked_sub(1).map(|i| &world.traffic[i]) {
        let rear = lead.vehicle.state.x - lead.vehicle.geometry.length / 2.0;
        (rear - front, lead.vehicle.state.speed)
    } else if let Some(leader) = &world.flow_leader {
        let rear = leader.x - agent.vehicle.geometry.length / 2.0;
        (rear - front, leader.speed)
    } else {
        (f64::INFINITY, agent.vehicle.state.speed)
    }
}

/// Gap to the ego treated as a lead vehicle, measured from the agent's
/// front bumper to the ego's rearmost point.
fn ego_as_lead(world: &WorldState, agent: &TrafficAgent) -> (f64, f64) {
    let front = agent.vehicle.state.x + agent.vehicle.geometry.length / 2.0;
    let ego_rear = world.ego.footprint().min_x();
    (ego_rear - front, world.ego.state.longitudinal_speed())
}

/// Whether the ego body reaches into this agent's lane band.
fn ego_intrudes(world: &WorldState, agent: &TrafficAgent) -> bool {
    let band_edge = footprint(&agent.vehicle.state, &agent.vehicle.geometry).min_y();
    world.ego.footprint().max_y() > band_edge - world.traffic_model.intrusion_margin
        && world.ego.state.x > agent.vehicle.state.x
}

/// Control for one traffic agent against the pre-step world. Pure: the
/// returned mode is committed by the caller.
pub fn agent_decide(world: &WorldState, agent: AgentId) -> Option<AgentDecision> {
    let index = world.index_of(agent)?;
    let a = &world.traffic[index];
    let aligned = ego_aligned(world, index);
    let penetration = if aligned {
        penetration_of(world)
    } else {
        f64::NEG_INFINITY
    };
    let mode = resolve_mode(
        penetration,
        &a.behavior.thresholds,
        a.behavior.mode,
        a.behavior.aligned,
        aligned,
    );

    let (mut gap, mut lead_speed) = own_lead(world, index);
    let consider_ego = mode == AgentMode::Yielding || ego_intrudes(world, a);
    if consider_ego {
        let (ego_gap, ego_speed) = ego_as_lead(world, a);
        if ego_gap < gap {
            gap = ego_gap;
            lead_speed = ego_speed;
        }
    }

    let mut params = a.behavior.idm;
    if mode == AgentMode::Blocking {
        params.time_headway *= world.traffic_model.blocking_headway_factor;
        params.desired_speed *= world.traffic_model.blocking_speed_factor;
    }
    let out = idm_accel(a.vehicle.state.speed, lead_speed, gap, &params);
    Some(AgentDecision {
        control: ControlInput::new(out.accel, 0.0),
        mode,
        aligned,
        emergency: out.emergency,
    })
}
