//! Two-lane merge scenario generation and lock-step world simulation.
//!
//! Coordinates: `x` runs along the road in the travel direction and the lane
//! marking is the line `y = 0`. Traffic drives in the target lane
//! (`y > 0`); the ego starts in the merging lane (`y < 0`), which ends
//! `merge_window` meters ahead of the ego's start.

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::agents::{agent_decide, equilibrium_speed, AgentMode, AgentThresholds, IdmParams, TrafficModel};
use crate::dynamics::{
    boxes_collide, footprint, min_separation, step_bicycle, ControlInput, ControlLimits, OrientedBox,
    VehicleGeometry, VehicleState,
};
use crate::error::{Error, Result};
use crate::rng::{substream, Substream};
use crate::trace::{EventKind, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub lane_width: f64,
    /// Mean bumper-to-bumper clearance between traffic cars (m).
    pub mean_gap: f64,
    /// Half-width of the uniform noise added to every clearance (m).
    pub gap_noise_halfwidth: f64,
    pub n_traffic: usize,
    /// Desired speed shared by all traffic (m/s).
    pub traffic_speed: f64,
    pub seed: u64,
    /// Length of merging lane ahead of the ego's start (m).
    pub merge_window: f64,
    /// Simulated time after which an unmerged trial is abandoned (s).
    pub time_limit: f64,
    pub dt: f64,
    pub vehicle: VehicleGeometry,
    pub limits: ControlLimits,
    pub traffic: TrafficModel,
    /// Forces every agent's thresholds to this pair instead of sampling.
    pub threshold_override: Option<AgentThresholds>,
}

/// One sixth of the mean gap, rounded to the micrometre so that decimal
/// gaps such as 4.8 m give decimal noise such as 0.8 m.
pub fn default_gap_noise(mean_gap: f64) -> f64 {
    (mean_gap / 6.0 * 1e6).round() / 1e6
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::with_mean_gap(4.8)
    }
}

impl ScenarioConfig {
    /// Default scenario at a given density; the noise half-width follows the
    /// 2.4/0.4, 4.8/0.8, 9.6/1.6 pairing.
    pub fn with_mean_gap(mean_gap: f64) -> Self {
        Self {
            lane_width: 3.7,
            mean_gap,
            gap_noise_halfwidth: default_gap_noise(mean_gap),
            n_traffic: 12,
            traffic_speed: 5.0,
            seed: 0,
            merge_window: 120.0,
            time_limit: 150.0,
            dt: 0.1,
            vehicle: VehicleGeometry::default(),
            limits: ControlLimits::default(),
            traffic: TrafficModel::default(),
            threshold_override: None,
        }
    }

    /// Largest column the gap search can take, which tracks at most 64
    /// gaps including the two open ends.
    pub const MAX_TRAFFIC: usize = 62;

    // Negated comparisons so that NaN fails every check.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.mean_gap > 0.0) {
            return fail("mean_gap must be positive");
        }
        if !(self.gap_noise_halfwidth >= 0.0 && self.gap_noise_halfwidth < self.mean_gap) {
            return fail("gap_noise_halfwidth must lie in [0, mean_gap)");
        }
        if !(1..=Self::MAX_TRAFFIC).contains(&self.n_traffic) {
            return fail("n_traffic must lie in [1, 62]");
        }
        if !(self.traffic_speed > 0.0) {
            return fail("traffic_speed must be positive");
        }
        if !(self.lane_width > self.vehicle.width) {
            return fail("lane_width must exceed the vehicle width");
        }
        if !(self.dt > 0.0) || !(self.time_limit > 0.0) || !(self.merge_window > 0.0) {
            return fail("dt, time_limit and merge_window must be positive");
        }
        if !self.vehicle.is_valid() {
            return fail("vehicle geometry must satisfy l_f + l_r <= length");
        }
        if !self.traffic.idm(self.traffic_speed).is_valid() {
            return fail("IDM parameters must be positive with exponent >= 1");
        }
        Ok(())
    }

    /// Steady platoon speed at the mean clearance, capped by the desired speed.
    pub fn flow_speed(&self) -> f64 {
        let idm = self.traffic.idm(self.traffic_speed);
        equilibrium_speed(self.mean_gap, &idm).min(self.traffic_speed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub state: VehicleState,
    pub geometry: VehicleGeometry,
}

impl Vehicle {
    pub fn footprint(&self) -> OrientedBox {
        footprint(&self.state, &self.geometry)
    }

    pub fn front_x(&self) -> f64 {
        self.state.x + self.geometry.length / 2.0
    }

    pub fn rear_x(&self) -> f64 {
        self.state.x - self.geometry.length / 2.0
    }
}

/// Per-agent record: private thresholds plus the small mode memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentBehavior {
    pub thresholds: AgentThresholds,
    pub mode: AgentMode,
    /// The ego was aligned with this agent's front gap last step.
    pub aligned: bool,
    pub idm: IdmParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficAgent {
    pub id: AgentId,
    pub vehicle: Vehicle,
    pub behavior: AgentBehavior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneGeometry {
    pub lane_width: f64,
    /// Longitudinal position where the merging lane ends.
    pub merge_lane_end: f64,
}

impl LaneGeometry {
    pub fn marking_y(&self) -> f64 {
        0.0
    }

    pub fn target_center(&self) -> f64 {
        self.lane_width / 2.0
    }

    pub fn ego_lane_center(&self) -> f64 {
        -self.lane_width / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub time: f64,
    pub step: u64,
    pub dt: f64,
    pub ego: Vehicle,
    /// Target-lane traffic ordered front to rear (descending `x`).
    pub traffic: Vec<TrafficAgent>,
    /// Virtual downstream vehicle the column head follows; keeps the platoon
    /// at its sampled density. It has no body and cannot be hit.
    pub flow_leader: Option<VehicleState>,
    pub lane: LaneGeometry,
    pub limits: ControlLimits,
    pub traffic_model: TrafficModel,
}

impl WorldState {
    pub fn index_of(&self, id: AgentId) -> Option<usize> {
        self.traffic.iter().position(|a| a.id == id)
    }

    pub fn agent(&self, id: AgentId) -> Option<&TrafficAgent> {
        self.traffic.iter().find(|a| a.id == id)
    }

    /// Traffic cars whose footprint overlaps the ego's.
    pub fn ego_collisions(&self) -> Vec<AgentId> {
        let ego = self.ego.footprint();
        self.traffic
            .iter()
            .filter(|a| boxes_collide(&ego, &a.vehicle.footprint()))
            .map(|a| a.id)
            .collect()
    }

    /// Smallest boundary distance between the ego and any traffic car.
    pub fn ego_min_separation(&self) -> f64 {
        let ego = self.ego.footprint();
        self.traffic
            .iter()
            .map(|a| min_separation(&ego, &a.vehicle.footprint()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Nearest traffic cars ahead of and behind the ego center.
    pub fn ego_neighbors(&self) -> (Option<&TrafficAgent>, Option<&TrafficAgent>) {
        let ex = self.ego.state.x;
        let ahead = self.traffic.iter().rev().find(|a| a.vehicle.state.x >= ex);
        let behind = self.traffic.iter().find(|a| a.vehicle.state.x < ex);
        (ahead, behind)
    }
}

/// Samples a merge scenario. Deterministic in the config (seed included).
pub fn generate_scenario(config: &ScenarioConfig) -> Result<WorldState> {
    config.validate()?;
    let mut placement = substream(config.seed, Substream::Scenario);
    let mut thresholds = substream(config.seed, Substream::Thresholds);

    let length = config.vehicle.length;
    let flow = config.flow_speed();
    let idm = config.traffic.idm(config.traffic_speed);
    let lane = LaneGeometry {
        lane_width: config.lane_width,
        merge_lane_end: 0.0,
    };

    let mut xs = Vec::with_capacity(config.n_traffic);
    let mut x = 0.0;
    for i in 0..config.n_traffic {
        if i > 0 {
            let noise = if config.gap_noise_halfwidth > 0.0 {
                placement.random_range(-config.gap_noise_halfwidth..=config.gap_noise_halfwidth)
            } else {
                0.0
            };
            x -= length + config.mean_gap + noise;
        }
        xs.push(x);
    }
    let mid = 0.5 * (xs[0] + xs[config.n_traffic - 1]);

    let traffic = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let t = config
                .threshold_override
                .unwrap_or_else(|| config.traffic.thresholds.sample(&mut thresholds));
            TrafficAgent {
                id: AgentId(i as u32),
                vehicle: Vehicle {
                    state: VehicleState::new(x - mid, lane.target_center(), 0.0, flow),
                    geometry: config.vehicle,
                },
                behavior: AgentBehavior {
                    thresholds: t,
                    mode: AgentMode::Normal,
                    aligned: false,
                    idm,
                },
            }
        })
        .collect::<Vec<_>>();

    let flow_leader = Some(VehicleState::new(
        xs[0] - mid + length + config.mean_gap,
        lane.target_center(),
        0.0,
        flow,
    ));

    Ok(WorldState {
        time: 0.0,
        step: 0,
        dt: config.dt,
        ego: Vehicle {
            state: VehicleState::new(0.0, lane.ego_lane_center(), 0.0, flow),
            geometry: config.vehicle,
        },
        traffic,
        flow_leader,
        lane: LaneGeometry {
            merge_lane_end: config.merge_window,
            ..lane
        },
        limits: config.limits,
        traffic_model: config.traffic,
    })
}

fn state_json(s: &VehicleState) -> serde_json::Value {
    json!({"x": s.x, "y": s.y, "heading": s.heading, "speed": s.speed})
}

/// Advances the world one step. Traffic controls are all computed against
/// the pre-step world, then every vehicle is integrated.
pub fn step_world(world: &WorldState, ego_control: ControlInput, dt: f64) -> (WorldState, Vec<TraceEvent>) {
    let mut next = world.clone();
    let mut events = Vec::new();
    let t_next = world.time + dt;
    let mut transitions = Vec::new();

    for (i, agent) in world.traffic.iter().enumerate() {
        let decision = agent_decide(world, agent.id).expect("agent from this world");
        let out = step_bicycle(
            &agent.vehicle.state,
            decision.control,
            &agent.vehicle.geometry,
            &world.limits,
            dt,
        );
        let slot = &mut next.traffic[i];
        slot.vehicle.state = out.state;
        if decision.mode != agent.behavior.mode {
            transitions.push(json!({
                "agent": agent.id,
                "from": agent.behavior.mode,
                "to": decision.mode,
            }));
        }
        slot.behavior.mode = decision.mode;
        slot.behavior.aligned = decision.aligned;
        if decision.emergency {
            events.push(TraceEvent::new(
                t_next,
                EventKind::Warning,
                json!({"what": "emergency-braking", "agent": agent.id}),
            ));
        }
    }

    let ego = step_bicycle(&world.ego.state, ego_control, &world.ego.geometry, &world.limits, dt);
    if ego.clamped {
        events.push(TraceEvent::new(
            t_next,
            EventKind::Warning,
            json!({"what": "ego-control-clamped", "accel": ego_control.accel, "steer": ego_control.steer}),
        ));
    }
    next.ego.state = ego.state;
    if let Some(leader) = &mut next.flow_leader {
        leader.x += leader.speed * dt;
    }
    next.time = t_next;
    next.step = world.step + 1;

    for id in next.ego_collisions() {
        events.push(TraceEvent::new(
            t_next,
            EventKind::Collision,
            json!({"a": "ego", "b": id}),
        ));
    }
    for pair in next.traffic.windows(2) {
        if boxes_collide(&pair[0].vehicle.footprint(), &pair[1].vehicle.footprint()) {
            events.push(TraceEvent::new(
                t_next,
                EventKind::Collision,
                json!({"a": pair[0].id, "b": pair[1].id}),
            ));
        }
    }

    let traffic: Vec<_> = next
        .traffic
        .iter()
        .map(|a| {
            json!({
                "id": a.id,
                "x": a.vehicle.state.x,
                "speed": a.vehicle.state.speed,
                "mode": a.behavior.mode,
            })
        })
        .collect();
    events.push(TraceEvent::new(
        t_next,
        EventKind::StateSnapshot,
        json!({
            "ego": state_json(&next.ego.state),
            "traffic": traffic,
            "transitions": transitions,
        }),
    ));
    (next, events)
}

/// Minimum clearance to gap neighbors required to call the merge complete.
pub const MERGE_CLEARANCE: f64 = 0.1;

/// The ego body lies wholly inside the target lane and keeps at least
/// [`MERGE_CLEARANCE`] from the cars ahead and behind.
pub fn ego_merged(world: &WorldState) -> bool {
    let ego = world.ego.footprint();
    let marking = world.lane.marking_y();
    if ego.min_y() < marking || ego.max_y() > marking + world.lane.lane_width {
        return false;
    }
    if !world.ego_collisions().is_empty() {
        return false;
    }
    let (ahead, behind) = world.ego_neighbors();
    [ahead, behind]
        .into_iter()
        .flatten()
        .all(|a| min_separation(&ego, &a.vehicle.footprint()) >= MERGE_CLEARANCE)
}
