//! Traffic predictions: a level-0 constant-velocity rollout for every car
//! except the one the ego negotiates with, which gets a two-way
//! counterfactual split between holding speed and braking to let the ego
//! in.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::gap_selector::Gap;
use crate::world::{AgentId, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionParams {
    /// Weight on keeping the previously observed intention class.
    pub c_stay: f64,
    /// Deceleration of the braking hypothesis (m/s², positive).
    pub brake_decel: f64,
    /// Measured acceleration at or below which a car counts as braking.
    pub brake_class_threshold: f64,
}

impl Default for PredictionParams {
    fn default() -> Self {
        Self {
            c_stay: 0.7,
            brake_decel: 2.0,
            brake_class_threshold: -0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrafficIntention {
    Maintain,
    Brake,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentionPrediction {
    pub kind: TrafficIntention,
    pub probability: f64,
    /// Samples at `dt` from now; empty when no car is contested.
    pub trajectory: Vec<VehicleState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub interactive_agent: Option<AgentId>,
    /// One entry per game column. An uncontested gap has a single
    /// certain column with no trajectory.
    pub interactive: Vec<IntentionPrediction>,
    pub passive: BTreeMap<AgentId, Vec<VehicleState>>,
}

/// The car whose yielding opens the gap: its rear bound.
pub fn select_interactive_agent(gap: &Gap) -> Option<AgentId> {
    gap.id.rear
}

/// Number of samples, endpoints included, covering `horizon` at `dt`.
pub fn sample_count(horizon: f64, dt: f64) -> usize {
    (horizon / dt).round() as usize + 1
}

/// Constant-velocity rollout along the current heading.
pub fn predict_passive(state: &VehicleState, horizon: f64, dt: f64) -> Vec<VehicleState> {
    let (s, c) = state.heading.sin_cos();
    (0..sample_count(horizon, dt))
        .map(|k| {
            let t = k as f64 * dt;
            VehicleState {
                x: state.x + state.speed * c * t,
                y: state.y + state.speed * s * t,
                ..*state
            }
        })
        .collect()
}

/// Measured intention class from the acceleration since the last replan.
pub fn observed_class(accel: Option<f64>, params: &PredictionParams) -> Option<TrafficIntention> {
    accel.map(|a| {
        if a <= params.brake_class_threshold {
            TrafficIntention::Brake
        } else {
            TrafficIntention::Maintain
        }
    })
}

/// `(P(MAINTAIN), P(BRAKE))` from the yield belief and a continuity factor
/// favoring the previous class.
pub fn intention_probabilities(
    p_yield: f64,
    previous: Option<TrafficIntention>,
    c_stay: f64,
) -> (f64, f64) {
    let cont = |k: TrafficIntention| match previous {
        None => 0.5,
        Some(prev) if prev == k => c_stay,
        Some(_) => 1.0 - c_stay,
    };
    let brake = cont(TrafficIntention::Brake) * p_yield;
    let maintain = cont(TrafficIntention::Maintain) * (1.0 - p_yield);
    let total = brake + maintain;
    if total <= 0.0 {
        return (0.5, 0.5);
    }
    (maintain / total, brake / total)
}

/// Braking rollout: decelerate until the clearance to `lead` can take the
/// ego plus two standstill gaps, then hold that speed. Each sample uses the
/// closed-form kinematics from the switching instant, not a step-by-step
/// integration. Without a lead the car brakes for the whole horizon.
#[allow(clippy::too_many_arguments)]
pub fn predict_brake(
    state: &VehicleState,
    length: f64,
    lead: Option<&[VehicleState]>,
    lead_length: f64,
    required_gap: f64,
    decel: f64,
    horizon: f64,
    dt: f64,
) -> Vec<VehicleState> {
    let braking = |t: f64| -> (f64, f64) {
        let t_stop = state.speed / decel;
        if t >= t_stop {
            (state.x + state.speed * t_stop / 2.0, 0.0)
        } else {
            (state.x + state.speed * t - 0.5 * decel * t * t, state.speed - decel * t)
        }
    };
    let mut hold: Option<(f64, f64, f64)> = None;
    (0..sample_count(horizon, dt))
        .map(|k| {
            let t = k as f64 * dt;
            let (x, v) = match hold {
                Some((t0, x0, v0)) => (x0 + v0 * (t - t0), v0),
                None => {
                    let (x, v) = braking(t);
                    let clearance = lead
                        .and_then(|l| l.get(k))
                        .map(|l| l.x - lead_length / 2.0 - (x + length / 2.0));
                    if clearance.is_some_and(|c| c >= required_gap) {
                        hold = Some((t, x, v));
                    }
                    (x, v)
                }
            };
            VehicleState {
                x,
                speed: v,
                ..*state
            }
        })
        .collect()
}

/// Both hypotheses for the interactive car with their probabilities, the
/// lead being the car in front of it.
#[allow(clippy::too_many_arguments)]
pub fn predict_interactive(
    world: &WorldState,
    agent: AgentId,
    p_yield: f64,
    previous: Option<TrafficIntention>,
    horizon: f64,
    dt: f64,
    params: &PredictionParams,
) -> Vec<IntentionPrediction> {
    let Some(index) = world.index_of(agent) else {
        return Vec::new();
    };
    let a = &world.traffic[index].vehicle;
    let lead = index.checked_sub(1).map(|i| &world.traffic[i].vehicle);
    let lead_traj = lead.map(|l| predict_passive(&l.state, horizon, dt));
    let required = world.ego.geometry.length + 2.0 * world.traffic_model.min_gap;
    let (p_maintain, p_brake) = intention_probabilities(p_yield, previous, params.c_stay);
    vec![
        IntentionPrediction {
            kind: TrafficIntention::Maintain,
            probability: p_maintain,
            trajectory: predict_passive(&a.state, horizon, dt),
        },
        IntentionPrediction {
            kind: TrafficIntention::Brake,
            probability: p_brake,
            trajectory: predict_brake(
                &a.state,
                a.geometry.length,
                lead_traj.as_deref(),
                lead.map_or(0.0, |l| l.geometry.length),
                required,
                params.brake_decel,
                horizon,
                dt,
            ),
        },
    ]
}

/// Full prediction set for a target gap.
pub fn predict(
    world: &WorldState,
    gap: &Gap,
    p_yield: f64,
    previous: Option<TrafficIntention>,
    horizon: f64,
    dt: f64,
    params: &PredictionParams,
) -> PredictionSet {
    let interactive_agent = select_interactive_agent(gap);
    let passive = world
        .traffic
        .iter()
        .filter(|a| Some(a.id) != interactive_agent)
        .map(|a| (a.id, predict_passive(&a.vehicle.state, horizon, dt)))
        .collect();
    let interactive = match interactive_agent {
        Some(id) => predict_interactive(world, id, p_yield, previous, horizon, dt, params),
        None => vec![IntentionPrediction {
            kind: TrafficIntention::Maintain,
            probability: 1.0,
            trajectory: Vec::new(),
        }],
    };
    PredictionSet {
        interactive_agent,
        interactive,
        passive,
    }
}
