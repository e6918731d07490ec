//! Replanning loop tying the stages together.
//!
//! Once per replan interval the planner folds the last observation of the
//! engaged car into its belief, picks a target gap with the tree search,
//! predicts traffic around that gap, and plays the intention matrix game.
//! Between replans it replays the stored control sequence.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::ControlInput;
use crate::error::{Error, Result};
use crate::gap_selector::{
    classify_yield_observation, enumerate_gaps, mean_accel, search_gap_tree, tree_nodes, update_belief, AgentSample,
    GapBelief, GapId, GapModelParams,
};
use crate::intention_game::{expected_reward, play, EgoIntention, GameParams, IntentionClass};
use crate::prediction::{observed_class, predict, PredictionParams};
use crate::trace::{EventKind, TraceEvent};
use crate::world::{AgentId, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Levels of the gap search tree.
    pub depth: usize,
    /// Seconds between replans.
    pub replan_interval: f64,
    pub gap: GapModelParams,
    pub prediction: PredictionParams,
    pub game: GameParams,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            depth: 2,
            replan_interval: 1.0,
            gap: GapModelParams::default(),
            prediction: PredictionParams::default(),
            game: GameParams::default(),
        }
    }
}

impl PlannerConfig {
    pub fn with_depth(depth: usize) -> Self {
        Self {
            depth,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.depth < 1 {
            return fail("depth must be at least 1");
        }
        if !(self.replan_interval > 0.0 && self.replan_interval <= self.game.horizon) {
            return fail("replan_interval must lie in (0, horizon]");
        }
        if !(self.game.ttr > 0.0 && self.game.ttr < self.game.horizon) {
            return fail("ttr must lie in (0, horizon)");
        }
        if !(0.0..1.0).contains(&self.gap.alpha) {
            return fail("alpha must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gap.initial_p_yield) || !(0.0..=1.0).contains(&self.prediction.c_stay) {
            return fail("probabilities must lie in [0, 1]");
        }
        if self.game.n_intentions < 2 {
            return fail("at least two ego intentions are required");
        }
        if !(self.game.lateral_duration > 0.0 && self.game.lateral_duration <= self.game.horizon) {
            return fail("lateral_duration must lie in (0, horizon]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveIntention {
    pub intention: EgoIntention,
    pub start_step: u64,
    pub target: GapId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerState {
    pub beliefs: GapBelief,
    /// Gap order from the latest tree search.
    pub plan: Vec<GapId>,
    pub active: Option<ActiveIntention>,
    /// Traffic observed at the latest replan.
    pub snapshots: BTreeMap<AgentId, AgentSample>,
    /// The car the ego was negotiating with since the latest replan.
    pub engaged: Option<AgentId>,
}

impl PlannerState {
    pub fn new(config: &PlannerConfig) -> Self {
        Self {
            beliefs: GapBelief::from_params(&config.gap),
            plan: Vec::new(),
            active: None,
            snapshots: BTreeMap::new(),
            engaged: None,
        }
    }
}

/// Wall-clock cost of one replan. Kept out of traces.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseTimings {
    pub gap_tree: Duration,
    pub matrix_game: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replan {
    pub target: GapId,
    pub class: IntentionClass,
    pub forward_simulations: usize,
    pub timings: PhaseTimings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub control: ControlInput,
    pub events: Vec<TraceEvent>,
    pub replan: Option<Replan>,
}

fn gap_json(id: &GapId) -> serde_json::Value {
    json!({"front": id.front, "rear": id.rear})
}

fn is_replan_tick(world: &WorldState, state: &PlannerState, config: &PlannerConfig) -> bool {
    let interval = (config.replan_interval / world.dt).round().max(1.0) as u64;
    match &state.active {
        None => true,
        Some(a) => {
            let offset = world.step.saturating_sub(a.start_step);
            offset >= interval || offset as usize >= a.intention.controls.len()
        }
    }
}

/// One planner tick. Mutates `state` in place.
pub fn decide_in_place(world: &WorldState, state: &mut PlannerState, config: &PlannerConfig) -> Result<Decision> {
    let mut events = Vec::new();
    let mut replan = None;
    if is_replan_tick(world, state, config) {
        replan = Some(run_replan(world, state, config, &mut events)?);
    }
    let active = state.active.as_ref().expect("set by replan");
    let offset = (world.step - active.start_step) as usize;
    Ok(Decision {
        control: active.intention.controls[offset],
        events,
        replan,
    })
}

/// Value-style entry point: returns the control, the successor state and
/// the trace events of this tick.
pub fn decide(
    world: &WorldState,
    state: &PlannerState,
    config: &PlannerConfig,
) -> Result<(ControlInput, PlannerState, Vec<TraceEvent>)> {
    let mut next = state.clone();
    let d = decide_in_place(world, &mut next, config)?;
    Ok((d.control, next, d.events))
}

fn run_replan(
    world: &WorldState,
    state: &mut PlannerState,
    config: &PlannerConfig,
    events: &mut Vec<TraceEvent>,
) -> Result<Replan> {
    let started = Instant::now();
    let t = world.time;
    let samples: BTreeMap<AgentId, AgentSample> = world
        .traffic
        .iter()
        .enumerate()
        .map(|(i, a)| (a.id, AgentSample::of(world, i)))
        .collect();

    // Fold in what the engaged car did since the last replan.
    if let Some(agent) = state.engaged {
        if let (Some(before), Some(now)) = (state.snapshots.get(&agent), samples.get(&agent)) {
            let yielded = classify_yield_observation(&[*before, *now], &config.gap);
            state.beliefs = update_belief(&state.beliefs, agent, yielded);
            events.push(TraceEvent::new(
                t,
                EventKind::BeliefUpdate,
                json!({"agent": agent, "observation": yielded, "p_yield": state.beliefs.get(agent)}),
            ));
        }
    }

    let tree_started = Instant::now();
    let gaps = enumerate_gaps(world);
    let nodes = tree_nodes(&gaps, &state.beliefs, world.ego.geometry.length, &config.gap);
    let plan = search_gap_tree(&nodes, config.depth, &config.gap)?;
    let gap_tree = tree_started.elapsed();
    let target = gaps[plan.target()];

    let game_started = Instant::now();
    let interactive = target.id.rear;
    let previous = interactive.and_then(|id| {
        let before = state.snapshots.get(&id)?;
        let now = samples.get(&id)?;
        observed_class(mean_accel(&[*before, *now]), &config.prediction)
    });
    let p_yield = interactive.map_or(1.0, |id| state.beliefs.get(id));
    let horizon = config.game.ttr.max(config.replan_interval) + config.game.horizon;
    let predictions = predict(world, &target, p_yield, previous, horizon, world.dt, &config.prediction);
    let outcome = play(world, &target, &predictions, &config.game);
    let matrix_game = game_started.elapsed();

    let class = outcome.intention.class;
    let rows: Vec<_> = outcome
        .matrix
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let e = expected_reward(r, &outcome.matrix.probabilities);
            json!({
                "class": r.class,
                "pruned": outcome.prune.pruned.contains(&i),
                "risk": e.risk,
                "success": e.success,
                "comfort": e.comfort,
            })
        })
        .collect();
    if !outcome.prune.pruned.is_empty() || outcome.chosen.is_none() {
        let pruned: Vec<_> = outcome.prune.pruned.iter().map(|&i| outcome.matrix.rows[i].class).collect();
        events.push(TraceEvent::new(
            t,
            EventKind::Prune,
            json!({"pruned": pruned, "fallback": outcome.chosen.is_none()}),
        ));
    }
    events.push(TraceEvent::new(
        t,
        EventKind::Plan,
        json!({
            "target": gap_json(&target.id),
            "order": plan.order.iter().map(|&i| gap_json(&gaps[i].id)).collect::<Vec<_>>(),
            "value": plan.value,
            "depth": plan.depth,
            "interactive": interactive,
            "columns": predictions.interactive.iter().map(|c| json!({"kind": c.kind, "probability": c.probability})).collect::<Vec<_>>(),
            "rows": rows,
            "chosen": class,
        }),
    ));

    state.plan = plan.order.iter().map(|&i| gaps[i].id).collect();
    state.engaged = if class.is_merge() { interactive } else { None };
    state.snapshots = samples;
    state.active = Some(ActiveIntention {
        intention: outcome.intention,
        start_step: world.step,
        target: target.id,
    });
    Ok(Replan {
        target: target.id,
        class,
        forward_simulations: outcome.stats.forward_simulations + outcome.stats.exit_checks,
        timings: PhaseTimings {
            gap_tree,
            matrix_game,
            total: started.elapsed(),
        },
    })
}
