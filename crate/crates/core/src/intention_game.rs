//! Matrix game over ego intentions and traffic intentions.
//!
//! Every ego intention (row) is rolled out against every traffic hypothesis
//! (column). Rows that can hit a predicted car without a safe way back are
//! pruned; the survivor with the best expected reward wins.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    boxes_collide, footprint, min_separation, separation_lower_bound, step_bicycle, ControlInput, ControlLimits,
    OrientedBox, VehicleGeometry, VehicleState,
};
use crate::gap_selector::Gap;
use crate::prediction::{PredictionSet, TrafficIntention};
use crate::world::{AgentId, LaneGeometry, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameParams {
    /// Intention length (s).
    pub horizon: f64,
    /// Time by which an exit maneuver must be launchable (s).
    pub ttr: f64,
    pub n_intentions: usize,
    /// Clearance at which the risk component saturates at 1 (m).
    pub risk_distance: f64,
    pub success_lateral_scale: f64,
    pub success_longitudinal_scale: f64,
    /// Acceleration magnitude that costs the full comfort half (m/s²).
    pub comfort_accel_limit: f64,
    /// Lateral jerk magnitude that costs the full comfort half (m/s³).
    pub comfort_jerk_limit: f64,
    /// Deceleration of the abort maneuver (m/s², positive).
    pub abort_decel: f64,
    /// Fraction of the lateral distance covered by the cautious merge.
    pub cautious_fraction: f64,
    /// Lateral clearance the cautious merge keeps from the traffic lane
    /// band (m).
    pub cautious_standoff: f64,
    /// Time the lateral profiles take to settle, at most `horizon` (s).
    pub lateral_duration: f64,
    /// Look-ahead of the lateral tracker (s).
    pub preview: f64,
    /// Largest course angle the lateral tracker commands (rad).
    pub max_course: f64,
    /// Position gain of the gap-tracking speed controller (1/s²).
    pub kp: f64,
    /// Speed gain of the gap-tracking speed controller (1/s).
    pub kv: f64,
    pub track_accel_max: f64,
    pub track_decel_max: f64,
    /// Speed floor of the merge maneuvers, which need forward motion to
    /// move sideways (m/s). Capped by the room left ahead in the gap.
    pub merge_min_speed: f64,
    /// Largest speed relative to the gap at which the ego closes in on it
    /// (m/s).
    pub max_closing_speed: f64,
    /// Clearance to the gap's front car kept when creeping forward (m).
    pub creep_margin: f64,
}

impl Default for GameParams {
    fn default() -> Self {
        Self {
            horizon: 2.0,
            ttr: 1.0,
            n_intentions: 4,
            risk_distance: 0.5,
            success_lateral_scale: 3.0,
            success_longitudinal_scale: 5.0,
            comfort_accel_limit: 4.0,
            comfort_jerk_limit: 30.0,
            abort_decel: 1.0,
            cautious_fraction: 0.5,
            cautious_standoff: 0.5,
            lateral_duration: 1.6,
            preview: 0.3,
            max_course: 0.7,
            kp: 0.5,
            kv: 1.2,
            track_accel_max: 2.0,
            track_decel_max: 3.0,
            merge_min_speed: 0.8,
            max_closing_speed: 2.0,
            creep_margin: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IntentionClass {
    MergeAssertive,
    MergeCautious,
    Hold,
    Abort,
    /// Emergency lane-keeping stop used when every row is pruned.
    Fallback,
}

impl IntentionClass {
    /// Tie-break rank; lower wins.
    pub fn preference(self) -> u8 {
        match self {
            IntentionClass::Hold => 0,
            IntentionClass::Abort => 1,
            IntentionClass::MergeCautious => 2,
            IntentionClass::MergeAssertive => 3,
            IntentionClass::Fallback => 4,
        }
    }

    pub fn is_merge(self) -> bool {
        matches!(self, IntentionClass::MergeAssertive | IntentionClass::MergeCautious)
    }

    /// Rows that may not lean on an exit maneuver to survive pruning.
    fn needs_clean_sweep(self) -> bool {
        matches!(self, IntentionClass::Hold | IntentionClass::Abort)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoIntention {
    pub class: IntentionClass,
    pub controls: Vec<ControlInput>,
    /// `controls.len() + 1` states starting at the current ego state.
    pub trajectory: Vec<VehicleState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct RewardVector {
    pub risk: f64,
    pub success: f64,
    pub comfort: f64,
}

impl RewardVector {
    pub fn new(risk: f64, success: f64, comfort: f64) -> Self {
        Self { risk, success, comfort }
    }

    pub fn l1(&self) -> f64 {
        self.risk + self.success + self.comfort
    }

    /// Componentwise at least as good and strictly better somewhere.
    pub fn dominates(&self, other: &RewardVector) -> bool {
        let ge = self.risk >= other.risk && self.success >= other.success && self.comfort >= other.comfort;
        let gt = self.risk > other.risk || self.success > other.success || self.comfort > other.comfort;
        ge && gt
    }
}

/// Quintic from `(y0, vy0, 0)` to `(y1, 0, 0)` over `duration`, constant
/// afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticProfile {
    y0: f64,
    vy0: f64,
    c: [f64; 3],
    duration: f64,
    y1: f64,
}

impl QuinticProfile {
    pub fn new(y0: f64, vy0: f64, y1: f64, duration: f64) -> Self {
        let (h, t) = (y1 - y0, duration);
        let c3 = (20.0 * h - 12.0 * vy0 * t) / (2.0 * t.powi(3));
        let c4 = (-30.0 * h + 16.0 * vy0 * t) / (2.0 * t.powi(4));
        let c5 = (12.0 * h - 6.0 * vy0 * t) / (2.0 * t.powi(5));
        Self {
            y0,
            vy0,
            c: [c3, c4, c5],
            duration,
            y1,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        if t >= self.duration {
            return self.y1;
        }
        let t = t.max(0.0);
        let [c3, c4, c5] = self.c;
        self.y0 + self.vy0 * t + t.powi(3) * (c3 + t * (c4 + t * c5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Longitudinal {
    /// Follow a point moving at constant speed.
    Track { x0: f64, speed: f64, min_speed: f64 },
    /// Constant deceleration (positive magnitude).
    Decelerate(f64),
}

struct Maneuver {
    lateral: QuinticProfile,
    longitudinal: Longitudinal,
}

/// Shared rollout context for building intentions.
#[derive(Debug, Clone, Copy)]
pub struct EgoModel {
    pub geometry: VehicleGeometry,
    pub limits: ControlLimits,
    pub lane: LaneGeometry,
    pub dt: f64,
}

impl EgoModel {
    pub fn of(world: &WorldState) -> Self {
        Self {
            geometry: world.ego.geometry,
            limits: world.limits,
            lane: world.lane,
            dt: world.dt,
        }
    }

    fn steps(&self, horizon: f64) -> usize {
        (horizon / self.dt).round() as usize
    }

    fn rollout(&self, start: &VehicleState, m: &Maneuver, steps: usize, params: &GameParams) -> (Vec<ControlInput>, Vec<VehicleState>) {
        let mut controls = Vec::with_capacity(steps);
        let mut states = Vec::with_capacity(steps + 1);
        let mut s = *start;
        states.push(s);
        let max_slip = self.geometry.slip_angle(self.limits.steer_max);
        for k in 0..steps {
            let t = k as f64 * self.dt;
            let y_des = m.lateral.at(t + params.preview);
            let reach = s.speed.max(0.5) * params.preview;
            let course = (y_des - s.y).atan2(reach).clamp(-params.max_course, params.max_course);
            let slip = (course - s.heading).clamp(-max_slip, max_slip);
            let steer = self.geometry.steer_for_slip(slip).clamp(-self.limits.steer_max, self.limits.steer_max);
            let accel = match m.longitudinal {
                Longitudinal::Track { x0, speed, min_speed } => {
                    let target = x0 + speed * t;
                    let closing = (params.kp / params.kv * (target - s.x))
                        .clamp(-params.max_closing_speed, params.max_closing_speed);
                    let v_ref = (speed + closing).max(min_speed);
                    (params.kv * (v_ref - s.speed)).clamp(-params.track_decel_max, params.track_accel_max)
                }
                Longitudinal::Decelerate(d) => -d,
            };
            let accel = if s.speed <= 0.0 && accel < 0.0 { 0.0 } else { accel };
            let u = self.limits.clamp(ControlInput::new(accel, steer)).0;
            s = step_bicycle(&s, u, &self.geometry, &self.limits, self.dt).state;
            controls.push(u);
            states.push(s);
        }
        (controls, states)
    }

    fn build(&self, class: IntentionClass, start: &VehicleState, m: Maneuver, steps: usize, params: &GameParams) -> EgoIntention {
        let (controls, trajectory) = self.rollout(start, &m, steps, params);
        EgoIntention {
            class,
            controls,
            trajectory,
        }
    }

    /// Highest lateral position at which the ego body still keeps
    /// `cautious_standoff` from the target-lane band.
    fn cautious_cap(&self, params: &GameParams) -> f64 {
        let band_edge = self.lane.target_center() - self.geometry.width / 2.0;
        band_edge - params.cautious_standoff - self.geometry.width / 2.0
    }

    /// Return to the own-lane center while slowing down.
    pub fn abort(&self, start: &VehicleState, params: &GameParams) -> EgoIntention {
        let steps = self.steps(params.horizon);
        let m = Maneuver {
            lateral: QuinticProfile::new(start.y, lateral_speed(start), self.lane.ego_lane_center(), params.lateral_duration),
            longitudinal: Longitudinal::Decelerate(params.abort_decel),
        };
        self.build(IntentionClass::Abort, start, m, steps, params)
    }

    /// Keep the current lateral position and brake as hard as allowed.
    pub fn fallback(&self, start: &VehicleState, params: &GameParams) -> EgoIntention {
        let steps = self.steps(params.horizon);
        let m = Maneuver {
            lateral: QuinticProfile::new(start.y, lateral_speed(start), start.y, params.lateral_duration),
            longitudinal: Longitudinal::Decelerate(-self.limits.accel_min),
        };
        self.build(IntentionClass::Fallback, start, m, steps, params)
    }

    /// Speed at which the ego can creep into the room ahead of it in the gap
    /// over one horizon.
    fn creep_speed(&self, start: &VehicleState, gap: &Gap, params: &GameParams) -> f64 {
        let room = gap.center_x + gap.length / 2.0 - (start.x + self.geometry.length / 2.0) - params.creep_margin;
        (gap.speed + room.max(0.0) / params.horizon).min(params.merge_min_speed)
    }

    fn toward(&self, class: IntentionClass, start: &VehicleState, y1: f64, gap: &Gap, params: &GameParams) -> EgoIntention {
        let m = Maneuver {
            lateral: QuinticProfile::new(start.y, lateral_speed(start), y1, params.lateral_duration),
            longitudinal: Longitudinal::Track {
                x0: gap.center_x,
                speed: gap.speed,
                min_speed: match class {
                    IntentionClass::MergeAssertive => self.creep_speed(start, gap, params),
                    IntentionClass::MergeCautious => params.merge_min_speed,
                    _ => 0.0,
                },
            },
        };
        self.build(class, start, m, self.steps(params.horizon), params)
    }
}

fn lateral_speed(s: &VehicleState) -> f64 {
    s.speed * s.heading.sin()
}

/// The candidate ego maneuvers for a target gap, in the order assertive,
/// cautious, hold, abort. Larger counts add merges at intermediate depths;
/// smaller counts keep a prefix of `[assertive, hold, cautious]`.
pub fn sample_ego_intentions(world: &WorldState, gap: &Gap, n: usize, params: &GameParams) -> Vec<EgoIntention> {
    let model = EgoModel::of(world);
    let s = world.ego.state;
    let target = model.lane.target_center();
    let cap = model.cautious_cap(params);
    let cautious_y = if s.y >= cap {
        s.y
    } else {
        (s.y + params.cautious_fraction * (target - s.y)).min(cap)
    };

    let assertive = || model.toward(IntentionClass::MergeAssertive, &s, target, gap, params);
    let cautious = || model.toward(IntentionClass::MergeCautious, &s, cautious_y, gap, params);
    let hold = || model.toward(IntentionClass::Hold, &s, s.y, gap, params);
    match n {
        0..=2 => vec![assertive(), hold()],
        3 => vec![assertive(), hold(), cautious()],
        _ => {
            let mut out = vec![assertive(), cautious(), hold(), model.abort(&s, params)];
            let extra = n - 4;
            for i in 1..=extra {
                let f = i as f64 / (extra + 1) as f64;
                let y = cautious_y + f * (target - cautious_y);
                out.push(model.toward(IntentionClass::MergeCautious, &s, y, gap, params));
            }
            out
        }
    }
}

/// One traffic hypothesis with every other car's footprint per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub kind: TrafficIntention,
    pub probability: f64,
    pub interactive: Option<(AgentId, Vec<OrientedBox>)>,
    /// Gap center per sample, when the gap has a moving reference.
    pub gap_center: Vec<Option<f64>>,
}

/// Precomputed footprints of all predicted traffic.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub passive: Vec<(AgentId, Vec<OrientedBox>)>,
    pub columns: Vec<Column>,
    pub ego_geometry: VehicleGeometry,
    pub target_lateral: f64,
}

fn boxes(traj: &[VehicleState], g: &VehicleGeometry) -> Vec<OrientedBox> {
    traj.iter().map(|s| footprint(s, g)).collect()
}

impl Scene {
    pub fn new(world: &WorldState, gap: &Gap, predictions: &PredictionSet) -> Self {
        let geometry_of = |id: AgentId| world.agent(id).map_or(world.ego.geometry, |a| a.vehicle.geometry);
        let passive: Vec<_> = predictions
            .passive
            .iter()
            .map(|(&id, traj)| (id, boxes(traj, &geometry_of(id))))
            .collect();
        let standoff = world.traffic_model.min_gap + world.ego.geometry.length / 2.0;
        let len = predictions.passive.values().next().map(Vec::len).unwrap_or_else(|| {
            predictions.interactive.first().map_or(0, |c| c.trajectory.len())
        });

        let columns = predictions
            .interactive
            .iter()
            .map(|c| {
                let interactive = predictions
                    .interactive_agent
                    .map(|id| (id, boxes(&c.trajectory, &geometry_of(id))));
                let front = gap.id.front.and_then(|id| predictions.passive.get(&id).map(|t| (t, geometry_of(id))));
                let rear = gap.id.rear.map(|id| (&c.trajectory, geometry_of(id)));
                let n = len.max(c.trajectory.len());
                let gap_center = (0..n)
                    .map(|k| match (front, rear) {
                        (Some((f, fg)), Some((r, rg))) => {
                            Some(0.5 * (f[k].x - fg.length / 2.0 + r[k].x + rg.length / 2.0))
                        }
                        (None, Some((r, rg))) => Some(r[k].x + rg.length / 2.0 + standoff),
                        (Some((f, fg)), None) => Some(f[k].x - fg.length / 2.0 - standoff),
                        (None, None) => None,
                    })
                    .collect();
                Column {
                    kind: c.kind,
                    probability: c.probability,
                    interactive,
                    gap_center,
                }
            })
            .collect();
        Self {
            passive,
            columns,
            ego_geometry: world.ego.geometry,
            target_lateral: world.lane.target_center(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub collision: bool,
    /// Sample index (relative to the ego trajectory) of the first contact.
    pub first_collision: Option<usize>,
    pub min_sep: f64,
}

/// Checks the ego trajectory, aligned with scene sample `offset`, against
/// every predicted car under one column.
pub fn forward_simulate(ego: &[VehicleState], scene: &Scene, column: usize, offset: usize) -> SimOutcome {
    let col = &scene.columns[column];
    let mut min_sep = f64::INFINITY;
    let mut first_collision = None;
    let others = scene
        .passive
        .iter()
        .map(|(_, b)| b)
        .chain(col.interactive.as_ref().map(|(_, b)| b));
    let others: Vec<&Vec<OrientedBox>> = others.collect();
    for (k, s) in ego.iter().enumerate() {
        let e = footprint(s, &scene.ego_geometry);
        let mut hit = false;
        for b in &others {
            let Some(o) = b.get(offset + k) else { continue };
            if separation_lower_bound(&e, o) >= min_sep {
                continue;
            }
            if boxes_collide(&e, o) {
                hit = true;
                min_sep = 0.0;
                break;
            }
            min_sep = min_sep.min(min_separation(&e, o));
        }
        if hit && first_collision.is_none() {
            first_collision = Some(k);
        }
    }
    if first_collision.is_some() {
        min_sep = 0.0;
    }
    SimOutcome {
        collision: first_collision.is_some(),
        first_collision,
        min_sep,
    }
}

/// Largest magnitude of the third finite difference of lateral position.
fn max_lateral_jerk(traj: &[VehicleState], dt: f64) -> f64 {
    traj.windows(4)
        .map(|w| ((w[3].y - 3.0 * w[2].y + 3.0 * w[1].y - w[0].y) / dt.powi(3)).abs())
        .fold(0.0, f64::max)
}

pub fn evaluate(
    outcome: &SimOutcome,
    ego: &EgoIntention,
    scene: &Scene,
    column: usize,
    dt: f64,
    params: &GameParams,
) -> RewardVector {
    let risk = if outcome.collision {
        0.0
    } else {
        (outcome.min_sep / params.risk_distance).clamp(0.0, 1.0)
    };
    let last = ego.trajectory.len() - 1;
    let end = ego.trajectory[last];
    let lat = (end.y - scene.target_lateral) / params.success_lateral_scale;
    let long = scene.columns[column]
        .gap_center
        .get(last)
        .copied()
        .flatten()
        .map_or(0.0, |c| (end.x - c) / params.success_longitudinal_scale);
    let success = (-(lat * lat) - long * long).exp();
    let max_accel = ego.controls.iter().map(|u| u.accel.abs()).fold(0.0, f64::max);
    let comfort = 1.0
        - 0.5 * (max_accel / params.comfort_accel_limit).clamp(0.0, 1.0)
        - 0.5 * (max_lateral_jerk(&ego.trajectory, dt) / params.comfort_jerk_limit).clamp(0.0, 1.0);
    RewardVector::new(risk, success, comfort)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub reward: RewardVector,
    pub collision: bool,
    pub first_collision: Option<usize>,
    pub min_sep: f64,
    /// Outcome of the exit check, when one was run.
    pub exit_safe: Option<bool>,
}

impl Cell {
    pub fn plain(reward: RewardVector, collision: bool) -> Self {
        Self {
            reward,
            collision,
            first_collision: collision.then_some(0),
            min_sep: if collision { 0.0 } else { f64::INFINITY },
            exit_safe: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub class: IntentionClass,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameMatrix {
    pub rows: Vec<MatrixRow>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub forward_simulations: usize,
    pub exit_checks: usize,
}

/// Fills the matrix and runs the exit-maneuver check for any cell whose
/// first contact lies beyond the reaction time.
pub fn build_matrix(
    intentions: &[EgoIntention],
    scene: &Scene,
    model: &EgoModel,
    params: &GameParams,
) -> (GameMatrix, BuildStats) {
    let ttr_step = (params.ttr / model.dt).round() as usize;
    let mut stats = BuildStats {
        forward_simulations: 0,
        exit_checks: 0,
    };
    let rows = intentions
        .iter()
        .map(|ego| {
            let mut exit: Option<EgoIntention> = None;
            let cells = (0..scene.columns.len())
                .map(|c| {
                    stats.forward_simulations += 1;
                    let out = forward_simulate(&ego.trajectory, scene, c, 0);
                    let reward = evaluate(&out, ego, scene, c, model.dt, params);
                    let exit_safe = match out.first_collision {
                        Some(k) if k > ttr_step && !ego.class.needs_clean_sweep() => {
                            let start = ego.trajectory[ttr_step];
                            let abort = exit.get_or_insert_with(|| model.abort(&start, params));
                            stats.exit_checks += 1;
                            Some(!forward_simulate(&abort.trajectory, scene, c, ttr_step).collision)
                        }
                        _ => None,
                    };
                    Cell {
                        reward,
                        collision: out.collision,
                        first_collision: out.first_collision,
                        min_sep: out.min_sep,
                        exit_safe,
                    }
                })
                .collect();
            MatrixRow { class: ego.class, cells }
        })
        .collect();
    let probabilities = scene.columns.iter().map(|c| c.probability).collect();
    (GameMatrix { rows, probabilities }, stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub surviving: Vec<usize>,
    pub pruned: Vec<usize>,
}

/// Keeps rows that are safe in every column, either outright or because the
/// contact comes after the reaction time and the exit maneuver clears it.
pub fn prune_unsafe(matrix: &GameMatrix, ttr_step: usize) -> PruneReport {
    let (mut surviving, mut pruned) = (Vec::new(), Vec::new());
    for (i, row) in matrix.rows.iter().enumerate() {
        let ok = row.cells.iter().all(|c| {
            if !c.collision {
                return true;
            }
            if row.class.needs_clean_sweep() {
                return false;
            }
            c.first_collision.is_some_and(|k| k > ttr_step) && c.exit_safe == Some(true)
        });
        if ok {
            surviving.push(i);
        } else {
            pruned.push(i);
        }
    }
    PruneReport { surviving, pruned }
}

/// Probability-weighted reward vector of a row.
pub fn expected_reward(row: &MatrixRow, probabilities: &[f64]) -> RewardVector {
    let total: f64 = probabilities.iter().sum();
    let mut e = RewardVector::default();
    for (cell, &p) in row.cells.iter().zip(probabilities) {
        let w = p / total;
        e.risk += w * cell.reward.risk;
        e.success += w * cell.reward.success;
        e.comfort += w * cell.reward.comfort;
    }
    e
}

/// Best row among `candidates`: Pareto filter on expected vectors, then the
/// largest component sum, then higher risk, then class preference, then the
/// lower row index.
pub fn select_intention(matrix: &GameMatrix, candidates: &[usize]) -> Option<usize> {
    let expected: Vec<(usize, RewardVector)> = candidates
        .iter()
        .map(|&i| (i, expected_reward(&matrix.rows[i], &matrix.probabilities)))
        .collect();
    let frontier = expected
        .iter()
        .filter(|(_, e)| !expected.iter().any(|(_, o)| o.dominates(e)));
    frontier
        .min_by(|(i, a), (j, b)| {
            b.l1()
                .total_cmp(&a.l1())
                .then_with(|| b.risk.total_cmp(&a.risk))
                .then_with(|| matrix.rows[*i].class.preference().cmp(&matrix.rows[*j].class.preference()))
                .then_with(|| i.cmp(j))
        })
        .map(|(i, _)| *i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameOutcome {
    pub intention: EgoIntention,
    pub intentions: Vec<EgoIntention>,
    pub matrix: GameMatrix,
    pub prune: PruneReport,
    /// Index into `intentions`, or `None` when the fallback was used.
    pub chosen: Option<usize>,
    pub stats: BuildStats,
}

/// The whole fine-grained stage for one target gap.
pub fn play(world: &WorldState, gap: &Gap, predictions: &PredictionSet, params: &GameParams) -> GameOutcome {
    let model = EgoModel::of(world);
    let intentions = sample_ego_intentions(world, gap, params.n_intentions, params);
    let scene = Scene::new(world, gap, predictions);
    let (matrix, stats) = build_matrix(&intentions, &scene, &model, params);
    let prune = prune_unsafe(&matrix, (params.ttr / model.dt).round() as usize);
    let chosen = select_intention(&matrix, &prune.surviving);
    let intention = match chosen {
        Some(i) => intentions[i].clone(),
        None => model.fallback(&world.ego.state, params),
    };
    GameOutcome {
        intention,
        intentions,
        matrix,
        prune,
        chosen,
        stats,
    }
}
