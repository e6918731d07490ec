//! Seeded trials, the depth × density ablation, and runtime benchmarks.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::Result;
use crate::gap_selector::{enumerate_gaps, search_gap_tree, tree_nodes, GapId};
use crate::intention_game::play;
use crate::planner::{decide_in_place, PlannerConfig, PlannerState};
use crate::prediction::predict;
use crate::trace::{EventKind, TraceEvent};
use crate::world::{default_gap_noise, ego_merged, generate_scenario, step_world, ScenarioConfig, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialEnd {
    Merged,
    Collision,
    /// The ego reached the end of its lane without merging.
    WindowExhausted,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub depth: usize,
    pub mean_gap: f64,
    pub success: bool,
    pub merge_time: Option<f64>,
    pub collision: bool,
    pub min_sep: f64,
    pub end: TrialEnd,
    pub traffic_collisions: usize,
    pub replans: usize,
    /// Target gap chosen at every replan.
    pub gap_trace: Vec<GapId>,
    /// Mean wall-clock cost per replan (ms). Not deterministic.
    pub t_gaptree_ms: f64,
    pub t_matrix_ms: f64,
    pub t_loop_ms: f64,
}

impl TrialResult {
    /// Copy with the wall-clock fields zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        Self {
            t_gaptree_ms: 0.0,
            t_matrix_ms: 0.0,
            t_loop_ms: 0.0,
            ..self.clone()
        }
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn snapshot(world: &WorldState) -> TraceEvent {
    let traffic: Vec<_> = world
        .traffic
        .iter()
        .map(|a| json!({"id": a.id, "x": a.vehicle.state.x, "speed": a.vehicle.state.speed, "mode": a.behavior.mode}))
        .collect();
    let e = &world.ego.state;
    TraceEvent::new(
        world.time,
        EventKind::StateSnapshot,
        json!({
            "ego": {"x": e.x, "y": e.y, "heading": e.heading, "speed": e.speed},
            "traffic": traffic,
            "transitions": [],
        }),
    )
}

/// Runs one trial and keeps its trace.
pub fn run_trial_traced(
    scenario: &ScenarioConfig,
    planner: &PlannerConfig,
    seed: u64,
) -> Result<(TrialResult, Vec<TraceEvent>)> {
    planner.validate()?;
    let scenario = ScenarioConfig {
        seed,
        ..scenario.clone()
    };
    let mut world = generate_scenario(&scenario)?;
    let mut state = PlannerState::new(planner);
    let mut events = vec![snapshot(&world)];
    let max_steps = (scenario.time_limit / scenario.dt).round() as u64;
    let mut min_sep = world.ego_min_separation();
    let mut gap_trace = Vec::new();
    let (mut t_tree, mut t_matrix, mut t_loop) = (Duration::ZERO, Duration::ZERO, Duration::ZERO);
    let mut traffic_collisions = 0;

    let end = loop {
        if ego_merged(&world) {
            break TrialEnd::Merged;
        }
        if world.step >= max_steps {
            break TrialEnd::TimeLimit;
        }
        if world.ego.state.x >= world.lane.merge_lane_end {
            break TrialEnd::WindowExhausted;
        }
        let decision = decide_in_place(&world, &mut state, planner)?;
        if let Some(r) = &decision.replan {
            gap_trace.push(r.target);
            t_tree += r.timings.gap_tree;
            t_matrix += r.timings.matrix_game;
            t_loop += r.timings.total;
        }
        events.extend(decision.events);
        let (next, step_events) = step_world(&world, decision.control, scenario.dt);
        world = next;
        let mut ego_hit = false;
        for e in &step_events {
            if e.kind == EventKind::Collision {
                if e.payload["a"] == "ego" {
                    ego_hit = true;
                } else {
                    traffic_collisions += 1;
                }
            }
        }
        events.extend(step_events);
        min_sep = min_sep.min(world.ego_min_separation());
        if ego_hit {
            break TrialEnd::Collision;
        }
    };

    let replans = gap_trace.len();
    let per = |d: Duration| if replans == 0 { 0.0 } else { ms(d) / replans as f64 };
    let success = end == TrialEnd::Merged;
    let result = TrialResult {
        seed,
        depth: planner.depth,
        mean_gap: scenario.mean_gap,
        success,
        merge_time: success.then_some(world.time),
        collision: end == TrialEnd::Collision,
        min_sep,
        end,
        traffic_collisions,
        replans,
        gap_trace,
        t_gaptree_ms: per(t_tree),
        t_matrix_ms: per(t_matrix),
        t_loop_ms: per(t_loop),
    };
    Ok((result, events))
}

pub fn run_trial(scenario: &ScenarioConfig, planner: &PlannerConfig, seed: u64) -> Result<TrialResult> {
    run_trial_traced(scenario, planner, seed).map(|(r, _)| r)
}

/// Scenario at another density, keeping the noise-to-gap ratio of `base`.
pub fn scenario_at_gap(base: &ScenarioConfig, mean_gap: f64) -> ScenarioConfig {
    if mean_gap == base.mean_gap {
        return base.clone();
    }
    let noise = if base.gap_noise_halfwidth == default_gap_noise(base.mean_gap) {
        default_gap_noise(mean_gap)
    } else {
        base.gap_noise_halfwidth / base.mean_gap * mean_gap
    };
    ScenarioConfig {
        mean_gap,
        gap_noise_halfwidth: noise,
        ..base.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub scenario: ScenarioConfig,
    pub planner: PlannerConfig,
    pub depths: Vec<usize>,
    pub gaps: Vec<f64>,
    pub trials: usize,
    pub seed_batches: usize,
    /// Per-cell seeds. When empty, `trials` consecutive seeds from the
    /// scenario seed.
    #[serde(default)]
    pub seed_list: Vec<u64>,
}

impl AblationSpec {
    pub fn seeds(&self) -> Vec<u64> {
        if !self.seed_list.is_empty() {
            return self.seed_list.clone();
        }
        (0..self.trials as u64).map(|i| self.scenario.seed + i).collect()
    }
}

impl Default for AblationSpec {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            planner: PlannerConfig::default(),
            depths: vec![1, 2, 3],
            gaps: vec![2.4, 4.8, 9.6],
            trials: 20,
            seed_batches: 5,
            seed_list: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub depth: usize,
    pub mean_gap: f64,
    pub trials: usize,
    pub successes: usize,
    pub collisions: usize,
    pub mean_merge_time: Option<f64>,
    pub std_err: Option<f64>,
}

/// Mean and one-sided 95% bounds of a paired difference from batch means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    pub batches: usize,
    pub pairs: usize,
    pub mean: f64,
    pub std_err: f64,
    /// One-sided 95% lower confidence bound.
    pub lower: f64,
    /// One-sided 95% upper confidence bound.
    pub upper: f64,
}

/// Splits `values` (already in seed order) into `batches` contiguous runs of
/// near-equal size and treats each run's mean as one observation. Batches
/// with no values are dropped.
pub fn batch_means(values: &[Option<f64>], batches: usize) -> BatchMeans {
    let n = values.len();
    let batches = batches.max(1).min(n.max(1));
    let mut means = Vec::new();
    for b in 0..batches {
        let (lo, hi) = (b * n / batches, (b + 1) * n / batches);
        let xs: Vec<f64> = values[lo..hi].iter().flatten().copied().collect();
        if !xs.is_empty() {
            means.push(xs.iter().sum::<f64>() / xs.len() as f64);
        }
    }
    let pairs = values.iter().flatten().count();
    let k = means.len();
    let mean = if k == 0 { f64::NAN } else { means.iter().sum::<f64>() / k as f64 };
    if k < 2 {
        return BatchMeans {
            batches: k,
            pairs,
            mean,
            std_err: f64::NAN,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        };
    }
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    let std_err = (var / k as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (k - 1) as f64)
        .expect("valid degrees of freedom")
        .inverse_cdf(0.95);
    BatchMeans {
        batches: k,
        pairs,
        mean,
        std_err,
        lower: mean - t * std_err,
        upper: mean + t * std_err,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDiff {
    pub mean_gap: f64,
    /// Difference is `depth_b - depth_a` in merge time.
    pub depth_a: usize,
    pub depth_b: usize,
    pub stats: BatchMeans,
    /// Fraction of seeds whose target-gap sequences are identical.
    pub identical_traces: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub results: Vec<TrialResult>,
    pub cells: Vec<CellSummary>,
    pub diffs: Vec<PairedDiff>,
}

impl AblationReport {
    pub fn cell(&self, depth: usize, mean_gap: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.depth == depth && c.mean_gap == mean_gap)
    }

    pub fn diff(&self, mean_gap: f64, depth_a: usize, depth_b: usize) -> Option<&PairedDiff> {
        self.diffs
            .iter()
            .find(|d| d.mean_gap == mean_gap && d.depth_a == depth_a && d.depth_b == depth_b)
    }
}

fn summarize(depth: usize, mean_gap: f64, rs: &[&TrialResult]) -> CellSummary {
    let times: Vec<f64> = rs.iter().filter_map(|r| r.merge_time).collect();
    let n = times.len();
    let mean = (n > 0).then(|| times.iter().sum::<f64>() / n as f64);
    let std_err = mean.filter(|_| n > 1).map(|m| {
        let var = times.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    });
    CellSummary {
        depth,
        mean_gap,
        trials: rs.len(),
        successes: n,
        collisions: rs.iter().filter(|r| r.collision).count(),
        mean_merge_time: mean,
        std_err,
    }
}

/// Aggregates trial results, independent of the order they arrive in.
pub fn aggregate(mut results: Vec<TrialResult>, spec: &AblationSpec) -> AblationReport {
    results.sort_by(|a, b| {
        a.mean_gap
            .total_cmp(&b.mean_gap)
            .then(a.depth.cmp(&b.depth))
            .then(a.seed.cmp(&b.seed))
    });
    let pick = |depth: usize, gap: f64| -> Vec<&TrialResult> {
        results.iter().filter(|r| r.depth == depth && r.mean_gap == gap).collect()
    };
    let mut cells = Vec::new();
    let mut diffs = Vec::new();
    for &gap in &spec.gaps {
        for &depth in &spec.depths {
            cells.push(summarize(depth, gap, &pick(depth, gap)));
        }
        for w in spec.depths.windows(2) {
            let (a, b) = (pick(w[0], gap), pick(w[1], gap));
            let paired: Vec<Option<f64>> = a
                .iter()
                .map(|ra| {
                    let rb = b.iter().find(|r| r.seed == ra.seed)?;
                    Some(rb.merge_time? - ra.merge_time?)
                })
                .collect();
            let same = a
                .iter()
                .filter(|ra| b.iter().any(|rb| rb.seed == ra.seed && rb.gap_trace == ra.gap_trace))
                .count();
            diffs.push(PairedDiff {
                mean_gap: gap,
                depth_a: w[0],
                depth_b: w[1],
                stats: batch_means(&paired, spec.seed_batches),
                identical_traces: if a.is_empty() { f64::NAN } else { same as f64 / a.len() as f64 },
            });
        }
    }
    AblationReport { results, cells, diffs }
}

/// Every (gap, depth, seed) trial, run concurrently on the current rayon
/// pool. The same seeds are used at every depth.
pub fn run_ablation(spec: &AblationSpec) -> Result<AblationReport> {
    let seeds = spec.seeds();
    let mut jobs = Vec::new();
    for &g in &spec.gaps {
        for &d in &spec.depths {
            jobs.extend(seeds.iter().map(|&s| (g, d, s)));
        }
    }
    let results = jobs
        .par_iter()
        .map(|&(gap, depth, seed)| {
            let scenario = scenario_at_gap(&spec.scenario, gap);
            let planner = PlannerConfig {
                depth,
                ..spec.planner
            };
            run_trial(&scenario, &planner, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(results, spec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub phase: String,
    pub median_ms: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Mean number of candidate gaps per replan.
    pub mean_gaps: f64,
    /// Matrix cells for the chosen gap, summed over replans.
    pub single_cells: usize,
    /// Matrix cells when every gap gets its own game, summed over replans.
    pub all_gap_cells: usize,
    pub cell_multiple: f64,
    pub time_multiple: f64,
}

impl BenchReport {
    pub fn median(&self, phase: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.phase == phase).map(|r| r.median_ms)
    }
}

pub fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Times each pipeline phase over at least `replans` replans, running
/// seeded trials back to back. Single-threaded.
pub fn run_benchmark(scenario: &ScenarioConfig, planner: &PlannerConfig, replans: usize) -> Result<BenchReport> {
    planner.validate()?;
    let (mut tree2, mut tree3, mut matrix, mut total, mut all_gaps) = (vec![], vec![], vec![], vec![], vec![]);
    let (mut single_cells, mut all_gap_cells, mut gap_count) = (0usize, 0usize, 0usize);
    let mut seed = scenario.seed;
    while total.len() < replans {
        let sc = ScenarioConfig {
            seed,
            ..scenario.clone()
        };
        seed += 1;
        let mut world = generate_scenario(&sc)?;
        let mut state = PlannerState::new(planner);
        let max_steps = (sc.time_limit / sc.dt).round() as u64;
        while total.len() < replans && !ego_merged(&world) && world.step < max_steps {
            let beliefs = state.beliefs.clone();
            let d = decide_in_place(&world, &mut state, planner)?;
            if let Some(r) = &d.replan {
                total.push(ms(r.timings.total));
                matrix.push(ms(r.timings.matrix_game));

                let gaps = enumerate_gaps(&world);
                let nodes = tree_nodes(&gaps, &beliefs, world.ego.geometry.length, &planner.gap);
                for (depth, out) in [(2, &mut tree2), (3, &mut tree3)] {
                    let t = Instant::now();
                    search_gap_tree(&nodes, depth, &planner.gap)?;
                    out.push(ms(t.elapsed()));
                }

                let horizon = planner.game.ttr.max(planner.replan_interval) + planner.game.horizon;
                let t = Instant::now();
                for gap in &gaps {
                    let p = gap.id.rear.map_or(1.0, |a| beliefs.get(a));
                    let preds = predict(&world, gap, p, None, horizon, world.dt, &planner.prediction);
                    let out = play(&world, gap, &preds, &planner.game);
                    all_gap_cells += out.stats.forward_simulations;
                    if gap.id == r.target {
                        single_cells += out.stats.forward_simulations;
                    }
                }
                all_gaps.push(ms(t.elapsed()));
                gap_count += gaps.len();
            }
            let (next, step_events) = step_world(&world, d.control, sc.dt);
            world = next;
            if step_events.iter().any(|e| e.kind == EventKind::Collision) {
                break;
            }
        }
    }
    let n = total.len();
    let row = |phase: &str, xs: &mut Vec<f64>| BenchRow {
        phase: phase.to_string(),
        median_ms: median(xs),
        samples: xs.len(),
    };
    let mean_matrix = matrix.iter().sum::<f64>() / n as f64;
    let mean_all = all_gaps.iter().sum::<f64>() / n as f64;
    Ok(BenchReport {
        rows: vec![
            row("gap-tree-d2", &mut tree2),
            row("gap-tree-d3", &mut tree3),
            row("matrix-game", &mut matrix),
            row("full-loop", &mut total),
            row("matrix-game-all-gaps", &mut all_gaps),
        ],
        mean_gaps: gap_count as f64 / n as f64,
        single_cells,
        all_gap_cells,
        cell_multiple: all_gap_cells as f64 / single_cells as f64,
        time_multiple: mean_all / mean_matrix,
    })
}
