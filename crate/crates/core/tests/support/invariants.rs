//! One property per module invariant. Each runs `cases` deterministic
//! random cases and reports the first counterexample.

use std::collections::BTreeMap;

use merge_game::agents::{agent_decide, mode_for_penetration, AgentMode, AgentThresholds, ThresholdRanges};
use merge_game::dynamics::{
    boxes_collide, min_separation, step_bicycle, ControlInput, ControlLimits, OrientedBox,
    VehicleGeometry, VehicleState,
};
use merge_game::gap_selector::{
    enumerate_gaps, p_merge, p_merge_given_distance, p_merge_given_gap, search_gap_tree, update_belief, Gap,
    GapBelief, GapId, GapModelParams,
};
use merge_game::harness::{aggregate, run_trial, run_trial_traced, scenario_at_gap, AblationSpec, TrialEnd, TrialResult};
use merge_game::intention_game::{forward_simulate, play, select_intention, GameMatrix, GameParams, Scene};
use merge_game::planner::{decide, decide_in_place, PlannerConfig};
use merge_game::prediction::{intention_probabilities, predict, PredictionParams, TrafficIntention};
use merge_game::trace::{write_jsonl, EventKind};
use merge_game::world::{generate_scenario, step_world, AgentId, ScenarioConfig};
use proptest::prelude::*;
use proptest::sample::subsequence;

use super::*;

pub type Invariant = (&'static str, fn(u32) -> Result<(), String>);

pub const ALL: &[Invariant] = &[
    ("dynamics: collision test symmetric and rigid-motion invariant", collision_symmetric_and_rigid),
    ("dynamics: zero separation iff collision", separation_zero_iff_collision),
    ("dynamics: straight steps keep heading, coasting keeps speed", bicycle_preserves_heading_and_speed),
    ("dynamics: constant steer traces the analytic circle", bicycle_circle_radius),
    ("dynamics: speed never negative", speed_never_negative),
    ("world: identical inputs give identical traces", trace_determinism),
    ("world: traffic order preserved", traffic_order_preserved),
    ("world: time advances by dt", time_advances_by_dt),
    ("world: ego-absent platoon never collides", platoon_never_collides),
    ("agents: mode monotone in penetration", mode_monotone_in_penetration),
    ("agents: inverted thresholds never block", inverted_thresholds_never_block),
    ("agents: yielding accel at most normal accel", yielding_accel_at_most_normal),
    ("agents: rising penetration gives normal, blocking, yielding", rising_penetration_sequence),
    ("agents: decisions are pure", agent_decide_is_pure),
    ("prediction: probabilities form a distribution", probabilities_form_distribution),
    ("prediction: brake probability increasing in belief", brake_increasing_in_belief),
    ("prediction: even continuity is inert", even_continuity_is_inert),
    ("prediction: passive rollouts ignore the ego", passive_ignores_ego),
    ("gap_selector: probabilities in range and shaped", gap_probabilities_shaped),
    ("gap_selector: tree value nondecreasing in depth", tree_value_monotone_in_depth),
    ("gap_selector: tree search equals exhaustive enumeration", tree_matches_brute_force),
    ("gap_selector: beliefs stay in [0, 1]", beliefs_stay_in_unit_interval),
    ("gap_selector: merge probability monotone in yield belief", p_merge_monotone_in_yield),
    ("intention_game: survivors clear the reaction window", survivors_clear_reaction_window),
    ("intention_game: selection equals enumeration", selection_matches_enumeration),
    ("intention_game: selection invariant under relabeling", selection_invariant_under_permutation),
    ("intention_game: selection invariant under probability scaling", selection_invariant_under_scaling),
    ("intention_game: ego never collides in seeded trials", ego_never_collides),
    ("planner: decide is deterministic", decide_is_deterministic),
    ("planner: beliefs change only at replans for the engaged car", beliefs_change_only_for_engaged),
    ("planner: private thresholds are never read", thresholds_never_read),
    ("harness: depths share scenarios and thresholds", depths_share_scenarios),
    ("harness: aggregation ignores arrival order", aggregation_order_free),
];

// ---------------------------------------------------------------------------
// dynamics

fn boxes() -> impl Strategy<Value = OrientedBox> {
    (-10.0..10.0f64, -10.0..10.0f64, 0.2..4.0f64, 0.2..2.0f64, -3.2..3.2f64)
        .prop_map(|(x, y, hl, hw, h)| OrientedBox::new((x, y), hl, hw, h))
}

fn moved(b: &OrientedBox, angle: f64, dx: f64, dy: f64) -> OrientedBox {
    let (s, c) = angle.sin_cos();
    let (x, y) = b.center;
    OrientedBox::new(
        (c * x - s * y + dx, s * x + c * y + dy),
        b.half_length,
        b.half_width,
        b.heading + angle,
    )
}

fn shrunk(b: &OrientedBox, by: f64) -> OrientedBox {
    OrientedBox::new(b.center, b.half_length - by, b.half_width - by, b.heading)
}

pub fn collision_symmetric_and_rigid(cases: u32) -> Result<(), String> {
    check(cases, (boxes(), boxes(), -3.2..3.2f64, -50.0..50.0f64, -50.0..50.0f64), |(a, b, r, dx, dy)| {
        let hit = boxes_collide(&a, &b);
        prop_assert_eq!(hit, boxes_collide(&b, &a));
        // Pairs within rounding of touching may flip under a transform.
        let robust = if hit {
            boxes_collide(&shrunk(&a, 1e-6), &shrunk(&b, 1e-6))
        } else {
            min_separation(&a, &b) > 1e-6
        };
        if robust {
            prop_assert_eq!(hit, boxes_collide(&moved(&a, r, dx, dy), &moved(&b, r, dx, dy)));
        }
        Ok(())
    })
}

pub fn separation_zero_iff_collision(cases: u32) -> Result<(), String> {
    check(cases, (boxes(), boxes()), |(a, b)| {
        prop_assert_eq!(min_separation(&a, &b) == 0.0, boxes_collide(&a, &b));
        Ok(())
    })
}

fn states() -> impl Strategy<Value = VehicleState> {
    (-100.0..100.0f64, -5.0..5.0f64, -3.1..3.1f64, 0.0..15.0f64).prop_map(|(x, y, h, v)| VehicleState::new(x, y, h, v))
}

pub fn bicycle_preserves_heading_and_speed(cases: u32) -> Result<(), String> {
    let g = VehicleGeometry::default();
    let l = ControlLimits::default();
    check(cases, (states(), -4.0..3.0f64, -0.5..0.5f64), |(s, accel, steer)| {
        let straight = step_bicycle(&s, ControlInput::new(accel, 0.0), &g, &l, 0.1).state;
        prop_assert_eq!(straight.heading, s.heading);
        let coast = step_bicycle(&s, ControlInput::new(0.0, steer), &g, &l, 0.1).state;
        prop_assert_eq!(coast.speed, s.speed);
        Ok(())
    })
}

fn circumradius(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    let d = |p: (f64, f64), q: (f64, f64)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
    let (ab, bc, ca) = (d(a, b), d(b, c), d(c, a));
    let area2 = ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1)).abs();
    ab * bc * ca / (2.0 * area2)
}

pub fn bicycle_circle_radius(cases: u32) -> Result<(), String> {
    let g = VehicleGeometry::default();
    let l = ControlLimits::default();
    check(cases, (0.05..0.5f64, any::<bool>(), 2.0..10.0f64), |(steer, left, speed)| {
        let steer = if left { steer } else { -steer };
        let dt = 1e-4;
        let beta = g.slip_angle(steer);
        let radius = g.rear_axle_to_cg / beta.sin().abs();
        // A third of a turn.
        let steps = (radius * 2.0 * std::f64::consts::PI / 3.0 / speed / dt) as usize;
        let mut s = VehicleState::new(0.0, 0.0, 0.0, speed);
        let mut pts = vec![(s.x, s.y)];
        for k in 1..=steps {
            s = step_bicycle(&s, ControlInput::new(0.0, steer), &g, &l, dt).state;
            if k == steps / 2 || k == steps {
                pts.push((s.x, s.y));
            }
        }
        let r = circumradius(pts[0], pts[1], pts[2]);
        prop_assert!((r - radius).abs() <= 0.01 * radius, "radius {} vs {}", r, radius);
        Ok(())
    })
}

pub fn speed_never_negative(cases: u32) -> Result<(), String> {
    let g = VehicleGeometry::default();
    let l = ControlLimits::default();
    let controls = prop::collection::vec((-10.0..10.0f64, -1.0..1.0f64), 1..80);
    check(cases, (states(), controls), |(mut s, us)| {
        for (a, d) in us {
            s = step_bicycle(&s, ControlInput::new(a, d), &g, &l, 0.1).state;
            prop_assert!(s.speed >= 0.0);
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// world

fn trace_bytes(scenario: &ScenarioConfig, planner: &PlannerConfig, seed: u64) -> Vec<u8> {
    let (_, events) = run_trial_traced(scenario, planner, seed).expect("trial");
    let mut out = Vec::new();
    write_jsonl(&events, &mut out).expect("in-memory write");
    out
}

pub fn trace_determinism(cases: u32) -> Result<(), String> {
    check(cases, scene_params(), |(seed, gap, depth, _)| {
        let s = ScenarioConfig {
            time_limit: 20.0,
            ..ScenarioConfig::with_mean_gap(gap)
        };
        let p = PlannerConfig::with_depth(depth);
        prop_assert_eq!(trace_bytes(&s, &p, seed), trace_bytes(&s, &p, seed));
        Ok(())
    })
}

pub fn traffic_order_preserved(cases: u32) -> Result<(), String> {
    check(cases, scene_params(), |(seed, gap, depth, steps)| {
        let p = PlannerConfig::with_depth(depth);
        let (mut w, mut state) = advance(&scenario(seed, gap), &p, steps);
        for _ in 0..100 {
            for pair in w.traffic.windows(2) {
                prop_assert!(pair[0].vehicle.state.x > pair[1].vehicle.state.x);
            }
            let d = decide_in_place(&w, &mut state, &p).expect("tick");
            w = step_world(&w, d.control, w.dt).0;
        }
        Ok(())
    })
}

pub fn time_advances_by_dt(cases: u32) -> Result<(), String> {
    check(cases, (scene_params(), -4.0..3.0f64, -0.5..0.5f64), |((seed, gap, _, _), a, d)| {
        let mut w = generate_scenario(&scenario(seed, gap)).expect("scenario");
        for k in 0..50u64 {
            let next = step_world(&w, ControlInput::new(a, d), w.dt).0;
            prop_assert_eq!(next.time, w.time + w.dt);
            prop_assert_eq!(next.step, k + 1);
            w = next;
        }
        Ok(())
    })
}

pub fn platoon_never_collides(cases: u32) -> Result<(), String> {
    check(cases, (0..10_000u64, 2.4..9.6f64, 1..=30usize), |(seed, gap, n)| {
        let config = ScenarioConfig {
            seed,
            n_traffic: n,
            ..ScenarioConfig::with_mean_gap(gap)
        };
        let mut w = generate_scenario(&config).expect("scenario");
        // Park the ego far outside the road.
        w.ego.state = VehicleState::new(-1e4, -100.0, 0.0, 0.0);
        for _ in 0..300 {
            let (next, events) = step_world(&w, ControlInput::new(0.0, 0.0), w.dt);
            prop_assert!(!events.iter().any(|e| e.kind == EventKind::Collision));
            w = next;
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// agents

fn thresholds() -> impl Strategy<Value = AgentThresholds> {
    let r = ThresholdRanges::default();
    (r.reaction.0..r.reaction.1, r.yield_at.0..r.yield_at.1)
        .prop_map(|(reaction, yield_at)| AgentThresholds { reaction, yield_at })
}

pub fn mode_monotone_in_penetration(cases: u32) -> Result<(), String> {
    check(cases, thresholds(), |t| {
        let grid: Vec<f64> = (0..=160).map(|k| -3.0 + 0.03 * k as f64).collect();
        let modes: Vec<AgentMode> = grid.iter().map(|&p| mode_for_penetration(p, &t)).collect();
        prop_assert!(modes.windows(2).all(|w| w[0] <= w[1]));
        for (&p, &m) in grid.iter().zip(&modes) {
            prop_assert_eq!(m, mode_for_penetration(p, &t));
        }
        Ok(())
    })
}

pub fn inverted_thresholds_never_block(cases: u32) -> Result<(), String> {
    check(cases, thresholds(), |t| {
        let t = if t.yield_at < t.reaction {
            t
        } else {
            AgentThresholds {
                reaction: t.yield_at,
                yield_at: t.reaction - 1e-3,
            }
        };
        let grid: Vec<f64> = (0..=200).map(|k| -3.0 + 0.025 * k as f64).collect();
        let modes: Vec<AgentMode> = grid.iter().map(|&p| mode_for_penetration(p, &t)).collect();
        prop_assert!(!modes.contains(&AgentMode::Blocking));
        prop_assert_eq!(compress(&modes), vec![AgentMode::Normal, AgentMode::Yielding]);
        Ok(())
    })
}

pub fn yielding_accel_at_most_normal(cases: u32) -> Result<(), String> {
    let strategy = (0..10_000u64, 4.8..12.0f64, 0.05..0.95f64, -1.5..0.0f64, 0.0..6.0f64, 0.0..6.0f64);
    check(cases, strategy, |(seed, gap, frac, pen, v_agent, v_ego)| {
        let config = ScenarioConfig {
            seed,
            n_traffic: 4,
            ..ScenarioConfig::with_mean_gap(gap)
        };
        let mut w = generate_scenario(&config).expect("scenario");
        let i = 2;
        w.traffic[i].vehicle.state.speed = v_agent;
        let front = w.traffic[i].vehicle.front_x();
        let lead_rear = w.traffic[i - 1].vehicle.rear_x();
        let half = w.ego.geometry.length / 2.0;
        // Ego rear somewhere between the agent's bumper and the lead.
        let rear = front + frac * (lead_rear - front - 2.0 * half).max(0.01);
        w.ego.state = VehicleState::new(rear + half, pen - w.ego.geometry.width / 2.0, 0.0, v_ego);
        let id = w.traffic[i].id;
        let with = |t: AgentThresholds| {
            let mut w2 = w.clone();
            w2.traffic[i].behavior.thresholds = t;
            agent_decide(&w2, id).expect("agent")
        };
        let yielding = with(AgentThresholds {
            reaction: -10.0,
            yield_at: -5.0,
        });
        let normal = with(AgentThresholds {
            reaction: 10.0,
            yield_at: 20.0,
        });
        prop_assert_eq!(yielding.mode, AgentMode::Yielding);
        prop_assert_eq!(normal.mode, AgentMode::Normal);
        prop_assert!(yielding.control.accel <= normal.control.accel);
        Ok(())
    })
}

pub fn rising_penetration_sequence(cases: u32) -> Result<(), String> {
    check(cases, (-0.8..0.3f64, 0.05..0.8f64), |(reaction, band)| {
        let t = AgentThresholds {
            reaction,
            yield_at: reaction + band,
        };
        let modes = scripted_modes(t, ramp(t.yield_at + 0.2, 3.0), 5.0);
        prop_assert_eq!(
            compress(&modes),
            vec![AgentMode::Normal, AgentMode::Blocking, AgentMode::Yielding]
        );
        Ok(())
    })
}

pub fn agent_decide_is_pure(cases: u32) -> Result<(), String> {
    check(cases, scene_params(), |(seed, gap, depth, steps)| {
        let (w, _) = advance(&scenario(seed, gap), &PlannerConfig::with_depth(depth), steps);
        for a in &w.traffic {
            prop_assert_eq!(agent_decide(&w, a.id), agent_decide(&w, a.id));
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// prediction

fn previous() -> impl Strategy<Value = Option<TrafficIntention>> {
    prop_oneof![Just(None), Just(Some(TrafficIntention::Maintain)), Just(Some(TrafficIntention::Brake))]
}

const OPEN: std::ops::Range<f64> = 1e-6..(1.0 - 1e-6);

pub fn probabilities_form_distribution(cases: u32) -> Result<(), String> {
    check(cases, (OPEN, previous(), OPEN), |(p, prev, c)| {
        let (m, b) = intention_probabilities(p, prev, c);
        prop_assert!((m + b - 1.0).abs() <= 1e-15);
        prop_assert!(m > 0.0 && m < 1.0 && b > 0.0 && b < 1.0);
        Ok(())
    })
}

pub fn brake_increasing_in_belief(cases: u32) -> Result<(), String> {
    check(cases, (OPEN, OPEN, previous(), 0.01..0.99f64), |(a, b, prev, c)| {
        prop_assume!((a - b).abs() > 1e-9);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(intention_probabilities(lo, prev, c).1 < intention_probabilities(hi, prev, c).1);
        Ok(())
    })
}

pub fn even_continuity_is_inert(cases: u32) -> Result<(), String> {
    check(cases, (0.0..=1.0f64, previous()), |(p, prev)| {
        let (m, b) = intention_probabilities(p, prev, 0.5);
        prop_assert_eq!(b, p);
        prop_assert_eq!(m, 1.0 - p);
        Ok(())
    })
}

pub fn passive_ignores_ego(cases: u32) -> Result<(), String> {
    check(cases, (scene_params(), states()), |((seed, gap, _, _), ego)| {
        let w = generate_scenario(&scenario(seed, gap)).expect("scenario");
        let mut moved = w.clone();
        moved.ego.state = ego;
        let params = PredictionParams::default();
        for g in enumerate_gaps(&w) {
            let a = predict(&w, &g, 0.5, None, 3.0, 0.1, &params);
            let b = predict(&moved, &g, 0.5, None, 3.0, 0.1, &params);
            prop_assert_eq!(a.passive, b.passive);
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// gap_selector

pub fn gap_probabilities_shaped(cases: u32) -> Result<(), String> {
    let p = GapModelParams::default();
    check(cases, (-200.0..200.0f64, -200.0..200.0f64, 0.0..30.0f64, 0.01..5.0f64), |(d1, d2, g, dg)| {
        for d in [d1, d2] {
            for ahead in [false, true] {
                let v = p_merge_given_distance(d, ahead, &p);
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        let (a, b) = (p_merge_given_gap(g, 4.8, &p), p_merge_given_gap(g + dg, 4.8, &p));
        prop_assert!((0.0..=1.0).contains(&a) && a < b);
        prop_assert_eq!(p_merge_given_distance(p.d0, false, &p), 1.0);
        prop_assert_eq!(p_merge_given_distance(p.d0 - p.front_penalty, true, &p), 1.0);
        // Unimodal: nearer the mode is never less likely.
        let (near, far) = if (d1 - p.d0).abs() <= (d2 - p.d0).abs() { (d1, d2) } else { (d2, d1) };
        prop_assert!(p_merge_given_distance(near, false, &p) >= p_merge_given_distance(far, false, &p));
        Ok(())
    })
}

pub fn tree_value_monotone_in_depth(cases: u32) -> Result<(), String> {
    let p = GapModelParams::default();
    let nodes = prop::collection::vec((0.0..=1.0f64, -80.0..80.0f64), 1..=8).prop_map(|v| {
        v.into_iter()
            .map(|(pr, x)| merge_game::gap_selector::TreeNode {
                p: pr,
                center_x: x,
                distance: x,
            })
            .collect::<Vec<_>>()
    });
    check(cases, nodes, |nodes| {
        let mut last = f64::NEG_INFINITY;
        for depth in 1..=4 {
            let v = search_gap_tree(&nodes, depth, &p).expect("search").value;
            prop_assert!(v >= last);
            last = v;
        }
        Ok(())
    })
}

pub fn tree_matches_brute_force(cases: u32) -> Result<(), String> {
    let p = GapModelParams::default();
    check(cases, (tree_instance(), 1..=3usize), |(nodes, depth)| {
        let plan = search_gap_tree(&nodes, depth, &p).expect("search");
        let (root, value) = brute_force_root(&nodes, depth, &p);
        prop_assert_eq!(plan.value, value);
        prop_assert_eq!(plan.target(), root);
        Ok(())
    })
}

pub fn beliefs_stay_in_unit_interval(cases: u32) -> Result<(), String> {
    let obs = prop::collection::vec((0..4u32, any::<bool>()), 0..200);
    check(cases, (0.0..1.0f64, 0.0..=1.0f64, obs), |(alpha, p0, obs)| {
        let mut b = GapBelief::new(alpha, p0);
        for (agent, o) in obs {
            b = update_belief(&b, AgentId(agent), o);
            prop_assert!(b.p_yield.values().all(|p| (0.0..=1.0).contains(p)));
        }
        Ok(())
    })
}

pub fn p_merge_monotone_in_yield(cases: u32) -> Result<(), String> {
    let p = GapModelParams::default();
    check(cases, (0.0..=1.0f64, 0.0..=1.0f64, -60.0..60.0f64, 0.0..20.0f64), |(a, b, d, g)| {
        let gap = Gap {
            id: GapId {
                front: Some(AgentId(0)),
                rear: Some(AgentId(1)),
            },
            length: g,
            distance: d,
            center_x: d,
            speed: 5.0,
        };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let at = |y: f64| {
            let mut belief = GapBelief::from_params(&p);
            belief.p_yield.insert(AgentId(1), y);
            p_merge(&gap, &belief, 4.8, &p)
        };
        prop_assert!(at(lo) <= at(hi));
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// intention_game

pub fn survivors_clear_reaction_window(cases: u32) -> Result<(), String> {
    check(cases, (scene_params(), 0.0..=1.0f64, any::<prop::sample::Index>()), |((seed, gap, depth, steps), py, pick)| {
        let planner = PlannerConfig::with_depth(depth);
        let (w, _) = advance(&scenario(seed, gap), &planner, steps);
        let gaps = enumerate_gaps(&w);
        let target = gaps[pick.index(gaps.len())];
        let params = GameParams::default();
        let horizon = params.ttr.max(planner.replan_interval) + params.horizon;
        let preds = predict(&w, &target, py, None, horizon, w.dt, &PredictionParams::default());
        let out = play(&w, &target, &preds, &params);
        let scene = Scene::new(&w, &target, &preds);
        let ttr_step = (params.ttr / w.dt).round() as usize;
        for &i in &out.prune.surviving {
            for c in 0..scene.columns.len() {
                let sim = forward_simulate(&out.intentions[i].trajectory, &scene, c, 0);
                prop_assert!(sim.first_collision.is_none_or(|k| k > ttr_step));
            }
        }
        Ok(())
    })
}

pub fn selection_matches_enumeration(cases: u32) -> Result<(), String> {
    check(cases, matrix_instance(), |(m, candidates)| {
        prop_assert_eq!(select_intention(&m, &candidates), enumerate_selection(&m, &candidates));
        Ok(())
    })
}

fn continuous_matrix() -> impl Strategy<Value = GameMatrix> {
    matrix_instance().prop_map(|(mut m, _)| {
        // Break grid ties so relabeling cannot change the winner.
        for (i, row) in m.rows.iter_mut().enumerate() {
            for (j, c) in row.cells.iter_mut().enumerate() {
                c.reward.risk += 1e-6 * (i as f64 + 1.0) * (j as f64 + 1.3);
                c.reward.success += 1e-7 * (i as f64 + 1.0).sqrt();
            }
        }
        m
    })
}

pub fn selection_invariant_under_permutation(cases: u32) -> Result<(), String> {
    let strategy = continuous_matrix().prop_flat_map(|m| {
        let rows: Vec<usize> = (0..m.rows.len()).collect();
        let cols: Vec<usize> = (0..m.probabilities.len()).collect();
        (Just(m), Just(rows).prop_shuffle(), Just(cols).prop_shuffle())
    });
    check(cases, strategy, |(m, rows, cols)| {
        let permuted = GameMatrix {
            rows: rows
                .iter()
                .map(|&r| {
                    let mut row = m.rows[r].clone();
                    row.cells = cols.iter().map(|&c| m.rows[r].cells[c]).collect();
                    row
                })
                .collect(),
            probabilities: cols.iter().map(|&c| m.probabilities[c]).collect(),
        };
        let all: Vec<usize> = (0..m.rows.len()).collect();
        let a = select_intention(&m, &all).expect("non-empty");
        let b = select_intention(&permuted, &all).expect("non-empty");
        prop_assert_eq!(rows[b], a);
        Ok(())
    })
}

pub fn selection_invariant_under_scaling(cases: u32) -> Result<(), String> {
    check(cases, (continuous_matrix(), 1e-3..1e3f64), |(m, k)| {
        let scaled = GameMatrix {
            rows: m.rows.clone(),
            probabilities: m.probabilities.iter().map(|p| p * k).collect(),
        };
        let all: Vec<usize> = (0..m.rows.len()).collect();
        prop_assert_eq!(select_intention(&m, &all), select_intention(&scaled, &all));
        Ok(())
    })
}

pub fn ego_never_collides(cases: u32) -> Result<(), String> {
    check(cases, scene_params(), |(seed, gap, depth, _)| {
        let r = run_trial(&ScenarioConfig::with_mean_gap(gap), &PlannerConfig::with_depth(depth), seed)
            .expect("trial");
        prop_assert!(!r.collision, "ego collision at seed {} gap {} depth {}", seed, gap, depth);
        prop_assert!(r.end != TrialEnd::Collision);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// planner

pub fn decide_is_deterministic(cases: u32) -> Result<(), String> {
    check(cases, scene_params(), |(seed, gap, depth, steps)| {
        let p = PlannerConfig::with_depth(depth);
        let (w, state) = advance(&scenario(seed, gap), &p, steps);
        prop_assert_eq!(decide(&w, &state, &p).expect("tick"), decide(&w, &state, &p).expect("tick"));
        Ok(())
    })
}

pub fn beliefs_change_only_for_engaged(cases: u32) -> Result<(), String> {
    check(cases, scene_params(), |(seed, gap, depth, _)| {
        let p = PlannerConfig::with_depth(depth);
        let mut w = generate_scenario(&scenario(seed, gap)).expect("scenario");
        let mut state = merge_game::planner::PlannerState::new(&p);
        for _ in 0..80 {
            let before: BTreeMap<AgentId, f64> = state.beliefs.p_yield.clone();
            let engaged = state.engaged;
            let d = decide_in_place(&w, &mut state, &p).expect("tick");
            let changed: Vec<AgentId> = state
                .beliefs
                .p_yield
                .iter()
                .filter(|(id, v)| before.get(id) != Some(v))
                .map(|(id, _)| *id)
                .collect();
            if d.replan.is_none() {
                prop_assert!(changed.is_empty());
            } else {
                prop_assert!(changed.iter().all(|id| Some(*id) == engaged));
            }
            w = step_world(&w, d.control, w.dt).0;
        }
        Ok(())
    })
}

pub fn thresholds_never_read(cases: u32) -> Result<(), String> {
    let strategy = (scene_params(), prop::collection::vec(thresholds(), 12));
    check(cases, strategy, |((seed, gap, depth, steps), ts)| {
        let p = PlannerConfig::with_depth(depth);
        let (w, state) = advance(&scenario(seed, gap), &p, steps);
        let mut other = w.clone();
        for (a, t) in other.traffic.iter_mut().zip(ts) {
            a.behavior.thresholds = t;
        }
        prop_assert_eq!(decide(&w, &state, &p).expect("tick"), decide(&other, &state, &p).expect("tick"));
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// harness

pub fn depths_share_scenarios(cases: u32) -> Result<(), String> {
    check(cases, (0..10_000u64, prop_oneof![Just(2.4), Just(4.8), Just(9.6)]), |(seed, gap)| {
        let base = scenario_at_gap(&ScenarioConfig::default(), gap);
        let first_snapshot = |depth: usize| {
            let s = ScenarioConfig {
                time_limit: 0.1,
                ..base.clone()
            };
            run_trial_traced(&s, &PlannerConfig::with_depth(depth), seed).expect("trial").1[0].clone()
        };
        let snap = first_snapshot(1);
        prop_assert_eq!(&snap, &first_snapshot(2));
        prop_assert_eq!(&snap, &first_snapshot(3));
        let world = generate_scenario(&ScenarioConfig { seed, ..base.clone() }).expect("scenario");
        let again = generate_scenario(&ScenarioConfig { seed, ..base }).expect("scenario");
        let th = |w: &merge_game::world::WorldState| w.traffic.iter().map(|a| a.behavior.thresholds).collect::<Vec<_>>();
        prop_assert_eq!(th(&world), th(&again));
        Ok(())
    })
}

fn fake_result(depth: usize, mean_gap: f64, seed: u64, t: Option<f64>) -> TrialResult {
    TrialResult {
        seed,
        depth,
        mean_gap,
        success: t.is_some(),
        merge_time: t,
        collision: false,
        min_sep: 1.0,
        end: if t.is_some() { TrialEnd::Merged } else { TrialEnd::TimeLimit },
        traffic_collisions: 0,
        replans: 1,
        gap_trace: vec![],
        t_gaptree_ms: 0.0,
        t_matrix_ms: 0.0,
        t_loop_ms: 0.0,
    }
}

pub fn aggregation_order_free(cases: u32) -> Result<(), String> {
    let times = prop::collection::vec(prop::option::weighted(0.8, 1.0..60.0f64), 2 * 2 * 6);
    let strategy = times.prop_flat_map(|ts| {
        let n = ts.len();
        (Just(ts), subsequence((0..n).collect::<Vec<_>>(), n).prop_shuffle())
    });
    check(cases, strategy, |(ts, order)| {
        let spec = AblationSpec {
            depths: vec![1, 2],
            gaps: vec![2.4, 9.6],
            trials: 6,
            seed_batches: 3,
            ..AblationSpec::default()
        };
        let mut results = Vec::new();
        let mut k = 0;
        for &g in &spec.gaps {
            for &d in &spec.depths {
                for s in 0..6 {
                    results.push(fake_result(d, g, s, ts[k]));
                    k += 1;
                }
            }
        }
        let shuffled: Vec<TrialResult> = order.iter().map(|&i| results[i].clone()).collect();
        let a = aggregate(results, &spec);
        let b = aggregate(shuffled, &spec);
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
        Ok(())
    })
}
