//! Static SVG output: top-down trial frames and the ablation summary plot.

use std::fmt::Write;

use merge_game::harness::CellSummary;
use merge_game::trace::{EventKind, TraceEvent};
use merge_game::world::ScenarioConfig;
use serde_json::Value;

const PX_PER_M: f64 = 8.0;
const VIEW_BEHIND: f64 = 40.0;
const VIEW_AHEAD: f64 = 60.0;

const EGO_COLOR: &str = "#1f6fd1";
const GAP_COLOR: &str = "#f2b600";

fn mode_color(mode: &str) -> &'static str {
    match mode {
        "BLOCKING" => "#d1342f",
        "YIELDING" => "#2e9b43",
        _ => "#8c8c8c",
    }
}

struct View {
    x0: f64,
    y_top: f64,
}

impl View {
    fn px(&self, x: f64) -> f64 {
        (x - self.x0) * PX_PER_M
    }

    fn py(&self, y: f64) -> f64 {
        (self.y_top - y) * PX_PER_M
    }
}

#[allow(clippy::too_many_arguments)]
fn rect(svg: &mut String, view: &View, x: f64, y: f64, heading: f64, length: f64, width: f64, fill: &str) {
    let (cx, cy) = (view.px(x), view.py(y));
    let _ = writeln!(
        svg,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="#222" stroke-width="0.8" transform="rotate({:.2} {cx:.2} {cy:.2})"/>"##,
        cx - length * PX_PER_M / 2.0,
        cy - width * PX_PER_M / 2.0,
        length * PX_PER_M,
        width * PX_PER_M,
        -heading.to_degrees(),
    );
}

fn target_of(plan: &Value) -> (Option<u64>, Option<u64>) {
    let t = &plan["target"];
    (t["front"].as_u64(), t["rear"].as_u64())
}

/// One frame of the road around the ego.
fn frame(snapshot: &TraceEvent, plan: Option<&Value>, scenario: &ScenarioConfig) -> String {
    let w = scenario.lane_width;
    let (len, wid) = (scenario.vehicle.length, scenario.vehicle.width);
    let p = &snapshot.payload;
    let ego = &p["ego"];
    let ex = ego["x"].as_f64().unwrap_or(0.0);
    let view = View {
        x0: ex - VIEW_BEHIND,
        y_top: 1.5 * w,
    };
    let width = (VIEW_BEHIND + VIEW_AHEAD) * PX_PER_M;
    let height = 3.0 * w * PX_PER_M;
    let x1 = ex + VIEW_AHEAD;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#cfe3c4"/>"##);
    // Target lane, then the merging lane up to its end.
    let _ = writeln!(
        svg,
        r##"<rect x="0" y="{:.2}" width="{width:.0}" height="{:.2}" fill="#5a5a5a"/>"##,
        view.py(w),
        w * PX_PER_M
    );
    let end = scenario.merge_window.min(x1);
    if end > view.x0 {
        let _ = writeln!(
            svg,
            r##"<rect x="0" y="{:.2}" width="{:.2}" height="{:.2}" fill="#6a6a6a"/>"##,
            view.py(0.0),
            view.px(end),
            w * PX_PER_M
        );
    }
    let _ = writeln!(
        svg,
        r##"<line x1="0" y1="{y:.2}" x2="{width:.0}" y2="{y:.2}" stroke="#fff" stroke-width="1.5" stroke-dasharray="12 10"/>"##,
        y = view.py(0.0)
    );
    if scenario.merge_window < x1 && scenario.merge_window > view.x0 {
        let x = view.px(scenario.merge_window);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#d1342f" stroke-width="3"/>"##,
            view.py(0.0),
            view.py(-w)
        );
    }

    let traffic = p["traffic"].as_array().cloned().unwrap_or_default();
    let car_x = |id: Option<u64>| {
        id.and_then(|id| traffic.iter().find(|a| a["id"].as_u64() == Some(id)))
            .and_then(|a| a["x"].as_f64())
    };
    if let Some(plan) = plan {
        let (front, rear) = target_of(plan);
        let hi = car_x(front).map_or(x1, |x| x - len / 2.0).min(x1);
        let lo = car_x(rear).map_or(view.x0, |x| x + len / 2.0).max(view.x0);
        if hi > lo {
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{GAP_COLOR}" fill-opacity="0.45"/>"#,
                view.px(lo),
                view.py(w),
                (hi - lo) * PX_PER_M,
                w * PX_PER_M
            );
        }
    }
    for a in &traffic {
        let x = a["x"].as_f64().unwrap_or(f64::NAN);
        if x + len < view.x0 || x - len > x1 {
            continue;
        }
        let mode = a["mode"].as_str().unwrap_or("NORMAL");
        rect(&mut svg, &view, x, w / 2.0, 0.0, len, wid, mode_color(mode));
    }
    rect(
        &mut svg,
        &view,
        ex,
        ego["y"].as_f64().unwrap_or(0.0),
        ego["heading"].as_f64().unwrap_or(0.0),
        len,
        wid,
        EGO_COLOR,
    );
    let chosen = plan.and_then(|p| p["chosen"].as_str()).unwrap_or("-");
    let _ = writeln!(
        svg,
        r##"<text x="6" y="14" font-family="monospace" font-size="12" fill="#111">t={:.1}s v={:.2}m/s {chosen}</text>"##,
        snapshot.t,
        ego["speed"].as_f64().unwrap_or(0.0)
    );
    svg.push_str("</svg>\n");
    svg
}

/// Frames for every `stride`-th state snapshot of a trace, plus the last one.
pub fn frames(events: &[TraceEvent], scenario: &ScenarioConfig, stride: usize) -> Vec<String> {
    let stride = stride.max(1);
    let mut plan: Option<&Value> = None;
    let mut out = Vec::new();
    let mut index = 0;
    let last = events.iter().rposition(|e| e.kind == EventKind::StateSnapshot);
    for (i, e) in events.iter().enumerate() {
        match e.kind {
            EventKind::Plan => plan = Some(&e.payload),
            EventKind::StateSnapshot => {
                if index % stride == 0 || Some(i) == last {
                    out.push(frame(e, plan, scenario));
                }
                index += 1;
            }
            _ => {}
        }
    }
    out
}

const SERIES: [&str; 6] = ["#d1342f", "#1f6fd1", "#2e9b43", "#8e44ad", "#e67e22", "#16a085"];

/// Mean merge time against depth, one series per mean gap.
pub fn summary_plot(cells: &[CellSummary]) -> String {
    let (w, h) = (560.0, 380.0);
    let (left, right, top, bottom) = (64.0, 150.0, 24.0, 52.0);
    let mut depths: Vec<usize> = cells.iter().map(|c| c.depth).collect();
    depths.sort_unstable();
    depths.dedup();
    let mut gaps: Vec<f64> = cells.iter().map(|c| c.mean_gap).collect();
    gaps.sort_by(f64::total_cmp);
    gaps.dedup();
    let t_max = cells
        .iter()
        .filter_map(|c| Some(c.mean_merge_time? + c.std_err.unwrap_or(0.0)))
        .fold(1.0_f64, f64::max);
    let y_max = (t_max * 1.1 / 5.0).ceil() * 5.0;
    let d_lo = *depths.first().unwrap_or(&1) as f64;
    let d_hi = (*depths.last().unwrap_or(&1) as f64).max(d_lo + 1.0);
    let px = |d: f64| left + (d - d_lo) / (d_hi - d_lo) * (w - left - right);
    let py = |t: f64| top + (1.0 - t / y_max) * (h - top - bottom);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#fff"/>"##);
    let _ = writeln!(
        svg,
        r##"<line x1="{left}" y1="{b}" x2="{r}" y2="{b}" stroke="#000"/><line x1="{left}" y1="{top}" x2="{left}" y2="{b}" stroke="#000"/>"##,
        b = h - bottom,
        r = w - right
    );
    for k in 0..=5 {
        let t = y_max * k as f64 / 5.0;
        let y = py(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{left}" y2="{y:.1}" stroke="#000"/><text x="{:.1}" y="{:.1}" text-anchor="end">{t:.0}</text>"##,
            left - 4.0,
            left - 7.0,
            y + 4.0
        );
    }
    for &d in &depths {
        let x = px(d as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{b}" x2="{x:.1}" y2="{:.1}" stroke="#000"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{d}</text>"##,
            h - bottom + 4.0,
            h - bottom + 18.0,
            b = h - bottom
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">gap search depth</text>"#,
        (left + w - right) / 2.0,
        h - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">mean merge time (s)</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0
    );
    for (i, &g) in gaps.iter().enumerate() {
        let color = SERIES[i % SERIES.len()];
        let mut pts: Vec<&CellSummary> = cells.iter().filter(|c| c.mean_gap == g).collect();
        pts.sort_by_key(|c| c.depth);
        let line: Vec<String> = pts
            .iter()
            .filter_map(|c| Some(format!("{:.1},{:.1}", px(c.depth as f64), py(c.mean_merge_time?))))
            .collect();
        if line.len() > 1 {
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                line.join(" ")
            );
        }
        for c in &pts {
            let Some(t) = c.mean_merge_time else { continue };
            let x = px(c.depth as f64);
            if let Some(se) = c.std_err {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{color}"/>"#,
                    py(t - se),
                    py(t + se)
                );
            }
            let _ = writeln!(svg, r#"<circle cx="{x:.1}" cy="{:.1}" r="3.5" fill="{color}"/>"#, py(t));
        }
        let ly = top + 10.0 + 20.0 * i as f64;
        let lx = w - right + 16.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">gap {g} m</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
