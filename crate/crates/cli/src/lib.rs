//! Command-line driver: single trials, the depth by density ablation,
//! runtime benchmarks and replays from manifests.

pub mod args;
pub mod render;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use clap::Parser;
use merge_game::harness::{run_ablation, run_benchmark, scenario_at_gap, AblationReport, BenchReport, TrialResult};
use merge_game::manifest::{RunConfig, RunManifest};
use merge_game::trace::write_jsonl;
use merge_game::Error;

use crate::args::{AblationArgs, BenchArgs, Cli, Command, CommonArgs, ReplayArgs, SimulateArgs, OUT_ROOT_ENV};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FRAMES_DIR: &str = "frames";
pub const TRIALS_CSV: &str = "trials.csv";
pub const CELLS_CSV: &str = "cells.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const PLOT_FILE: &str = "plot.svg";
pub const BENCH_CSV: &str = "bench.csv";

pub const CSV_HEADER: &str =
    "depth,mean_gap,seed,success,merge_time_s,min_sep_m,collision,t_gaptree_ms,t_matrix_ms,t_loop_ms";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config files or manifests. Exit code 2.
    Usage(String),
    /// Anything that fails after validation. Exit code 1.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Internal(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::Manifest(_) => CliError::Usage(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Messages go to stdout and stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Ablation(a) => ablation(a),
        Command::Bench(a) => bench(a),
        Command::Replay(a) => replay(a),
    }
}

fn out_dir(explicit: Option<PathBuf>, name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let root = std::env::var_os(OUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        root.join(name)
    })
}

/// Config file, then flags.
fn resolve(common: &CommonArgs, mean_gap: Option<f64>, depth: Option<usize>) -> CliResult<RunConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            RunConfig::from_toml_str(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(g) = mean_gap {
        config.scenario = scenario_at_gap(&config.scenario, g);
    }
    if let Some(noise) = common.gap_noise {
        config.scenario.gap_noise_halfwidth = noise;
    }
    if let Some(seed) = common.seed {
        config.scenario.seed = seed;
    }
    if let Some(d) = depth {
        config.planner.depth = d;
    }
    config.validate()?;
    Ok(config)
}

fn pool(jobs: Option<usize>) -> CliResult<Option<rayon::ThreadPool>> {
    match jobs {
        None => Ok(None),
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(Some)
            .map_err(|e| CliError::Internal(e.to_string())),
    }
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let config = resolve(&a.common, a.mean_gap, a.depth)?;
    if a.render && a.frame_stride == 0 {
        return Err(CliError::Usage("--frame-stride must be at least 1".into()));
    }
    let seed = config.scenario.seed;
    let mut m = RunManifest::single("simulate", &config, vec![seed]);
    m.outputs = vec![MANIFEST_FILE.into(), TRACE_FILE.into(), SUMMARY_FILE.into()];
    if a.render {
        m.outputs.push(format!("{FRAMES_DIR}/"));
        m.frame_stride = a.frame_stride;
    }
    execute(&m, &out_dir(a.common.out, &format!("simulate-seed{seed}")), None)
}

fn ablation(a: AblationArgs) -> CliResult<()> {
    let config = resolve(&a.common, None, None)?;
    let mut spec = merge_game::harness::AblationSpec {
        scenario: config.scenario,
        planner: config.planner,
        ..Default::default()
    };
    if let Some(d) = a.depths {
        spec.depths = d;
    }
    if let Some(g) = a.gaps {
        spec.gaps = g;
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    if let Some(s) = a.seeds {
        spec.trials = s.len();
        spec.seed_list = s;
    }
    match a.batches {
        Some(b) => spec.seed_batches = b,
        // The default batch count shrinks to fit small trial counts.
        None if spec.trials > 0 => spec.seed_batches = spec.seed_batches.min(spec.trials),
        None => {}
    }
    let mut m = RunManifest::ablation(&spec);
    m.outputs = [MANIFEST_FILE, TRIALS_CSV, CELLS_CSV, REPORT_FILE, PLOT_FILE]
        .map(String::from)
        .to_vec();
    execute(&m, &out_dir(a.common.out, "ablation"), a.jobs)
}

fn bench(a: BenchArgs) -> CliResult<()> {
    let config = resolve(&a.common, a.mean_gap, a.depth)?;
    let mut m = RunManifest::single("bench", &config, vec![config.scenario.seed]);
    m.replans = a.replans;
    m.outputs = vec![MANIFEST_FILE.into(), BENCH_CSV.into()];
    execute(&m, &out_dir(a.common.out, "bench"), None)
}

fn replay(a: ReplayArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.manifest)
        .map_err(|e| CliError::Usage(format!("cannot read manifest {}: {e}", a.manifest.display())))?;
    let m = RunManifest::from_toml_str(&text)?;
    let name = format!("replay-{}", m.command);
    execute(&m, &out_dir(a.out, &name), a.jobs)
}

fn validate(m: &RunManifest) -> CliResult<()> {
    let usage = |s: &str| Err(CliError::Usage(s.to_string()));
    if m.seeds.is_empty() {
        return usage("at least one seed is required");
    }
    match m.command.as_str() {
        "simulate" | "bench" => {
            if m.command == "bench" && m.replans == 0 {
                return usage("--replans must be at least 1");
            }
        }
        "ablation" => {
            if m.depths.is_empty() || m.gaps.is_empty() {
                return usage("--depths and --gaps must be non-empty");
            }
            if !(1..=m.seeds.len()).contains(&m.seed_batches) {
                return usage("--batches must lie in [1, number of seeds]");
            }
            for &d in &m.depths {
                for &g in &m.gaps {
                    let (s, p) = m.trial_configs(d, g);
                    s.validate()?;
                    p.validate()?;
                }
            }
        }
        other => return usage(&format!("unknown command `{other}` in manifest")),
    }
    Ok(())
}

/// Validates, writes the manifest, then runs the manifest's command.
pub fn execute(m: &RunManifest, out: &Path, jobs: Option<usize>) -> CliResult<()> {
    validate(m)?;
    let pool = pool(jobs)?;
    fs::create_dir_all(out)?;
    m.write(&out.join(MANIFEST_FILE))?;
    let run = || match m.command.as_str() {
        "simulate" => run_simulate(m, out),
        "ablation" => run_ablation_cmd(m, out),
        _ => run_bench(m, out),
    };
    match pool {
        Some(p) => p.install(run),
        None => run(),
    }
}

fn run_simulate(m: &RunManifest, out: &Path) -> CliResult<()> {
    let seed = m.seeds[0];
    let (result, events) = m.replay(m.planner.depth, m.scenario.mean_gap, seed)?;
    let mut w = BufWriter::new(fs::File::create(out.join(TRACE_FILE))?);
    write_jsonl(&events, &mut w)?;
    w.flush()?;
    let summary = serde_json::to_string_pretty(&result.without_timings()).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(out.join(SUMMARY_FILE), summary + "\n")?;
    if m.frame_stride > 0 {
        let dir = out.join(FRAMES_DIR);
        fs::create_dir_all(&dir)?;
        let (scenario, _) = m.trial_configs(m.planner.depth, m.scenario.mean_gap);
        for (i, svg) in render::frames(&events, &scenario, m.frame_stride).iter().enumerate() {
            fs::write(dir.join(format!("frame_{i:05}.svg")), svg)?;
        }
    }
    println!("{}", trial_line(&result));
    Ok(())
}

fn trial_line(r: &TrialResult) -> String {
    let time = r.merge_time.map_or("-".to_string(), |t| format!("{t:.1} s"));
    format!(
        "seed {} depth {} gap {} m: {:?}, merge time {time}, min separation {:.2} m, {} replans, loop {:.2} ms/replan",
        r.seed, r.depth, r.mean_gap, r.end, r.min_sep, r.replans, r.t_loop_ms
    )
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

/// One CSV row per trial, in the report's sorted order.
pub fn trials_csv(report: &AblationReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &report.results {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.depth,
            r.mean_gap,
            r.seed,
            r.success,
            opt(r.merge_time),
            r.min_sep,
            r.collision,
            r.t_gaptree_ms,
            r.t_matrix_ms,
            r.t_loop_ms
        );
    }
    s
}

fn cells_csv(report: &AblationReport) -> String {
    let mut s = String::from("depth,mean_gap,trials,successes,collisions,mean_merge_time_s,std_err_s\n");
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            c.depth,
            c.mean_gap,
            c.trials,
            c.successes,
            c.collisions,
            opt(c.mean_merge_time),
            opt(c.std_err)
        );
    }
    s
}

/// Human-readable cell table and paired depth differences.
pub fn report_text(report: &AblationReport) -> String {
    let mut s = String::from("cells\n");
    let _ = writeln!(
        s,
        "{:>5} {:>8} {:>7} {:>9} {:>10} {:>12} {:>8}",
        "depth", "gap_m", "trials", "success", "collisions", "mean_time_s", "se_s"
    );
    let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2}"));
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{:>5} {:>8} {:>7} {:>9} {:>10} {:>12} {:>8}",
            c.depth,
            c.mean_gap,
            c.trials,
            c.successes,
            c.collisions,
            f(c.mean_merge_time),
            f(c.std_err)
        );
    }
    s.push_str("\npaired differences (later depth minus earlier depth, batch means, one-sided 95%)\n");
    let _ = writeln!(
        s,
        "{:>8} {:>7} {:>7} {:>9} {:>9} {:>9} {:>9} {:>10}",
        "gap_m", "depths", "pairs", "mean_s", "lower_s", "upper_s", "batches", "identical"
    );
    for d in &report.diffs {
        let _ = writeln!(
            s,
            "{:>8} {:>7} {:>7} {:>9.3} {:>9.3} {:>9.3} {:>9} {:>9.0}%",
            d.mean_gap,
            format!("{}-{}", d.depth_b, d.depth_a),
            d.stats.pairs,
            d.stats.mean,
            d.stats.lower,
            d.stats.upper,
            d.stats.batches,
            100.0 * d.identical_traces
        );
    }
    s
}

fn run_ablation_cmd(m: &RunManifest, out: &Path) -> CliResult<()> {
    let report = run_ablation(&m.ablation_spec())?;
    fs::write(out.join(TRIALS_CSV), trials_csv(&report))?;
    fs::write(out.join(CELLS_CSV), cells_csv(&report))?;
    let text = report_text(&report);
    fs::write(out.join(REPORT_FILE), &text)?;
    fs::write(out.join(PLOT_FILE), render::summary_plot(&report.cells))?;
    print!("{text}");
    Ok(())
}

pub fn bench_csv(r: &BenchReport) -> String {
    let mut s = String::from("phase,median_ms,samples\n");
    for row in &r.rows {
        let _ = writeln!(s, "{},{},{}", row.phase, row.median_ms, row.samples);
    }
    s
}

fn bench_table(r: &BenchReport) -> String {
    let mut s = format!("{:<22} {:>12} {:>8}\n", "phase", "median_ms", "samples");
    for row in &r.rows {
        let _ = writeln!(s, "{:<22} {:>12.4} {:>8}", row.phase, row.median_ms, row.samples);
    }
    let _ = writeln!(
        s,
        "\ncandidate gaps per replan {:.2}; a matrix game per gap costs {:.2}x the cells and {:.2}x the time",
        r.mean_gaps, r.cell_multiple, r.time_multiple
    );
    s
}

fn run_bench(m: &RunManifest, out: &Path) -> CliResult<()> {
    let scenario = merge_game::world::ScenarioConfig {
        seed: m.seeds[0],
        ..m.scenario.clone()
    };
    let report = run_benchmark(&scenario, &m.planner, m.replans)?;
    fs::write(out.join(BENCH_CSV), bench_csv(&report))?;
    print!("{}", bench_table(&report));
    Ok(())
}
