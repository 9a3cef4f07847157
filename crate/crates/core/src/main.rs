//! Command line front end: run single episodes, sweep batches, compare
//! result groups with Welch's ANOVA, and check relation sets for a
//! consistent arrangement.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
//! model search failure, 3 I/O error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use qsrnav::angle::Angle;
use qsrnav::harness::batch::run_batch;
use qsrnav::harness::{run_episode, EpisodeError, EpisodeOptions, TraceSink};
use qsrnav::output::{
    write_results_csv, write_summary_csv, JsonlTraceSink, SvgTraceSink, TeeSink,
};
use qsrnav::scenario::Arena;
use qsrnav::sectors::{search_valid_model, SearchError, SectorRelation};
use qsrnav::stats::welch_anova;
use qsrnav::EntityId;
use qsrnav::ScenarioConfig;

#[derive(Parser)]
#[command(name = "qsrnav", version, about = "Sector-based navigation simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one episode of a scenario and print the outcome.
    Run {
        /// Scenario description (TOML).
        scenario: PathBuf,
        /// Random seed for the episode.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write a JSON-lines event trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Include every simulation tick in the trace, not just commands
        /// and filter updates.
        #[arg(long, requires = "trace")]
        trace_every_tick: bool,
        /// Render the trajectories to an SVG file.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Also measure host wall-clock time per instruction
        /// (non-reproducible; excluded from files).
        #[arg(long)]
        wall_time: bool,
    },
    /// Run many episodes with randomized layouts and summarize.
    Batch {
        /// Scenario description (TOML).
        scenario: PathBuf,
        /// Number of episodes.
        #[arg(long)]
        episodes: usize,
        /// Base seed; episode i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write one CSV row per episode to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a one-row summary CSV to this file.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Group a results CSV by one column and compare another with
    /// Welch's unequal-variance ANOVA.
    Analyze {
        /// Per-episode results CSV (as written by `batch --out`).
        results: PathBuf,
        /// Numeric column to compare across groups.
        #[arg(long)]
        welch: String,
        /// Column whose distinct values define the groups.
        #[arg(long)]
        by: String,
    },
    /// Search for an arrangement consistent with a relation file.
    ///
    /// Each line is either `A (3) B` (entity B lies in sector 3 of
    /// entity A) or `theta A = 90` (A's orientation in degrees).
    /// `#` starts a comment.
    CheckModel {
        /// Relation file.
        relations: PathBuf,
        /// Number of sectors per entity.
        #[arg(long, default_value_t = 8)]
        m: u32,
        /// Arena width in cm.
        #[arg(long, default_value_t = 1000.0)]
        arena_width: f64,
        /// Arena height in cm.
        #[arg(long, default_value_t = 1000.0)]
        arena_height: f64,
        /// Boundary margin for the feasibility program; negative keeps
        /// positions strictly inside each sector.
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        epsilon: f64,
    },
}

enum CliError {
    Usage(String),
    Runtime(String),
    Io(String),
}

impl CliError {
    fn report(&self) -> ExitCode {
        let (msg, code) = match self {
            CliError::Usage(msg) => (msg, 1),
            CliError::Runtime(msg) => (msg, 2),
            CliError::Io(msg) => (msg, 3),
        };
        eprintln!("error: {msg}");
        ExitCode::from(code)
    }
}

impl From<EpisodeError> for CliError {
    fn from(e: EpisodeError) -> CliError {
        match e {
            EpisodeError::Config(c) => CliError::Usage(c.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<qsrnav::output::OutputError> for CliError {
    fn from(e: qsrnav::output::OutputError) -> CliError {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Run { scenario, seed, trace, trace_every_tick, svg, wall_time } => {
            cmd_run(&scenario, seed, trace.as_deref(), trace_every_tick, svg.as_deref(), wall_time)
        }
        Cmd::Batch { scenario, episodes, seed, out, summary } => {
            cmd_batch(&scenario, episodes, seed, out.as_deref(), summary.as_deref())
        }
        Cmd::Analyze { results, welch, by } => cmd_analyze(&results, &welch, &by),
        Cmd::CheckModel { relations, m, arena_width, arena_height, epsilon } => {
            cmd_check_model(&relations, m, arena_width, arena_height, epsilon)
        }
    }
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    ScenarioConfig::load(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn cmd_run(
    scenario: &Path,
    seed: u64,
    trace: Option<&Path>,
    trace_every_tick: bool,
    svg: Option<&Path>,
    wall_time: bool,
) -> Result<(), CliError> {
    let cfg = load_scenario(scenario)?;

    let mut jsonl = match trace {
        Some(path) => Some(JsonlTraceSink::create(path, trace_every_tick)?),
        None => None,
    };
    let mut svg_sink = svg.map(|_| {
        let goal = cfg.pose_map().get(&EntityId::Goal).map(|p| p.position()).unwrap_or((0.0, 0.0));
        SvgTraceSink::new(cfg.arena, goal, cfg.goal_radius_cm)
    });
    let mut sinks: Vec<&mut dyn TraceSink> = Vec::new();
    if let Some(s) = jsonl.as_mut() {
        sinks.push(s);
    }
    if let Some(s) = svg_sink.as_mut() {
        sinks.push(s);
    }
    let mut tee = TeeSink { sinks };

    let opts = EpisodeOptions {
        poses: None,
        trace: (trace.is_some() || svg.is_some()).then_some(&mut tee as &mut dyn TraceSink),
        measure_wall: wall_time,
    };
    let result = run_episode(&cfg, seed, opts)?;

    if let Some(sink) = jsonl {
        sink.finish().map_err(|e| CliError::Io(format!("writing trace: {e}")))?;
    }
    if let (Some(sink), Some(path)) = (svg_sink, svg) {
        sink.write(path)?;
    }

    println!("outcome: {}", if result.success { "success" } else { "failure" });
    if let Some(reason) = result.failure {
        println!("failure: {}", reason.label());
    }
    println!("instructions: {}", result.instructions);
    println!("proc ms/instruction: {:.6}", result.proc_ms_per_instruction);
    if let Some(wall) = result.wall_ms_per_instruction {
        println!("wall ms/instruction: {wall:.6}");
    }
    println!("path: {:.2} cm", result.path_cm);
    println!("sim time: {:.2} s", result.sim_time_s);
    Ok(())
}

fn cmd_batch(
    scenario: &Path,
    episodes: usize,
    seed: u64,
    out: Option<&Path>,
    summary_path: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = load_scenario(scenario)?;
    let batch = run_batch(&cfg, episodes, seed)?;
    if let Some(path) = out {
        write_results_csv(path, &batch.results)?;
    }
    if let Some(path) = summary_path {
        write_summary_csv(path, std::slice::from_ref(&batch.summary))?;
    }
    let s = &batch.summary;
    println!(
        "method: {} (m = {}{}, orientation {})",
        s.method,
        s.m,
        s.tau_s.map(|t| format!(", tau = {t} s")).unwrap_or_default(),
        if s.orientation_known { "known" } else { "unknown" },
    );
    println!("episodes: {}", s.episodes);
    println!("success rate: {:.1}% ({}/{})", s.success_rate_pct, s.successes, s.episodes);
    println!("instructions: {:.2} +/- {:.2}", s.instructions.mean, s.instructions.std);
    println!("proc ms/instruction: {:.4} +/- {:.4}", s.proc_ms.mean, s.proc_ms.std);
    println!("path: {:.1} +/- {:.1} cm", s.path_cm.mean, s.path_cm.std);
    Ok(())
}

fn cmd_analyze(results: &Path, value_col: &str, by_col: &str) -> Result<(), CliError> {
    let mut reader = csv::Reader::from_path(results)
        .map_err(|e| CliError::Io(format!("{}: {e}", results.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Io(format!("{}: {e}", results.display())))?
        .clone();
    let col_index = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Usage(format!("column {name:?} not found; file has {headers:?}"))
        })
    };
    let value_idx = col_index(value_col)?;
    let by_idx = col_index(by_col)?;

    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Io(format!("{}: {e}", results.display())))?;
        let key = record.get(by_idx).unwrap_or("").to_string();
        let raw = record.get(value_idx).unwrap_or("").trim();
        if raw.is_empty() {
            continue;
        }
        let value: f64 = raw.parse().map_err(|_| {
            CliError::Usage(format!(
                "row {}: column {value_col:?} has non-numeric value {raw:?}",
                line + 2
            ))
        })?;
        groups.entry(key).or_default().push(value);
    }

    for (key, values) in &groups {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        println!("group {key:?}: n = {}, mean = {mean:.4}", values.len());
    }
    let slices: Vec<&[f64]> = groups.values().map(Vec::as_slice).collect();
    let anova = welch_anova(&slices).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("Welch F = {:.6}", anova.f);
    println!("df1 = {}, df2 = {:.6}", anova.df1, anova.df2);
    println!("p = {:.6e}", anova.p);
    Ok(())
}

fn parse_relations(
    text: &str,
) -> Result<(Vec<SectorRelation<String>>, BTreeMap<String, Angle>), String> {
    let mut relations = Vec::new();
    let mut headings = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fail = |msg: &str| format!("line {}: {msg}: {raw:?}", i + 1);
        if let Some(rest) = line.strip_prefix("theta ") {
            let (name, degrees) =
                rest.split_once('=').ok_or_else(|| fail("expected `theta NAME = DEGREES`"))?;
            let degrees: f64 =
                degrees.trim().parse().map_err(|_| fail("orientation is not a number"))?;
            let angle = Angle::from_degrees(degrees).map_err(|e| fail(&e.to_string()))?;
            headings.insert(name.trim().to_string(), angle);
        } else {
            let (source, rest) =
                line.split_once('(').ok_or_else(|| fail("expected `SOURCE (SECTOR) TARGET`"))?;
            let (sector, target) =
                rest.split_once(')').ok_or_else(|| fail("expected `SOURCE (SECTOR) TARGET`"))?;
            let sector: u32 =
                sector.trim().parse().map_err(|_| fail("sector is not a whole number"))?;
            let source = source.trim();
            let target = target.trim();
            if source.is_empty() || target.is_empty() {
                return Err(fail("missing entity name"));
            }
            relations.push(SectorRelation::new(source.to_string(), sector, target.to_string()));
        }
    }
    if relations.is_empty() {
        return Err("no relations found".to_string());
    }
    Ok((relations, headings))
}

fn cmd_check_model(
    path: &Path,
    m: u32,
    arena_width: f64,
    arena_height: f64,
    epsilon: f64,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let (relations, headings) =
        parse_relations(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    for r in &relations {
        if r.sector >= m {
            return Err(CliError::Usage(format!(
                "relation {} ({}) {}: sector out of range for m = {m}",
                r.source, r.sector, r.target
            )));
        }
    }

    let arena = Arena { width_cm: arena_width, height_cm: arena_height };
    let (result, stats) =
        search_valid_model(m, arena, epsilon, &relations, headings, BTreeMap::new(), true);
    match result {
        Ok(model) => {
            println!("consistent: yes");
            for (name, &(x, y)) in &model.positions {
                match model.headings.get(name) {
                    Some(theta) => {
                        println!("{name}: position ({x:.2}, {y:.2}), heading {:.1} deg", theta.degrees())
                    }
                    None => println!("{name}: position ({x:.2}, {y:.2})"),
                }
            }
            if let Some(r) = model.chebyshev_radius {
                println!("placement margin (Chebyshev radius): {r:.2} cm");
            }
            println!(
                "search: {} assignments, {} feasibility solves",
                stats.assignments, stats.lp_solves
            );
            Ok(())
        }
        Err(SearchError::NoValidModel) => {
            println!("consistent: no");
            println!(
                "search: {} assignments, {} feasibility solves",
                stats.assignments, stats.lp_solves
            );
            Err(CliError::Runtime("no arrangement satisfies the relations".to_string()))
        }
        Err(e) => Err(CliError::Runtime(e.to_string())),
    }
}
