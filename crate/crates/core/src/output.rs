//! Result serialization: per-episode and summary CSV files, line-delimited
//! JSON traces, and self-contained SVG trajectory plots.
//!
//! Every writer formats numbers deterministically (shortest round-trip
//! representation), so a reproduced batch writes byte-identical files.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::command::Command;
use crate::entity::{EntityId, Pose};
use crate::harness::batch::BatchSummary;
use crate::harness::{EpisodeResult, TraceEventKind, TraceRecord, TraceSink};
use crate::scenario::Arena;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("encoding csv for {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> OutputError {
    OutputError::Io { path: path.display().to_string(), source }
}

/// One episode per row, in episode order.
pub fn write_results_csv(path: &Path, results: &[EpisodeResult]) -> Result<(), OutputError> {
    let wrap = |source| OutputError::Csv { path: path.display().to_string(), source };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record([
        "episode",
        "success",
        "instructions",
        "proc_ms_per_instruction",
        "path_cm",
        "sim_time_s",
        "failure",
    ])
    .map_err(wrap)?;
    for (i, r) in results.iter().enumerate() {
        w.write_record([
            i.to_string(),
            (r.success as u8).to_string(),
            r.instructions.to_string(),
            r.proc_ms_per_instruction.to_string(),
            r.path_cm.to_string(),
            r.sim_time_s.to_string(),
            r.failure.map(|f| f.label().to_string()).unwrap_or_default(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// One batch per row: identity columns, success rate, and mean/std pairs
/// for instruction count, processing time and path size over successes.
pub fn write_summary_csv(path: &Path, summaries: &[BatchSummary]) -> Result<(), OutputError> {
    let wrap = |source| OutputError::Csv { path: path.display().to_string(), source };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record([
        "method",
        "m",
        "tau_s",
        "orientation",
        "episodes",
        "successes",
        "success_rate_pct",
        "instr_mean",
        "instr_std",
        "proc_ms_mean",
        "proc_ms_std",
        "path_cm_mean",
        "path_cm_std",
    ])
    .map_err(wrap)?;
    for s in summaries {
        w.write_record([
            s.method.to_string(),
            s.m.to_string(),
            s.tau_s.map(|t| t.to_string()).unwrap_or_default(),
            if s.orientation_known { "known" } else { "unknown" }.to_string(),
            s.episodes.to_string(),
            s.successes.to_string(),
            s.success_rate_pct.to_string(),
            s.instructions.mean.to_string(),
            s.instructions.std.to_string(),
            s.proc_ms.mean.to_string(),
            s.proc_ms.std.to_string(),
            s.path_cm.mean.to_string(),
            s.path_cm.std.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct TraceLine<'a> {
    t: f64,
    event: &'static str,
    poses: Vec<(String, f64, f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    command: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    signature: Option<&'a [u32]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    particles: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    goal_est: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fix: Option<(f64, f64)>,
}

/// Streams trace records as one JSON object per line. Tick records are
/// skipped unless `every_tick` is set; command and update records always
/// land, updates carrying the particle cloud.
pub struct JsonlTraceSink<W: std::io::Write> {
    out: W,
    every_tick: bool,
    error: Option<std::io::Error>,
}

impl JsonlTraceSink<BufWriter<File>> {
    pub fn create(path: &Path, every_tick: bool) -> Result<Self, OutputError> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        Ok(JsonlTraceSink { out: BufWriter::new(file), every_tick, error: None })
    }
}

impl<W: std::io::Write> JsonlTraceSink<W> {
    pub fn new(out: W, every_tick: bool) -> Self {
        JsonlTraceSink { out, every_tick, error: None }
    }

    /// Flush and surface any write error swallowed during recording.
    pub fn finish(mut self) -> std::io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()
    }
}

impl<W: std::io::Write> TraceSink for JsonlTraceSink<W> {
    fn record(&mut self, rec: TraceRecord<'_>) {
        if self.error.is_some() {
            return;
        }
        if rec.kind == TraceEventKind::Tick && !self.every_tick {
            return;
        }
        let line = TraceLine {
            t: rec.t,
            event: match rec.kind {
                TraceEventKind::Tick => "tick",
                TraceEventKind::Command => "command",
                TraceEventKind::Update => "update",
            },
            poses: rec
                .poses
                .iter()
                .map(|(id, p)| (id.to_string(), p.x, p.y, p.theta.degrees()))
                .collect(),
            command: rec.command.map(Command::label),
            signature: rec.signature,
            particles: (rec.kind == TraceEventKind::Update)
                .then(|| {
                    rec.particles
                        .map(|set| set.guided.iter().map(|p| (p.pose.x, p.pose.y)).collect())
                })
                .flatten(),
            goal_est: rec.particles.and_then(|set| set.goal.first().copied()),
            fix: rec.fix,
        };
        let result = serde_json::to_writer(&mut self.out, &line)
            .map_err(std::io::Error::from)
            .and_then(|()| self.out.write_all(b"\n"));
        if let Err(e) = result {
            self.error = Some(e);
        }
    }
}

/// Accumulates per-agent trajectories for the SVG plot.
pub struct SvgTraceSink {
    arena: Arena,
    goal: (f64, f64),
    goal_radius: f64,
    paths: Vec<(EntityId, Vec<(f64, f64)>)>,
}

impl SvgTraceSink {
    pub fn new(arena: Arena, goal: (f64, f64), goal_radius: f64) -> SvgTraceSink {
        SvgTraceSink { arena, goal, goal_radius, paths: Vec::new() }
    }

    fn push(&mut self, id: EntityId, pose: &Pose) {
        let entry = match self.paths.iter_mut().find(|(e, _)| *e == id) {
            Some((_, points)) => points,
            None => {
                self.paths.push((id, Vec::new()));
                &mut self.paths.last_mut().expect("just pushed").1
            }
        };
        let point = pose.position();
        if entry.last() != Some(&point) {
            entry.push(point);
        }
    }

    /// Render the collected trajectories. The viewBox equals the arena; the
    /// y axis is flipped so north is up, as on paper.
    pub fn to_svg(&self) -> String {
        let (w, h) = (self.arena.width_cm, self.arena.height_cm);
        let flip = |p: (f64, f64)| (p.0, h - p.1);
        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\">\n"
        ));
        svg.push_str(&format!(
            "  <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\" stroke=\"black\" stroke-width=\"2\"/>\n"
        ));
        let goal = flip(self.goal);
        svg.push_str(&format!(
            "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"green\" stroke-width=\"2\"/>\n",
            goal.0, goal.1, self.goal_radius
        ));
        for (id, points) in &self.paths {
            let colour = match id {
                EntityId::Coordinator => "crimson",
                EntityId::Observer(_) => "gray",
                EntityId::Guided => "royalblue",
                EntityId::Goal => "green",
            };
            let joined: Vec<String> = points
                .iter()
                .map(|&p| {
                    let (x, y) = flip(p);
                    format!("{x},{y}")
                })
                .collect();
            svg.push_str(&format!(
                "  <polyline points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"3\" stroke-linejoin=\"round\"/>\n",
                joined.join(" ")
            ));
            if let Some(&start) = points.first() {
                let (x, y) = flip(start);
                svg.push_str(&format!(
                    "  <circle cx=\"{x}\" cy=\"{y}\" r=\"6\" fill=\"{colour}\"/>\n"
                ));
            }
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write(&self, path: &Path) -> Result<(), OutputError> {
        std::fs::write(path, self.to_svg()).map_err(|e| io_err(path, e))
    }
}

impl TraceSink for SvgTraceSink {
    fn record(&mut self, rec: TraceRecord<'_>) {
        for (&id, pose) in rec.poses {
            if id != EntityId::Goal {
                self.push(id, pose);
            }
        }
    }
}

/// Fan a trace out to several sinks at once.
pub struct TeeSink<'a> {
    pub sinks: Vec<&'a mut dyn TraceSink>,
}

impl TraceSink for TeeSink<'_> {
    fn record(&mut self, rec: TraceRecord<'_>) {
        for sink in &mut self.sinks {
            sink.record(TraceRecord {
                t: rec.t,
                kind: rec.kind,
                poses: rec.poses,
                command: rec.command,
                signature: rec.signature,
                particles: rec.particles,
                fix: rec.fix,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::Angle;
    use crate::harness::FailureReason;
    use std::collections::BTreeMap;

    fn result(success: bool) -> EpisodeResult {
        EpisodeResult {
            success,
            instructions: 3,
            proc_ms_per_instruction: 0.5,
            path_cm: 123.25,
            sim_time_s: 12.3,
            total_ops: 1000,
            wall_ms_per_instruction: None,
            failure: if success { None } else { Some(FailureReason::Timeout) },
        }
    }

    #[test]
    fn results_csv_has_one_row_per_episode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        write_results_csv(&path, &[result(true), result(false)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("episode,success,"));
        assert!(lines[1].starts_with("0,1,3,0.5,123.25,"));
        assert!(lines[2].ends_with(",timeout"));
    }

    #[test]
    fn csv_output_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let rows = [result(true), result(false), result(true)];
        write_results_csv(&a, &rows).unwrap();
        write_results_csv(&b, &rows).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn jsonl_skips_ticks_by_default() {
        let mut buf = Vec::new();
        {
            let mut sink = JsonlTraceSink::new(&mut buf, false);
            let poses = BTreeMap::from([(
                EntityId::Guided,
                Pose::new(1.0, 2.0, Angle::from_degrees(90.0).unwrap()),
            )]);
            sink.record(TraceRecord {
                t: 0.1,
                kind: TraceEventKind::Tick,
                poses: &poses,
                command: None,
                signature: None,
                particles: None,
                fix: None,
            });
            sink.record(TraceRecord {
                t: 0.2,
                kind: TraceEventKind::Command,
                poses: &poses,
                command: Some(Command::MoveForward),
                signature: Some(&[1, 2]),
                particles: None,
                fix: Some((3.0, 4.0)),
            });
            sink.finish().unwrap();
        }
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1);
        let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(v["event"], "command");
        assert_eq!(v["command"], "move_forward");
        assert_eq!(v["signature"][0], 1);
        assert_eq!(v["fix"][1], 4.0);
        assert_eq!(v["poses"][0][0], "guided");
    }

    #[test]
    fn svg_contains_a_polyline_per_agent_and_the_goal() {
        let arena = Arena { width_cm: 1000.0, height_cm: 800.0 };
        let mut sink = SvgTraceSink::new(arena, (700.0, 600.0), 50.0);
        let theta = Angle::ZERO;
        for step in 0..3 {
            let poses = BTreeMap::from([
                (EntityId::Coordinator, Pose::new(100.0, 100.0, theta)),
                (EntityId::Observer(1), Pose::new(900.0, 100.0, theta)),
                (EntityId::Guided, Pose::new(400.0 + step as f64 * 10.0, 500.0, theta)),
                (EntityId::Goal, Pose::new(700.0, 600.0, theta)),
            ]);
            sink.record(TraceRecord {
                t: step as f64,
                kind: TraceEventKind::Tick,
                poses: &poses,
                command: None,
                signature: None,
                particles: None,
                fix: None,
            });
        }
        let svg = sink.to_svg();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("viewBox=\"0 0 1000 800\""));
        // Yflip: guided at y=500 in an 800-tall arena lands at 300.
        assert!(svg.contains("400,300"));
        assert!(svg.contains("<circle cx=\"700\" cy=\"200\" r=\"50\""));
    }
}
