//! Export of a run: trajectory table, metrics summary and plot series.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::optimizer::{CostTerms, PassMode};
use crate::pipeline::RunReport;
use crate::planner::PlanTimeline;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.toml";
pub const HEIGHT_FILE: &str = "height_profile.csv";
pub const DISTANCE_FILE: &str = "pairwise_distances.csv";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("metrics serialization failed: {0}")]
    Serialize(String),
}

/// Nine significant digits; negative zero prints as zero.
pub fn format_number(x: f64) -> String {
    format!("{:.8e}", x + 0.0)
}

fn join(cells: impl IntoIterator<Item = String>) -> String {
    cells.into_iter().collect::<Vec<_>>().join(",")
}

fn robot_count(timeline: &PlanTimeline) -> Option<usize> {
    timeline.samples.first().map(|s| s.robots.len())
}

/// Header of the trajectory table for `n` robots.
pub fn trajectory_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for i in 0..n {
        cols.push(format!("x_{i}"));
        cols.push(format!("y_{i}"));
    }
    cols.extend(["x_o", "y_o", "z_o", "x_vo", "y_vo", "theta"].map(String::from));
    cols.extend((0..n).map(|i| format!("taut_{i}")));
    join(cols)
}

/// One row per sample. With no samples only the header is written, sized
/// by `robots`.
pub fn trajectory_csv(timeline: &PlanTimeline, robots: usize) -> String {
    let n = robot_count(timeline).unwrap_or(robots);
    let mut out = trajectory_header(n);
    out.push('\n');
    for s in &timeline.samples {
        let eq = &s.equilibrium;
        let mut cells = vec![format_number(s.t)];
        for r in &s.robots {
            cells.push(format_number(r.x));
            cells.push(format_number(r.y));
        }
        let p = eq.position;
        cells.extend([p.x, p.y, p.z, eq.contact.x, eq.contact.y, s.pose.theta].map(format_number));
        cells.extend(eq.cables.iter().map(|c| u8::from(c.is_taut()).to_string()));
        out.push_str(&join(cells));
        out.push('\n');
    }
    out
}

pub fn height_profile_csv(report: &RunReport) -> String {
    let mut out = String::from("t,z_o\n");
    for (t, z) in report.height_profile() {
        let _ = writeln!(out, "{},{}", format_number(t), format_number(z));
    }
    out
}

/// Distances between every pair of robots `i < j`.
pub fn pairwise_distances_csv(timeline: &PlanTimeline, robots: usize) -> String {
    let n = robot_count(timeline).unwrap_or(robots);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let mut cols = vec!["t".to_string()];
    cols.extend(pairs.iter().map(|(i, j)| format!("d_{i}_{j}")));
    let mut out = join(cols);
    out.push('\n');
    for s in &timeline.samples {
        let mut cells = vec![format_number(s.t)];
        cells.extend(
            pairs
                .iter()
                .map(|&(i, j)| format_number((s.robots[i] - s.robots[j]).norm())),
        );
        out.push_str(&join(cells));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstacleMetrics {
    pub index: usize,
    pub mode: PassMode,
    pub start: f64,
    pub end: f64,
    pub side_lengths: Vec<f64>,
    pub object_height: f64,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entering_angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exiting_angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta2: Option<f64>,
    pub costs: CostTerms,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub name: String,
    pub duration: f64,
    pub dt: f64,
    pub samples: usize,
    pub goal_error: f64,
    pub centerline_rmse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_vertical_clearance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_horizontal_clearance: Option<f64>,
    pub path_lengths: Vec<f64>,
    pub obstacles: Vec<ObstacleMetrics>,
}

impl Metrics {
    pub fn from_report(report: &RunReport) -> Self {
        let obstacles = report
            .obstacles
            .iter()
            .map(|o| ObstacleMetrics {
                index: o.index,
                mode: o.mode,
                start: o.start,
                end: o.end,
                side_lengths: o.side_lengths.clone(),
                object_height: o.object_height,
                evaluations: o.evaluations,
                entering_angle: o.entering_angle,
                exiting_angle: o.exiting_angle,
                theta2: o.theta2,
                costs: o.costs,
            })
            .collect();
        Metrics {
            name: report.name.clone(),
            duration: report.timeline.duration(),
            dt: report.timeline.dt,
            samples: report.timeline.samples.len(),
            goal_error: report.goal_error,
            centerline_rmse: report.centerline_rmse,
            min_vertical_clearance: report.min_vertical_clearance,
            min_horizontal_clearance: report.min_horizontal_clearance,
            path_lengths: report.path_lengths.clone(),
            obstacles,
        }
    }

    pub fn to_toml(&self) -> Result<String, IoError> {
        toml::to_string(self).map_err(|e| IoError::Serialize(e.to_string()))
    }
}

/// Writes all four files into `dir`, creating it if needed, and returns
/// their paths.
pub fn export_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| IoError::Write { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let n = report.path_lengths.len();
    let files = [
        (TRAJECTORY_FILE, trajectory_csv(&report.timeline, n)),
        (METRICS_FILE, Metrics::from_report(report).to_toml()?),
        (HEIGHT_FILE, height_profile_csv(report)),
        (DISTANCE_FILE, pairwise_distances_csv(&report.timeline, n)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
