//! Scenario files: sheet, starting formation, corridor, obstacles and goal.
//!
//! ```toml
//! name = "corridor"
//! goal = [5.6, 0.0]
//!
//! [sheet]
//! holding_points = [[0.0, 0.0], [1.6, 0.0], [0.8, 1.3856]]
//! holding_height = 0.79
//!
//! [formation]
//! robots = [[0.0, -0.6], [1.0, 0.0], [0.0, 0.6]]
//!
//! [corridor]
//! centerline = [[0.0, 0.0], [6.0, 0.0]]
//! width = 2.0
//!
//! [[obstacles]]
//! position = 2.0
//! radius = 0.1
//! height = 0.05
//! ```
//!
//! `[safety]`, `[weights]` and `[motion]` are optional and fall back to
//! defaults field by field.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::geometry::{check_convex_ccw, Formation, SafetyParams, SheetLayout, Vec2};
use crate::optimizer::{CostWeights, ObstacleSpec};
use crate::planner::MotionParams;
use crate::vvcm::solve_equilibrium;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: impl fmt::Display, message: impl fmt::Display) -> ScenarioError {
    ScenarioError::Validation {
        field: field.to_string(),
        message: message.to_string(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSheet {
    holding_points: Vec<[f64; 2]>,
    holding_height: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFormation {
    robots: Vec<[f64; 2]>,
    #[serde(default)]
    taut: Option<Vec<bool>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorridor {
    centerline: Vec<[f64; 2]>,
    width: Option<f64>,
    widths: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObstacle {
    position: f64,
    radius: f64,
    height: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSafety {
    robot_margin: f64,
    height_clearance: f64,
}

impl Default for RawSafety {
    fn default() -> Self {
        let d = SafetyParams::default();
        RawSafety {
            robot_margin: d.robot_margin,
            height_clearance: d.height_clearance,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawWeights {
    transport_contact: f64,
    transport_shape: f64,
    pass: f64,
    cross_height: f64,
    cross_diameter: f64,
}

impl Default for RawWeights {
    fn default() -> Self {
        let d = CostWeights::default();
        RawWeights {
            transport_contact: d.transport_contact,
            transport_shape: d.transport_shape,
            pass: d.pass,
            cross_height: d.cross_height,
            cross_diameter: d.cross_diameter,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawMotion {
    speed: f64,
    turn_rate: f64,
    dt: f64,
}

impl Default for RawMotion {
    fn default() -> Self {
        let d = MotionParams::default();
        RawMotion {
            speed: d.speed,
            turn_rate: d.turn_rate,
            dt: d.dt,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    name: Option<String>,
    sheet: RawSheet,
    formation: RawFormation,
    corridor: RawCorridor,
    #[serde(default)]
    obstacles: Vec<RawObstacle>,
    goal: [f64; 2],
    #[serde(default)]
    safety: RawSafety,
    #[serde(default)]
    weights: RawWeights,
    #[serde(default)]
    motion: RawMotion,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFormationFile {
    sheet: RawSheet,
    formation: RawFormation,
}

/// Corridor centerline with one width per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    centerline: Vec<Vec2>,
    widths: Vec<f64>,
    starts: Vec<f64>,
}

impl Corridor {
    pub fn new(centerline: Vec<Vec2>, widths: Vec<f64>) -> Result<Self, ScenarioError> {
        if centerline.len() < 2 {
            return Err(invalid("corridor.centerline", "needs at least two points"));
        }
        for (i, p) in centerline.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(invalid(
                    format!("corridor.centerline[{i}]"),
                    "non-finite coordinate",
                ));
            }
        }
        if widths.len() != centerline.len() - 1 {
            return Err(invalid(
                "corridor.widths",
                format!(
                    "expected {} widths, got {}",
                    centerline.len() - 1,
                    widths.len()
                ),
            ));
        }
        for (i, w) in widths.iter().enumerate() {
            if !(w.is_finite() && *w > 0.0) {
                return Err(invalid(format!("corridor.widths[{i}]"), "must be positive"));
            }
        }
        let mut starts = vec![0.0];
        for (i, w) in centerline.windows(2).enumerate() {
            let len = (w[1] - w[0]).norm();
            if len <= 1e-9 {
                return Err(invalid(
                    format!("corridor.centerline[{}]", i + 1),
                    "repeats the previous point",
                ));
            }
            starts.push(starts[i] + len);
        }
        Ok(Corridor {
            centerline,
            widths,
            starts,
        })
    }

    pub fn centerline(&self) -> &[Vec2] {
        &self.centerline
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn length(&self) -> f64 {
        *self.starts.last().expect("at least two points")
    }

    /// Arclength where segment `k` begins.
    pub fn segment_start(&self, k: usize) -> f64 {
        self.starts[k]
    }

    /// Segment containing arclength `s`; joints belong to the later segment.
    pub fn segment_at(&self, s: f64) -> usize {
        let last = self.widths.len() - 1;
        (0..last).find(|&k| s < self.starts[k + 1]).unwrap_or(last)
    }

    pub fn direction(&self, k: usize) -> Vec2 {
        (self.centerline[k + 1] - self.centerline[k]).normalize()
    }

    pub fn width_at(&self, s: f64) -> f64 {
        self.widths[self.segment_at(s)]
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        let k = self.segment_at(s);
        self.centerline[k] + self.direction(k) * (s - self.starts[k])
    }

    /// Arclength of the closest centerline point, and the distance to it.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        for k in 0..self.widths.len() {
            let a = self.centerline[k];
            let len = self.starts[k + 1] - self.starts[k];
            let s = (p - a).dot(&self.direction(k)).clamp(0.0, len);
            let d = (p - a - self.direction(k) * s).norm();
            if d < best.1 {
                best = (self.starts[k] + s, d);
            }
        }
        best
    }

    /// Centerline points from arclength `from` to `to`, corners included.
    pub fn path_between(&self, from: f64, to: f64) -> Vec<Vec2> {
        let mut path = vec![self.point_at(from)];
        for k in 1..self.centerline.len() - 1 {
            if self.starts[k] > from && self.starts[k] < to {
                path.push(self.centerline[k]);
            }
        }
        path.push(self.point_at(to));
        path
    }
}

/// Obstacle with its position along the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedObstacle {
    /// Arclength of the obstacle center along the centerline.
    pub position: f64,
    pub spec: ObstacleSpec,
}

/// Validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub formation: Formation,
    pub corridor: Corridor,
    pub obstacles: Vec<PlacedObstacle>,
    /// Final horizontal position of the object.
    pub goal: Vec2,
    pub safety: SafetyParams,
    pub weights: CostWeights,
    pub motion: MotionParams,
}

impl Scenario {
    pub fn layout(&self) -> &Arc<SheetLayout> {
        self.formation.layout_arc()
    }
}

fn point(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

fn finite(field: &str, value: f64) -> Result<f64, ScenarioError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(invalid(field, "must be finite"))
    }
}

fn positive(field: &str, value: f64) -> Result<f64, ScenarioError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(invalid(field, "must be positive"))
    }
}

fn points(field: &str, raw: &[[f64; 2]]) -> Result<Vec<Vec2>, ScenarioError> {
    raw.iter()
        .enumerate()
        .map(|(i, p)| {
            if p.iter().all(|c| c.is_finite()) {
                Ok(point(*p))
            } else {
                Err(invalid(format!("{field}[{i}]"), "non-finite coordinate"))
            }
        })
        .collect()
}

fn build_formation(sheet: &RawSheet, formation: &RawFormation) -> Result<Formation, ScenarioError> {
    let holding = points("sheet.holding_points", &sheet.holding_points)?;
    let z_r = finite("sheet.holding_height", sheet.holding_height)?;
    check_convex_ccw(&holding).map_err(|e| invalid("sheet.holding_points", e))?;
    let layout =
        Arc::new(SheetLayout::new(holding, z_r).map_err(|e| invalid("sheet.holding_points", e))?);
    let robots = points("formation.robots", &formation.robots)?;
    if robots.len() != layout.len() {
        return Err(invalid(
            "formation.robots",
            format!(
                "{} robots for {} holding points",
                robots.len(),
                layout.len()
            ),
        ));
    }
    Formation::new(layout, robots).map_err(|e| invalid("formation.robots", e))
}

fn build(raw: RawScenario) -> Result<Scenario, ScenarioError> {
    let formation = build_formation(&raw.sheet, &raw.formation)?;
    if raw.formation.taut.is_some() {
        return Err(invalid("formation.taut", "only allowed in formation files"));
    }
    if let Err(o) = formation.check_inelastic() {
        return Err(invalid(
            "formation.robots",
            format!(
                "robots {} and {} overstretch the sheet by {:.3e}",
                o.i, o.j, o.excess
            ),
        ));
    }
    solve_equilibrium(&formation).map_err(|e| invalid("formation.robots", e))?;

    let centerline = points("corridor.centerline", &raw.corridor.centerline)?;
    let segments = centerline.len().saturating_sub(1);
    let widths = match (raw.corridor.width, raw.corridor.widths) {
        (Some(w), None) => vec![w; segments],
        (None, Some(ws)) => ws,
        _ => {
            return Err(invalid(
                "corridor.width",
                "give exactly one of `width` or `widths`",
            ))
        }
    };
    let corridor = Corridor::new(centerline, widths)?;

    let safety = SafetyParams {
        robot_margin: positive("safety.robot_margin", raw.safety.robot_margin)?,
        height_clearance: positive("safety.height_clearance", raw.safety.height_clearance)?,
    };
    let w = &raw.weights;
    let weights = CostWeights {
        transport_contact: positive("weights.transport_contact", w.transport_contact)?,
        transport_shape: positive("weights.transport_shape", w.transport_shape)?,
        pass: positive("weights.pass", w.pass)?,
        cross_height: positive("weights.cross_height", w.cross_height)?,
        cross_diameter: positive("weights.cross_diameter", w.cross_diameter)?,
    };
    let motion = MotionParams {
        speed: positive("motion.speed", raw.motion.speed)?,
        turn_rate: positive("motion.turn_rate", raw.motion.turn_rate)?,
        dt: positive("motion.dt", raw.motion.dt)?,
    };

    let mut obstacles = Vec::with_capacity(raw.obstacles.len());
    let mut last = f64::NEG_INFINITY;
    for (i, o) in raw.obstacles.iter().enumerate() {
        let field = |name: &str| format!("obstacles[{i}].{name}");
        let position = finite(&field("position"), o.position)?;
        if !(position > 0.0 && position < corridor.length()) {
            return Err(invalid(
                field("position"),
                "must lie strictly inside the centerline",
            ));
        }
        if position <= last {
            return Err(invalid(
                field("position"),
                "obstacles must be ordered along the centerline",
            ));
        }
        last = position;
        if !(o.radius.is_finite() && o.radius >= 0.0) {
            return Err(invalid(field("radius"), "must be non-negative"));
        }
        if !(o.height.is_finite() && o.height >= 0.0) {
            return Err(invalid(field("height"), "must be non-negative"));
        }
        let spec = ObstacleSpec::new(corridor.point_at(position), o.radius, o.height)
            .map_err(|e| invalid(field("radius"), e))?;
        obstacles.push(PlacedObstacle { position, spec });
    }
    let goal = points("goal", &[raw.goal])?[0];

    Ok(Scenario {
        name: raw.name.unwrap_or_else(|| "scenario".to_string()),
        formation,
        corridor,
        obstacles,
        goal,
        safety,
        weights,
        motion,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ScenarioError> {
    toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string().trim_end().to_string()))
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    build(parse(text)?)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    parse_scenario(&read(path.as_ref())?)
}

/// Formation with optional explicit taut flags, from a `[sheet]` plus
/// `[formation]` document.
pub fn parse_formation(text: &str) -> Result<(Formation, Option<Vec<bool>>), ScenarioError> {
    let raw: RawFormationFile = parse(text)?;
    let formation = build_formation(&raw.sheet, &raw.formation)?;
    if let Some(flags) = &raw.formation.taut {
        if flags.len() != formation.len() {
            return Err(invalid(
                "formation.taut",
                format!("{} flags for {} robots", flags.len(), formation.len()),
            ));
        }
    }
    Ok((formation, raw.formation.taut))
}

pub fn load_formation(
    path: impl AsRef<Path>,
) -> Result<(Formation, Option<Vec<bool>>), ScenarioError> {
    parse_formation(&read(path.as_ref())?)
}
