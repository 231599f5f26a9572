//! Local motion around one obstacle and sampled timelines.
//!
//! A crossing rotates the formation about its centroid until the entering
//! side faces the direction of travel, translates until the obstacle sits
//! under the centroid, rotates again so the exiting side faces the departure
//! direction, and translates until every robot has cleared the obstacle.
//! Poses are expressed in an obstacle-local frame whose x-axis is the
//! direction of travel and whose origin is the starting centroid.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{
    rotate, wrap_angle, Formation, FormationIndicators, GeometryError, SafetyParams, SheetLayout,
    Vec2,
};
use crate::optimizer::{ObstacleSpec, PassMode};
use crate::vvcm::{solve_equilibrium, ObjectEquilibrium, VvcmError};

/// Angles closer than this are treated as ties.
const ANGLE_TIE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(&'static str),
    #[error("invalid motion parameter: {0}")]
    InvalidParams(&'static str),
    #[error("obstacle is not on the line of travel (lateral offset {0})")]
    OffLine(f64),
    #[error("obstacle is {distance} ahead, at least {required} is needed to turn safely")]
    ApproachTooShort { distance: f64, required: f64 },
    #[error("no crossing or bypassing motion exists")]
    PlanInfeasible,
    #[error(transparent)]
    Equilibrium(#[from] VvcmError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Speed, turning rate and sample period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MotionParams {
    /// `v`, m/s.
    pub speed: f64,
    /// `ω`, rad/s.
    pub turn_rate: f64,
    /// `Δt`, s.
    pub dt: f64,
}

impl MotionParams {
    pub fn new(speed: f64, turn_rate: f64, dt: f64) -> Result<Self, PlanError> {
        for (value, name) in [
            (speed, "speed"),
            (turn_rate, "turn rate"),
            (dt, "time step"),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(PlanError::InvalidParams(name));
            }
        }
        Ok(MotionParams {
            speed,
            turn_rate,
            dt,
        })
    }
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            speed: 0.1,
            turn_rate: 0.2,
            dt: 0.1,
        }
    }
}

/// Centroid pose `(x_τ, y_τ, θ_τ)` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CentroidPose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Entering and exiting sides. Side `k` joins robots `k` and `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SideSelection {
    pub entering: usize,
    pub exiting: usize,
    pub theta1: f64,
    pub theta2: f64,
    /// Outward normal of the entering side, before any rotation.
    pub n_in: [f64; 2],
    /// Inward normal of the exiting side, before any rotation.
    pub n_out: [f64; 2],
}

fn outward_normal(points: &[Vec2], k: usize) -> Vec2 {
    let e = points[(k + 1) % points.len()] - points[k];
    Vec2::new(e.y, -e.x).normalize()
}

fn angle_of(v: Vec2) -> f64 {
    v.y.atan2(v.x)
}

fn distance_to_ray(p: Vec2, origin: Vec2, dir: Vec2) -> f64 {
    let s = (p - origin).dot(&dir).max(0.0);
    (p - origin - dir * s).norm()
}

/// Sides the obstacle passes through, and the rotations aligning them.
///
/// The entering side minimizes `|θ1|`, where `θ1` turns its outward normal
/// onto `approach`; the exiting side minimizes `|θ1 + θ2|`, where `θ1 + θ2`
/// turns its inward normal onto `depart`. Ties go to the lower index. With a
/// positive `clearance`, a side qualifies only if every robot stays at least
/// that far from the obstacle's path through it, which runs from the centroid
/// along the side's outward normal.
pub fn select_sides(
    formation: &Formation,
    approach: Vec2,
    depart: Vec2,
    clearance: f64,
) -> Option<SideSelection> {
    let pts = formation.robots();
    let n = pts.len();
    let c = formation.centroid();
    let normals: Vec<Vec2> = (0..n).map(|k| outward_normal(pts, k)).collect();
    let passable: Vec<bool> = normals
        .iter()
        .map(|nk| clearance <= 0.0 || pts.iter().all(|p| distance_to_ray(*p, c, *nk) >= clearance))
        .collect();
    let pick = |score: &dyn Fn(usize) -> f64, skip: Option<usize>| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for k in (0..n).filter(|&k| passable[k] && Some(k) != skip) {
            let s = score(k).abs();
            if best.is_none_or(|(_, b)| s < b - ANGLE_TIE) {
                best = Some((k, s));
            }
        }
        best.map(|(k, _)| k)
    };
    let enter_angle = |k: usize| wrap_angle(angle_of(approach) - angle_of(normals[k]));
    let exit_angle = |k: usize| wrap_angle(angle_of(depart) - angle_of(-normals[k]));
    let entering = pick(&enter_angle, None)?;
    let exiting = pick(&exit_angle, Some(entering))?;
    let theta1 = enter_angle(entering);
    let theta2 = wrap_angle(exit_angle(exiting) - theta1);
    let (ni, no) = (normals[entering], -normals[exiting]);
    Some(SideSelection {
        entering,
        exiting,
        theta1,
        theta2,
        n_in: [ni.x, ni.y],
        n_out: [no.x, no.y],
    })
}

/// Rotation, translation, rotation, translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingSchedule {
    pub sides: SideSelection,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub speed: f64,
}

impl CrossingSchedule {
    pub fn new(sides: SideSelection, times: [f64; 4], speed: f64) -> Result<Self, PlanError> {
        let [t1, t2, t3, t4] = times;
        if !times.iter().all(|t| t.is_finite()) {
            return Err(PlanError::InvalidSchedule("non-finite time"));
        }
        if !(0.0 < t1 && t1 <= t2 && t2 <= t3 && t3 <= t4) {
            return Err(PlanError::InvalidSchedule(
                "times must satisfy 0 < T1 <= T2 <= T3 <= T4",
            ));
        }
        if !(speed.is_finite() && speed > 0.0) {
            return Err(PlanError::InvalidSchedule("speed must be positive"));
        }
        if !(sides.theta1.is_finite() && sides.theta2.is_finite()) {
            return Err(PlanError::InvalidSchedule("non-finite angle"));
        }
        Ok(CrossingSchedule {
            sides,
            t1,
            t2,
            t3,
            t4,
            speed,
        })
    }

    pub fn theta1(&self) -> f64 {
        self.sides.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.sides.theta2
    }

    /// `δ_T = T2 - T1`.
    pub fn delta(&self) -> f64 {
        self.t2 - self.t1
    }

    pub fn duration(&self) -> f64 {
        self.t4
    }

    /// Pose at `t`, clamped to `[0, T4]`; `y_τ` is always zero.
    pub fn pose_at(&self, t: f64) -> CentroidPose {
        let (th1, th2, v) = (self.sides.theta1, self.sides.theta2, self.speed);
        let s = t.clamp(0.0, self.t4);
        let (x, theta) = if s <= self.t1 {
            (0.0, th1 * s / self.t1)
        } else if s <= self.t2 {
            (v * (s - self.t1), th1)
        } else if s <= self.t3 {
            (
                v * self.delta(),
                th1 + th2 * (s - self.t2) / (self.t3 - self.t2),
            )
        } else {
            (v * (s + self.delta() - self.t3), th1 + th2)
        };
        CentroidPose {
            t,
            x,
            y: 0.0,
            theta,
        }
    }
}

/// Samples `schedule` every `dt` from `0` through the first sample at or
/// past `T4`.
pub fn crossing_path(schedule: &CrossingSchedule, dt: f64) -> Result<Vec<CentroidPose>, PlanError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(PlanError::InvalidSchedule("time step must be positive"));
    }
    Ok(sample_times(schedule.duration(), dt)
        .map(|t| schedule.pose_at(t))
        .collect())
}

fn sample_count(duration: f64, dt: f64) -> usize {
    if duration <= 0.0 {
        return 0;
    }
    (duration / dt - 1e-9).ceil() as usize + 1
}

fn sample_times(duration: f64, dt: f64) -> impl Iterator<Item = f64> {
    (0..sample_count(duration, dt)).map(move |k| k as f64 * dt)
}

/// Rigid motion of `formation`: each centroid offset is rotated by `θ_τ` and
/// the centroid is displaced by `(x_τ, y_τ)`. Indexed `[robot][sample]`.
pub fn formation_to_robots(poses: &[CentroidPose], formation: &Formation) -> Vec<Vec<Vec2>> {
    let c = formation.centroid();
    formation
        .robots()
        .iter()
        .map(|r| {
            let offset = r - c;
            poses
                .iter()
                .map(|p| c + Vec2::new(p.x, p.y) + rotate(offset, p.theta))
                .collect()
        })
        .collect()
}

/// Sideways shift, straight run, shift back; no rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BypassProfile {
    /// Lateral offset during the run, positive to the left.
    pub shift: f64,
    /// Forward distance of the run.
    pub forward: f64,
    pub speed: f64,
}

impl BypassProfile {
    fn ramp(&self) -> f64 {
        self.shift.abs() / self.speed
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.ramp() + self.forward / self.speed
    }

    pub fn pose_at(&self, t: f64) -> CentroidPose {
        let a = self.ramp();
        let b = self.forward / self.speed;
        let s = t.clamp(0.0, self.duration());
        let (x, y) = if s <= a {
            (0.0, self.shift * s / a)
        } else if s <= a + b {
            (self.speed * (s - a), self.shift)
        } else {
            (self.forward, self.shift * (1.0 - (s - a - b) / a))
        };
        CentroidPose {
            t,
            x,
            y,
            theta: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LocalMotion {
    Crossing(CrossingSchedule),
    Bypass(BypassProfile),
}

impl LocalMotion {
    pub fn duration(&self) -> f64 {
        match self {
            LocalMotion::Crossing(s) => s.duration(),
            LocalMotion::Bypass(b) => b.duration(),
        }
    }

    pub fn pose_at(&self, t: f64) -> CentroidPose {
        match self {
            LocalMotion::Crossing(s) => s.pose_at(t),
            LocalMotion::Bypass(b) => b.pose_at(t),
        }
    }
}

/// Motion past one obstacle, anchored in the world.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPlan {
    pub mode: PassMode,
    pub motion: LocalMotion,
    /// Formation at the start of the motion.
    pub formation: Formation,
    /// Unit direction of travel.
    pub direction: Vec2,
}

impl LocalPlan {
    pub fn duration(&self) -> f64 {
        self.motion.duration()
    }

    /// Robot positions at local time `t`.
    pub fn robots_at(&self, t: f64) -> Vec<Vec2> {
        let p = self.motion.pose_at(t);
        let c = self.formation.centroid();
        let shift = self.direction * p.x + Vec2::new(-self.direction.y, self.direction.x) * p.y;
        self.formation
            .robots()
            .iter()
            .map(|r| c + shift + rotate(r - c, p.theta))
            .collect()
    }

    pub fn end_formation(&self) -> Formation {
        Formation::new(
            self.formation.layout_arc().clone(),
            self.robots_at(self.duration()),
        )
        .expect("rigid motion keeps the formation valid")
    }

    /// Samples the plan every `dt`, solving the object equilibrium at each
    /// sample.
    pub fn timeline(&self, dt: f64) -> Result<PlanTimeline, PlanError> {
        let mut builder = TimelineBuilder::new(self.formation.clone());
        builder.push(WorldMotion::Local(self.clone()));
        builder.sample(dt)
    }
}

/// Builds a crossing or bypassing motion for `formation`, whose centroid is
/// the start of the motion; `obstacle` must lie ahead on the line of travel.
pub fn plan_local(
    formation: &Formation,
    indicators: &FormationIndicators,
    obstacle: &ObstacleSpec,
    corridor_width: f64,
    direction: Vec2,
    safety: &SafetyParams,
    params: &MotionParams,
) -> Result<LocalPlan, PlanError> {
    let norm = direction.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(PlanError::InvalidParams("direction"));
    }
    let u = direction / norm;
    let c = formation.centroid();
    let rel = obstacle.center() - c;
    let ahead = rel.dot(&u);
    let lateral = crate::geometry::cross(u, rel);
    if lateral.abs() > 1e-9 * (1.0 + ahead.abs()) {
        return Err(PlanError::OffLine(lateral));
    }
    let reach = formation
        .robots()
        .iter()
        .map(|r| (r - c).norm())
        .fold(0.0, f64::max);
    let clearance = obstacle.radius + safety.robot_margin;
    if ahead < reach + clearance {
        return Err(PlanError::ApproachTooShort {
            distance: ahead,
            required: reach + clearance,
        });
    }
    // Offsets in the travel frame: x along `u`, y to its left.
    let to_local = |p: Vec2| Vec2::new(p.dot(&u), crate::geometry::cross(u, p));
    let local: Vec<Vec2> = formation.robots().iter().map(|r| to_local(r - c)).collect();

    let crosses = indicators.max_obstacle_height >= obstacle.height
        && indicators.max_obstacle_diameter >= obstacle.diameter()
        && indicators.width <= corridor_width;
    if crosses {
        let body = Formation::new(formation.layout_arc().clone(), local.clone())?;
        let x = Vec2::new(1.0, 0.0);
        if let Some(sides) = select_sides(&body, x, x, clearance) {
            let v = params.speed;
            let t1 = (sides.theta1.abs() / params.turn_rate).max(params.dt);
            let t2 = t1 + ahead / v;
            let t3 = t2 + sides.theta2.abs() / params.turn_rate;
            let rear = local
                .iter()
                .map(|p| -rotate(*p, sides.theta1 + sides.theta2).x)
                .fold(0.0, f64::max);
            let t4 = t3 + (rear + clearance) / v;
            let schedule = CrossingSchedule::new(sides, [t1, t2, t3, t4], v)?;
            return Ok(LocalPlan {
                mode: PassMode::Crossing,
                motion: LocalMotion::Crossing(schedule),
                formation: formation.clone(),
                direction: u,
            });
        }
    }

    let half = corridor_width / 2.0 - safety.robot_margin;
    let (lo, hi) = local
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.y), hi.max(p.y))
        });
    let left = clearance - lo;
    let right = -(clearance + hi);
    let fits = |s: f64| s + hi <= half && s + lo >= -half;
    let shift = [left, right]
        .into_iter()
        .filter(|s| fits(*s))
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .ok_or(PlanError::PlanInfeasible)?;
    let rear = local.iter().map(|p| -p.x).fold(0.0, f64::max);
    Ok(LocalPlan {
        mode: PassMode::Bypassing,
        motion: LocalMotion::Bypass(BypassProfile {
            shift,
            forward: ahead + rear + clearance,
            speed: params.speed,
        }),
        formation: formation.clone(),
        direction: u,
    })
}

/// A continuous motion segment in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum WorldMotion {
    /// Rigid translation along a polyline of centroid waypoints.
    Transit {
        formation: Formation,
        path: Vec<Vec2>,
        speed: f64,
    },
    /// Each robot moves on a straight line to its new position; all arrive
    /// together.
    Reshape {
        from: Formation,
        to: Formation,
        duration: f64,
    },
    Local(LocalPlan),
}

impl WorldMotion {
    pub fn transit(formation: Formation, path: Vec<Vec2>, speed: f64) -> Self {
        WorldMotion::Transit {
            formation,
            path,
            speed,
        }
    }

    pub fn reshape(from: Formation, to: Formation, speed: f64) -> Self {
        let longest = from
            .robots()
            .iter()
            .zip(to.robots())
            .map(|(a, b)| (b - a).norm())
            .fold(0.0, f64::max);
        WorldMotion::Reshape {
            from,
            to,
            duration: longest / speed,
        }
    }

    pub fn duration(&self) -> f64 {
        match self {
            WorldMotion::Transit { path, speed, .. } => path_length(path) / speed,
            WorldMotion::Reshape { duration, .. } => *duration,
            WorldMotion::Local(p) => p.duration(),
        }
    }

    /// Robot positions and heading change at local time `t`.
    fn state_at(&self, t: f64) -> (Vec<Vec2>, f64) {
        match self {
            WorldMotion::Transit {
                formation,
                path,
                speed,
            } => {
                let p = point_along(path, speed * t);
                let d = p - formation.centroid();
                (formation.robots().iter().map(|r| r + d).collect(), 0.0)
            }
            WorldMotion::Reshape { from, to, duration } => {
                let s = if *duration > 0.0 {
                    (t / duration).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                let robots = from
                    .robots()
                    .iter()
                    .zip(to.robots())
                    .map(|(a, b)| a + (b - a) * s)
                    .collect();
                (robots, 0.0)
            }
            WorldMotion::Local(p) => (p.robots_at(t), p.motion.pose_at(t).theta),
        }
    }

    /// Pairwise robot distances stay fixed.
    pub fn is_rigid(&self) -> bool {
        !matches!(self, WorldMotion::Reshape { .. })
    }

    fn layout(&self) -> &Arc<SheetLayout> {
        match self {
            WorldMotion::Transit { formation, .. } => formation.layout_arc(),
            WorldMotion::Reshape { from, .. } => from.layout_arc(),
            WorldMotion::Local(p) => p.formation.layout_arc(),
        }
    }
}

pub(crate) fn path_length(path: &[Vec2]) -> f64 {
    path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Point at arclength `s` along `path`, clamped to its ends.
pub(crate) fn point_along(path: &[Vec2], s: f64) -> Vec2 {
    let mut rest = s.max(0.0);
    for w in path.windows(2) {
        let len = (w[1] - w[0]).norm();
        if rest <= len && len > 0.0 {
            return w[0] + (w[1] - w[0]) * (rest / len);
        }
        rest -= len;
    }
    *path.last().expect("path has points")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    Transit,
    Reshape,
    Crossing,
    Bypass,
}

/// Time span of one motion segment in a timeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub start: f64,
    pub end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local: Option<LocalMotion>,
}

impl Phase {
    pub fn is_rigid(&self) -> bool {
        self.kind != PhaseKind::Reshape
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// World centroid and accumulated heading change.
    pub pose: CentroidPose,
    pub robots: Vec<Vec2>,
    pub equilibrium: ObjectEquilibrium,
}

/// Uniformly sampled robot and object trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanTimeline {
    pub dt: f64,
    pub samples: Vec<Sample>,
    pub phases: Vec<Phase>,
}

impl PlanTimeline {
    pub fn duration(&self) -> f64 {
        self.phases.last().map_or(0.0, |p| p.end)
    }

    /// Phase containing time `t` (the earlier one on a boundary).
    pub fn phase_at(&self, t: f64) -> Option<&Phase> {
        self.phases.iter().find(|p| t <= p.end + 1e-12)
    }
}

/// Concatenates motions and samples them on one uniform clock.
pub struct TimelineBuilder {
    motions: Vec<WorldMotion>,
    current: Formation,
}

impl TimelineBuilder {
    pub fn new(start: Formation) -> Self {
        TimelineBuilder {
            motions: Vec::new(),
            current: start,
        }
    }

    /// Formation at the end of the motions pushed so far.
    pub fn current(&self) -> &Formation {
        &self.current
    }

    pub fn duration(&self) -> f64 {
        self.motions.iter().map(WorldMotion::duration).sum()
    }

    pub fn push(&mut self, motion: WorldMotion) {
        if motion.duration() <= 0.0 {
            return;
        }
        let (robots, _) = motion.state_at(motion.duration());
        self.current = Formation::new(motion.layout().clone(), robots)
            .expect("motion ends in a valid formation");
        self.motions.push(motion);
    }

    pub fn sample(&self, dt: f64) -> Result<PlanTimeline, PlanError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(PlanError::InvalidParams("time step"));
        }
        let mut phases = Vec::with_capacity(self.motions.len());
        let mut start = 0.0;
        for m in &self.motions {
            let end = start + m.duration();
            let (kind, local) = match m {
                WorldMotion::Transit { .. } => (PhaseKind::Transit, None),
                WorldMotion::Reshape { .. } => (PhaseKind::Reshape, None),
                WorldMotion::Local(p) => (
                    match p.mode {
                        PassMode::Crossing => PhaseKind::Crossing,
                        PassMode::Bypassing => PhaseKind::Bypass,
                    },
                    Some(p.motion.clone()),
                ),
            };
            phases.push(Phase {
                kind,
                start,
                end,
                local,
            });
            start = end;
        }
        let total = start;
        let mut samples = Vec::new();
        let mut heading = 0.0;
        let mut idx = 0;
        for t in sample_times(total, dt) {
            while idx + 1 < self.motions.len() && t > phases[idx].end {
                heading += self.motions[idx].state_at(self.motions[idx].duration()).1;
                idx += 1;
            }
            let motion = &self.motions[idx];
            let local_t = (t - phases[idx].start).min(motion.duration());
            let (robots, turn) = motion.state_at(local_t);
            let formation = Formation::new(motion.layout().clone(), robots)?;
            let equilibrium = solve_equilibrium(&formation)?;
            let c = formation.centroid();
            samples.push(Sample {
                t,
                pose: CentroidPose {
                    t,
                    x: c.x,
                    y: c.y,
                    theta: heading + turn,
                },
                robots: formation.robots().to_vec(),
                equilibrium,
            });
        }
        Ok(PlanTimeline {
            dt,
            samples,
            phases,
        })
    }
}
