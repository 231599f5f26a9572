//! End-to-end run: transit along the corridor, reshape and pass each
//! obstacle in turn, then carry the object to the goal.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{rotate, wrap_angle, Formation, FormationIndicators, Vec2};
use crate::optimizer::{optimize_formation, CostTerms, OptimizeError, PassMode};
use crate::planner::{
    plan_local, LocalMotion, PlanError, PlanTimeline, TimelineBuilder, WorldMotion,
};
use crate::scenario::Scenario;
use crate::vvcm::{solve_equilibrium, VvcmError};

/// Obstacles trigger re-optimization within this many formation widths.
const INFLUENCE: f64 = 1.5;
/// Entry turns larger than this are folded into the reshape.
const MAX_ENTRY_TURN: f64 = std::f64::consts::PI / 6.0;
/// Centroids closer than this to the centerline are on it.
const ON_LINE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("obstacle {obstacle} can be neither crossed nor bypassed: {reason}")]
    PipelineInfeasible { obstacle: usize, reason: String },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Equilibrium(#[from] VvcmError),
}

/// Outcome at one obstacle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstacleRecord {
    pub index: usize,
    pub mode: PassMode,
    pub start: f64,
    pub end: f64,
    /// Side lengths of the formation used, robot `i` to `i + 1`.
    pub side_lengths: Vec<f64>,
    pub object_height: f64,
    pub indicators: FormationIndicators,
    pub costs: CostTerms,
    pub evaluations: usize,
    /// Entry turn `θ1`, radians.
    pub entering_angle: Option<f64>,
    /// Angle between the exiting normal and the direction of travel once
    /// the exit turn is done, radians.
    pub exiting_angle: Option<f64>,
    pub theta2: Option<f64>,
    pub motion: LocalMotion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub timeline: PlanTimeline,
    pub obstacles: Vec<ObstacleRecord>,
    /// Smallest `z_o - z_obs` while the object is over an obstacle.
    pub min_vertical_clearance: Option<f64>,
    /// Smallest gap between a robot and an obstacle disc.
    pub min_horizontal_clearance: Option<f64>,
    pub path_lengths: Vec<f64>,
    /// RMS distance of the object from the centerline.
    pub centerline_rmse: f64,
    /// Distance from the final object position to the goal.
    pub goal_error: f64,
}

impl RunReport {
    /// `(t, z_o)` for every sample.
    pub fn height_profile(&self) -> Vec<(f64, f64)> {
        self.timeline
            .samples
            .iter()
            .map(|s| (s.t, s.equilibrium.height()))
            .collect()
    }
}

fn side_lengths(f: &Formation) -> Vec<f64> {
    (0..f.len())
        .map(|i| f.distance(i, (i + 1) % f.len()))
        .collect()
}

fn reach(f: &Formation) -> f64 {
    let c = f.centroid();
    f.robots()
        .iter()
        .map(|r| (r - c).norm())
        .fold(0.0, f64::max)
}

/// `target` moved onto the centroid of `current` and turned to best match
/// it robot by robot.
fn align(target: &Formation, current: &Formation) -> Formation {
    let (ct, cc) = (target.centroid(), current.centroid());
    let (mut s, mut c) = (0.0, 0.0);
    for (a, b) in target.robots().iter().zip(current.robots()) {
        let (a, b) = (a - ct, b - cc);
        s += crate::geometry::cross(a, b);
        c += a.dot(&b);
    }
    let angle = s.atan2(c);
    let robots = target
        .robots()
        .iter()
        .map(|a| cc + rotate(a - ct, angle))
        .collect();
    Formation::new(target.layout_arc().clone(), robots)
        .expect("rigid motion keeps the formation valid")
}

/// Clearances recomputed from sampled positions.
pub fn clearances(
    timeline: &PlanTimeline,
    obstacles: &[(Vec2, f64, f64)],
    horizontal_margin: f64,
) -> (Option<f64>, Option<f64>) {
    let mut vertical: Option<f64> = None;
    let mut horizontal: Option<f64> = None;
    for s in &timeline.samples {
        let p = s.equilibrium.horizontal();
        for &(c, r, h) in obstacles {
            if (p - c).norm() <= r + horizontal_margin {
                let v = s.equilibrium.height() - h;
                vertical = Some(vertical.map_or(v, |m| m.min(v)));
            }
            for q in &s.robots {
                let g = (q - c).norm() - r;
                horizontal = Some(horizontal.map_or(g, |m| m.min(g)));
            }
        }
    }
    (vertical, horizontal)
}

pub fn run_pipeline(scenario: &Scenario) -> Result<RunReport, PipelineError> {
    let corridor = &scenario.corridor;
    let (safety, motion) = (&scenario.safety, &scenario.motion);
    let v = motion.speed;
    let mut builder = TimelineBuilder::new(scenario.formation.clone());
    let start = scenario.formation.centroid();
    let (mut s_cur, off) = corridor.project(start);
    if off > ON_LINE {
        builder.push(WorldMotion::transit(
            scenario.formation.clone(),
            vec![start, corridor.point_at(s_cur)],
            v,
        ));
    }

    let mut records = Vec::with_capacity(scenario.obstacles.len());
    for (k, obstacle) in scenario.obstacles.iter().enumerate() {
        let infeasible = |reason: String| PipelineError::PipelineInfeasible {
            obstacle: k,
            reason,
        };
        let seg = corridor.segment_at(obstacle.position);
        let width = corridor.widths()[seg];
        let dir = corridor.direction(seg);
        let current = builder.current().clone();
        let solution =
            optimize_formation(&current, &obstacle.spec, width, &scenario.weights, safety)
                .map_err(|e: OptimizeError| infeasible(e.to_string()))?;

        let clearance = obstacle.spec.radius + safety.robot_margin;
        let mut target = align(&solution.formation, &current);
        let needed = reach(&current).max(reach(&target)) + clearance;
        let current_width = current.circumscribed_diameter() + 2.0 * safety.robot_margin;
        let preferred = (INFLUENCE * current_width).max(needed);
        let spread = reach(&current).max(reach(&target)) + safety.robot_margin;
        // Reshaping must also stay clear of the obstacles already passed.
        let behind = scenario.obstacles[..k]
            .iter()
            .map(|o| o.position + spread + o.spec.radius)
            .fold(f64::NEG_INFINITY, f64::max);
        let begin = s_cur
            .max(obstacle.position - preferred)
            .max(corridor.segment_start(seg))
            .max(behind);
        let ahead = obstacle.position - begin;
        if ahead < needed {
            return Err(infeasible(format!(
                "only {ahead:.3} m to prepare, {needed:.3} m needed"
            )));
        }
        let at = corridor.point_at(begin);
        if let Some(j) = (0..k).find(|&j| {
            let o = &scenario.obstacles[j].spec;
            (at - o.center()).norm() < spread + o.radius
        }) {
            return Err(infeasible(format!(
                "no room to reshape clear of obstacle {j}"
            )));
        }
        if begin > s_cur {
            builder.push(WorldMotion::transit(
                current.clone(),
                corridor.path_between(s_cur, begin),
                v,
            ));
        }
        let here = builder.current().clone();
        target = target.translated(here.centroid() - target.centroid());
        // A large entry turn is made while reshaping instead.
        let to_travel = |f: &Formation| {
            let c = f.centroid();
            let pts: Vec<Vec2> = f
                .robots()
                .iter()
                .map(|r| {
                    let d = r - c;
                    Vec2::new(d.dot(&dir), crate::geometry::cross(dir, d))
                })
                .collect();
            Formation::new(f.layout_arc().clone(), pts)
                .expect("rigid motion keeps the formation valid")
        };
        let x = Vec2::x();
        if let Some(sides) = crate::planner::select_sides(&to_travel(&target), x, x, clearance) {
            if sides.theta1.abs() > MAX_ENTRY_TURN {
                target = target.rotated_about(target.centroid(), sides.theta1);
            }
        }
        builder.push(WorldMotion::reshape(here, target.clone(), v));

        let plan = match plan_local(
            &target,
            &solution.indicators,
            &obstacle.spec,
            width,
            dir,
            safety,
            motion,
        ) {
            Ok(p) => p,
            Err(PlanError::PlanInfeasible) => {
                return Err(infeasible("no crossing or bypass motion".into()))
            }
            Err(e) => return Err(e.into()),
        };
        let t_start = builder.duration();
        let (entering_angle, exiting_angle, theta2) = match &plan.motion {
            LocalMotion::Crossing(s) => {
                let n_out = Vec2::new(s.sides.n_out[0], s.sides.n_out[1]);
                let turned = rotate(n_out, s.theta1() + s.theta2());
                (
                    Some(s.theta1()),
                    Some(wrap_angle(turned.y.atan2(turned.x))),
                    Some(s.theta2()),
                )
            }
            LocalMotion::Bypass(_) => (None, None, None),
        };
        let travelled = match &plan.motion {
            LocalMotion::Crossing(s) => s.pose_at(s.duration()).x,
            LocalMotion::Bypass(b) => b.forward,
        };
        records.push(ObstacleRecord {
            index: k,
            mode: plan.mode,
            start: t_start,
            end: t_start + plan.duration(),
            side_lengths: side_lengths(&target),
            object_height: solution.equilibrium.height(),
            indicators: solution.indicators,
            costs: solution.costs,
            evaluations: solution.evaluations,
            entering_angle,
            exiting_angle,
            theta2,
            motion: plan.motion.clone(),
        });
        builder.push(WorldMotion::Local(plan));
        s_cur = begin + travelled;
    }

    let last = builder.current().clone();
    let eq = solve_equilibrium(&last)?;
    let offset = eq.horizontal() - last.centroid();
    let end = scenario.goal - offset;
    let mut path = if s_cur < corridor.length() {
        corridor.path_between(s_cur, corridor.length())
    } else {
        vec![last.centroid()]
    };
    path[0] = last.centroid();
    if (end - path[path.len() - 1]).norm() > ON_LINE {
        path.push(end);
    }
    builder.push(WorldMotion::transit(last, path, v));

    let timeline = builder.sample(motion.dt)?;
    Ok(summarize(scenario, timeline, records))
}

fn summarize(
    scenario: &Scenario,
    timeline: PlanTimeline,
    obstacles: Vec<ObstacleRecord>,
) -> RunReport {
    let obs: Vec<(Vec2, f64, f64)> = scenario
        .obstacles
        .iter()
        .map(|o| (o.spec.center(), o.spec.radius, o.spec.height))
        .collect();
    let (min_vertical_clearance, min_horizontal_clearance) =
        clearances(&timeline, &obs, scenario.safety.robot_margin);
    let n = scenario.formation.len();
    let mut path_lengths = vec![0.0; n];
    for w in timeline.samples.windows(2) {
        for (i, len) in path_lengths.iter_mut().enumerate() {
            *len += (w[1].robots[i] - w[0].robots[i]).norm();
        }
    }
    let sq: f64 = timeline
        .samples
        .iter()
        .map(|s| {
            scenario
                .corridor
                .project(s.equilibrium.horizontal())
                .1
                .powi(2)
        })
        .sum();
    let centerline_rmse = if timeline.samples.is_empty() {
        0.0
    } else {
        (sq / timeline.samples.len() as f64).sqrt()
    };
    let goal_error = timeline
        .samples
        .last()
        .map_or(0.0, |s| (s.equilibrium.horizontal() - scenario.goal).norm());
    RunReport {
        name: scenario.name.clone(),
        timeline,
        obstacles,
        min_vertical_clearance,
        min_horizontal_clearance,
        path_lengths,
        centerline_rmse,
        goal_error,
    }
}
