//! Formation optimization for a single obstacle.
//!
//! Candidates are parametrized by the object target `(v_o, z_o)` and one
//! direction `φ_i` per robot; robots are placed so every cable is taut, the
//! equilibrium is re-solved, and the costs are evaluated on the actual
//! equilibrium. A deterministic coordinate pattern search minimizes the
//! penalized objective.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    indicators, Formation, FormationIndicators, SafetyParams, SheetLayout, Vec2,
};
use crate::vvcm::{place_robots, solve_equilibrium, ObjectEquilibrium};

/// Weights `λ1…λ5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub transport_contact: f64,
    pub transport_shape: f64,
    pub pass: f64,
    pub cross_height: f64,
    pub cross_diameter: f64,
}

impl CostWeights {
    pub fn new(l1: f64, l2: f64, l3: f64, l4: f64, l5: f64) -> Result<Self, OptimizeError> {
        let w = CostWeights {
            transport_contact: l1,
            transport_shape: l2,
            pass: l3,
            cross_height: l4,
            cross_diameter: l5,
        };
        if w.as_array().iter().all(|l| l.is_finite() && *l > 0.0) {
            Ok(w)
        } else {
            Err(OptimizeError::InvalidWeights)
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.transport_contact,
            self.transport_shape,
            self.pass,
            self.cross_height,
            self.cross_diameter,
        ]
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            transport_contact: 1.0,
            transport_shape: 1.0,
            pass: 1.0,
            cross_height: 10.0,
            cross_diameter: 10.0,
        }
    }
}

/// Cylindrical obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

impl ObstacleSpec {
    pub fn new(center: Vec2, radius: f64, height: f64) -> Result<Self, OptimizeError> {
        let finite = center.iter().all(|c| c.is_finite());
        if !finite
            || !(radius.is_finite() && radius >= 0.0)
            || !(height.is_finite() && height >= 0.0)
        {
            return Err(OptimizeError::InvalidObstacle);
        }
        Ok(ObstacleSpec {
            center: [center.x, center.y],
            radius,
            height,
        })
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.center[0], self.center[1])
    }

    /// `d_obs`.
    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("cost weights must be positive and finite")]
    InvalidWeights,
    #[error("obstacle center must be finite, radius and height non-negative")]
    InvalidObstacle,
    #[error("corridor width must be positive")]
    InvalidWidth,
    #[error("no formation can cross or pass beside the obstacle")]
    NoFeasibleFormation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PassMode {
    Crossing,
    Bypassing,
}

/// Cost terms of a formation, as defined (`J_cross` keeps its literal sign).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostTerms {
    pub transport: f64,
    pub pass: f64,
    pub cross: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormationSolution {
    pub formation: Formation,
    pub equilibrium: ObjectEquilibrium,
    pub indicators: FormationIndicators,
    pub costs: CostTerms,
    /// Value of the minimized objective.
    pub objective: f64,
    pub mode: PassMode,
    pub evaluations: usize,
}

/// `λ1·|v_o - v_o⁰|² + λ2·Σ_{i≠j} (|Δr_ij| - |Δr⁰_ij|)²`.
pub fn cost_transport(
    contact: Vec2,
    formation: &Formation,
    initial: &Formation,
    initial_contact: Vec2,
    weights: &CostWeights,
) -> f64 {
    let n = formation.len();
    let mut shape = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = formation.distance(i, j) - initial.distance(i, j);
                shape += d * d;
            }
        }
    }
    weights.transport_contact * (contact - initial_contact).norm_squared()
        + weights.transport_shape * shape
}

/// `-λ3·(W_convex - W)²`.
pub fn cost_pass(width: f64, corridor_width: f64, weights: &CostWeights) -> f64 {
    -weights.pass * (corridor_width - width).powi(2)
}

/// `-λ4·(z_obsmax - z_obs)² - λ5·(d_obsmax - d_obs)²`.
pub fn cost_cross(
    ind: &FormationIndicators,
    obstacle: &ObstacleSpec,
    weights: &CostWeights,
) -> f64 {
    -weights.cross_height * (ind.max_obstacle_height - obstacle.height).powi(2)
        - weights.cross_diameter * (ind.max_obstacle_diameter - obstacle.diameter()).powi(2)
}

/// Penalty per meter of constraint violation.
const PENALTY: f64 = 1e3;
/// Clearance kept on the height constraint so rounding downstream cannot
/// flip it.
const HEIGHT_MARGIN: f64 = 1e-6;
const BUDGET: usize = 500;
const MIN_STEP: f64 = 1e-9;
const SHRINK_STEPS: usize = 50;

struct Problem<'a> {
    layout: Arc<SheetLayout>,
    initial: &'a Formation,
    initial_contact: Vec2,
    anchor: Vec2,
    obstacle: &'a ObstacleSpec,
    corridor_width: f64,
    weights: &'a CostWeights,
    safety: &'a SafetyParams,
    mode: PassMode,
}

#[derive(Clone)]
struct Candidate {
    formation: Formation,
    equilibrium: ObjectEquilibrium,
    indicators: FormationIndicators,
    costs: CostTerms,
    objective: f64,
    violation: f64,
}

impl Problem<'_> {
    fn evaluate(&self, x: &[f64]) -> Option<Candidate> {
        let contact = Vec2::new(x[0], x[1]);
        let robots = place_robots(&self.layout, contact, x[2], &x[3..], self.anchor).ok()?;
        let formation = Formation::new(self.layout.clone(), robots).ok()?;
        self.assess(formation)
    }

    fn assess(&self, formation: Formation) -> Option<Candidate> {
        formation.check_inelastic().ok()?;
        let equilibrium = solve_equilibrium(&formation).ok()?;
        if equilibrium.taut_count() != formation.len() {
            return None;
        }
        let ind = indicators(&formation, equilibrium.height(), self.safety).ok()?;
        let w = self.weights;
        let costs = CostTerms {
            transport: cost_transport(
                equilibrium.contact,
                &formation,
                self.initial,
                self.initial_contact,
                w,
            ),
            pass: cost_pass(ind.width, self.corridor_width, w),
            cross: match self.mode {
                PassMode::Crossing => cost_cross(&ind, self.obstacle, w),
                PassMode::Bypassing => 0.0,
            },
        };
        let (objective, violation) = match self.mode {
            PassMode::Crossing => {
                // The height excess is penalized: the smallest formation that
                // still clears the obstacle is preferred.
                let excess =
                    w.cross_height * (ind.max_obstacle_height - self.obstacle.height).powi(2);
                let violation = (ind.width - self.corridor_width).max(0.0)
                    + (self.obstacle.height + HEIGHT_MARGIN - ind.max_obstacle_height).max(0.0)
                    + (self.obstacle.diameter() - ind.max_obstacle_diameter).max(0.0);
                (costs.transport + costs.pass + excess, violation)
            }
            PassMode::Bypassing => {
                let limit =
                    self.corridor_width - self.obstacle.diameter() - 2.0 * self.safety.robot_margin;
                (costs.transport + costs.pass, (ind.width - limit).max(0.0))
            }
        };
        Some(Candidate {
            formation,
            equilibrium,
            indicators: ind,
            costs,
            objective,
            violation,
        })
    }

    fn score(c: &Option<Candidate>) -> f64 {
        c.as_ref()
            .map_or(f64::INFINITY, |c| c.objective + PENALTY * c.violation)
    }

    /// Coordinate pattern search with opportunistic polling and step halving.
    fn search(&self, x0: Vec<f64>, steps0: Vec<f64>) -> (Option<Candidate>, usize) {
        let mut x = x0;
        let mut steps = steps0;
        let current = self.evaluate(&x);
        let mut score = Self::score(&current);
        let mut evals = 1;
        let mut best_feasible: Option<Candidate> = None;
        let keep = |c: &Option<Candidate>, best: &mut Option<Candidate>| match c {
            Some(c)
                if c.violation == 0.0
                    && best.as_ref().is_none_or(|b| c.objective < b.objective) =>
            {
                *best = Some(c.clone());
            }
            _ => {}
        };
        keep(&current, &mut best_feasible);
        'outer: while evals < BUDGET && steps.iter().any(|s| *s > MIN_STEP) {
            let mut improved = false;
            for k in 0..x.len() {
                for sign in [1.0, -1.0] {
                    if evals >= BUDGET {
                        break 'outer;
                    }
                    let mut trial = x.clone();
                    trial[k] += sign * steps[k];
                    let cand = self.evaluate(&trial);
                    evals += 1;
                    let s = Self::score(&cand);
                    keep(&cand, &mut best_feasible);
                    if s < score {
                        x = trial;
                        score = s;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                steps.iter_mut().for_each(|s| *s *= 0.5);
            }
        }
        (best_feasible, evals)
    }
}

/// Shrinks `initial` toward its centroid until it admits an all-taut
/// equilibrium, by bisection on the scale factor.
fn feasible_start(initial: &Formation) -> Option<(Formation, ObjectEquilibrium)> {
    let ok = |f: &Formation| -> Option<ObjectEquilibrium> {
        f.check_inelastic().ok()?;
        let eq = solve_equilibrium(f).ok()?;
        (eq.taut_count() == f.len()).then_some(eq)
    };
    if let Some(eq) = ok(initial) {
        return Some((initial.clone(), eq));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut found = None;
    for _ in 0..SHRINK_STEPS {
        let mid = 0.5 * (lo + hi);
        let f = initial.scaled_about_centroid(mid);
        match ok(&f) {
            Some(eq) => {
                lo = mid;
                found = Some((f, eq));
            }
            None => hi = mid,
        }
    }
    found
}

/// Optimal formation for crossing `obstacle`, or for passing beside it when
/// no crossing formation exists.
pub fn optimize_formation(
    initial: &Formation,
    obstacle: &ObstacleSpec,
    corridor_width: f64,
    weights: &CostWeights,
    safety: &SafetyParams,
) -> Result<FormationSolution, OptimizeError> {
    if !(corridor_width.is_finite() && corridor_width > 0.0) {
        return Err(OptimizeError::InvalidWidth);
    }
    let (start, start_eq) = feasible_start(initial).ok_or(OptimizeError::NoFeasibleFormation)?;
    let anchor = start_eq.horizontal();
    let mut x0 = vec![start_eq.contact.x, start_eq.contact.y, start_eq.height()];
    x0.extend(start.robots().iter().map(|r| {
        let d = r - anchor;
        d.y.atan2(d.x)
    }));
    let mut steps = vec![0.02, 0.02, 0.02];
    steps.extend(std::iter::repeat_n(0.05, start.len()));

    let mut evaluations = 0;
    for mode in [PassMode::Crossing, PassMode::Bypassing] {
        let problem = Problem {
            layout: start.layout_arc().clone(),
            initial: &start,
            initial_contact: start_eq.contact,
            anchor,
            obstacle,
            corridor_width,
            weights,
            safety,
            mode,
        };
        let (best, evals) = problem.search(x0.clone(), steps.clone());
        evaluations += evals;
        if let Some(c) = best {
            return Ok(FormationSolution {
                formation: c.formation,
                equilibrium: c.equilibrium,
                indicators: c.indicators,
                costs: c.costs,
                objective: c.objective,
                mode,
                evaluations,
            });
        }
    }
    Err(OptimizeError::NoFeasibleFormation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SheetLayout;

    fn equilateral(side: f64, center: Vec2) -> Vec<Vec2> {
        let c = Vec2::new(side / 2.0, side / (2.0 * 3f64.sqrt()));
        [
            Vec2::new(0.0, 0.0),
            Vec2::new(side, 0.0),
            Vec2::new(side / 2.0, side * 3f64.sqrt() / 2.0),
        ]
        .iter()
        .map(|p| p - c + center)
        .collect()
    }

    fn reference_layout() -> Arc<SheetLayout> {
        Arc::new(
            SheetLayout::new(equilateral(1.6, Vec2::new(0.8, 0.8 / 3f64.sqrt())), 0.79).unwrap(),
        )
    }

    fn side_lengths(f: &Formation) -> [f64; 3] {
        [f.distance(0, 1), f.distance(1, 2), f.distance(2, 0)]
    }

    #[test]
    fn cost_examples() {
        let w = CostWeights::default();
        let layout = reference_layout();
        let f = Formation::new(layout.clone(), equilateral(1.2, Vec2::zeros())).unwrap();
        assert_eq!(
            cost_transport(Vec2::new(0.3, 0.2), &f, &f, Vec2::new(0.3, 0.2), &w),
            0.0
        );
        assert!(
            (cost_transport(Vec2::new(0.4, 0.2), &f, &f, Vec2::new(0.3, 0.2), &w) - 0.01).abs()
                < 1e-15
        );

        let mut moved = equilateral(1.2, Vec2::zeros());
        moved[1].x += 0.01;
        let g = Formation::new(layout, moved).unwrap();
        let d01 = g.distance(0, 1) - 1.2;
        let d12 = g.distance(1, 2) - 1.2;
        let expect = 2.0 * (d01 * d01 + d12 * d12);
        assert!((cost_transport(Vec2::zeros(), &g, &f, Vec2::zeros(), &w) - expect).abs() < 1e-15);

        assert_eq!(cost_pass(1.7, 1.7, &w), 0.0);
        assert!((cost_pass(1.4856, 2.0, &w) - -0.26460736).abs() < 1e-8);
        let zero = CostWeights { pass: 0.0, ..w };
        assert_eq!(cost_pass(1.4856, 2.0, &zero), 0.0);

        let ind = FormationIndicators {
            width: 1.48564,
            diameter: 1.38564,
            min_distance: 1.2,
            max_obstacle_diameter: 1.1,
            max_obstacle_height: 0.139,
        };
        let obs = ObstacleSpec::new(Vec2::zeros(), 0.1, 0.05).unwrap();
        assert!((cost_cross(&ind, &obs, &w) - -8.17921).abs() < 1e-12);
        let at = FormationIndicators {
            max_obstacle_diameter: 0.2,
            max_obstacle_height: 0.05,
            ..ind
        };
        assert_eq!(cost_cross(&at, &obs, &w), 0.0);
        let none = CostWeights {
            cross_height: 0.0,
            cross_diameter: 0.0,
            ..w
        };
        assert_eq!(cost_cross(&ind, &obs, &none), 0.0);
    }

    #[test]
    fn reference_obstacles() {
        let initial = Formation::new(reference_layout(), equilateral(1.2, Vec2::zeros())).unwrap();
        let cases = [(0.1, 0.05, 1.04, 0.09), (0.2, 0.2, 1.28, 0.234)];
        for (radius, height, side, z) in cases {
            let obs = ObstacleSpec::new(Vec2::new(2.0, 0.0), radius, height).unwrap();
            let sol = optimize_formation(
                &initial,
                &obs,
                2.0,
                &CostWeights::default(),
                &SafetyParams::default(),
            )
            .unwrap();
            assert_eq!(sol.mode, PassMode::Crossing);
            for s in side_lengths(&sol.formation) {
                assert!((s - side).abs() < 0.05, "side {s} vs {side}");
            }
            assert!(
                (sol.equilibrium.height() - z).abs() < 0.01,
                "z {}",
                sol.equilibrium.height()
            );
            assert!(sol.indicators.max_obstacle_height >= height);
            assert!(sol.indicators.max_obstacle_diameter >= 2.0 * radius);
            assert!(sol.indicators.width <= 2.0);
            assert_eq!(sol.equilibrium.taut_count(), 3);
        }
    }

    #[test]
    fn impassable_obstacle() {
        let initial = Formation::new(reference_layout(), equilateral(1.2, Vec2::zeros())).unwrap();
        let obs = ObstacleSpec::new(Vec2::new(2.0, 0.0), 0.9, 1.0).unwrap();
        assert_eq!(
            optimize_formation(
                &initial,
                &obs,
                2.0,
                &CostWeights::default(),
                &SafetyParams::default()
            ),
            Err(OptimizeError::NoFeasibleFormation)
        );
    }

    #[test]
    fn tall_obstacle_in_wide_corridor_is_bypassed() {
        let initial = Formation::new(reference_layout(), equilateral(1.2, Vec2::zeros())).unwrap();
        let obs = ObstacleSpec::new(Vec2::new(2.0, 0.0), 0.2, 1.0).unwrap();
        let sol = optimize_formation(
            &initial,
            &obs,
            3.0,
            &CostWeights::default(),
            &SafetyParams::default(),
        )
        .unwrap();
        assert_eq!(sol.mode, PassMode::Bypassing);
        assert!(sol.indicators.width <= 3.0 - 0.4 - 0.1);
    }

    #[test]
    fn deterministic() {
        let initial = Formation::new(reference_layout(), equilateral(1.2, Vec2::zeros())).unwrap();
        let obs = ObstacleSpec::new(Vec2::new(2.0, 0.0), 0.1, 0.05).unwrap();
        let a = optimize_formation(
            &initial,
            &obs,
            2.0,
            &CostWeights::default(),
            &SafetyParams::default(),
        )
        .unwrap();
        let b = optimize_formation(
            &initial,
            &obs,
            2.0,
            &CostWeights::default(),
            &SafetyParams::default(),
        )
        .unwrap();
        for (p, q) in a.formation.robots().iter().zip(b.formation.robots()) {
            assert_eq!(p.x.to_bits(), q.x.to_bits());
            assert_eq!(p.y.to_bits(), q.y.to_bits());
        }
    }

    #[test]
    fn infeasible_start_is_shrunk() {
        let initial = Formation::new(reference_layout(), equilateral(1.7, Vec2::zeros())).unwrap();
        assert!(initial.check_inelastic().is_err());
        let obs = ObstacleSpec::new(Vec2::new(2.0, 0.0), 0.1, 0.05).unwrap();
        let sol = optimize_formation(
            &initial,
            &obs,
            2.0,
            &CostWeights::default(),
            &SafetyParams::default(),
        )
        .unwrap();
        assert_eq!(sol.mode, PassMode::Crossing);
    }
    #[test]
    fn never_worse_than_start() {
        let initial = Formation::new(reference_layout(), equilateral(1.2, Vec2::zeros())).unwrap();
        let (w, safety) = (CostWeights::default(), SafetyParams::default());
        for (radius, height) in [(0.1, 0.05), (0.2, 0.2), (0.15, 0.12)] {
            let obs = ObstacleSpec::new(Vec2::new(2.0, 0.0), radius, height).unwrap();
            let eq = solve_equilibrium(&initial).unwrap();
            let problem = Problem {
                layout: initial.layout_arc().clone(),
                initial: &initial,
                initial_contact: eq.contact,
                anchor: eq.horizontal(),
                obstacle: &obs,
                corridor_width: 2.0,
                weights: &w,
                safety: &safety,
                mode: PassMode::Crossing,
            };
            let start = Problem::score(&problem.assess(initial.clone()));
            let sol = optimize_formation(&initial, &obs, 2.0, &w, &safety).unwrap();
            assert!(sol.objective <= start + 1e-12);
            assert!(sol.evaluations <= 2 * BUDGET);
        }
    }

    #[test]
    fn larger_height_weight_never_widens_the_margin() {
        let initial = Formation::new(reference_layout(), equilateral(1.2, Vec2::zeros())).unwrap();
        for (radius, height) in [(0.1, 0.05), (0.2, 0.2), (0.15, 0.12)] {
            let obs = ObstacleSpec::new(Vec2::new(2.0, 0.0), radius, height).unwrap();
            let mut last = f64::INFINITY;
            for l4 in [1.0, 10.0, 100.0] {
                let w = CostWeights {
                    cross_height: l4,
                    ..CostWeights::default()
                };
                let sol =
                    optimize_formation(&initial, &obs, 2.0, &w, &SafetyParams::default()).unwrap();
                let margin = sol.indicators.max_obstacle_height - height;
                assert!(margin >= 0.0);
                assert!(margin <= last + 1e-6, "λ4={l4}: {margin} > {last}");
                last = margin;
            }
        }
    }
}
