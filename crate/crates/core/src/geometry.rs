//! Planar geometry for the sheet and the robot formation: polygon predicates,
//! the canonical local frame, minimum enclosing circles and the scalar
//! formation indicators used by the planner.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 2-D point or vector, meters.
pub type Vec2 = Vector2<f64>;

/// Signed-area tolerance for convexity and orientation tests, m².
pub const AREA_TOL: f64 = 1e-9;
/// Two points closer than this are considered coincident, m.
pub const COINCIDENT_TOL: f64 = 1e-9;
/// Slack allowed on the inelasticity inequality `|r_i - r_j| <= |v_i - v_j|`, m.
pub const INELASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("polygon needs at least {min} vertices, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("polygon is not convex at vertex {0}")]
    NotConvex(usize),
    #[error("polygon vertices are not in counterclockwise order")]
    NotCounterClockwise,
    #[error("polygon is degenerate (signed area {0:e} m²)")]
    Collinear(f64),
    #[error("degenerate formation: first two robots coincide")]
    DegenerateFormation,
    #[error("object height {object} m must be below the holding height {holding} m")]
    InvalidHeight { object: f64, holding: f64 },
    #[error("formation has {robots} robots but the sheet has {holding_points} holding points")]
    CountMismatch {
        robots: usize,
        holding_points: usize,
    },
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
}

/// 2-D cross product (z component of `a × b`).
#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Rotates `p` counterclockwise by `angle` radians.
#[inline]
pub fn rotate(p: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Shoelace signed area; positive for counterclockwise polygons.
pub fn signed_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| cross(points[i], points[(i + 1) % n]))
        .sum::<f64>()
        * 0.5
}

/// Arithmetic mean of the vertices.
pub fn vertex_centroid(points: &[Vec2]) -> Vec2 {
    points.iter().fold(Vec2::zeros(), |acc, p| acc + p) / points.len() as f64
}

/// Checks that `points` is a strictly convex, counterclockwise, simple polygon
/// with at least three vertices.
pub fn check_convex_ccw(points: &[Vec2]) -> Result<(), GeometryError> {
    let n = points.len();
    if n < 3 {
        return Err(GeometryError::TooFewPoints { min: 3, got: n });
    }
    if let Some(i) = points
        .iter()
        .position(|p| !p.x.is_finite() || !p.y.is_finite())
    {
        return Err(GeometryError::NonFinite(i));
    }
    let area = signed_area(points);
    if area.abs() < AREA_TOL {
        return Err(GeometryError::Collinear(area));
    }
    if area < 0.0 {
        return Err(GeometryError::NotCounterClockwise);
    }
    let mut turning = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        let c = points[(i + 2) % n];
        let e1 = b - a;
        let e2 = c - b;
        // Twice the triangle area; a left turn is required at every vertex.
        if cross(e1, e2) < AREA_TOL {
            return Err(GeometryError::NotConvex((i + 1) % n));
        }
        turning += cross(e1, e2).atan2(e1.dot(&e2));
    }
    // All left turns with total turning 2π rules out self-overlapping stars.
    if (turning - 2.0 * std::f64::consts::PI).abs() > 1e-6 {
        return Err(GeometryError::NotConvex(0));
    }
    Ok(())
}

/// Whether `p` lies inside or on the boundary of the convex CCW polygon.
pub fn point_in_convex(points: &[Vec2], p: Vec2, tol: f64) -> bool {
    let n = points.len();
    (0..n).all(|i| {
        let a = points[i];
        let b = points[(i + 1) % n];
        let edge = b - a;
        cross(edge, p - a) >= -tol * edge.norm()
    })
}

/// Signed distance from `p` to the boundary of a convex CCW polygon; positive
/// inside.
pub fn convex_inset(points: &[Vec2], p: Vec2) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let a = points[i];
            let edge = points[(i + 1) % n] - a;
            cross(edge, p - a) / edge.norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Circle given by center and radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        (p - self.center).norm() <= self.radius + tol
    }

    fn through_two(a: Vec2, b: Vec2) -> Self {
        Circle {
            center: (a + b) * 0.5,
            radius: (a - b).norm() * 0.5,
        }
    }

    fn through_three(a: Vec2, b: Vec2, c: Vec2) -> Option<Self> {
        let d = 2.0 * cross(b - a, c - a);
        if d.abs() < 1e-15 {
            return None;
        }
        let ab = b - a;
        let ac = c - a;
        let center = a + Vec2::new(
            ac.y * ab.norm_squared() - ab.y * ac.norm_squared(),
            ab.x * ac.norm_squared() - ac.x * ab.norm_squared(),
        ) / d;
        Some(Circle {
            center,
            radius: (center - a).norm(),
        })
    }
}

/// Minimum enclosing circle by exhaustive search over point pairs and triples.
///
/// Intended for formation-sized inputs (a handful of points); the search is
/// O(n⁴) but deterministic.
pub fn min_enclosing_circle(points: &[Vec2]) -> Circle {
    const TOL: f64 = 1e-9;
    match points.len() {
        0 => {
            return Circle {
                center: Vec2::zeros(),
                radius: 0.0,
            }
        }
        1 => {
            return Circle {
                center: points[0],
                radius: 0.0,
            }
        }
        _ => {}
    }
    let encloses = |c: &Circle| points.iter().all(|p| c.contains(*p, TOL));
    let mut best: Option<Circle> = None;
    let mut consider = |c: Circle| {
        if best.is_none_or(|b| c.radius < b.radius) && encloses(&c) {
            best = Some(c);
        }
    };
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            consider(Circle::through_two(points[i], points[j]));
            for k in j + 1..n {
                if let Some(c) = Circle::through_three(points[i], points[j], points[k]) {
                    consider(c);
                }
            }
        }
    }
    // The pair with the largest separation always encloses collinear inputs,
    // so `best` is set for any n >= 2.
    best.expect("some pair or triple circle encloses the point set")
}

/// Diameter `D` of the minimum enclosing circle.
pub fn circumscribed_diameter(points: &[Vec2]) -> f64 {
    min_enclosing_circle(points).diameter()
}

/// Smallest pairwise distance `L_min`.
pub fn min_pairwise_distance(points: &[Vec2]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min((points[i] - points[j]).norm());
        }
    }
    best
}

/// Holding-point layout on the flat sheet (frame S) plus the common holding
/// height `z_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetLayout {
    holding_points: Vec<Vec2>,
    holding_height: f64,
}

impl SheetLayout {
    pub fn new(holding_points: Vec<Vec2>, holding_height: f64) -> Result<Self, GeometryError> {
        check_convex_ccw(&holding_points)?;
        if !(holding_height.is_finite() && holding_height > 0.0) {
            return Err(GeometryError::NonPositive("holding height"));
        }
        Ok(SheetLayout {
            holding_points,
            holding_height,
        })
    }

    pub fn holding_points(&self) -> &[Vec2] {
        &self.holding_points
    }

    pub fn holding_point(&self, i: usize) -> Vec2 {
        self.holding_points[i]
    }

    pub fn holding_height(&self) -> f64 {
        self.holding_height
    }

    pub fn len(&self) -> usize {
        self.holding_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holding_points.is_empty()
    }

    /// Geodesic (flat-sheet) distance between holding points `i` and `j`.
    pub fn geodesic(&self, i: usize, j: usize) -> f64 {
        (self.holding_points[i] - self.holding_points[j]).norm()
    }

    /// Regular polygon of `n` holding points with the given circumradius,
    /// first vertex at angle `-π/2 + π/n` so that side 0 is horizontal.
    pub fn regular(
        n: usize,
        circumradius: f64,
        holding_height: f64,
    ) -> Result<Self, GeometryError> {
        SheetLayout::new(
            regular_polygon(n, circumradius, Vec2::zeros()),
            holding_height,
        )
    }
}

/// Vertices of a regular `n`-gon, counterclockwise, with side 0 horizontal
/// below the center.
pub fn regular_polygon(n: usize, circumradius: f64, center: Vec2) -> Vec<Vec2> {
    use std::f64::consts::PI;
    let start = -PI / 2.0 - PI / n as f64;
    (0..n)
        .map(|k| {
            let a = start + 2.0 * PI * k as f64 / n as f64;
            center + circumradius * Vec2::new(a.cos(), a.sin())
        })
        .collect()
}

/// Planar robot positions (world frame W) holding a given sheet.
///
/// Construction checks the vertex count and that the robots form a convex
/// counterclockwise polygon. The inelasticity inequalities are checked
/// separately by [`Formation::check_inelastic`].
#[derive(Debug, Clone, PartialEq)]
pub struct Formation {
    layout: Arc<SheetLayout>,
    robots: Vec<Vec2>,
}

/// A robot pair that stretches the sheet beyond its flat length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overstretch {
    pub i: usize,
    pub j: usize,
    pub excess: f64,
}

impl Formation {
    pub fn new(layout: Arc<SheetLayout>, robots: Vec<Vec2>) -> Result<Self, GeometryError> {
        if robots.len() != layout.len() {
            return Err(GeometryError::CountMismatch {
                robots: robots.len(),
                holding_points: layout.len(),
            });
        }
        check_convex_ccw(&robots)?;
        Ok(Formation { layout, robots })
    }

    pub fn layout(&self) -> &SheetLayout {
        &self.layout
    }

    pub fn layout_arc(&self) -> &Arc<SheetLayout> {
        &self.layout
    }

    pub fn robots(&self) -> &[Vec2] {
        &self.robots
    }

    pub fn robot(&self, i: usize) -> Vec2 {
        self.robots[i]
    }

    pub fn len(&self) -> usize {
        self.robots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.robots.is_empty()
    }

    pub fn centroid(&self) -> Vec2 {
        vertex_centroid(&self.robots)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.robots[i] - self.robots[j]).norm()
    }

    /// First pair violating `|r_i - r_j| <= |v_i - v_j|` by more than
    /// [`INELASTIC_TOL`], if any.
    pub fn check_inelastic(&self) -> Result<(), Overstretch> {
        let n = self.len();
        for i in 0..n {
            for j in i + 1..n {
                let excess = self.distance(i, j) - self.layout.geodesic(i, j);
                if excess > INELASTIC_TOL {
                    return Err(Overstretch { i, j, excess });
                }
            }
        }
        Ok(())
    }

    /// Smallest `|v_i - v_j| - |r_i - r_j|` over all pairs.
    pub fn inelastic_margin(&self) -> f64 {
        let n = self.len();
        let mut m = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                m = m.min(self.layout.geodesic(i, j) - self.distance(i, j));
            }
        }
        m
    }

    pub fn local_frame(&self) -> Result<LocalFrame, GeometryError> {
        LocalFrame::from_points(&self.robots)
    }

    pub fn min_enclosing_circle(&self) -> Circle {
        min_enclosing_circle(&self.robots)
    }

    pub fn circumscribed_diameter(&self) -> f64 {
        circumscribed_diameter(&self.robots)
    }

    pub fn min_distance(&self) -> f64 {
        min_pairwise_distance(&self.robots)
    }

    /// Same shape moved by `offset`.
    pub fn translated(&self, offset: Vec2) -> Formation {
        Formation {
            layout: self.layout.clone(),
            robots: self.robots.iter().map(|r| r + offset).collect(),
        }
    }

    /// Same shape rotated by `angle` about `pivot`.
    pub fn rotated_about(&self, pivot: Vec2, angle: f64) -> Formation {
        Formation {
            layout: self.layout.clone(),
            robots: self
                .robots
                .iter()
                .map(|r| pivot + rotate(r - pivot, angle))
                .collect(),
        }
    }

    /// Robots moved toward the vertex centroid by factor `k` (k = 1 keeps them).
    pub fn scaled_about_centroid(&self, k: f64) -> Formation {
        let c = self.centroid();
        Formation {
            layout: self.layout.clone(),
            robots: self.robots.iter().map(|r| c + (r - c) * k).collect(),
        }
    }
}

/// Formation expressed in the canonical local frame: origin at `r_1`, x-axis
/// along `r_1 → r_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFrame {
    pub origin: Vec2,
    /// Angle of the local x-axis in the world frame, radians.
    pub rotation: f64,
    pub local: Vec<Vec2>,
}

impl LocalFrame {
    pub fn from_points(points: &[Vec2]) -> Result<Self, GeometryError> {
        if points.len() < 2 {
            return Err(GeometryError::TooFewPoints {
                min: 2,
                got: points.len(),
            });
        }
        let axis = points[1] - points[0];
        if axis.norm() < COINCIDENT_TOL {
            return Err(GeometryError::DegenerateFormation);
        }
        let origin = points[0];
        let rotation = axis.y.atan2(axis.x);
        let mut frame = LocalFrame {
            origin,
            rotation,
            local: Vec::with_capacity(points.len()),
        };
        frame.local = points.iter().map(|p| frame.to_local(*p)).collect();
        // Exact zeros where the construction guarantees them.
        frame.local[0] = Vec2::zeros();
        frame.local[1].y = 0.0;
        Ok(frame)
    }

    fn basis(&self) -> Matrix2<f64> {
        let (s, c) = self.rotation.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    pub fn to_local(&self, p: Vec2) -> Vec2 {
        self.basis().transpose() * (p - self.origin)
    }

    pub fn to_world(&self, p: Vec2) -> Vec2 {
        self.origin + self.basis() * p
    }

    /// Rotates a direction (no translation) into world coordinates.
    pub fn dir_to_world(&self, d: Vec2) -> Vec2 {
        self.basis() * d
    }
}

/// Safety margins: robot safety radius `Δr` and the object-to-obstacle
/// vertical clearance `z_safe`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyParams {
    /// `Δr`, meters.
    pub robot_margin: f64,
    /// `z_safe`, meters.
    pub height_clearance: f64,
}

impl SafetyParams {
    pub fn new(robot_margin: f64, height_clearance: f64) -> Result<Self, GeometryError> {
        if !(robot_margin.is_finite() && robot_margin > 0.0) {
            return Err(GeometryError::NonPositive("robot safety margin"));
        }
        if !(height_clearance.is_finite() && height_clearance > 0.0) {
            return Err(GeometryError::NonPositive("height clearance"));
        }
        Ok(SafetyParams {
            robot_margin,
            height_clearance,
        })
    }
}

impl Default for SafetyParams {
    fn default() -> Self {
        SafetyParams {
            robot_margin: 0.05,
            height_clearance: 0.04,
        }
    }
}

/// Scalar formation indicators used by the planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormationIndicators {
    /// Formation outline size `W = D + 2Δr`.
    pub width: f64,
    /// Minimum enclosing circle diameter `D`.
    pub diameter: f64,
    /// Shortest robot-to-robot distance `L_min`.
    pub min_distance: f64,
    /// Largest obstacle diameter that fits between two robots, `L_min - 2Δr`.
    pub max_obstacle_diameter: f64,
    /// Tallest obstacle the hanging object clears, `z_o - z_safe`.
    pub max_obstacle_height: f64,
}

pub fn indicators(
    formation: &Formation,
    object_height: f64,
    safety: &SafetyParams,
) -> Result<FormationIndicators, GeometryError> {
    let holding = formation.layout().holding_height();
    if object_height >= holding {
        return Err(GeometryError::InvalidHeight {
            object: object_height,
            holding,
        });
    }
    Ok(indicators_unchecked(
        formation.robots(),
        object_height,
        safety,
    ))
}

/// Indicator arithmetic without the height precondition; the flat-sheet limit
/// (`z_o = z_r`) is the only caller that needs it.
pub(crate) fn indicators_unchecked(
    robots: &[Vec2],
    object_height: f64,
    safety: &SafetyParams,
) -> FormationIndicators {
    let diameter = circumscribed_diameter(robots);
    let min_distance = min_pairwise_distance(robots);
    FormationIndicators {
        width: diameter + 2.0 * safety.robot_margin,
        diameter,
        min_distance,
        max_obstacle_diameter: min_distance - 2.0 * safety.robot_margin,
        max_obstacle_height: object_height - safety.height_clearance,
    }
}
