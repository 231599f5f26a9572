//! Virtual variable cables: object equilibrium in a flexible inelastic sheet.
//!
//! Each holding point `v_i` is joined to the object's contact point `v_o` by a
//! ridge of geodesic length `l_i = |v_o - v_i|`. A cable is taut when the 3-D
//! robot-to-object distance equals `l_i`, slack when strictly shorter. The
//! object rests at the lowest point compatible with every cable.

mod equilibrium;
mod inverse;
mod oracle;
mod pentagon;
mod quadrilateral;
mod triangle;

pub use equilibrium::{direct_kinematics, solve_equilibrium, solve_subset};
pub use inverse::{balanced_phis, inverse_kinematics, place_robots};
pub use oracle::{lowest_point, oracle_equilibrium, LowestPoint};
pub use pentagon::{solve_pentagon, solve_pentagon_linear};
pub use quadrilateral::solve_quadrilateral;
pub use triangle::{solve_triangle, triangle_hessian};

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::geometry::{Formation, GeometryError, LocalFrame, Vec2};

/// A cable shorter than its geodesic length by more than this is slack, m.
pub const SLACK_BAND: f64 = 1e-6;
/// Allowed violation of `|p_o - p_i| <= l_i`, m.
pub const EQ5_TOL: f64 = 1e-7;
/// Residual allowed on a taut cable's length equality, m.
pub const TAUT_TOL: f64 = 1e-9;
/// Residual allowed on the stationarity conditions.
pub const KKT_TOL: f64 = 1e-8;
/// Redundant taut cables must agree with the selected five to this, m.
pub const REDUNDANCY_TOL: f64 = 1e-6;
/// Determinant below which a small linear system is treated as singular.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Pairwise distance mismatch treated as a fully stretched sheet, m.
pub const FLAT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VvcmError {
    #[error("formation stretches the sheet between robots {i} and {j} by {excess:e} m")]
    InfeasibleFormation { i: usize, j: usize, excess: f64 },
    #[error("{0} taut cables given, at least 3 required")]
    TooFewTaut(usize),
    #[error("singular system (determinant {0:e})")]
    SingularSystem(f64),
    #[error("contact point falls outside the taut triangle")]
    ContactOutsideTriangle,
    #[error("contact point falls outside the taut hull")]
    ContactOutsideHull,
    #[error("stationary point is not a height maximum")]
    NotMinimum,
    #[error("taut cables cannot reach a common object position")]
    Unreachable,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("redundant cable {index} disagrees by {violation:e} m")]
    InconsistentRedundancy { index: usize, violation: f64 },
    #[error("cable {index} would be stretched by {violation:e} m")]
    SlackViolated { index: usize, violation: f64 },
    #[error("no taut subset yields a valid equilibrium")]
    NoEquilibrium,
    #[error("cable {index} is shorter than the requested drop")]
    CableTooShort { index: usize },
    #[error("robots {i} and {j} are not strictly closer than their holding points")]
    InelasticityViolated { i: usize, j: usize },
    #[error("resulting formation is not convex: {0}")]
    NonConvexResult(GeometryError),
    #[error("object height {object} m must be below the holding height {holding} m")]
    InvalidHeight { object: f64, holding: f64 },
    #[error("contact point must lie strictly inside the sheet")]
    ContactOutsideSheet,
    #[error("placed formation does not rest at the target (off by {error:e} m)")]
    NotEquilibrium { error: f64 },
    #[error("cable lengths admit no balanced robot directions")]
    NoBalancedAngles,
    #[error("expected {expected} entries, got {got}")]
    CountMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CableStatus {
    Taut,
    Slack,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CableState {
    pub index: usize,
    /// Geodesic length `l_i`.
    pub length: f64,
    /// 3-D robot-to-object distance.
    pub distance: f64,
    pub status: CableStatus,
}

impl CableState {
    pub fn is_taut(&self) -> bool {
        self.status == CableStatus::Taut
    }
}

/// Special configurations flagged on an otherwise valid equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    None,
    /// Formation congruent to the sheet; the object does not hang.
    FlatSheet,
    /// Contact point on the boundary of the taut hull.
    HullBoundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectEquilibrium {
    /// `p_o = [x_o, y_o, z_o]`, world frame.
    pub position: Vector3<f64>,
    /// `v_o`, sheet frame.
    pub contact: Vec2,
    pub cables: Vec<CableState>,
    /// Cables whose equality constraint determined the solution.
    pub active: Vec<usize>,
    pub degeneracy: Degeneracy,
}

impl ObjectEquilibrium {
    pub fn horizontal(&self) -> Vec2 {
        Vec2::new(self.position.x, self.position.y)
    }

    pub fn height(&self) -> f64 {
        self.position.z
    }

    /// Number of taut cables `m`.
    pub fn taut_count(&self) -> usize {
        self.cables.iter().filter(|c| c.is_taut()).count()
    }

    pub fn taut_flags(&self) -> Vec<bool> {
        self.cables.iter().map(CableState::is_taut).collect()
    }

    /// Largest `|p_o - p_i| - l_i` over all cables.
    pub fn max_stretch(&self) -> f64 {
        self.cables
            .iter()
            .map(|c| c.distance - c.length)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `||p_o - p_i| - l_i|` over the active cables.
    pub fn max_taut_residual(&self) -> f64 {
        self.active
            .iter()
            .map(|&i| (self.cables[i].distance - self.cables[i].length).abs())
            .fold(0.0, f64::max)
    }
}

/// Robots and holding points of a cable subset, in frames suited to the
/// linear algebra: robots relative to the subset's first robot (rotated so the
/// second lies on +x), holding points relative to the first holding point.
pub(crate) struct SubsetFrames {
    pub indices: Vec<usize>,
    pub robot_frame: LocalFrame,
    pub sheet_origin: Vec2,
    /// Holding points minus `sheet_origin`.
    pub v: Vec<Vec2>,
    /// Robot local coordinates.
    pub r: Vec<Vec2>,
}

impl SubsetFrames {
    pub fn new(formation: &Formation, indices: &[usize]) -> Result<Self, VvcmError> {
        let robots: Vec<Vec2> = indices.iter().map(|&i| formation.robot(i)).collect();
        let robot_frame = LocalFrame::from_points(&robots)?;
        let sheet_origin = formation.layout().holding_point(indices[0]);
        let v = indices
            .iter()
            .map(|&i| formation.layout().holding_point(i) - sheet_origin)
            .collect();
        Ok(SubsetFrames {
            indices: indices.to_vec(),
            r: robot_frame.local.clone(),
            robot_frame,
            sheet_origin,
            v,
        })
    }

    /// Whether the robot subset is congruent to its holding points.
    pub fn is_flat(&self) -> bool {
        let n = self.v.len();
        (0..n).all(|i| {
            (i + 1..n).all(|j| {
                ((self.r[i] - self.r[j]).norm() - (self.v[i] - self.v[j]).norm()).abs() <= FLAT_TOL
            })
        })
    }

    /// Flat-sheet solution: contact at the centroid of the holding points, the
    /// object directly on the rigidly placed sheet.
    pub fn flat_solution(&self) -> (Vec2, Vec2) {
        let n = self.v.len() as f64;
        let vc = self.v.iter().fold(Vec2::zeros(), |a, p| a + p) / n;
        let sheet = LocalFrame::from_points(&self.v).expect("flat subset has distinct points");
        (vc, sheet.to_local(vc))
    }
}

/// Solves `v_o = Σ μ_i v_i`, `r_o = Σ μ_i r_i`, `Σ μ_i = 1` in the least-squares
/// sense. Returns the weights and the residual norm.
pub(crate) fn stationarity_weights(v: &[Vec2], r: &[Vec2], vo: Vec2, ro: Vec2) -> (Vec<f64>, f64) {
    let m = v.len();
    let mut a = DMatrix::<f64>::zeros(5, m);
    for k in 0..m {
        a[(0, k)] = v[k].x;
        a[(1, k)] = v[k].y;
        a[(2, k)] = r[k].x;
        a[(3, k)] = r[k].y;
        a[(4, k)] = 1.0;
    }
    let b = DVector::from_vec(vec![vo.x, vo.y, ro.x, ro.y, 1.0]);
    let svd = a.clone().svd(true, true);
    let mu = svd
        .solve(&b, 1e-12)
        .unwrap_or_else(|_| DVector::from_element(m, f64::NAN));
    let residual = (&a * &mu - &b).norm();
    (mu.iter().copied().collect(), residual)
}

/// Assembles the equilibrium record for a solved subset.
///
/// `vo` and `ro` are in the subset frames; `drop_sq` is `(z_r - z_o)²`.
pub(crate) fn assemble(
    formation: &Formation,
    frames: &SubsetFrames,
    vo: Vec2,
    ro: Vec2,
    drop_sq: f64,
    degeneracy: Degeneracy,
) -> ObjectEquilibrium {
    let layout = formation.layout();
    let contact = vo + frames.sheet_origin;
    let horizontal = frames.robot_frame.to_world(ro);
    let drop = drop_sq.max(0.0).sqrt();
    let z = layout.holding_height() - drop;
    let cables = (0..formation.len())
        .map(|i| {
            let length = (contact - layout.holding_point(i)).norm();
            let distance = ((horizontal - formation.robot(i)).norm_squared() + drop * drop).sqrt();
            let status = if distance < length - SLACK_BAND {
                CableStatus::Slack
            } else {
                CableStatus::Taut
            };
            CableState {
                index: i,
                length,
                distance,
                status,
            }
        })
        .collect();
    ObjectEquilibrium {
        position: Vector3::new(horizontal.x, horizontal.y, z),
        contact,
        cables,
        active: frames.indices.clone(),
        degeneracy,
    }
}

/// Checks the weights for a contact inside the taut hull and classifies the
/// boundary case.
pub(crate) fn classify_weights(
    mu: &[f64],
    residual: f64,
    scale: f64,
) -> Result<Degeneracy, VvcmError> {
    if !(residual <= KKT_TOL * scale.max(1.0)) {
        return Err(VvcmError::NoConvergence {
            iterations: 0,
            residual,
        });
    }
    let min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-9 {
        return Err(VvcmError::ContactOutsideHull);
    }
    Ok(if min <= 1e-9 {
        Degeneracy::HullBoundary
    } else {
        Degeneracy::None
    })
}

/// Common tail of every subset solver: flat-limit short-circuit, stationarity
/// check, record assembly.
pub(crate) fn finish_subset(
    formation: &Formation,
    frames: &SubsetFrames,
    vo: Vec2,
    ro: Vec2,
    drop_sq: f64,
) -> Result<ObjectEquilibrium, VvcmError> {
    if !(drop_sq >= -TAUT_TOL) {
        return Err(VvcmError::Unreachable);
    }
    let scale = frames
        .v
        .iter()
        .chain(&frames.r)
        .map(|p| p.norm())
        .fold(1.0, f64::max);
    let m = frames.v.len();
    let degeneracy = if m <= 5 {
        let (mu, residual) = stationarity_weights(&frames.v, &frames.r, vo, ro);
        classify_weights(&mu, residual, scale)?
    } else {
        // Weights are not unique; a nonnegative solution exists iff one
        // exists on some five cables.
        let mut outcome = Err(VvcmError::ContactOutsideHull);
        for pick in combinations(m, 5) {
            let v: Vec<Vec2> = pick.iter().map(|&k| frames.v[k]).collect();
            let r: Vec<Vec2> = pick.iter().map(|&k| frames.r[k]).collect();
            let (mu, residual) = stationarity_weights(&v, &r, vo, ro);
            if let Ok(d) = classify_weights(&mu, residual, scale) {
                outcome = Ok(d);
                break;
            }
        }
        outcome?
    };
    Ok(assemble(formation, frames, vo, ro, drop_sq, degeneracy))
}

/// All `k`-element index subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

pub(crate) fn flat_result(formation: &Formation, frames: &SubsetFrames) -> ObjectEquilibrium {
    let (vo, ro) = frames.flat_solution();
    assemble(formation, frames, vo, ro, 0.0, Degeneracy::FlatSheet)
}
