use nalgebra::{Matrix2, Vector2};

use super::{finish_subset, flat_result, ObjectEquilibrium, SubsetFrames, VvcmError, SINGULAR_TOL};
use crate::geometry::{Formation, LocalFrame};

/// Canonical-frame quantities of a taut triangle: sheet frame with `v_1` at
/// the origin and `v_2` on +x, robot frame likewise.
struct Canonical {
    xv2: f64,
    xv3: f64,
    yv3: f64,
    xr2: f64,
    xr3: f64,
    yr3: f64,
}

impl Canonical {
    fn new(frames: &SubsetFrames) -> Result<(Self, LocalFrame), VvcmError> {
        let sheet = LocalFrame::from_points(&frames.v)?;
        let c = Canonical {
            xv2: sheet.local[1].x,
            xv3: sheet.local[2].x,
            yv3: sheet.local[2].y,
            xr2: frames.r[1].x,
            xr3: frames.r[2].x,
            yr3: frames.r[2].y,
        };
        Ok((c, sheet))
    }

    /// Affine map `r̃_o = A v_o + d` from the three taut constraints.
    fn robot_map(&self) -> (Matrix2<f64>, Vector2<f64>) {
        let Canonical {
            xv2,
            xv3,
            yv3,
            xr2,
            xr3,
            yr3,
        } = *self;
        let a = Matrix2::new(
            xv2 / xr2,
            0.0,
            xv3 / yr3 - (xr3 / yr3) * (xv2 / xr2),
            yv3 / yr3,
        );
        let d0 = (xr2 * xr2 - xv2 * xv2) / (2.0 * xr2);
        let d = Vector2::new(
            d0,
            -(xr3 / yr3) * d0 + (xr3 * xr3 + yr3 * yr3 - xv3 * xv3 - yv3 * yv3) / (2.0 * yr3),
        );
        (a, d)
    }

    /// Coefficients of the stationarity system for `v_o`.
    fn stationarity(&self) -> (Matrix2<f64>, Vector2<f64>) {
        let Canonical {
            xv2,
            xv3,
            yv3,
            xr2,
            xr3,
            yr3,
        } = *self;
        let a11 = (xv2 * xv2 - xr2 * xr2) / xv2;
        let a12 = xr2 * (xv3 * xr2 - xr3 * xv2) / (xv2 * yv3);
        let b1 = (xv2 * xv2 - xr2 * xr2) / 2.0;
        let a21 = xv3 * xr2 - xr3 * xv2;
        let a22 = xr2 * (yv3 * yv3 - yr3 * yr3) / yv3;
        let b2 = xr3 * (xr2 * xr2 - xv2 * xv2) / 2.0
            + xr2 * (xv3 * xv3 + yv3 * yv3 - xr3 * xr3 - yr3 * yr3) / 2.0;
        (Matrix2::new(a11, a12, a21, a22), Vector2::new(b1, b2))
    }
}

/// Equilibrium with exactly the cables `taut` (CCW order) taut.
pub fn solve_triangle(
    formation: &Formation,
    taut: [usize; 3],
) -> Result<ObjectEquilibrium, VvcmError> {
    let frames = SubsetFrames::new(formation, &taut)?;
    if frames.is_flat() {
        return Ok(flat_result(formation, &frames));
    }
    let (c, sheet) = Canonical::new(&frames)?;
    let (m, b) = c.stationarity();
    let det = m.determinant();
    if det.abs() < SINGULAR_TOL {
        return Err(VvcmError::SingularSystem(det));
    }
    let vo = m.try_inverse().ok_or(VvcmError::SingularSystem(det))? * b;

    let (a, d) = c.robot_map();
    let hess = 2.0 * (a.transpose() * a - Matrix2::identity());
    let eig = hess.symmetric_eigen().eigenvalues;
    if eig.min() <= 0.0 {
        return Err(VvcmError::NotMinimum);
    }

    // Barycentric containment in the canonical sheet triangle.
    let (x, y) = (vo.x, vo.y);
    let w3 = y / c.yv3;
    let w2 = (x - w3 * c.xv3) / c.xv2;
    let w1 = 1.0 - w2 - w3;
    if w1.min(w2).min(w3) < -1e-9 {
        return Err(VvcmError::ContactOutsideTriangle);
    }

    let ro = a * vo + d;
    let drop_sq = vo.norm_squared() - ro.norm_squared();
    // `sheet` was built on origin-relative holding points.
    finish_subset(formation, &frames, sheet.to_world(vo), ro, drop_sq)
}

/// Hessian of `J_z` in `v_o` for the taut triangle; positive definite at a
/// hanging equilibrium.
pub fn triangle_hessian(
    formation: &Formation,
    taut: [usize; 3],
) -> Result<Matrix2<f64>, VvcmError> {
    let frames = SubsetFrames::new(formation, &taut)?;
    let (c, _) = Canonical::new(&frames)?;
    let (a, _) = c.robot_map();
    Ok(2.0 * (a.transpose() * a - Matrix2::identity()))
}
