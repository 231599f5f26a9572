use nalgebra::{DMatrix, DVector, Vector4};

use super::{finish_subset, flat_result, ObjectEquilibrium, SubsetFrames, VvcmError, SINGULAR_TOL};
use crate::geometry::{Formation, Vec2};

/// Relative singular value below which a direction is free.
const RANK_TOL: f64 = 1e-10;

/// Differences of the taut equalities against the first cable, linear in
/// `u = (x_vo, y_vo, x̃_o, ỹ_o)` once the frames put cable 0 at both origins.
pub(crate) fn difference_system(frames: &SubsetFrames) -> (DMatrix<f64>, DVector<f64>) {
    let m = frames.v.len();
    let mut a = DMatrix::zeros(m - 1, 4);
    let mut b = DVector::zeros(m - 1);
    for k in 1..m {
        let (v, r) = (frames.v[k], frames.r[k]);
        a[(k - 1, 0)] = -2.0 * v.x;
        a[(k - 1, 1)] = -2.0 * v.y;
        a[(k - 1, 2)] = 2.0 * r.x;
        a[(k - 1, 3)] = 2.0 * r.y;
        b[k - 1] = r.norm_squared() - v.norm_squared();
    }
    (a, b)
}

pub(crate) fn split(u: &Vector4<f64>) -> (Vec2, Vec2) {
    (Vec2::new(u[0], u[1]), Vec2::new(u[2], u[3]))
}

/// `(z_r - z_o)²` implied by cable 0 at the point `u`.
pub(crate) fn drop_sq(u: &Vector4<f64>) -> f64 {
    let (v, r) = split(u);
    v.norm_squared() - r.norm_squared()
}

/// Maximizes the squared drop over the solutions of the difference system.
///
/// The solution set is affine, `u0 + N t`, with `N` spanning the numerical
/// null space; along it the squared drop is a quadratic in `t` whose maximizer
/// is found in closed form. Formations similar to their sheet make the null
/// space larger than the generic `4 - (m - 1)`.
pub(crate) fn maximize_drop(frames: &SubsetFrames) -> Result<Vector4<f64>, VvcmError> {
    let (a, b) = difference_system(frames);
    let rows = a.nrows();
    // Square up with zero rows so the SVD exposes the full right null space.
    let mut sq = DMatrix::zeros(4.max(rows), 4);
    sq.view_mut((0, 0), (rows, 4)).copy_from(&a);
    let mut rhs = DVector::zeros(4.max(rows));
    rhs.rows_mut(0, rows).copy_from(&b);
    let svd = sq.clone().svd(true, true);
    let scale = svd.singular_values.max().max(1.0);
    let rank_tol = RANK_TOL * scale;
    let u0 = svd
        .solve(&rhs, rank_tol)
        .map_err(|_| VvcmError::SingularSystem(0.0))?;
    let u0 = Vector4::from_iterator(u0.iter().copied());
    let residual = (&sq * DVector::from_column_slice(u0.as_slice()) - &rhs).norm();
    if residual > 1e-9 * scale.max(rhs.norm()) {
        return Err(VvcmError::Unreachable);
    }
    let v_t = svd.v_t.as_ref().expect("requested V");
    let null: Vec<Vector4<f64>> = (0..4)
        .filter(|&k| svd.singular_values[k] <= rank_tol)
        .map(|k| Vector4::from_iterator(v_t.row(k).iter().copied()))
        .collect();
    if null.is_empty() {
        return Ok(u0);
    }
    let d = null.len();
    // drop²(t) = tᵀ Q t + 2 gᵀ t + c.
    let (v0, r0) = split(&u0);
    let mut q = DMatrix::zeros(d, d);
    let mut g = DVector::zeros(d);
    for i in 0..d {
        let (vi, ri) = split(&null[i]);
        g[i] = vi.dot(&v0) - ri.dot(&r0);
        for j in 0..d {
            let (vj, rj) = split(&null[j]);
            q[(i, j)] = vi.dot(&vj) - ri.dot(&rj);
        }
    }
    let eig = q.clone().symmetric_eigen();
    if eig.eigenvalues.max() >= -SINGULAR_TOL {
        return Err(VvcmError::NotMinimum);
    }
    let t = q.lu().solve(&(-g)).ok_or(VvcmError::SingularSystem(0.0))?;
    Ok(null.iter().zip(t.iter()).fold(u0, |u, (n, ti)| u + n * *ti))
}

/// Equilibrium with exactly the four cables `taut` (CCW order) taut.
///
/// Three independent differences of the taut equalities leave a line of
/// candidate `(v_o, r̃_o)`; the drop is maximized along it.
pub fn solve_quadrilateral(
    formation: &Formation,
    taut: [usize; 4],
) -> Result<ObjectEquilibrium, VvcmError> {
    let frames = SubsetFrames::new(formation, &taut)?;
    if frames.is_flat() {
        return Ok(flat_result(formation, &frames));
    }
    let u = maximize_drop(&frames)?;
    let (vo, ro) = split(&u);
    finish_subset(formation, &frames, vo, ro, drop_sq(&u))
}
