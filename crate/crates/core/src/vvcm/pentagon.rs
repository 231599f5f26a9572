use nalgebra::{Matrix5, Vector5};

use super::quadrilateral::{drop_sq, maximize_drop, split};
use super::{
    combinations, finish_subset, flat_result, ObjectEquilibrium, SubsetFrames, VvcmError,
    REDUNDANCY_TOL,
};
use crate::geometry::{Formation, Vec2};

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;

/// Five squared-length equalities in `x = (x_vo, y_vo, x̃_o, ỹ_o, z_o)`.
struct System<'a> {
    v: &'a [Vec2],
    r: &'a [Vec2],
    zr: f64,
}

impl System<'_> {
    fn residual(&self, x: &Vector5<f64>) -> Vector5<f64> {
        let vo = Vec2::new(x[0], x[1]);
        let ro = Vec2::new(x[2], x[3]);
        let h = self.zr - x[4];
        Vector5::from_fn(|i, _| {
            (ro - self.r[i]).norm_squared() + h * h - (vo - self.v[i]).norm_squared()
        })
    }

    fn jacobian(&self, x: &Vector5<f64>) -> Matrix5<f64> {
        let vo = Vec2::new(x[0], x[1]);
        let ro = Vec2::new(x[2], x[3]);
        let h = self.zr - x[4];
        let mut j = Matrix5::zeros();
        for i in 0..5 {
            let dv = vo - self.v[i];
            let dr = ro - self.r[i];
            j[(i, 0)] = -2.0 * dv.x;
            j[(i, 1)] = -2.0 * dv.y;
            j[(i, 2)] = 2.0 * dr.x;
            j[(i, 3)] = 2.0 * dr.y;
            j[(i, 4)] = -2.0 * h;
        }
        j
    }

    fn initial_guess(&self) -> Vector5<f64> {
        let vo = self.v.iter().fold(Vec2::zeros(), |a, p| a + p) / 5.0;
        let ro = self.r.iter().fold(Vec2::zeros(), |a, p| a + p) / 5.0;
        let drop = (0..5)
            .map(|i| {
                ((vo - self.v[i]).norm_squared() - (ro - self.r[i]).norm_squared())
                    .max(0.0)
                    .sqrt()
            })
            .sum::<f64>()
            / 5.0;
        Vector5::new(vo.x, vo.y, ro.x, ro.y, self.zr - drop)
    }

    /// Damped Newton iteration; halves the step while the residual grows.
    fn newton(&self, mut x: Vector5<f64>) -> Result<Vector5<f64>, VvcmError> {
        let mut f = self.residual(&x);
        let mut norm = f.norm();
        for _ in 0..NEWTON_MAX_ITER {
            if norm < NEWTON_TOL {
                return Ok(x);
            }
            let j = self.jacobian(&x);
            let det = j.determinant();
            let step = j.lu().solve(&(-f)).ok_or(VvcmError::SingularSystem(det))?;
            let mut alpha = 1.0;
            loop {
                let trial = x + step * alpha;
                let ft = self.residual(&trial);
                let nt = ft.norm();
                if nt < norm || alpha < 1e-6 {
                    x = trial;
                    f = ft;
                    norm = nt;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if norm < NEWTON_TOL {
            Ok(x)
        } else {
            Err(VvcmError::NoConvergence {
                iterations: NEWTON_MAX_ITER,
                residual: norm,
            })
        }
    }
}

fn solve_five(
    formation: &Formation,
    five: &[usize],
) -> Result<(SubsetFrames, Vec2, Vec2, f64), VvcmError> {
    let frames = SubsetFrames::new(formation, five)?;
    let zr = formation.layout().holding_height();
    let sys = System {
        v: &frames.v,
        r: &frames.r,
        zr,
    };
    let x = match sys.newton(sys.initial_guess()) {
        Ok(x) => x,
        Err(first) => {
            // Restart from the elimination point when the centroid start stalls.
            let Ok(u) = maximize_drop(&frames) else {
                return Err(first);
            };
            let (vo, ro) = split(&u);
            let h = drop_sq(&u).max(0.0).sqrt();
            sys.newton(Vector5::new(vo.x, vo.y, ro.x, ro.y, zr - h))?
        }
    };
    let vo = Vec2::new(x[0], x[1]);
    let ro = Vec2::new(x[2], x[3]);
    // Either root of the drop is a solution; the object hangs below.
    let h = zr - x[4];
    Ok((frames, vo, ro, h * h))
}

/// Equilibrium with the cables `taut` (CCW order, at least five) taut.
///
/// Five cables determine the solution by Newton iteration; any further taut
/// cables must agree with it to within [`REDUNDANCY_TOL`].
pub fn solve_pentagon(
    formation: &Formation,
    taut: &[usize],
) -> Result<ObjectEquilibrium, VvcmError> {
    if taut.len() < 5 {
        return Err(VvcmError::TooFewTaut(taut.len()));
    }
    let all = SubsetFrames::new(formation, taut)?;
    if all.is_flat() {
        return Ok(flat_result(formation, &all));
    }
    let mut last_err = VvcmError::NoEquilibrium;
    for pick in combinations(taut.len(), 5) {
        let five: Vec<usize> = pick.iter().map(|&k| taut[k]).collect();
        let (frames, vo, ro, hsq) = match solve_five(formation, &five) {
            Ok(s) => s,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        // Express in the frames of the full taut set for the redundancy check.
        let contact = vo + frames.sheet_origin;
        let horizontal = frames.robot_frame.to_world(ro);
        let vo_all = contact - all.sheet_origin;
        let ro_all = all.robot_frame.to_local(horizontal);
        let mut worst: Option<(usize, f64)> = None;
        for (k, &i) in taut.iter().enumerate() {
            if five.contains(&i) {
                continue;
            }
            let l = (vo_all - all.v[k]).norm();
            let d = ((ro_all - all.r[k]).norm_squared() + hsq).sqrt();
            let violation = (d - l).abs();
            if violation > REDUNDANCY_TOL && worst.is_none_or(|(_, w)| violation > w) {
                worst = Some((i, violation));
            }
        }
        // The first five cables that solve decide; the rest only verify.
        if let Some((index, violation)) = worst {
            return Err(VvcmError::InconsistentRedundancy { index, violation });
        }
        return finish_subset(formation, &all, vo_all, ro_all, hsq);
    }
    Err(last_err)
}

/// Five-cable solution by linear elimination alone, without iteration.
/// Used to cross-check [`solve_pentagon`].
pub fn solve_pentagon_linear(
    formation: &Formation,
    taut: [usize; 5],
) -> Result<ObjectEquilibrium, VvcmError> {
    let frames = SubsetFrames::new(formation, &taut)?;
    if frames.is_flat() {
        return Ok(flat_result(formation, &frames));
    }
    let u = maximize_drop(&frames)?;
    let (vo, ro) = split(&u);
    finish_subset(formation, &frames, vo, ro, drop_sq(&u))
}
