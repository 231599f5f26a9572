//! Brute-force equilibrium used to validate the subset solvers.
//!
//! For a fixed contact point the lowest object position is exact: with
//! `w_i = l_i²`, the drop satisfies `(z_r - z_o)² = -min_x max_i (|x - r_i|² - w_i)`,
//! and the minimizer is a robot, a two-robot balance point, or a three-robot
//! radical center. The contact point is found by a refining grid.

use nalgebra::{Matrix2, Vector3};

use super::{CableState, CableStatus, Degeneracy, ObjectEquilibrium, SLACK_BAND};
use crate::geometry::{point_in_convex, Formation, Vec2};

/// Lowest object position for a fixed contact point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowestPoint {
    /// World horizontal position of the object.
    pub horizontal: Vec2,
    /// `(z_r - z_o)²`; negative when the cables cannot meet.
    pub drop_sq: f64,
    pub height: f64,
}

struct Inner {
    center: Vec2,
    r: Vec<Vec2>,
    /// Inverses of the radical-center systems, one per robot triple.
    triples: Vec<([usize; 3], Option<Matrix2<f64>>)>,
}

impl Inner {
    fn new(formation: &Formation) -> Self {
        let center = formation.centroid();
        let r: Vec<Vec2> = formation.robots().iter().map(|p| p - center).collect();
        let n = r.len();
        let mut triples = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let a = r[j] - r[i];
                    let b = r[k] - r[i];
                    let m = Matrix2::new(2.0 * a.x, 2.0 * a.y, 2.0 * b.x, 2.0 * b.y);
                    triples.push(([i, j, k], m.try_inverse()));
                }
            }
        }
        Inner { center, r, triples }
    }

    fn envelope(&self, w: &[f64], x: Vec2) -> f64 {
        self.r
            .iter()
            .zip(w)
            .map(|(r, w)| (x - r).norm_squared() - w)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(min_x max_i, argmin)` over all candidate points.
    fn solve(&self, w: &[f64]) -> (f64, Vec2) {
        let n = self.r.len();
        let mut best = (f64::INFINITY, Vec2::zeros());
        let mut consider = |x: Vec2| {
            let f = self.envelope(w, x);
            if f < best.0 {
                best = (f, x);
            }
        };
        for i in 0..n {
            consider(self.r[i]);
            for j in i + 1..n {
                let d = self.r[j] - self.r[i];
                let dd = d.norm_squared();
                let s = (dd + w[i] - w[j]) / (2.0 * dd);
                consider(self.r[i] + d * s.clamp(0.0, 1.0));
            }
        }
        for ([i, j, k], inv) in &self.triples {
            let Some(inv) = inv else { continue };
            let (ri, rj, rk) = (self.r[*i], self.r[*j], self.r[*k]);
            let rhs = Vec2::new(
                rj.norm_squared() - ri.norm_squared() - w[*j] + w[*i],
                rk.norm_squared() - ri.norm_squared() - w[*k] + w[*i],
            );
            consider(inv * rhs);
        }
        best
    }

    fn at(&self, formation: &Formation, contact: Vec2) -> (f64, Vec2) {
        let w: Vec<f64> = formation
            .layout()
            .holding_points()
            .iter()
            .map(|v| (contact - v).norm_squared())
            .collect();
        let (f, x) = self.solve(&w);
        (-f, x + self.center)
    }
}

/// Exact lowest object position when the sheet touches the object at `contact`.
pub fn lowest_point(formation: &Formation, contact: Vec2) -> LowestPoint {
    let (drop_sq, horizontal) = Inner::new(formation).at(formation, contact);
    LowestPoint {
        horizontal,
        drop_sq,
        height: formation.layout().holding_height() - drop_sq.signum() * drop_sq.abs().sqrt(),
    }
}

/// Coarse-grid local maxima refined independently; guards against a narrow
/// basin hiding next to a broad one.
const STARTS: usize = 6;

/// Lowest object position over all contact points, by grid search refined
/// around the most promising coarse cells until the grid step is at most
/// `resolution`.
pub fn oracle_equilibrium(formation: &Formation, resolution: f64) -> ObjectEquilibrium {
    let inner = Inner::new(formation);
    let layout = formation.layout();
    let sheet = layout.holding_points();
    let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
    for v in sheet {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let coarse = (hi - lo).max() / 32.0;
    let nx = ((hi.x - lo.x) / coarse).ceil() as usize + 1;
    let ny = ((hi.y - lo.y) / coarse).ceil() as usize + 1;
    let mut grid = vec![None; nx * ny];
    for a in 0..nx {
        for b in 0..ny {
            let p = lo + Vec2::new(a as f64, b as f64) * coarse;
            if point_in_convex(sheet, p, 0.0) {
                let (h2, x) = inner.at(formation, p);
                grid[a * ny + b] = Some((h2, p, x));
            }
        }
    }
    let mut starts: Vec<(f64, Vec2, Vec2)> = Vec::new();
    for a in 0..nx {
        for b in 0..ny {
            let Some(c) = grid[a * ny + b] else { continue };
            let mut peak = true;
            for da in -1i64..=1 {
                for db in -1i64..=1 {
                    let (na, nb) = (a as i64 + da, b as i64 + db);
                    if (da, db) == (0, 0) || na < 0 || nb < 0 || na >= nx as i64 || nb >= ny as i64
                    {
                        continue;
                    }
                    if let Some(o) = grid[na as usize * ny + nb as usize] {
                        peak &= c.0 >= o.0;
                    }
                }
            }
            if peak {
                starts.push(c);
            }
        }
    }
    starts.sort_by(|x, y| y.0.total_cmp(&x.0));
    starts.truncate(STARTS);

    let mut best = (f64::NEG_INFINITY, Vec2::zeros(), Vec2::zeros());
    for start in starts {
        let mut local = start;
        let mut step = coarse;
        while step > resolution {
            let window = 2.0 * step;
            step = (step / 8.0).max(resolution);
            let c = local.1;
            let n = (2.0 * window / step).ceil() as usize;
            for a in 0..=n {
                for b in 0..=n {
                    let p = c - Vec2::repeat(window) + Vec2::new(a as f64, b as f64) * step;
                    if !point_in_convex(sheet, p, 0.0) {
                        continue;
                    }
                    let (h2, x) = inner.at(formation, p);
                    if h2 > local.0 {
                        local = (h2, p, x);
                    }
                }
            }
        }
        if local.0 > best.0 {
            best = local;
        }
    }

    let (drop_sq, contact, horizontal) = best;
    let drop = drop_sq.max(0.0).sqrt();
    let mut active = Vec::new();
    let cables = (0..formation.len())
        .map(|i| {
            let length = (contact - layout.holding_point(i)).norm();
            let distance = ((horizontal - formation.robot(i)).norm_squared() + drop * drop).sqrt();
            let taut = distance >= length - SLACK_BAND;
            if taut {
                active.push(i);
            }
            CableState {
                index: i,
                length,
                distance,
                status: if taut {
                    CableStatus::Taut
                } else {
                    CableStatus::Slack
                },
            }
        })
        .collect();
    ObjectEquilibrium {
        position: Vector3::new(horizontal.x, horizontal.y, layout.holding_height() - drop),
        contact,
        cables,
        active,
        degeneracy: if drop_sq <= 0.0 {
            Degeneracy::FlatSheet
        } else {
            Degeneracy::None
        },
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::SheetLayout;

    fn equilateral(side: f64) -> Vec<Vec2> {
        vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(side, 0.0),
            Vec2::new(side / 2.0, side * 3f64.sqrt() / 2.0),
        ]
    }

    #[test]
    fn symmetric_triangle() {
        let layout = Arc::new(SheetLayout::new(equilateral(1.6), 0.79).unwrap());
        let f = Formation::new(layout, equilateral(1.2)).unwrap();
        let eq = oracle_equilibrium(&f, 1e-3);
        assert!((eq.height() - 0.179).abs() < 2e-3, "{}", eq.height());
        assert!((eq.contact - Vec2::new(0.8, 0.46188)).norm() < 2e-3);
    }

    #[test]
    fn flat_limit() {
        let layout = Arc::new(SheetLayout::new(equilateral(1.6), 0.79).unwrap());
        let f = Formation::new(layout, equilateral(1.6)).unwrap();
        let eq = oracle_equilibrium(&f, 1e-3);
        assert!((eq.height() - 0.79).abs() <= 1e-3);
    }

    #[test]
    fn inner_problem_is_exact_at_known_point() {
        let layout = Arc::new(SheetLayout::new(equilateral(1.6), 0.79).unwrap());
        let f = Formation::new(layout, equilateral(1.2)).unwrap();
        let p = lowest_point(&f, Vec2::new(0.8, 1.6 / (2.0 * 3f64.sqrt())));
        let l2 = 1.6f64 * 1.6 / 3.0;
        assert!((p.drop_sq - (l2 - 1.44 / 3.0)).abs() < 1e-12);
        assert!((p.horizontal - Vec2::new(0.6, 1.2 / (2.0 * 3f64.sqrt()))).norm() < 1e-12);
    }
}
