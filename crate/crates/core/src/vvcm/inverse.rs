use std::sync::Arc;

use super::{direct_kinematics, VvcmError};
use crate::geometry::{convex_inset, Formation, SheetLayout, Vec2};

/// Round-trip tolerance on contact and height, m.
const ROUND_TRIP_TOL: f64 = 1e-6;

/// Robot positions holding every cable taut with the object at
/// `(object_xy, z_o)` and sheet contact `contact`:
/// `r_i = r_o + sqrt(l_i² - (z_r - z_o)²)·[cos φ_i, sin φ_i]`.
pub fn place_robots(
    layout: &SheetLayout,
    contact: Vec2,
    object_height: f64,
    phis: &[f64],
    object_xy: Vec2,
) -> Result<Vec<Vec2>, VvcmError> {
    if phis.len() != layout.len() {
        return Err(VvcmError::CountMismatch {
            got: phis.len(),
            expected: layout.len(),
        });
    }
    let drop = layout.holding_height() - object_height;
    layout
        .holding_points()
        .iter()
        .zip(phis)
        .enumerate()
        .map(|(i, (v, phi))| {
            let rho_sq = (contact - v).norm_squared() - drop * drop;
            if rho_sq < 0.0 {
                return Err(VvcmError::CableTooShort { index: i });
            }
            Ok(object_xy + rho_sq.sqrt() * Vec2::new(phi.cos(), phi.sin()))
        })
        .collect()
}

/// Formation that carries the object at height `object_height` with sheet
/// contact `contact`, every cable taut, robot `i` in direction `phis[i]` from
/// the object (object at the world origin).
///
/// The result is checked for strict inelasticity and convexity, and is
/// re-solved with all cables taut to confirm it actually rests at the target.
pub fn inverse_kinematics(
    layout: &Arc<SheetLayout>,
    contact: Vec2,
    object_height: f64,
    phis: &[f64],
) -> Result<Formation, VvcmError> {
    if object_height >= layout.holding_height() {
        return Err(VvcmError::InvalidHeight {
            object: object_height,
            holding: layout.holding_height(),
        });
    }
    if convex_inset(layout.holding_points(), contact) <= 1e-9 {
        return Err(VvcmError::ContactOutsideSheet);
    }
    let robots = place_robots(layout, contact, object_height, phis, Vec2::zeros())?;
    let n = robots.len();
    for i in 0..n {
        for j in i + 1..n {
            if (robots[i] - robots[j]).norm() >= layout.geodesic(i, j) {
                return Err(VvcmError::InelasticityViolated { i, j });
            }
        }
    }
    let formation = Formation::new(layout.clone(), robots).map_err(VvcmError::NonConvexResult)?;
    let error = match direct_kinematics(&formation, &vec![true; n]) {
        Ok(eq) => (eq.contact - contact)
            .norm()
            .max((eq.height() - object_height).abs()),
        Err(_) => f64::INFINITY,
    };
    if !(error <= ROUND_TRIP_TOL) {
        return Err(VvcmError::NotEquilibrium { error });
    }
    Ok(formation)
}

/// Directions for a three-robot team that make `(contact, object_height)` an
/// all-taut equilibrium, with robot 0 at angle `heading`.
///
/// With barycentric weights `μ_i` of the contact in the sheet triangle, the
/// object must also sit at `Σ μ_i r_i`, i.e. `Σ μ_i ρ_i u_i = 0`: the three
/// vectors close a triangle.
pub fn balanced_phis(
    layout: &SheetLayout,
    contact: Vec2,
    object_height: f64,
    heading: f64,
) -> Result<Vec<f64>, VvcmError> {
    if layout.len() != 3 {
        return Err(VvcmError::CountMismatch {
            got: layout.len(),
            expected: 3,
        });
    }
    let v = layout.holding_points();
    let area = |a: Vec2, b: Vec2, c: Vec2| crate::geometry::cross(b - a, c - a);
    let total = area(v[0], v[1], v[2]);
    let mu = [
        area(contact, v[1], v[2]) / total,
        area(v[0], contact, v[2]) / total,
        area(v[0], v[1], contact) / total,
    ];
    if mu.iter().any(|m| *m <= 0.0) {
        return Err(VvcmError::ContactOutsideSheet);
    }
    let drop = layout.holding_height() - object_height;
    let mut a = [0.0; 3];
    for i in 0..3 {
        let rho_sq = (contact - v[i]).norm_squared() - drop * drop;
        if rho_sq <= 0.0 {
            return Err(VvcmError::CableTooShort { index: i });
        }
        a[i] = mu[i] * rho_sq.sqrt();
    }
    // Interior angle opposite side k of the closing triangle.
    let opposite = |k: usize| {
        let (p, q) = (a[(k + 1) % 3], a[(k + 2) % 3]);
        ((p * p + q * q - a[k] * a[k]) / (2.0 * p * q)).acos()
    };
    if a[0] >= a[1] + a[2] || a[1] >= a[0] + a[2] || a[2] >= a[0] + a[1] {
        return Err(VvcmError::NoBalancedAngles);
    }
    let pi = std::f64::consts::PI;
    let phi0 = heading;
    let phi1 = phi0 + pi - opposite(2);
    let phi2 = phi1 + pi - opposite(0);
    Ok(vec![phi0, phi1, phi2])
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::Vec2;
    use crate::vvcm::solve_equilibrium;

    fn equilateral(side: f64) -> Vec<Vec2> {
        vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(side, 0.0),
            Vec2::new(side / 2.0, side * 3f64.sqrt() / 2.0),
        ]
    }

    fn reference_layout() -> Arc<SheetLayout> {
        Arc::new(SheetLayout::new(equilateral(1.6), 0.79).unwrap())
    }

    fn closed_form_height(side: f64) -> f64 {
        let l = 1.6 / 3f64.sqrt();
        0.79 - (l * l - side * side / 3.0).sqrt()
    }

    #[test]
    fn symmetric_round_trip() {
        let layout = reference_layout();
        let c = Vec2::new(0.8, 1.6 / (2.0 * 3f64.sqrt()));
        let z = closed_form_height(1.2);
        let phis: Vec<f64> = [210.0f64, 330.0, 90.0]
            .iter()
            .map(|d| d.to_radians())
            .collect();
        let f = inverse_kinematics(&layout, c, z, &phis).unwrap();
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            assert!((f.distance(i, j) - 1.2).abs() < 1e-12);
        }
    }

    #[test]
    fn deepest_hang_puts_a_robot_over_the_object() {
        let layout = reference_layout();
        let c = Vec2::new(0.5, 0.4);
        let lmin = layout
            .holding_points()
            .iter()
            .map(|v| (c - v).norm())
            .fold(f64::INFINITY, f64::min);
        let robots =
            place_robots(&layout, c, 0.79 - lmin, &[0.0, 2.0, 4.0], Vec2::zeros()).unwrap();
        assert!(robots.iter().any(|r| r.norm() < 1e-7));
        assert!(matches!(
            place_robots(
                &layout,
                c,
                0.79 - lmin - 0.01,
                &[0.0, 2.0, 4.0],
                Vec2::zeros()
            ),
            Err(VvcmError::CableTooShort { .. })
        ));
    }

    #[test]
    fn rejects_bad_angles_and_targets() {
        let layout = reference_layout();
        let c = Vec2::new(0.8, 0.46);
        // Clockwise ordering.
        let phis: Vec<f64> = [90.0f64, 330.0, 210.0]
            .iter()
            .map(|d| d.to_radians())
            .collect();
        assert!(matches!(
            inverse_kinematics(&layout, c, 0.2, &phis),
            Err(VvcmError::NonConvexResult(_))
        ));
        assert!(matches!(
            inverse_kinematics(&layout, c, 0.79, &[0.0, 2.0, 4.0]),
            Err(VvcmError::InvalidHeight { .. })
        ));
        assert!(matches!(
            inverse_kinematics(&layout, Vec2::new(0.0, 0.0), 0.2, &[0.0, 2.0, 4.0]),
            Err(VvcmError::ContactOutsideSheet)
        ));
        // Unbalanced directions: the formation is valid but rests elsewhere.
        let phis: Vec<f64> = [200.0f64, 300.0, 60.0]
            .iter()
            .map(|d| d.to_radians())
            .collect();
        assert!(matches!(
            inverse_kinematics(&layout, c, 0.2, &phis),
            Err(VvcmError::NotEquilibrium { .. })
        ));
    }

    #[test]
    fn balanced_round_trips() {
        let layout = reference_layout();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ok = 0;
        for _ in 0..400 {
            let c = Vec2::new(rng.gen_range(0.3..1.3), rng.gen_range(0.1..1.0));
            let z = rng.gen_range(0.0..0.5);
            let Ok(phis) = balanced_phis(&layout, c, z, rng.gen_range(-3.0..3.0)) else {
                continue;
            };
            let Ok(f) = inverse_kinematics(&layout, c, z, &phis) else {
                continue;
            };
            let eq = solve_equilibrium(&f).unwrap();
            assert!((eq.contact - c).norm() < 1e-6);
            assert!((eq.height() - z).abs() < 1e-6);
            ok += 1;
        }
        assert!(ok > 100, "{ok}");
    }
}
