#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use sheetcarry::geometry::{check_convex_ccw, rotate, Formation, SheetLayout, Vec2};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

/// Random convex CCW polygon around the origin with no angular gap above
/// 0.75π and circumradius roughly 0.6 to 1.1 m.
pub fn random_polygon<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec2> {
    use std::f64::consts::{PI, TAU};
    loop {
        let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let max_gap = (0..n)
            .map(|i| {
                if i + 1 < n {
                    angles[i + 1] - angles[i]
                } else {
                    angles[0] + TAU - angles[i]
                }
            })
            .fold(0.0, f64::max);
        if max_gap > 0.75 * PI {
            continue;
        }
        let scale = rng.gen_range(0.7..1.1);
        let pts: Vec<Vec2> = angles
            .iter()
            .map(|a| rng.gen_range(0.85..1.0) * scale * Vec2::new(a.cos(), a.sin()))
            .collect();
        let min_gap = (0..n)
            .map(|i| (pts[i] - pts[(i + 1) % n]).norm())
            .fold(f64::INFINITY, f64::min);
        if min_gap > 0.2 && check_convex_ccw(&pts).is_ok() {
            return pts;
        }
    }
}

/// Shrunk, jittered and rigidly moved copy of a random sheet.
pub fn random_formation<R: Rng>(rng: &mut R, n: usize) -> Formation {
    let layout = Arc::new(SheetLayout::new(random_polygon(rng, n), 0.79).unwrap());
    loop {
        let k = rng.gen_range(0.6..0.85);
        let angle = rng.gen_range(-3.0..3.0);
        let offset = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let robots: Vec<Vec2> = layout
            .holding_points()
            .iter()
            .map(|v| {
                let jitter = Vec2::new(rng.gen_range(-0.03..0.03), rng.gen_range(-0.03..0.03));
                offset + rotate(v * k + jitter, angle)
            })
            .collect();
        if let Ok(f) = Formation::new(layout.clone(), robots) {
            if f.check_inelastic().is_ok() && f.inelastic_margin() > 1e-3 {
                return f;
            }
        }
    }
}
