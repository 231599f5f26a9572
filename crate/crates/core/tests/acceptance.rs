//! Acceptance criteria, one PASS/FAIL line each.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_formation, random_polygon, scenario_path};
use sheetcarry::geometry::{convex_inset, Formation, SheetLayout, Vec2};
use sheetcarry::optimizer::PassMode;
use sheetcarry::pipeline::run_pipeline;
use sheetcarry::planner::{CrossingSchedule, SideSelection};
use sheetcarry::scenario::load_scenario;
use sheetcarry::vvcm::{
    balanced_phis, direct_kinematics, inverse_kinematics, oracle_equilibrium, solve_equilibrium,
};

const Z_TOL: f64 = 0.005;
const ORACLE_RES: f64 = 1e-3;
const ORACLE_DZ: f64 = 2e-3;
const ORACLE_DP: f64 = 5e-3;
/// Oracle contacts closer than this to the sheet edge are resolution-limited.
const EDGE_INSET: f64 = 2e-3;
const ORACLE_SAMPLES: usize = 200;
const ROUND_TRIPS: usize = 1000;
const ROUND_TRIP_TOL: f64 = 1e-6;
const EQ5_TOL: f64 = 1e-7;
const TAUT_TOL: f64 = 1e-9;
const RIGID_TOL: f64 = 1e-12;
const PATH_TOL: f64 = 1e-12;
const PATH_SAMPLES: usize = 10_000;
const CORRIDOR_BUDGET: Duration = Duration::from_secs(30);

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn reference_layout() -> Arc<SheetLayout> {
    let s = 1.6;
    let sheet = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(s, 0.0),
        Vec2::new(s / 2.0, s * 3f64.sqrt() / 2.0),
    ];
    Arc::new(SheetLayout::new(sheet, 0.79).unwrap())
}

fn equilateral_formation(side: f64) -> Formation {
    let robots = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(side, 0.0),
        Vec2::new(side / 2.0, side * 3f64.sqrt() / 2.0),
    ];
    Formation::new(reference_layout(), robots).unwrap()
}

fn height_reproduction() -> Outcome {
    let started = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (side, expected) in [(1.04, 0.090), (1.277, 0.234)] {
        let z = direct_kinematics(&equilateral_formation(side), &[true; 3])
            .unwrap()
            .height();
        pass &= (z - expected).abs() <= Z_TOL;
        parts.push(format!(
            "side {side} z_o {z:.4} (expected {expected} +/- {Z_TOL})"
        ));
    }
    let elapsed = started.elapsed();
    pass &= elapsed < Duration::from_millis(100);
    parts.push(format!("{:.3} ms", elapsed.as_secs_f64() * 1e3));
    outcome(pass, parts.join(", "))
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut pass = true;
    let mut parts = Vec::new();
    for n in 3..=6 {
        let (mut compared, mut edge, mut worst_z, mut worst_p) = (0, 0, 0.0f64, 0.0f64);
        while compared < ORACLE_SAMPLES {
            let f = random_formation(&mut rng, n);
            let oracle = oracle_equilibrium(&f, ORACLE_RES);
            if convex_inset(f.layout().holding_points(), oracle.contact) < EDGE_INSET {
                edge += 1;
                continue;
            }
            compared += 1;
            match solve_equilibrium(&f) {
                Ok(eq) => {
                    worst_z = worst_z.max((eq.height() - oracle.height()).abs());
                    worst_p = worst_p.max((eq.horizontal() - oracle.horizontal()).norm());
                }
                Err(_) => {
                    worst_z = f64::INFINITY;
                    worst_p = f64::INFINITY;
                }
            }
        }
        pass &= worst_z <= ORACLE_DZ && worst_p <= ORACLE_DP;
        parts.push(format!(
            "N={n}: {compared} compared, {edge} edge-excluded, max dz {worst_z:.2e}, max dp {worst_p:.2e}"
        ));
    }
    parts.push(format!("{:.1} s", started.elapsed().as_secs_f64()));
    outcome(pass, parts.join("; "))
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let (mut done, mut attempts, mut worst) = (0, 0, 0.0f64);
    while done < ROUND_TRIPS {
        attempts += 1;
        let layout = Arc::new(SheetLayout::new(random_polygon(&mut rng, 3), 0.79).unwrap());
        let sheet = layout.holding_points();
        let w = [
            rng.gen_range(0.1..1.0),
            rng.gen_range(0.1..1.0),
            rng.gen_range(0.1..1.0),
        ];
        let total: f64 = w.iter().sum();
        let contact = (sheet[0] * w[0] + sheet[1] * w[1] + sheet[2] * w[2]) / total;
        let z = rng.gen_range(-0.2..0.6);
        let Ok(phis) = balanced_phis(&layout, contact, z, rng.gen_range(-PI..PI)) else {
            continue;
        };
        let Ok(f) = inverse_kinematics(&layout, contact, z, &phis) else {
            continue;
        };
        let eq = direct_kinematics(&f, &[true; 3]).unwrap();
        worst = worst
            .max((eq.contact - contact).norm())
            .max((eq.height() - z).abs());
        done += 1;
    }
    outcome(
        worst <= ROUND_TRIP_TOL,
        format!("{done} valid targets of {attempts} drawn, max error {worst:.2e} m (limit {ROUND_TRIP_TOL:e})"),
    )
}

fn constraint_suite() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["two_obstacle_corridor.toml", "turned_corridor.toml"] {
        let s = load_scenario(scenario_path(name)).unwrap();
        let r = run_pipeline(&s).unwrap();
        let (mut stretch, mut residual, mut rigid) = (0.0f64, 0.0f64, 0.0f64);
        let mut reference: Option<(usize, Vec<f64>)> = None;
        for sample in &r.timeline.samples {
            stretch = stretch.max(sample.equilibrium.max_stretch());
            residual = residual.max(sample.equilibrium.max_taut_residual());
            let Some(k) = r
                .timeline
                .phases
                .iter()
                .position(|p| sample.t <= p.end + 1e-12)
            else {
                continue;
            };
            let p = &sample.robots;
            let d: Vec<f64> = (0..p.len())
                .flat_map(|i| (i + 1..p.len()).map(move |j| (i, j)))
                .map(|(i, j)| (p[i] - p[j]).norm())
                .collect();
            if !r.timeline.phases[k].is_rigid() {
                reference = None;
                continue;
            }
            match &reference {
                Some((phase, base)) if *phase == k => {
                    for (a, b) in d.iter().zip(base) {
                        rigid = rigid.max((a - b).abs());
                    }
                }
                _ => reference = Some((k, d)),
            }
        }
        let vertical = r.min_vertical_clearance.unwrap_or(f64::INFINITY);
        let horizontal = r.min_horizontal_clearance.unwrap_or(f64::INFINITY);
        let ok = stretch <= EQ5_TOL
            && residual <= TAUT_TOL
            && rigid <= RIGID_TOL
            && vertical >= s.safety.height_clearance - TAUT_TOL
            && horizontal >= s.safety.robot_margin - TAUT_TOL;
        pass &= ok;
        parts.push(format!(
            "{}: {} samples, stretch {stretch:.1e}, taut residual {residual:.1e}, rigid drift {rigid:.1e}, \
             vertical clearance {vertical:.6} (min {}), horizontal clearance {horizontal:.6} (min {})",
            r.name,
            r.timeline.samples.len(),
            s.safety.height_clearance,
            s.safety.robot_margin
        ));
    }
    outcome(pass, parts.join("; "))
}

fn degrees(radians: f64) -> f64 {
    (radians.to_degrees() * 100.0).round() / 100.0 + 0.0
}

fn corridor_end_to_end() -> Outcome {
    let s = load_scenario(scenario_path("two_obstacle_corridor.toml")).unwrap();
    let started = Instant::now();
    let r = run_pipeline(&s);
    let elapsed = started.elapsed();
    let r = match r {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut pass = r.obstacles.len() == 2 && elapsed < CORRIDOR_BUDGET;
    let mut parts = Vec::new();
    for o in &r.obstacles {
        let (entry, exit) = (
            o.entering_angle.unwrap_or(f64::NAN),
            o.exiting_angle.unwrap_or(f64::NAN),
        );
        pass &= o.mode == PassMode::Crossing && exit.abs() <= 1e-9 && entry.abs() <= PI / 6.0;
        parts.push(format!(
            "obstacle {}: {:?}, entering {:.2} deg, exiting {:.2} deg, z_o {:.4}",
            o.index,
            o.mode,
            degrees(entry),
            degrees(exit),
            o.object_height
        ));
    }
    parts.push(format!("{:.1} ms", elapsed.as_secs_f64() * 1e3));
    outcome(pass, parts.join("; "))
}

/// Piecewise pose written as sums of clamped ramps.
fn closed_form(s: &CrossingSchedule, t: f64) -> (f64, f64) {
    let t = t.clamp(0.0, s.t4);
    let ramp = |a: f64, b: f64| {
        if b > a {
            ((t - a) / (b - a)).clamp(0.0, 1.0)
        } else {
            f64::from(t >= b)
        }
    };
    let x = s.speed * ((t - s.t1).clamp(0.0, s.t2 - s.t1) + (t - s.t3).max(0.0));
    let theta = s.sides.theta1 * ramp(0.0, s.t1) + s.sides.theta2 * ramp(s.t2, s.t3);
    (x, theta)
}

fn piecewise_conformance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let (mut worst, mut jump) = (0.0f64, 0.0f64);
    let schedules = 100;
    for _ in 0..schedules {
        let sides = SideSelection {
            entering: 0,
            exiting: 1,
            theta1: rng.gen_range(-PI / 2.0..PI / 2.0),
            theta2: rng.gen_range(-PI..PI),
            n_in: [1.0, 0.0],
            n_out: [1.0, 0.0],
        };
        let t1 = rng.gen_range(0.1..5.0);
        let t2 = t1 + rng.gen_range(0.1..10.0);
        let t3 = t2 + rng.gen_range(0.1..5.0);
        let t4 = t3 + rng.gen_range(0.1..10.0);
        let s = CrossingSchedule::new(sides, [t1, t2, t3, t4], rng.gen_range(0.05..1.0)).unwrap();
        for _ in 0..PATH_SAMPLES / schedules {
            let t = rng.gen_range(-1.0..t4 + 1.0);
            let p = s.pose_at(t);
            let (x, theta) = closed_form(&s, t);
            worst = worst
                .max((p.x - x).abs())
                .max((p.theta - theta).abs())
                .max(p.y.abs());
        }
        let eps = 1e-9;
        for knot in [t1, t2, t3] {
            let (a, b) = (s.pose_at(knot - eps), s.pose_at(knot + eps));
            let rate = s.speed + (sides.theta1 / t1).abs() + (sides.theta2 / (t3 - t2)).abs();
            jump = jump
                .max(((b.x - a.x).abs() + (b.theta - a.theta).abs() - 2.0 * eps * rate).max(0.0));
        }
    }
    outcome(
        worst <= PATH_TOL && jump <= PATH_TOL,
        format!("{PATH_SAMPLES} random times: max deviation {worst:.1e}, max jump at T1/T2/T3 {jump:.1e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("AC1 height reproduction", height_reproduction),
        ("AC2 oracle equivalence", oracle_equivalence),
        ("AC3 inverse/direct round trip", round_trip),
        ("AC4 constraint suite", constraint_suite),
        ("AC5 corridor end to end", corridor_end_to_end),
        ("AC6 piecewise path conformance", piecewise_conformance),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "FAIL AC7 physical RMSE reproduction: not reproducible without hardware and motion capture; \
         substituted by AC1 to AC4 (not counted)"
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
