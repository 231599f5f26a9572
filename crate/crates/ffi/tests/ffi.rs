use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use sheetcarry_ffi::*;

const SHEET: [f64; 6] = [0.0, 0.0, 1.6, 0.0, 0.8, 1.3856406460551018];
const ROBOTS: [f64; 6] = [0.0, 0.0, 1.04, 0.0, 0.52, 0.9006664199];

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn scenario_path(name: &str) -> PathBuf {
    manifest_dir().join("../../scenarios").join(name)
}

fn last_error() -> String {
    let p = st_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Handles {
    layout: *mut StLayout,
    formation: *mut StFormation,
}

impl Handles {
    fn new(robots: &[f64]) -> Self {
        let mut layout = ptr::null_mut();
        let mut formation = ptr::null_mut();
        unsafe {
            assert_eq!(
                st_layout_new(SHEET.as_ptr(), 3, 0.79, &mut layout),
                StStatus::Ok
            );
            assert_eq!(
                st_formation_new(layout, robots.as_ptr(), robots.len() / 2, &mut formation),
                StStatus::Ok
            );
        }
        Handles { layout, formation }
    }
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            st_formation_free(self.formation);
            st_layout_free(self.layout);
        }
    }
}

fn zeroed() -> StEquilibrium {
    StEquilibrium {
        position: [0.0; 3],
        contact: [0.0; 2],
        taut_count: 0,
    }
}

#[test]
fn equilibrium_round_trip() {
    let h = Handles::new(&ROBOTS);
    let mut eq = zeroed();
    let mut taut = [0u8; 3];
    unsafe {
        assert_eq!(st_formation_len(h.formation), 3);
        assert_eq!(
            st_solve_equilibrium(h.formation, &mut eq, taut.as_mut_ptr()),
            StStatus::Ok
        );
    }
    assert!((eq.position[2] - 0.088).abs() < 1e-3);
    assert_eq!(eq.taut_count, 3);
    assert_eq!(taut, [1, 1, 1]);
    assert!(st_last_error().is_null());

    let mut direct = zeroed();
    unsafe {
        assert_eq!(
            st_direct_kinematics(
                h.formation,
                [1u8, 1, 1].as_ptr(),
                &mut direct,
                ptr::null_mut()
            ),
            StStatus::Ok
        );
    }
    assert_eq!(direct, eq);

    // Rebuild the formation from its equilibrium with balanced directions.
    let phis: Vec<f64> = [210.0f64, 330.0, 90.0]
        .iter()
        .map(|d| d.to_radians())
        .collect();
    let mut rebuilt = ptr::null_mut();
    let mut check = zeroed();
    let mut robots = [0.0; 6];
    unsafe {
        assert_eq!(
            st_inverse_kinematics(
                h.layout,
                eq.contact.as_ptr(),
                eq.position[2],
                phis.as_ptr(),
                &mut rebuilt
            ),
            StStatus::Ok
        );
        assert_eq!(
            st_formation_robots(rebuilt, robots.as_mut_ptr(), 3),
            StStatus::Ok
        );
        assert_eq!(
            st_solve_equilibrium(rebuilt, &mut check, ptr::null_mut()),
            StStatus::Ok
        );
        st_formation_free(rebuilt);
    }
    assert!((check.position[2] - eq.position[2]).abs() < 1e-9);
    let side = ((robots[0] - robots[2]).powi(2) + (robots[1] - robots[3]).powi(2)).sqrt();
    assert!((side - 1.04).abs() < 1e-6, "{side}");
}

#[test]
fn errors_set_status_and_message() {
    let mut layout = ptr::null_mut();
    unsafe {
        assert_eq!(
            st_layout_new(ptr::null(), 3, 0.79, &mut layout),
            StStatus::NullPointer
        );
        assert!(last_error().contains("holding_points"));
        assert_eq!(
            st_layout_new(SHEET.as_ptr(), 3, -1.0, &mut layout),
            StStatus::InvalidArgument
        );
        assert!(layout.is_null());
        assert_eq!(
            st_layout_new(SHEET.as_ptr(), 3, 0.79, ptr::null_mut()),
            StStatus::NullPointer
        );
    }
    let stretched = Handles::new(&[0.0, 0.0, 1.7, 0.0, 0.52, 0.9006664199]);
    let mut eq = zeroed();
    unsafe {
        assert_eq!(
            st_solve_equilibrium(stretched.formation, &mut eq, ptr::null_mut()),
            StStatus::Infeasible
        );
    }
    assert!(last_error().contains("stretches"));
    let h = Handles::new(&ROBOTS);
    let mut small = [0.0; 2];
    unsafe {
        assert_eq!(
            st_formation_robots(h.formation, small.as_mut_ptr(), 1),
            StStatus::OutOfRange
        );
        assert_eq!(
            st_direct_kinematics(h.formation, [1u8, 1, 0].as_ptr(), &mut eq, ptr::null_mut()),
            StStatus::InvalidArgument
        );
        st_formation_free(ptr::null_mut());
        assert_eq!(st_formation_len(ptr::null()), 0);
    }
}

#[test]
fn optimize_for_an_obstacle() {
    let side = 1.2;
    let robots = [0.0, 0.0, side, 0.0, side / 2.0, side * 3f64.sqrt() / 2.0];
    let h = Handles::new(&robots);
    let center = [side / 2.0 + 2.0, 0.3];
    let mut out = ptr::null_mut();
    let mut mode = 9;
    let mut eq = zeroed();
    unsafe {
        assert_eq!(
            st_optimize_formation(
                h.formation,
                center.as_ptr(),
                0.2,
                0.2,
                2.0,
                &mut out,
                &mut mode
            ),
            StStatus::Ok
        );
        assert_eq!(
            st_solve_equilibrium(out, &mut eq, ptr::null_mut()),
            StStatus::Ok
        );
        st_formation_free(out);
        assert_eq!(
            st_optimize_formation(
                h.formation,
                center.as_ptr(),
                -0.2,
                0.2,
                2.0,
                &mut out,
                &mut mode
            ),
            StStatus::InvalidArgument
        );
    }
    assert_eq!(mode, 0);
    assert!(eq.position[2] >= 0.24 - 1e-9);
}

#[test]
fn scenario_pipeline_and_export() {
    let path = CString::new(
        scenario_path("two_obstacle_corridor.toml")
            .to_str()
            .unwrap(),
    )
    .unwrap();
    let mut scenario = ptr::null_mut();
    let mut report = ptr::null_mut();
    let mut summary = StObstacleSummary {
        mode: 9,
        start: 0.0,
        end: 0.0,
        object_height: 0.0,
        entering_angle: 0.0,
        exiting_angle: 0.0,
    };
    let mut clearances = StClearances {
        vertical: 0.0,
        horizontal: 0.0,
    };
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(st_scenario_load(path.as_ptr(), &mut scenario), StStatus::Ok);
        assert_eq!(st_run_pipeline(scenario, &mut report), StStatus::Ok);
        assert_eq!(st_report_obstacle_count(report), 2);
        assert!(st_report_sample_count(report) > 100);
        assert!(st_report_duration(report) > 0.0);
        for k in 0..2 {
            assert_eq!(st_report_obstacle(report, k, &mut summary), StStatus::Ok);
            assert_eq!(summary.mode, 0);
            assert!(summary.exiting_angle.abs() < 1e-9);
        }
        assert_eq!(
            st_report_obstacle(report, 2, &mut summary),
            StStatus::OutOfRange
        );
        assert_eq!(st_report_clearances(report, &mut clearances), StStatus::Ok);
        assert_eq!(st_report_export(report, out.as_ptr()), StStatus::Ok);
        st_report_free(report);
        st_scenario_free(scenario);
    }
    assert!(clearances.vertical >= 0.04 - 1e-9);
    assert!(clearances.horizontal >= 0.05 - 1e-9);
    assert!(dir.path().join("trajectory.csv").is_file());
}

#[test]
fn scenario_errors() {
    let mut scenario = ptr::null_mut();
    let missing = CString::new("/nonexistent/scenario.toml").unwrap();
    let broken = CString::new("name = ").unwrap();
    let text = std::fs::read_to_string(scenario_path("two_obstacle_corridor.toml"))
        .unwrap()
        .replacen("radius = 0.1", "radius = -1.0", 1);
    let invalid = CString::new(text).unwrap();
    unsafe {
        assert_eq!(
            st_scenario_load(missing.as_ptr(), &mut scenario),
            StStatus::Io
        );
        assert_eq!(
            st_scenario_parse(broken.as_ptr(), &mut scenario),
            StStatus::Parse
        );
        assert_eq!(
            st_scenario_parse(invalid.as_ptr(), &mut scenario),
            StStatus::Validation
        );
        assert!(last_error().contains("obstacles[0].radius"));
        assert_eq!(
            st_scenario_parse(ptr::null(), &mut scenario),
            StStatus::NullPointer
        );
    }
    assert!(scenario.is_null());
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(st_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(manifest_dir().join("include/sheetcarry.h")).unwrap();
    let source = std::fs::read_to_string(manifest_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 15);
    for name in exports {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
    for ty in [
        "StStatus",
        "StEquilibrium",
        "StObstacleSummary",
        "StClearances",
        "StLayout",
    ] {
        assert!(
            header.contains(&format!("typedef struct {ty}"))
                || header.contains(&format!("typedef enum {ty}"))
        );
    }
}

fn static_library() -> Option<PathBuf> {
    // Test binaries live in <target>/<profile>/deps.
    let exe = std::env::current_exe().ok()?;
    let profile = exe.parent()?.parent()?;
    let lib = profile.join("libsheetcarry_ffi.a");
    lib.is_file().then_some(lib)
}

fn have_compiler() -> bool {
    Command::new("cc")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn c_program_links_and_runs() {
    if !have_compiler() {
        eprintln!("cc not found; C linkage not exercised");
        return;
    }
    let lib = static_library().expect("static library is built alongside the tests");
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let include = manifest_dir().join("include");
    let source = manifest_dir().join("tests/c/smoke.c");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&source)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe)
        .arg(scenario_path("two_obstacle_corridor.toml"))
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        out.status.success(),
        "{text}{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(text.contains("obstacle 1 mode 0"), "{text}");
    assert!(Path::new(&exe).exists());
}
