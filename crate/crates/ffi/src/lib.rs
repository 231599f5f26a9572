//! C ABI over the sheetcarry library.
//!
//! Objects cross the boundary as opaque handles created by `st_*_new`,
//! `st_*_load`, `st_*_parse` or `st_run_pipeline` and released with the
//! matching `st_*_free`. Every fallible call returns an [`StStatus`]; on
//! failure [`st_last_error`] describes the cause for the calling thread.
//! Points are passed as interleaved `x, y` arrays of `f64`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use sheetcarry::geometry::{Formation, GeometryError, SafetyParams, SheetLayout, Vec2};
use sheetcarry::optimizer::{
    optimize_formation, CostWeights, ObstacleSpec, OptimizeError, PassMode,
};
use sheetcarry::pipeline::{run_pipeline, PipelineError, RunReport};
use sheetcarry::report::export_report;
use sheetcarry::scenario::{load_scenario, parse_scenario, Scenario, ScenarioError};
use sheetcarry::vvcm::{
    direct_kinematics, inverse_kinematics, solve_equilibrium, ObjectEquilibrium, VvcmError,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Validation = 4,
    Infeasible = 5,
    Numerical = 6,
    Io = 7,
    OutOfRange = 8,
    Panic = 9,
}

/// Sheet holding points and holding height.
pub struct StLayout(Arc<SheetLayout>);

/// Robot positions on a sheet.
pub struct StFormation(Formation);

/// Validated scenario.
pub struct StScenario(Scenario);

/// Result of a pipeline run.
pub struct StReport(RunReport);

/// Object equilibrium; per-cable taut flags are returned separately.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StEquilibrium {
    /// World position `x, y, z`.
    pub position: [f64; 3],
    /// Contact point on the sheet, sheet frame.
    pub contact: [f64; 2],
    pub taut_count: u32,
}

/// One obstacle passage of a pipeline run. Angles are radians and are NaN
/// for a bypass.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StObstacleSummary {
    /// 0 crossing, 1 bypassing.
    pub mode: u32,
    pub start: f64,
    pub end: f64,
    pub object_height: f64,
    pub entering_angle: f64,
    pub exiting_angle: f64,
}

/// Minimum clearances of a run; NaN when never evaluated.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StClearances {
    pub vertical: f64,
    pub horizontal: f64,
}

struct Failure {
    status: StStatus,
    message: String,
}

impl Failure {
    fn new(status: StStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        Failure::new(StStatus::InvalidArgument, e.to_string())
    }
}

impl From<VvcmError> for Failure {
    fn from(e: VvcmError) -> Self {
        let status = match e {
            VvcmError::InfeasibleFormation { .. } | VvcmError::NoEquilibrium => {
                StStatus::Infeasible
            }
            VvcmError::TooFewTaut(_)
            | VvcmError::CountMismatch { .. }
            | VvcmError::InvalidHeight { .. }
            | VvcmError::ContactOutsideSheet
            | VvcmError::Geometry(_) => StStatus::InvalidArgument,
            _ => StStatus::Numerical,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let status = match e {
            ScenarioError::Io { .. } => StStatus::Io,
            ScenarioError::Parse(_) => StStatus::Parse,
            ScenarioError::Validation { .. } => StStatus::Validation,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<OptimizeError> for Failure {
    fn from(e: OptimizeError) -> Self {
        let status = match e {
            OptimizeError::NoFeasibleFormation => StStatus::Infeasible,
            _ => StStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match e {
            PipelineError::PipelineInfeasible { .. } => StStatus::Infeasible,
            _ => StStatus::Numerical,
        };
        Failure::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("interior nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> StStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => StStatus::Ok,
        Ok(Err(f)) => {
            set_last_error(&f.message);
            f.status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {message}"));
            StStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure::new(StStatus::NullPointer, format!("{name} is null"))
}

unsafe fn get<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn points(data: *const f64, count: usize, name: &str) -> Result<Vec<Vec2>, Failure> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if data.is_null() {
        return Err(null(name));
    }
    let raw = std::slice::from_raw_parts(data, 2 * count);
    Ok(raw.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect())
}

unsafe fn text<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        Failure::new(
            StStatus::InvalidArgument,
            format!("{name} is not valid UTF-8"),
        )
    })
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn equilibrium(eq: &ObjectEquilibrium) -> StEquilibrium {
    StEquilibrium {
        position: [eq.position.x, eq.position.y, eq.position.z],
        contact: [eq.contact.x, eq.contact.y],
        taut_count: eq.taut_count() as u32,
    }
}

unsafe fn write_equilibrium(
    eq: &ObjectEquilibrium,
    result: *mut StEquilibrium,
    taut: *mut u8,
) -> Result<(), Failure> {
    *out(result, "result")? = equilibrium(eq);
    if !taut.is_null() {
        let flags = std::slice::from_raw_parts_mut(taut, eq.cables.len());
        for (f, c) in flags.iter_mut().zip(&eq.cables) {
            *f = u8::from(c.is_taut());
        }
    }
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn st_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn st_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Sheet with `count` holding points (counterclockwise, convex) at height
/// `holding_height`.
#[no_mangle]
pub unsafe extern "C" fn st_layout_new(
    holding_points: *const f64,
    count: usize,
    holding_height: f64,
    layout: *mut *mut StLayout,
) -> StStatus {
    guard(|| {
        let slot = out(layout, "layout")?;
        let pts = points(holding_points, count, "holding_points")?;
        *slot = boxed(StLayout(Arc::new(SheetLayout::new(pts, holding_height)?)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn st_layout_free(layout: *mut StLayout) {
    release(layout);
}

/// Formation of `count` robots on `layout`; the layout handle stays owned by
/// the caller.
#[no_mangle]
pub unsafe extern "C" fn st_formation_new(
    layout: *const StLayout,
    robots: *const f64,
    count: usize,
    formation: *mut *mut StFormation,
) -> StStatus {
    guard(|| {
        let slot = out(formation, "formation")?;
        let layout = get(layout, "layout")?;
        let pts = points(robots, count, "robots")?;
        *slot = boxed(StFormation(Formation::new(layout.0.clone(), pts)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn st_formation_free(formation: *mut StFormation) {
    release(formation);
}

/// Number of robots, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn st_formation_len(formation: *const StFormation) -> usize {
    formation.as_ref().map_or(0, |f| f.0.len())
}

/// Copies robot positions into `robots`, which holds `capacity` points.
#[no_mangle]
pub unsafe extern "C" fn st_formation_robots(
    formation: *const StFormation,
    robots: *mut f64,
    capacity: usize,
) -> StStatus {
    guard(|| {
        let f = &get(formation, "formation")?.0;
        if capacity < f.len() {
            return Err(Failure::new(
                StStatus::OutOfRange,
                format!("capacity {capacity} is below {} robots", f.len()),
            ));
        }
        if robots.is_null() {
            return Err(null("robots"));
        }
        let dst = std::slice::from_raw_parts_mut(robots, 2 * f.len());
        for (d, r) in dst.chunks_exact_mut(2).zip(f.robots()) {
            d[0] = r.x;
            d[1] = r.y;
        }
        Ok(())
    })
}

/// Equilibrium with the taut set found automatically. `taut`, when not
/// null, receives one 0/1 flag per robot.
#[no_mangle]
pub unsafe extern "C" fn st_solve_equilibrium(
    formation: *const StFormation,
    result: *mut StEquilibrium,
    taut: *mut u8,
) -> StStatus {
    guard(|| {
        let eq = solve_equilibrium(&get(formation, "formation")?.0)?;
        write_equilibrium(&eq, result, taut)
    })
}

/// Equilibrium for the given taut flags, one 0/1 byte per robot.
#[no_mangle]
pub unsafe extern "C" fn st_direct_kinematics(
    formation: *const StFormation,
    taut_flags: *const u8,
    result: *mut StEquilibrium,
    taut: *mut u8,
) -> StStatus {
    guard(|| {
        let f = &get(formation, "formation")?.0;
        if taut_flags.is_null() {
            return Err(null("taut_flags"));
        }
        let flags: Vec<bool> = std::slice::from_raw_parts(taut_flags, f.len())
            .iter()
            .map(|&b| b != 0)
            .collect();
        let eq = direct_kinematics(f, &flags)?;
        write_equilibrium(&eq, result, taut)
    })
}

/// Formation holding the object at sheet contact `contact` and height
/// `object_height`, robot `i` placed along direction `phis[i]` from the
/// object. `phis` has one entry per holding point.
#[no_mangle]
pub unsafe extern "C" fn st_inverse_kinematics(
    layout: *const StLayout,
    contact: *const f64,
    object_height: f64,
    phis: *const f64,
    formation: *mut *mut StFormation,
) -> StStatus {
    guard(|| {
        let slot = out(formation, "formation")?;
        let layout = get(layout, "layout")?;
        let c = points(contact, 1, "contact")?[0];
        if phis.is_null() {
            return Err(null("phis"));
        }
        let phis = std::slice::from_raw_parts(phis, layout.0.len());
        *slot = boxed(StFormation(inverse_kinematics(
            &layout.0,
            c,
            object_height,
            phis,
        )?));
        Ok(())
    })
}

/// Optimized formation for one obstacle with default weights and safety
/// margins. `mode` receives 0 for crossing, 1 for bypassing.
#[no_mangle]
pub unsafe extern "C" fn st_optimize_formation(
    initial: *const StFormation,
    obstacle_center: *const f64,
    obstacle_radius: f64,
    obstacle_height: f64,
    corridor_width: f64,
    formation: *mut *mut StFormation,
    mode: *mut u32,
) -> StStatus {
    guard(|| {
        let slot = out(formation, "formation")?;
        let mode = out(mode, "mode")?;
        let initial = &get(initial, "initial")?.0;
        let center = points(obstacle_center, 1, "obstacle_center")?[0];
        let obstacle = ObstacleSpec::new(center, obstacle_radius, obstacle_height)?;
        let solution = optimize_formation(
            initial,
            &obstacle,
            corridor_width,
            &CostWeights::default(),
            &SafetyParams::default(),
        )?;
        *mode = pass_mode(solution.mode);
        *slot = boxed(StFormation(solution.formation));
        Ok(())
    })
}

fn pass_mode(mode: PassMode) -> u32 {
    match mode {
        PassMode::Crossing => 0,
        PassMode::Bypassing => 1,
    }
}

/// Scenario read from a TOML file at `path`.
#[no_mangle]
pub unsafe extern "C" fn st_scenario_load(
    path: *const c_char,
    scenario: *mut *mut StScenario,
) -> StStatus {
    guard(|| {
        let slot = out(scenario, "scenario")?;
        *slot = boxed(StScenario(load_scenario(text(path, "path")?)?));
        Ok(())
    })
}

/// Scenario parsed from TOML text.
#[no_mangle]
pub unsafe extern "C" fn st_scenario_parse(
    source: *const c_char,
    scenario: *mut *mut StScenario,
) -> StStatus {
    guard(|| {
        let slot = out(scenario, "scenario")?;
        *slot = boxed(StScenario(parse_scenario(text(source, "source")?)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn st_scenario_free(scenario: *mut StScenario) {
    release(scenario);
}

/// Plans the whole scenario.
#[no_mangle]
pub unsafe extern "C" fn st_run_pipeline(
    scenario: *const StScenario,
    report: *mut *mut StReport,
) -> StStatus {
    guard(|| {
        let slot = out(report, "report")?;
        *slot = boxed(StReport(run_pipeline(&get(scenario, "scenario")?.0)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn st_report_free(report: *mut StReport) {
    release(report);
}

/// Number of trajectory samples, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn st_report_sample_count(report: *const StReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.timeline.samples.len())
}

/// Planned duration in seconds, or NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn st_report_duration(report: *const StReport) -> f64 {
    report
        .as_ref()
        .map_or(f64::NAN, |r| r.0.timeline.duration())
}

/// Number of obstacles passed, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn st_report_obstacle_count(report: *const StReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.obstacles.len())
}

#[no_mangle]
pub unsafe extern "C" fn st_report_obstacle(
    report: *const StReport,
    index: usize,
    summary: *mut StObstacleSummary,
) -> StStatus {
    guard(|| {
        let r = &get(report, "report")?.0;
        let slot = out(summary, "summary")?;
        let o = r.obstacles.get(index).ok_or_else(|| {
            Failure::new(
                StStatus::OutOfRange,
                format!("obstacle {index} of {}", r.obstacles.len()),
            )
        })?;
        *slot = StObstacleSummary {
            mode: pass_mode(o.mode),
            start: o.start,
            end: o.end,
            object_height: o.object_height,
            entering_angle: o.entering_angle.unwrap_or(f64::NAN),
            exiting_angle: o.exiting_angle.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn st_report_clearances(
    report: *const StReport,
    clearances: *mut StClearances,
) -> StStatus {
    guard(|| {
        let r = &get(report, "report")?.0;
        *out(clearances, "clearances")? = StClearances {
            vertical: r.min_vertical_clearance.unwrap_or(f64::NAN),
            horizontal: r.min_horizontal_clearance.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Writes the trajectory table, metrics and plot series into `directory`.
#[no_mangle]
pub unsafe extern "C" fn st_report_export(
    report: *const StReport,
    directory: *const c_char,
) -> StStatus {
    guard(|| {
        let r = &get(report, "report")?.0;
        let dir = text(directory, "directory")?;
        export_report(r, Path::new(dir)).map_err(|e| Failure::new(StStatus::Io, e.to_string()))?;
        Ok(())
    })
}
