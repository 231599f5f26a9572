use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sheetcarry::optimizer::PassMode;
use sheetcarry::pipeline::{run_pipeline, PipelineError, RunReport};
use sheetcarry::planner::MotionParams;
use sheetcarry::report::export_report;
use sheetcarry::scenario::{load_formation, load_scenario, Scenario};
use sheetcarry::vvcm::{
    direct_kinematics, solve_equilibrium, CableStatus, ObjectEquilibrium, VvcmError,
};

const INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "sheetcarry",
    version,
    about = "Plan a robot team carrying an object in a sheet through a corridor"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write the trajectory, metrics and plot series.
    Plan {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sampling step, seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// Translational speed, meters per second.
        #[arg(long)]
        speed: Option<f64>,
    },
    /// Print the object equilibrium for a formation file.
    Kinematics {
        #[arg(long)]
        formation: PathBuf,
    },
    /// Check a scenario file without planning.
    Validate { scenario: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn error(e: impl std::fmt::Display) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }

    fn infeasible(e: impl std::fmt::Display) -> Self {
        Failure {
            code: INFEASIBLE,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Plan {
            scenario,
            out,
            dt,
            speed,
        } => plan(&scenario, &out, dt, speed),
        Command::Kinematics { formation } => kinematics(&formation),
        Command::Validate { scenario } => validate(&scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn plan(path: &Path, out: &Path, dt: Option<f64>, speed: Option<f64>) -> Result<(), Failure> {
    let mut scenario = load_scenario(path).map_err(Failure::error)?;
    let m = scenario.motion;
    scenario.motion = MotionParams::new(speed.unwrap_or(m.speed), m.turn_rate, dt.unwrap_or(m.dt))
        .map_err(Failure::error)?;
    let report = run_pipeline(&scenario).map_err(|e| match e {
        PipelineError::PipelineInfeasible { .. } => Failure::infeasible(e),
        _ => Failure::error(e),
    })?;
    let files = export_report(&report, out).map_err(Failure::error)?;
    print_summary(&scenario, &report);
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

/// Degrees rounded to two places, without a negative zero.
fn degrees(radians: f64) -> f64 {
    (radians.to_degrees() * 100.0).round() / 100.0 + 0.0
}

fn print_summary(scenario: &Scenario, report: &RunReport) {
    println!("scenario {}", report.name);
    println!(
        "duration {:.2} s, {} samples at {} s",
        report.timeline.duration(),
        report.timeline.samples.len(),
        scenario.motion.dt
    );
    for o in &report.obstacles {
        let mode = match o.mode {
            PassMode::Crossing => "crossed",
            PassMode::Bypassing => "bypassed",
        };
        let sides: Vec<String> = o.side_lengths.iter().map(|s| format!("{s:.3}")).collect();
        print!(
            "obstacle {}: {mode}, sides [{}] m, object height {:.4} m",
            o.index,
            sides.join(", "),
            o.object_height
        );
        if let (Some(a), Some(b), Some(e)) = (o.entering_angle, o.theta2, o.exiting_angle) {
            print!(
                ", entry turn {:.2} deg, exit turn {:.2} deg, exit misalignment {:.2} deg",
                degrees(a),
                degrees(b),
                degrees(e)
            );
        }
        println!();
    }
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4} m"));
    println!(
        "min vertical clearance {}",
        show(report.min_vertical_clearance)
    );
    println!(
        "min horizontal clearance {}",
        show(report.min_horizontal_clearance)
    );
    let lengths: Vec<String> = report
        .path_lengths
        .iter()
        .map(|l| format!("{l:.3}"))
        .collect();
    println!("robot path lengths [{}] m", lengths.join(", "));
    println!(
        "centerline rmse {:.4} m, goal error {:.4} m",
        report.centerline_rmse, report.goal_error
    );
}

fn kinematics(path: &Path) -> Result<(), Failure> {
    let (formation, taut) = load_formation(path).map_err(Failure::error)?;
    let eq = match taut {
        Some(flags) => direct_kinematics(&formation, &flags),
        None => solve_equilibrium(&formation),
    }
    .map_err(|e| match e {
        VvcmError::InfeasibleFormation { .. } | VvcmError::NoEquilibrium => Failure::infeasible(e),
        _ => Failure::error(e),
    })?;
    print_equilibrium(&eq);
    Ok(())
}

fn print_equilibrium(eq: &ObjectEquilibrium) {
    let p = eq.position;
    println!("object {:.9} {:.9} {:.9}", p.x, p.y, p.z);
    println!("contact {:.9} {:.9}", eq.contact.x, eq.contact.y);
    for c in &eq.cables {
        let status = match c.status {
            CableStatus::Taut => "taut",
            CableStatus::Slack => "slack",
        };
        println!(
            "cable {} {status} length {:.9} distance {:.9}",
            c.index, c.length, c.distance
        );
    }
    println!("active {:?}", eq.active);
    println!("degeneracy {:?}", eq.degeneracy);
}

fn validate(path: &Path) -> Result<(), Failure> {
    let s = load_scenario(path).map_err(Failure::error)?;
    println!(
        "{}: {} robots, {} obstacles, corridor {:.3} m in {} segments",
        s.name,
        s.formation.len(),
        s.obstacles.len(),
        s.corridor.length(),
        s.corridor.widths().len()
    );
    Ok(())
}
