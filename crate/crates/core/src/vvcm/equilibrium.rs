use super::{
    combinations, solve_pentagon, solve_quadrilateral, solve_triangle, ObjectEquilibrium,
    VvcmError, EQ5_TOL,
};
use crate::geometry::Formation;

fn check_feasible(formation: &Formation) -> Result<(), VvcmError> {
    formation
        .check_inelastic()
        .map_err(|o| VvcmError::InfeasibleFormation {
            i: o.i,
            j: o.j,
            excess: o.excess,
        })
}

/// Solves for the taut subset `taut` (ascending indices) and checks that the
/// remaining cables are not stretched.
pub fn solve_subset(formation: &Formation, taut: &[usize]) -> Result<ObjectEquilibrium, VvcmError> {
    let eq = match *taut {
        [a, b, c] => solve_triangle(formation, [a, b, c])?,
        [a, b, c, d] => solve_quadrilateral(formation, [a, b, c, d])?,
        _ if taut.len() >= 5 => solve_pentagon(formation, taut)?,
        _ => return Err(VvcmError::TooFewTaut(taut.len())),
    };
    for c in &eq.cables {
        let violation = c.distance - c.length;
        if !taut.contains(&c.index) && violation > EQ5_TOL {
            return Err(VvcmError::SlackViolated {
                index: c.index,
                violation,
            });
        }
    }
    Ok(eq)
}

/// Object equilibrium for given taut flags.
pub fn direct_kinematics(
    formation: &Formation,
    taut_flags: &[bool],
) -> Result<ObjectEquilibrium, VvcmError> {
    check_feasible(formation)?;
    if taut_flags.len() != formation.len() {
        return Err(VvcmError::CountMismatch {
            got: taut_flags.len(),
            expected: formation.len(),
        });
    }
    let taut: Vec<usize> = (0..formation.len()).filter(|&i| taut_flags[i]).collect();
    if taut.len() < 3 {
        return Err(VvcmError::TooFewTaut(taut.len()));
    }
    solve_subset(formation, &taut)
}

/// Object equilibrium with the taut set found by enumeration.
///
/// Every subset of three or more cables is solved; among the candidates whose
/// contact lies in the taut hull and whose other cables are not stretched,
/// the lowest object wins. Near-equal heights prefer more taut cables.
pub fn solve_equilibrium(formation: &Formation) -> Result<ObjectEquilibrium, VvcmError> {
    check_feasible(formation)?;
    let n = formation.len();
    let mut best: Option<ObjectEquilibrium> = None;
    for m in (3..=n).rev() {
        for taut in combinations(n, m) {
            let Ok(eq) = solve_subset(formation, &taut) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some(b) => eq.height() < b.height() - 1e-9,
            };
            if better {
                best = Some(eq);
            }
        }
    }
    best.ok_or(VvcmError::NoEquilibrium)
}
