use super::{MiqpProblem, MiqpSolution, MiqpStatus};
use crate::error::MiqpError;
use crate::qp::{solve_qp, QpOptions, QpStatus};

pub const ORACLE_MAX_BINARIES: usize = 20;

/// Solves one QP per binary assignment and keeps the best.
///
/// Assignments are visited in lexicographic order of the sorted binary
/// indices, and a later assignment only replaces the incumbent when it is
/// better by more than `1e-9`, so ties resolve to the lexicographically
/// smallest vector. Fixed binaries (`lb == ub`) keep their value.
pub fn enumerate_oracle(
    problem: &MiqpProblem,
    options: &QpOptions,
) -> Result<MiqpSolution, MiqpError> {
    problem.validate()?;
    let binaries = problem.sorted_binaries();
    if binaries.len() > ORACLE_MAX_BINARIES {
        return Err(MiqpError::TooManyBinaries {
            count: binaries.len(),
            limit: ORACLE_MAX_BINARIES,
        });
    }
    let m = binaries.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut qp = problem.base.clone();
    let mut visited = 0usize;
    'assignments: for mask in 0u64..(1u64 << m) {
        for (pos, &j) in binaries.iter().enumerate() {
            let bit = (mask >> (m - 1 - pos)) & 1;
            let v = bit as f64;
            if v < problem.base.lb[j] || v > problem.base.ub[j] {
                continue 'assignments;
            }
            qp.lb[j] = v;
            qp.ub[j] = v;
        }
        visited += 1;
        let sol = solve_qp(&qp, options, None)?;
        if sol.status != QpStatus::Optimal {
            continue;
        }
        let better = match &best {
            None => true,
            Some((obj, _)) => sol.objective < obj - 1e-9,
        };
        if better {
            best = Some((sol.objective, sol.z));
        }
    }
    Ok(match best {
        Some((objective, z)) => MiqpSolution {
            status: MiqpStatus::Optimal,
            z,
            objective,
            bound: objective,
            gap: 0.0,
            nodes_explored: visited,
        },
        None => MiqpSolution {
            status: MiqpStatus::Infeasible,
            z: Vec::new(),
            objective: f64::INFINITY,
            bound: f64::INFINITY,
            gap: 0.0,
            nodes_explored: visited,
        },
    })
}
