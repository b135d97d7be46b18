//! Convex MIQPs with binary variables: branch-and-bound over QP relaxations
//! and an exhaustive enumeration oracle.

mod bnb;
mod oracle;

pub use bnb::{rounding_incumbent, solve_miqp, solve_miqp_with_hint};
pub use oracle::{enumerate_oracle, ORACLE_MAX_BINARIES};

use serde::{Deserialize, Serialize};

use crate::error::MiqpError;
use crate::qp::{QpOptions, QpProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiqpProblem {
    pub base: QpProblem,
    pub binary_indices: Vec<usize>,
}

impl MiqpProblem {
    /// Binary variables must have bounds inside `[0, 1]` with integral
    /// endpoints; `lb == ub` marks a binary that is already fixed.
    pub fn validate(&self) -> Result<(), MiqpError> {
        self.base.validate()?;
        let n = self.base.n;
        for &j in &self.binary_indices {
            if j >= n {
                return Err(MiqpError::BinaryIndex { index: j, n });
            }
            let (l, u) = (self.base.lb[j], self.base.ub[j]);
            let integral = |v: f64| v == 0.0 || v == 1.0;
            if !integral(l) || !integral(u) || l > u {
                return Err(MiqpError::BinaryBounds(j));
            }
        }
        Ok(())
    }

    /// Sorted, deduplicated binary indices.
    pub fn sorted_binaries(&self) -> Vec<usize> {
        let mut b = self.binary_indices.clone();
        b.sort_unstable();
        b.dedup();
        b
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("MiqpProblem always serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchingRule {
    /// Binary closest to 0.5; ties go to the lowest index.
    MostFractional,
    /// Lowest-index fractional binary.
    FirstFractional,
    /// Largest product of estimated down/up objective increases, learned
    /// from earlier branchings; behaves like `MostFractional` until any
    /// estimates exist. Ties go to the lowest index.
    Pseudocost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOrder {
    /// Lowest relaxation bound first; ties go to the deeper node, then the
    /// left (`= 0`) child.
    BestBound,
    /// Deepest node first, left child before right.
    DepthFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BnbConfig {
    pub rel_gap: f64,
    pub abs_gap: f64,
    pub node_limit: usize,
    pub integrality_tol: f64,
    pub branching: BranchingRule,
    pub node_order: NodeOrder,
    /// Forces serial exploration. Results are reproducible either way, but
    /// only the serial mode also fixes the evaluation order.
    pub deterministic: bool,
    pub qp_tolerance: f64,
    pub qp_max_iterations: usize,
    /// Run a rounding dive from the root relaxation to find an early
    /// incumbent.
    pub dive: bool,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            rel_gap: 1e-4,
            abs_gap: 1e-6,
            node_limit: 50_000,
            integrality_tol: 1e-6,
            branching: BranchingRule::Pseudocost,
            node_order: NodeOrder::BestBound,
            deterministic: true,
            qp_tolerance: 1e-6,
            qp_max_iterations: 20_000,
            dive: true,
        }
    }
}

impl BnbConfig {
    pub fn qp_options(&self) -> QpOptions {
        QpOptions {
            tolerance: self.qp_tolerance,
            max_iterations: self.qp_max_iterations,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.rel_gap >= 0.0) || !(self.abs_gap >= 0.0) {
            out.push("optimality gaps must be nonnegative".to_string());
        }
        if self.node_limit < 1 {
            out.push("node limit must be at least 1".to_string());
        }
        if !(self.integrality_tol > 0.0 && self.integrality_tol < 0.5) {
            out.push("integrality tolerance must lie in (0, 0.5)".to_string());
        }
        if !(self.qp_tolerance > 0.0) {
            out.push("QP tolerance must be positive".to_string());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiqpStatus {
    /// Search tree exhausted; `gap <= rel_gap`.
    Optimal,
    /// Stopped because the remaining nodes cannot improve by more than the
    /// configured gap.
    GapReached,
    /// Node limit hit with an incumbent.
    NodeLimit,
    Infeasible,
    /// Node limit hit before any incumbent was found.
    Unknown,
}

impl MiqpStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, Self::Optimal | Self::GapReached | Self::NodeLimit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiqpSolution {
    pub status: MiqpStatus,
    pub z: Vec<f64>,
    pub objective: f64,
    /// Best proven lower bound.
    pub bound: f64,
    /// `(objective - bound) / max(1, |objective|)`.
    pub gap: f64,
    pub nodes_explored: usize,
}

pub(crate) fn relative_gap(objective: f64, bound: f64) -> f64 {
    ((objective - bound) / objective.abs().max(1.0)).max(0.0)
}
