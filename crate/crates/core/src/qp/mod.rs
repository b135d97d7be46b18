//! Convex quadratic programs with a diagonal quadratic term.
//!
//! ```text
//! minimize    ½ zᵀ diag(p_diag) z + qᵀ z + c0
//! subject to  a_eq z = b_eq
//!             l_in <= a_in z <= u_in
//!             lb <= z <= ub
//! ```
//!
//! Infinite bounds are allowed on `l_in`, `u_in`, `lb` and `ub`.

mod ipm;
mod kkt;
mod polish;

pub use ipm::solve_qp;
pub use kkt::{check_kkt, KktResiduals};

use serde::{Deserialize, Serialize};

use crate::error::QpError;
use crate::linalg::sparse::inf_as_null;
use crate::linalg::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpProblem {
    pub n: usize,
    pub p_diag: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(default)]
    pub c0: f64,
    pub a_eq: SparseMatrix,
    pub b_eq: Vec<f64>,
    pub a_in: SparseMatrix,
    #[serde(with = "inf_as_null::lower")]
    pub l_in: Vec<f64>,
    #[serde(with = "inf_as_null::upper")]
    pub u_in: Vec<f64>,
    #[serde(with = "inf_as_null::lower")]
    pub lb: Vec<f64>,
    #[serde(with = "inf_as_null::upper")]
    pub ub: Vec<f64>,
}

impl QpProblem {
    /// Unconstrained problem with free variables and zero cost.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            p_diag: vec![0.0; n],
            q: vec![0.0; n],
            c0: 0.0,
            a_eq: SparseMatrix::zeros(0, n),
            b_eq: Vec::new(),
            a_in: SparseMatrix::zeros(0, n),
            l_in: Vec::new(),
            u_in: Vec::new(),
            lb: vec![f64::NEG_INFINITY; n],
            ub: vec![f64::INFINITY; n],
        }
    }

    /// Checks dimensions, convexity and finiteness. Crossed bounds are not an
    /// error here: they make the problem infeasible, which the solver reports.
    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.n;
        let dims = [
            ("p_diag", self.p_diag.len(), n),
            ("q", self.q.len(), n),
            ("lb", self.lb.len(), n),
            ("ub", self.ub.len(), n),
            ("a_eq.ncols", self.a_eq.ncols(), n),
            ("a_in.ncols", self.a_in.ncols(), n),
            ("b_eq", self.b_eq.len(), self.a_eq.nrows()),
            ("l_in", self.l_in.len(), self.a_in.nrows()),
            ("u_in", self.u_in.len(), self.a_in.nrows()),
        ];
        for (name, got, want) in dims {
            if got != want {
                return Err(QpError::Dimension { name, got, want });
            }
        }
        if let Some(j) = self.p_diag.iter().position(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(QpError::NonConvex(j));
        }
        let finite = self.q.iter().chain(&self.b_eq).all(|v| v.is_finite())
            && self.c0.is_finite()
            && self.a_eq.triplets().all(|(_, _, v)| v.is_finite())
            && self.a_in.triplets().all(|(_, _, v)| v.is_finite());
        let no_nan = self
            .l_in
            .iter()
            .chain(&self.u_in)
            .chain(&self.lb)
            .chain(&self.ub)
            .all(|v| !v.is_nan());
        if !finite || !no_nan {
            return Err(QpError::NotFinite);
        }
        if self.lb.iter().any(|&v| v == f64::INFINITY)
            || self.ub.iter().any(|&v| v == f64::NEG_INFINITY)
            || self.l_in.iter().any(|&v| v == f64::INFINITY)
            || self.u_in.iter().any(|&v| v == f64::NEG_INFINITY)
        {
            return Err(QpError::NotFinite);
        }
        Ok(())
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        self.c0
            + z.iter()
                .zip(&self.p_diag)
                .zip(&self.q)
                .map(|((z, p), q)| 0.5 * p * z * z + q * z)
                .sum::<f64>()
    }

    /// Largest violation of any constraint or bound at `z`.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (r, b) in self.a_eq.mul_vec(z).iter().zip(&self.b_eq) {
            worst = worst.max((r - b).abs());
        }
        for ((r, l), u) in self.a_in.mul_vec(z).iter().zip(&self.l_in).zip(&self.u_in) {
            worst = worst.max(l - r).max(r - u);
        }
        for ((v, l), u) in z.iter().zip(&self.lb).zip(&self.ub) {
            worst = worst.max(l - v).max(v - u);
        }
        worst
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("QpProblem always serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    DualInfeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub status: QpStatus,
    pub z: Vec<f64>,
    pub y_eq: Vec<f64>,
    /// Positive when the upper side is active, negative for the lower side.
    pub y_in: Vec<f64>,
    /// Same sign convention as `y_in`, for variable bounds.
    pub y_bound: Vec<f64>,
    pub objective: f64,
    pub residuals: KktResiduals,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 20_000,
        }
    }
}

/// Optional starting point. Duals may be empty.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    pub z: Vec<f64>,
    pub y_eq: Vec<f64>,
    pub y_in: Vec<f64>,
    pub y_bound: Vec<f64>,
}

impl From<&QpSolution> for WarmStart {
    fn from(s: &QpSolution) -> Self {
        Self {
            z: s.z.clone(),
            y_eq: s.y_eq.clone(),
            y_in: s.y_in.clone(),
            y_bound: s.y_bound.clone(),
        }
    }
}
