use serde::{Deserialize, Serialize};

use super::QpProblem;

/// Infinity norms of the three KKT conditions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    /// Complementary slackness, including wrong-signed multipliers on sides
    /// that have no finite bound.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.complementarity)
    }
}

/// Evaluates the KKT residuals of `(z, y_eq, y_in, y_bound)` directly from the
/// problem data.
///
/// Stationarity is `P z + q + a_eqᵀ y_eq + a_inᵀ y_in + y_bound`. Missing
/// dual vectors (empty slices) are read as zero.
pub fn check_kkt(
    problem: &QpProblem,
    z: &[f64],
    y_eq: &[f64],
    y_in: &[f64],
    y_bound: &[f64],
) -> KktResiduals {
    let n = problem.n;
    let zero_eq = vec![0.0; problem.a_eq.nrows()];
    let zero_in = vec![0.0; problem.a_in.nrows()];
    let zero_b = vec![0.0; n];
    let y_eq = if y_eq.is_empty() { &zero_eq[..] } else { y_eq };
    let y_in = if y_in.is_empty() { &zero_in[..] } else { y_in };
    let y_bound = if y_bound.is_empty() { &zero_b[..] } else { y_bound };

    let mut grad: Vec<f64> = (0..n)
        .map(|j| problem.p_diag[j] * z[j] + problem.q[j] + y_bound[j])
        .collect();
    problem.a_eq.add_tr_mul_vec(y_eq, &mut grad);
    problem.a_in.add_tr_mul_vec(y_in, &mut grad);
    let stationarity = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));

    let primal = problem.max_violation(z).max(0.0);

    let side = |y: f64, value: f64, lo: f64, hi: f64| -> f64 {
        if y > 0.0 {
            if hi.is_finite() {
                y * (hi - value).abs()
            } else {
                y
            }
        } else if y < 0.0 {
            if lo.is_finite() {
                -y * (value - lo).abs()
            } else {
                -y
            }
        } else {
            0.0
        }
    };
    let mut complementarity = 0.0f64;
    let rows = problem.a_in.mul_vec(z);
    for i in 0..rows.len() {
        complementarity =
            complementarity.max(side(y_in[i], rows[i], problem.l_in[i], problem.u_in[i]));
    }
    for j in 0..n {
        complementarity =
            complementarity.max(side(y_bound[j], z[j], problem.lb[j], problem.ub[j]));
    }

    KktResiduals {
        stationarity,
        primal,
        complementarity,
    }
}
