//! Solution polishing: guess the active set from an approximate primal-dual
//! pair and solve the equality-constrained KKT system it implies.
//!
//! Interior iterates on degenerate problems (large multipliers, nearly
//! dependent active rows) can stall a little short of the absolute
//! tolerance; the active-set solve recovers a vertex-accurate point when the
//! guess is right. A few correction rounds drop active rows whose multiplier
//! comes out negative and add rows the new point violates. Callers still
//! check the result against the original problem.

use super::ipm::Conic;
use crate::linalg::LdlFactor;

const REG: f64 = 1e-10;
const REFINE_STEPS: usize = 8;
const ROUNDS: usize = 4;
const SIGN_TOL: f64 = 1e-9;

/// Solves `P x + q + A_Sᵀ z_S = 0, A_S x = b_S` for the active set `S`.
fn solve_active(c: &Conic, active: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = c.n;
    let dim = n + active.len();
    let mut entries: Vec<(usize, usize, f64)> = (0..n).map(|j| (j, j, c.p[j])).collect();
    let mut rhs: Vec<f64> = c.q.iter().map(|v| -v).collect();
    for (a, &i) in active.iter().enumerate() {
        let r = n + a;
        entries.extend(c.row(i).into_iter().map(|(j, v)| (r, j, v)));
        entries.push((r, r, 0.0));
        rhs.push(c.b[i]);
    }
    let pattern: Vec<(usize, usize)> = entries.iter().map(|&(r, col, _)| (r, col)).collect();
    let signs: Vec<f64> = (0..dim).map(|k| if k < n { 1.0 } else { -1.0 }).collect();
    let (mut ldl, slots) = LdlFactor::symbolic(dim, &pattern, &signs);
    {
        let vals = ldl.values_mut();
        for (e, &(r, col, v)) in entries.iter().enumerate() {
            vals[slots[e]] += v;
            if r == col {
                vals[slots[e]] += signs[r] * REG;
            }
        }
    }
    ldl.factor(REG, REG).ok()?;

    // iterative refinement against the unregularized matrix
    let mut sol = rhs.clone();
    ldl.solve(&mut sol);
    for _ in 0..REFINE_STEPS {
        let mut res = rhs.clone();
        for &(r, col, v) in &entries {
            res[r] -= v * sol[col];
            if r != col {
                res[col] -= v * sol[r];
            }
        }
        if res.iter().all(|v| v.abs() < 1e-15) {
            break;
        }
        ldl.solve(&mut res);
        for (s, d) in sol.iter_mut().zip(&res) {
            *s += d;
        }
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let x = sol[..n].to_vec();
    let mut z = vec![0.0; c.m()];
    for (a, &i) in active.iter().enumerate() {
        z[i] = sol[n + a];
    }
    Some((x, z))
}

/// Polished `(x, z)` in the conic variables, or `None` if no consistent
/// active set was found.
pub(super) fn polish(c: &Conic, x: &[f64], z: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = c.m();
    let mut ax = vec![0.0; m];
    c.a_mul(x, &mut ax);
    let mut in_set: Vec<bool> = (0..m)
        .map(|i| c.is_zero_row(i) || c.b[i] - ax[i] < z[i])
        .collect();
    for _ in 0..ROUNDS {
        let active: Vec<usize> = (0..m).filter(|&i| in_set[i]).collect();
        let (xp, zp) = solve_active(c, &active)?;
        c.a_mul(&xp, &mut ax);
        let mut changed = false;
        for i in 0..m {
            if c.is_zero_row(i) {
                continue;
            }
            if in_set[i] && zp[i] < -SIGN_TOL * (1.0 + zp[i].abs()) {
                in_set[i] = false;
                changed = true;
            } else if !in_set[i] && c.b[i] - ax[i] < -SIGN_TOL * (1.0 + c.b[i].abs()) {
                in_set[i] = true;
                changed = true;
            }
        }
        if !changed {
            return Some((xp, zp));
        }
    }
    None
}
