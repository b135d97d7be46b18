//! Homogeneous self-dual interior point method.
//!
//! The problem is first reduced to the conic form
//!
//! ```text
//! minimize ½ xᵀPx + qᵀx   subject to   A x + s = b,  s ∈ {0}^m0 × R+^m1
//! ```
//!
//! by substituting fixed variables (`lb == ub`), splitting two-sided rows and
//! turning variable bounds into singleton rows. Singleton rows are eliminated
//! from the Newton system into the diagonal of the `P` block, so the factored
//! matrix only contains the general rows.
//!
//! Iterates carry the homogenizing pair `(τ, κ)`; `τ → 0` with `κ > 0`
//! signals infeasibility and the Farkas certificates are checked directly.

use super::{check_kkt, QpOptions, QpProblem, QpSolution, QpStatus, WarmStart};
use super::polish::polish;
use crate::error::QpError;
use crate::linalg::sparse::{dot, norm_inf};
use crate::linalg::LdlFactor;

const STATIC_REG: f64 = 1e-8;
const DYNAMIC_THRESHOLD: f64 = 1e-13;
const DYNAMIC_REG: f64 = 2e-7;
const STEP_FRACTION: f64 = 0.99;
const INFEASIBILITY_TOL: f64 = 1e-9;
const PRESOLVE_TOL: f64 = 1e-9;
const STALL_LIMIT: usize = 25;

/// Solves a convex QP.
///
/// `Optimal` is only reported once [`check_kkt`] on the original problem is
/// within `options.tolerance`. Identical inputs give bit-identical outputs.
pub fn solve_qp(
    problem: &QpProblem,
    options: &QpOptions,
    warm_start: Option<&WarmStart>,
) -> Result<QpSolution, QpError> {
    problem.validate()?;
    let presolved = match Presolved::new(problem) {
        Some(p) => p,
        None => return Ok(trivially_infeasible(problem)),
    };
    let warm = warm_start.map(|w| presolved.map_warm_start(w));
    let mut solver = Ipm::new(&presolved.conic);
    let outcome = solver.run(options, warm.as_ref(), |x, z| {
        let (zo, ye, yi, yb) = presolved.recover(problem, x, z);
        let r = check_kkt(problem, &zo, &ye, &yi, &yb);
        r.max() <= options.tolerance
    });
    let (x, z, status, iterations) = outcome;
    let (zo, y_eq, y_in, y_bound) = match status {
        QpStatus::Infeasible | QpStatus::DualInfeasible => {
            let zo = presolved.primal_only(&x);
            let n_eq = problem.a_eq.nrows();
            let n_in = problem.a_in.nrows();
            (zo, vec![0.0; n_eq], vec![0.0; n_in], vec![0.0; problem.n])
        }
        _ => presolved.recover(problem, &x, &z),
    };
    let residuals = check_kkt(problem, &zo, &y_eq, &y_in, &y_bound);
    if status == QpStatus::IterationLimit {
        if let Some((xp, zp)) = polish(&presolved.conic, &x, &z) {
            let (zo, y_eq, y_in, y_bound) = presolved.recover(problem, &xp, &zp);
            let residuals = check_kkt(problem, &zo, &y_eq, &y_in, &y_bound);
            if residuals.max() <= options.tolerance {
                return Ok(QpSolution {
                    status: QpStatus::Optimal,
                    objective: problem.objective(&zo),
                    z: zo,
                    y_eq,
                    y_in,
                    y_bound,
                    residuals,
                    iterations,
                });
            }
        }
    }
    Ok(QpSolution {
        status,
        objective: problem.objective(&zo),
        z: zo,
        y_eq,
        y_in,
        y_bound,
        residuals,
        iterations,
    })
}

fn trivially_infeasible(problem: &QpProblem) -> QpSolution {
    let z: Vec<f64> = (0..problem.n)
        .map(|j| {
            let (l, u) = (problem.lb[j], problem.ub[j]);
            if l.is_finite() {
                l
            } else if u.is_finite() {
                u
            } else {
                0.0
            }
        })
        .collect();
    let y_eq = vec![0.0; problem.a_eq.nrows()];
    let y_in = vec![0.0; problem.a_in.nrows()];
    let y_bound = vec![0.0; problem.n];
    let residuals = check_kkt(problem, &z, &y_eq, &y_in, &y_bound);
    QpSolution {
        status: QpStatus::Infeasible,
        objective: problem.objective(&z),
        z,
        y_eq,
        y_in,
        y_bound,
        residuals,
        iterations: 0,
    }
}

/// Conic data. Rows `0..m_general` are stored in `rows`; rows after that are
/// singleton bound rows `sign * x[var] + s = rhs`.
#[derive(Debug, Clone)]
pub(super) struct Conic {
    pub(super) n: usize,
    pub(super) p: Vec<f64>,
    pub(super) q: Vec<f64>,
    pub(super) row_ptr: Vec<usize>,
    pub(super) row_idx: Vec<usize>,
    pub(super) row_val: Vec<f64>,
    /// Zero-cone flag for general rows.
    pub(super) row_zero: Vec<bool>,
    pub(super) bound_var: Vec<usize>,
    pub(super) bound_sign: Vec<f64>,
    /// Right-hand side for all rows (general then bound).
    pub(super) b: Vec<f64>,
}

impl Conic {
    pub(super) fn m_general(&self) -> usize {
        self.row_zero.len()
    }

    pub(super) fn m(&self) -> usize {
        self.b.len()
    }

    pub(super) fn is_zero_row(&self, i: usize) -> bool {
        i < self.m_general() && self.row_zero[i]
    }

    /// Entries of row `i` (general or bound).
    pub(super) fn row(&self, i: usize) -> Vec<(usize, f64)> {
        let mg = self.m_general();
        if i < mg {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(|p| (self.row_idx[p], self.row_val[p]))
                .collect()
        } else {
            vec![(self.bound_var[i - mg], self.bound_sign[i - mg])]
        }
    }

    pub(super) fn a_mul(&self, x: &[f64], out: &mut [f64]) {
        let mg = self.m_general();
        for i in 0..mg {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.row_val[p] * x[self.row_idx[p]];
            }
            out[i] = acc;
        }
        for (k, (&j, &sg)) in self.bound_var.iter().zip(&self.bound_sign).enumerate() {
            out[mg + k] = sg * x[j];
        }
    }

    pub(super) fn at_mul(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mg = self.m_general();
        for i in 0..mg {
            let zi = z[i];
            if zi != 0.0 {
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    out[self.row_idx[p]] += self.row_val[p] * zi;
                }
            }
        }
        for (k, (&j, &sg)) in self.bound_var.iter().zip(&self.bound_sign).enumerate() {
            out[j] += sg * z[mg + k];
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    Free(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, Default)]
struct RowMap {
    upper: Option<usize>,
    lower: Option<usize>,
    equal: Option<usize>,
}

/// Which constraint supplies a variable's effective bound: the variable's
/// own bound (`None`) or an absorbed singleton row `(row, coefficient)`.
type BoundSource = Option<(usize, f64)>;

struct Presolved {
    conic: Conic,
    vars: Vec<VarMap>,
    eq_rows: Vec<Option<usize>>,
    in_rows: Vec<RowMap>,
    bound_rows: Vec<RowMap>,
    lb_src: Vec<BoundSource>,
    ub_src: Vec<BoundSource>,
    /// Variables fixed by bound tightening, in the order they were fixed.
    tightened: Vec<usize>,
}

/// Effective bounds after folding singleton inequality rows into variable
/// bounds. Rows are absorbed once only one non-fixed variable remains in
/// them; variables whose bounds meet become fixed, which can make further
/// rows singletons.
struct Tightened {
    lb: Vec<f64>,
    ub: Vec<f64>,
    fixed: Vec<bool>,
    lb_src: Vec<BoundSource>,
    ub_src: Vec<BoundSource>,
    absorbed: Vec<bool>,
    order: Vec<usize>,
}

fn tighten_bounds(problem: &QpProblem) -> Option<Tightened> {
    let n = problem.n;
    let mut t = Tightened {
        lb: problem.lb.clone(),
        ub: problem.ub.clone(),
        fixed: (0..n).map(|j| problem.lb[j] == problem.ub[j]).collect(),
        lb_src: vec![None; n],
        ub_src: vec![None; n],
        absorbed: vec![false; problem.a_in.nrows()],
        order: Vec::new(),
    };
    let value = |t: &Tightened, j: usize| t.lb[j];
    loop {
        let mut changed = false;
        for i in 0..problem.a_in.nrows() {
            let (l, u) = (problem.l_in[i], problem.u_in[i]);
            if t.absorbed[i] || l == u {
                continue;
            }
            let mut single: Option<(usize, f64)> = None;
            let mut count = 0;
            let mut c = 0.0;
            for (j, a) in problem.a_in.row(i) {
                if a == 0.0 {
                    continue;
                }
                if t.fixed[j] {
                    c += a * value(&t, j);
                } else {
                    count += 1;
                    single = Some((j, a));
                }
            }
            let Some((j, a)) = single.filter(|_| count == 1) else {
                continue;
            };
            t.absorbed[i] = true;
            changed = true;
            let (lo_side, hi_side) = if a > 0.0 { (l, u) } else { (u, l) };
            let lo = (lo_side - c) / a;
            let hi = (hi_side - c) / a;
            if lo.is_finite() && lo > t.lb[j] {
                t.lb[j] = lo;
                t.lb_src[j] = Some((i, a));
            }
            if hi.is_finite() && hi < t.ub[j] {
                t.ub[j] = hi;
                t.ub_src[j] = Some((i, a));
            }
            if !(t.lb[j].is_finite() && t.ub[j].is_finite()) {
                continue;
            }
            let scale = 1.0 + t.lb[j].abs().max(t.ub[j].abs());
            if t.lb[j] > t.ub[j] + PRESOLVE_TOL * scale {
                return None;
            }
            if t.ub[j] - t.lb[j] <= PRESOLVE_TOL * scale {
                let mid = 0.5 * (t.lb[j] + t.ub[j]);
                t.lb[j] = mid;
                t.ub[j] = mid;
                t.fixed[j] = true;
                t.order.push(j);
            }
        }
        if !changed {
            return Some(t);
        }
    }
}


impl Presolved {
    /// Returns `None` when presolve alone proves infeasibility.
    fn new(problem: &QpProblem) -> Option<Self> {
        let n = problem.n;
        if (0..n).any(|j| problem.lb[j] > problem.ub[j]) {
            return None;
        }
        if (0..problem.a_in.nrows()).any(|i| problem.l_in[i] > problem.u_in[i]) {
            return None;
        }
        let tb = tighten_bounds(problem)?;
        let mut vars = Vec::with_capacity(n);
        let mut nfree = 0;
        for j in 0..n {
            if tb.fixed[j] {
                vars.push(VarMap::Fixed(tb.lb[j]));
            } else {
                vars.push(VarMap::Free(nfree));
                nfree += 1;
            }
        }
        let mut p = Vec::with_capacity(nfree);
        let mut q = Vec::with_capacity(nfree);
        for j in 0..n {
            if let VarMap::Free(_) = vars[j] {
                p.push(problem.p_diag[j]);
                q.push(problem.q[j]);
            }
        }

        let mut row_ptr = vec![0usize];
        let mut row_idx = Vec::new();
        let mut row_val = Vec::new();
        let mut row_zero = Vec::new();
        let mut b = Vec::new();
        let mut scratch: Vec<(usize, f64)> = Vec::new();

        let split = |row: &mut dyn Iterator<Item = (usize, f64)>, scratch: &mut Vec<(usize, f64)>| {
            scratch.clear();
            let mut constant = 0.0;
            for (j, v) in row {
                match vars[j] {
                    VarMap::Free(k) => scratch.push((k, v)),
                    VarMap::Fixed(x) => constant += v * x,
                }
            }
            constant
        };
        let mut push_row = |entries: &[(usize, f64)], sign: f64, rhs: f64, zero: bool| -> usize {
            for &(k, v) in entries {
                row_idx.push(k);
                row_val.push(sign * v);
            }
            row_ptr.push(row_idx.len());
            row_zero.push(zero);
            b.push(rhs);
            row_zero.len() - 1
        };

        let mut eq_rows = Vec::with_capacity(problem.a_eq.nrows());
        for i in 0..problem.a_eq.nrows() {
            let c = split(&mut problem.a_eq.row(i), &mut scratch);
            let rhs = problem.b_eq[i] - c;
            if scratch.is_empty() {
                if rhs.abs() > PRESOLVE_TOL * (1.0 + problem.b_eq[i].abs()) {
                    return None;
                }
                eq_rows.push(None);
            } else {
                eq_rows.push(Some(push_row(&scratch, 1.0, rhs, true)));
            }
        }

        let mut in_rows = Vec::with_capacity(problem.a_in.nrows());
        for i in 0..problem.a_in.nrows() {
            let c = split(&mut problem.a_in.row(i), &mut scratch);
            let (l, u) = (problem.l_in[i], problem.u_in[i]);
            let mut map = RowMap::default();
            if tb.absorbed[i] {
                // enforced through the variable bounds
            } else if scratch.is_empty() {
                let tol = PRESOLVE_TOL * (1.0 + c.abs());
                if c < l - tol || c > u + tol {
                    return None;
                }
            } else if l == u {
                map.equal = Some(push_row(&scratch, 1.0, u - c, true));
            } else {
                if u.is_finite() {
                    map.upper = Some(push_row(&scratch, 1.0, u - c, false));
                }
                if l.is_finite() {
                    map.lower = Some(push_row(&scratch, -1.0, -(l - c), false));
                }
            }
            in_rows.push(map);
        }

        let mg = row_zero.len();
        let mut bound_var = Vec::new();
        let mut bound_sign = Vec::new();
        let mut bound_rows = vec![RowMap::default(); n];
        for j in 0..n {
            if let VarMap::Free(k) = vars[j] {
                if tb.ub[j].is_finite() {
                    bound_rows[j].upper = Some(mg + bound_var.len());
                    bound_var.push(k);
                    bound_sign.push(1.0);
                    b.push(tb.ub[j]);
                }
                if tb.lb[j].is_finite() {
                    bound_rows[j].lower = Some(mg + bound_var.len());
                    bound_var.push(k);
                    bound_sign.push(-1.0);
                    b.push(-tb.lb[j]);
                }
            }
        }

        Some(Self {
            conic: Conic {
                n: nfree,
                p,
                q,
                row_ptr,
                row_idx,
                row_val,
                row_zero,
                bound_var,
                bound_sign,
                b,
            },
            vars,
            eq_rows,
            in_rows,
            bound_rows,
            lb_src: tb.lb_src,
            ub_src: tb.ub_src,
            tightened: tb.order,
        })
    }

    fn primal_only(&self, x: &[f64]) -> Vec<f64> {
        self.vars
            .iter()
            .map(|v| match *v {
                VarMap::Free(k) => x.get(k).copied().unwrap_or(0.0),
                VarMap::Fixed(val) => val,
            })
            .collect()
    }

    /// Maps a conic primal-dual pair back to `(z, y_eq, y_in, y_bound)`.
    fn recover(
        &self,
        problem: &QpProblem,
        x: &[f64],
        z: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let zo = self.primal_only(x);
        let pick = |r: Option<usize>| r.map_or(0.0, |i| z[i]);
        let y_eq: Vec<f64> = self.eq_rows.iter().map(|&r| pick(r)).collect();
        let y_in: Vec<f64> = self
            .in_rows
            .iter()
            .map(|m| pick(m.equal) + pick(m.upper) - pick(m.lower))
            .collect();
        let mut y_in = y_in;
        let mut y_bound = vec![0.0; problem.n];
        // Stationarity residual, kept current as multipliers are assigned.
        let mut g: Vec<f64> = (0..problem.n)
            .map(|j| problem.p_diag[j] * zo[j] + problem.q[j])
            .collect();
        problem.a_eq.add_tr_mul_vec(&y_eq, &mut g);
        problem.a_in.add_tr_mul_vec(&y_in, &mut g);
        // Adds `v` to the multiplier of the constraint behind a bound.
        let assign = |src: BoundSource, j: usize, v: f64, y_in: &mut [f64], y_bound: &mut [f64], g: &mut [f64]| {
            if v == 0.0 {
                return;
            }
            match src {
                Some((i, a)) => {
                    y_in[i] += v / a;
                    for (k, c) in problem.a_in.row(i) {
                        g[k] += c * v / a;
                    }
                }
                None => {
                    y_bound[j] += v;
                    g[j] += v;
                }
            }
        };
        for (j, m) in self.bound_rows.iter().enumerate() {
            if let VarMap::Free(_) = self.vars[j] {
                assign(self.ub_src[j], j, pick(m.upper), &mut y_in, &mut y_bound, &mut g);
                assign(self.lb_src[j], j, -pick(m.lower), &mut y_in, &mut y_bound, &mut g);
            }
        }
        // Variables fixed by tightening take up their residual through the
        // rows that fixed them, latest first since those rows may involve
        // earlier ones. Originally fixed variables close the rest.
        let mut tightened = vec![false; problem.n];
        for &j in self.tightened.iter().rev() {
            tightened[j] = true;
            let r = -g[j];
            let src = if r > 0.0 { self.ub_src[j] } else { self.lb_src[j] };
            assign(src, j, r, &mut y_in, &mut y_bound, &mut g);
        }
        for (j, v) in self.vars.iter().enumerate() {
            if matches!(v, VarMap::Fixed(_)) && !tightened[j] {
                y_bound[j] = -g[j];
            }
        }
        (zo, y_eq, y_in, y_bound)
    }

    fn map_warm_start(&self, w: &WarmStart) -> (Vec<f64>, Vec<f64>) {
        let mut x = vec![0.0; self.conic.n];
        for (j, v) in self.vars.iter().enumerate() {
            if let (&VarMap::Free(k), Some(&val)) = (v, w.z.get(j)) {
                x[k] = val;
            }
        }
        let mut z = vec![0.0; self.conic.m()];
        let mut put = |map: &RowMap, y: f64| {
            if let Some(i) = map.equal {
                z[i] = y;
            }
            if let Some(i) = map.upper {
                z[i] = y.max(0.0);
            }
            if let Some(i) = map.lower {
                z[i] = (-y).max(0.0);
            }
        };
        for (i, m) in self.in_rows.iter().enumerate() {
            put(m, w.y_in.get(i).copied().unwrap_or(0.0));
        }
        for (j, m) in self.bound_rows.iter().enumerate() {
            put(m, w.y_bound.get(j).copied().unwrap_or(0.0));
        }
        for (i, r) in self.eq_rows.iter().enumerate() {
            if let Some(r) = r {
                z[*r] = w.y_eq.get(i).copied().unwrap_or(0.0);
            }
        }
        (x, z)
    }
}

/// Reduced Newton system `[P + D_b, A_gᵀ; A_g, -H_g]` with bound rows folded
/// into the diagonal.
struct Kkt {
    n: usize,
    mg: usize,
    factor: LdlFactor,
    diag_slot: Vec<usize>,
    a_slot: Vec<usize>,
    /// Unregularized diagonal, for iterative refinement.
    diag: Vec<f64>,
    /// Current bound-row scalings `H` (only bound rows are used here).
    h: Vec<f64>,
}

impl Kkt {
    fn new(c: &Conic) -> Self {
        let n = c.n;
        let mg = c.m_general();
        let dim = n + mg;
        let mut entries: Vec<(usize, usize)> = (0..dim).map(|i| (i, i)).collect();
        for i in 0..mg {
            for p in c.row_ptr[i]..c.row_ptr[i + 1] {
                entries.push((c.row_idx[p], n + i));
            }
        }
        let signs: Vec<f64> = (0..dim).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
        let (factor, slots) = LdlFactor::symbolic(dim, &entries, &signs);
        Self {
            n,
            mg,
            factor,
            diag_slot: slots[..dim].to_vec(),
            a_slot: slots[dim..].to_vec(),
            diag: vec![0.0; dim],
            h: vec![0.0; c.m()],
        }
    }

    /// Refactors for scaling `h` (zero on zero-cone rows).
    fn update(&mut self, c: &Conic, h: &[f64]) {
        self.h.copy_from_slice(h);
        let (n, mg) = (self.n, self.mg);
        for j in 0..n {
            self.diag[j] = c.p[j];
        }
        for (k, &j) in c.bound_var.iter().enumerate() {
            self.diag[j] += 1.0 / h[mg + k];
        }
        for i in 0..mg {
            self.diag[n + i] = -h[i];
        }
        let vals = self.factor.values_mut();
        vals.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n + mg {
            let reg = if i < n { STATIC_REG } else { -STATIC_REG };
            vals[self.diag_slot[i]] += self.diag[i] + reg;
        }
        let mut e = 0;
        for i in 0..mg {
            for p in c.row_ptr[i]..c.row_ptr[i + 1] {
                vals[self.a_slot[e]] += c.row_val[p];
                e += 1;
            }
        }
        self.factor
            .factor(DYNAMIC_THRESHOLD, DYNAMIC_REG)
            .expect("regularized factorization cannot hit a zero pivot");
    }

    fn reduced_mul(&self, c: &Conic, v: &[f64], out: &mut [f64]) {
        let (n, mg) = (self.n, self.mg);
        for i in 0..n + mg {
            out[i] = self.diag[i] * v[i];
        }
        for i in 0..mg {
            for p in c.row_ptr[i]..c.row_ptr[i + 1] {
                let j = c.row_idx[p];
                let a = c.row_val[p];
                out[j] += a * v[n + i];
                out[n + i] += a * v[j];
            }
        }
    }

    /// Solves the full Newton system for right-hand sides `rx` (n) and `rz`
    /// (m). Returns `(dx, dz)`.
    fn solve(&self, c: &Conic, rx: &[f64], rz: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (n, mg) = (self.n, self.mg);
        let mut rhs = vec![0.0; n + mg];
        rhs[..n].copy_from_slice(rx);
        rhs[n..].copy_from_slice(&rz[..mg]);
        for (k, (&j, &sg)) in c.bound_var.iter().zip(&c.bound_sign).enumerate() {
            rhs[j] += sg * rz[mg + k] / self.h[mg + k];
        }
        let mut sol = rhs.clone();
        self.factor.solve(&mut sol);
        // iterative refinement against the unregularized reduced matrix
        let mut res = vec![0.0; n + mg];
        let scale = 1.0 + norm_inf(&rhs);
        let mut last = f64::INFINITY;
        for _ in 0..8 {
            self.reduced_mul(c, &sol, &mut res);
            for i in 0..n + mg {
                res[i] = rhs[i] - res[i];
            }
            let r = norm_inf(&res);
            if r <= 1e-14 * scale || r >= 0.5 * last {
                break;
            }
            last = r;
            self.factor.solve(&mut res);
            for i in 0..n + mg {
                sol[i] += res[i];
            }
        }
        let dx = sol[..n].to_vec();
        let mut dz = vec![0.0; c.m()];
        dz[..mg].copy_from_slice(&sol[n..]);
        for (k, (&j, &sg)) in c.bound_var.iter().zip(&c.bound_sign).enumerate() {
            dz[mg + k] = (sg * dx[j] - rz[mg + k]) / self.h[mg + k];
        }
        (dx, dz)
    }
}

struct Ipm<'a> {
    c: &'a Conic,
    kkt: Kkt,
}

struct Direction {
    dx: Vec<f64>,
    dz: Vec<f64>,
    ds: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

impl<'a> Ipm<'a> {
    fn new(c: &'a Conic) -> Self {
        Self { c, kkt: Kkt::new(c) }
    }

    fn nonneg(&self, i: usize) -> bool {
        !self.c.is_zero_row(i)
    }

    fn initial_point(&mut self, warm: Option<&(Vec<f64>, Vec<f64>)>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let c = self.c;
        let m = c.m();
        let h: Vec<f64> = (0..m).map(|i| if self.nonneg(i) { 1.0 } else { 0.0 }).collect();
        self.kkt.update(c, &h);
        let (x, mut z, mut s);
        if let Some((wx, wz)) = warm {
            x = wx.clone();
            let mut ax = vec![0.0; m];
            c.a_mul(&x, &mut ax);
            s = (0..m)
                .map(|i| if self.nonneg(i) { (c.b[i] - ax[i]).max(1e-2) } else { 0.0 })
                .collect::<Vec<_>>();
            z = (0..m)
                .map(|i| if self.nonneg(i) { wz[i].max(1e-2) } else { wz[i] })
                .collect::<Vec<_>>();
            return (x, z, s);
        }
        let negq: Vec<f64> = c.q.iter().map(|v| -v).collect();
        let (x0, z0) = self.kkt.solve(c, &negq, &c.b);
        x = x0;
        z = z0;
        s = (0..m).map(|i| if self.nonneg(i) { -z[i] } else { 0.0 }).collect();
        shift_into_cone(&mut s, |i| self.nonneg(i));
        shift_into_cone(&mut z, |i| self.nonneg(i));
        (x, z, s)
    }

    /// Returns `(x, z, status, iterations)` in the conic space, already divided
    /// by `τ` when the status is optimal or at the iteration limit.
    fn run(
        &mut self,
        options: &QpOptions,
        warm: Option<&(Vec<f64>, Vec<f64>)>,
        accept: impl Fn(&[f64], &[f64]) -> bool,
    ) -> (Vec<f64>, Vec<f64>, QpStatus, usize) {
        let c = self.c;
        let (n, m) = (c.n, c.m());
        let m_nonneg = (0..m).filter(|&i| self.nonneg(i)).count();
        let (mut x, mut z, mut s) = self.initial_point(warm);
        let (mut tau, mut kappa) = (1.0f64, 1.0f64);
        let mut inner_tol = 0.1 * options.tolerance;
        let mut best_merit = f64::INFINITY;
        let mut stall = 0usize;

        let mut px = vec![0.0; n];
        let mut atz = vec![0.0; n];
        let mut ax = vec![0.0; m];
        let mut rx = vec![0.0; n];
        let mut rz = vec![0.0; m];

        for iter in 0..options.max_iterations {
            for j in 0..n {
                px[j] = c.p[j] * x[j];
            }
            c.at_mul(&z, &mut atz);
            c.a_mul(&x, &mut ax);
            for j in 0..n {
                rx[j] = px[j] + atz[j] + c.q[j] * tau;
            }
            for i in 0..m {
                rz[i] = ax[i] + s[i] - c.b[i] * tau;
            }
            let xpx = dot(&x, &px);
            let qx = dot(&c.q, &x);
            let bz = dot(&c.b, &z);
            let rtau = qx + bz + kappa + xpx / tau;
            let sz: f64 = (0..m).filter(|&i| self.nonneg(i)).map(|i| s[i] * z[i]).sum();
            let mu = (sz + tau * kappa) / (m_nonneg as f64 + 1.0);

            // convergence on the normalized iterate
            let res_p = norm_inf(&rz) / tau;
            let res_d = norm_inf(&rx) / tau;
            let comp = (0..m)
                .filter(|&i| self.nonneg(i))
                .map(|i| s[i] * z[i])
                .fold(0.0f64, f64::max)
                / (tau * tau);
            if res_p <= inner_tol && res_d <= inner_tol && comp <= inner_tol {
                let xs: Vec<f64> = x.iter().map(|v| v / tau).collect();
                let zs: Vec<f64> = z.iter().map(|v| v / tau).collect();
                if accept(&xs, &zs) {
                    return (xs, zs, QpStatus::Optimal, iter);
                }
                inner_tol *= 0.1;
                if inner_tol < 1e-15 {
                    // accept() already failed for this iterate
                    return (xs, zs, QpStatus::IterationLimit, iter);
                }
            }

            // infeasibility certificates
            if bz < 0.0 && tau < kappa {
                if norm_inf(&atz) <= INFEASIBILITY_TOL * -bz {
                    return (x, z, QpStatus::Infeasible, iter);
                }
            }
            if qx < 0.0 && tau < kappa {
                let mut axs = ax.clone();
                for i in 0..m {
                    axs[i] += s[i];
                }
                if norm_inf(&px) <= INFEASIBILITY_TOL * -qx
                    && norm_inf(&axs) <= INFEASIBILITY_TOL * -qx
                {
                    return (x, z, QpStatus::DualInfeasible, iter);
                }
            }

            let merit = (res_p.max(res_d)).max(mu / (tau * tau));
            if merit < 0.5 * best_merit {
                best_merit = merit;
                stall = 0;
            } else {
                stall += 1;
                if stall > STALL_LIMIT {
                    // Slow progress with τ collapsing is almost always an
                    // infeasible problem whose certificate is badly scaled.
                    let status = if tau < 1e-8 * kappa.max(1.0) {
                        if bz < 0.0 {
                            QpStatus::Infeasible
                        } else {
                            QpStatus::DualInfeasible
                        }
                    } else {
                        QpStatus::IterationLimit
                    };
                    let xs: Vec<f64> = x.iter().map(|v| v / tau).collect();
                    let zs: Vec<f64> = z.iter().map(|v| v / tau).collect();
                    // a stalled iterate may still meet the tolerance on the
                    // original problem
                    if status == QpStatus::IterationLimit && accept(&xs, &zs) {
                        return (xs, zs, QpStatus::Optimal, iter);
                    }
                    return (xs, zs, status, iter);
                }
            }

            // Newton system
            let h: Vec<f64> = (0..m)
                .map(|i| if self.nonneg(i) { s[i] / z[i] } else { 0.0 })
                .collect();
            self.kkt.update(c, &h);
            let negq: Vec<f64> = c.q.iter().map(|v| -v).collect();
            let (x2, z2) = self.kkt.solve(c, &negq, &c.b);
            let xi: Vec<f64> = x.iter().map(|v| v / tau).collect();
            let pxi: Vec<f64> = (0..n).map(|j| c.p[j] * xi[j]).collect();
            let q2pxi: Vec<f64> = (0..n).map(|j| c.q[j] + 2.0 * pxi[j]).collect();
            let xi_p_xi = dot(&xi, &pxi);
            let denom = dot(&q2pxi, &x2) + dot(&c.b, &z2) - xi_p_xi - kappa / tau;

            let direction = |ds_target: &[f64], dkappa_target: f64, scale: f64| -> Direction {
                let rhs_x: Vec<f64> = rx.iter().map(|v| -scale * v).collect();
                let rhs_z: Vec<f64> = (0..m)
                    .map(|i| {
                        let base = -scale * rz[i];
                        if self.nonneg(i) {
                            base + ds_target[i] / z[i]
                        } else {
                            base
                        }
                    })
                    .collect();
                let (x1, z1) = self.kkt.solve(c, &rhs_x, &rhs_z);
                let dtau = (-scale * rtau + dkappa_target / tau - dot(&q2pxi, &x1) - dot(&c.b, &z1))
                    / denom;
                let dx: Vec<f64> = (0..n).map(|j| x1[j] + dtau * x2[j]).collect();
                let dz: Vec<f64> = (0..m).map(|i| z1[i] + dtau * z2[i]).collect();
                let ds: Vec<f64> = (0..m)
                    .map(|i| {
                        if self.nonneg(i) {
                            -ds_target[i] / z[i] - h[i] * dz[i]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let dkappa = -(dkappa_target + kappa * dtau) / tau;
                Direction {
                    dx,
                    dz,
                    ds,
                    dtau,
                    dkappa,
                }
            };

            let sz_vec: Vec<f64> = (0..m)
                .map(|i| if self.nonneg(i) { s[i] * z[i] } else { 0.0 })
                .collect();
            let aff = direction(&sz_vec, tau * kappa, 1.0);
            let alpha_aff = self.max_step(&s, &z, tau, kappa, &aff);
            let sigma = (1.0 - alpha_aff).powi(3);
            let target: Vec<f64> = (0..m)
                .map(|i| {
                    if self.nonneg(i) {
                        s[i] * z[i] + aff.ds[i] * aff.dz[i] - sigma * mu
                    } else {
                        0.0
                    }
                })
                .collect();
            let dk_target = tau * kappa + aff.dtau * aff.dkappa - sigma * mu;
            let dir = direction(&target, dk_target, 1.0 - sigma);
            let alpha = (STEP_FRACTION * self.max_step(&s, &z, tau, kappa, &dir)).min(1.0);

            for j in 0..n {
                x[j] += alpha * dir.dx[j];
            }
            for i in 0..m {
                z[i] += alpha * dir.dz[i];
                s[i] += alpha * dir.ds[i];
            }
            tau += alpha * dir.dtau;
            kappa += alpha * dir.dkappa;

            // keep the homogeneous scale bounded
            let scale = tau.max(kappa).max(norm_inf(&z).max(norm_inf(&x)) * 1e-8);
            if !(1e-100..=1e100).contains(&scale) || !scale.is_finite() {
                break;
            }
        }
        let xs: Vec<f64> = x.iter().map(|v| v / tau).collect();
        let zs: Vec<f64> = z.iter().map(|v| v / tau).collect();
        let status = if accept(&xs, &zs) {
            QpStatus::Optimal
        } else {
            QpStatus::IterationLimit
        };
        (xs, zs, status, options.max_iterations)
    }

    fn max_step(&self, s: &[f64], z: &[f64], tau: f64, kappa: f64, d: &Direction) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..s.len() {
            if !self.nonneg(i) {
                continue;
            }
            if d.ds[i] < 0.0 {
                alpha = alpha.min(-s[i] / d.ds[i]);
            }
            if d.dz[i] < 0.0 {
                alpha = alpha.min(-z[i] / d.dz[i]);
            }
        }
        if d.dtau < 0.0 {
            alpha = alpha.min(-tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            alpha = alpha.min(-kappa / d.dkappa);
        }
        alpha.min(1.0)
    }
}

fn shift_into_cone(v: &mut [f64], nonneg: impl Fn(usize) -> bool) {
    let min = (0..v.len())
        .filter(|&i| nonneg(i))
        .map(|i| v[i])
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return;
    }
    let shift = if min < 1e-8 { 1.0 - min } else { 0.0 };
    for i in 0..v.len() {
        if nonneg(i) {
            v[i] += shift;
        }
    }
}
