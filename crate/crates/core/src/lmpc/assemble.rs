use super::{LmpcInstance, LmpcParams, VariableLayout};
use crate::error::LmpcError;
use crate::linalg::SparseMatrix;
use crate::miqp::MiqpProblem;
use crate::model::slack_fraction;
use crate::qp::QpProblem;

const INF: f64 = f64::INFINITY;

/// Row builder for two-sided inequalities.
#[derive(Default)]
struct Rows {
    t: Vec<(usize, usize, f64)>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Rows {
    fn push(&mut self, entries: &[(usize, f64)], lo: f64, hi: f64) {
        let r = self.lo.len();
        self.t.extend(entries.iter().map(|&(j, v)| (r, j, v)));
        self.lo.push(lo);
        self.hi.push(hi);
    }

    fn len(&self) -> usize {
        self.lo.len()
    }
}

fn check(instance: &LmpcInstance, params: &LmpcParams) -> Result<(), LmpcError> {
    let t = params.topology;
    let bad = |m: String| Err(LmpcError::Instance(m));
    if instance.n < 1 {
        return bad("horizon must be at least one step".into());
    }
    if instance.h + instance.n > params.horizon.steps_per_day {
        return bad(format!(
            "horizon {}+{} runs past the end of the day ({} steps)",
            instance.h, instance.n, params.horizon.steps_per_day
        ));
    }
    if instance.rho_window.len() != instance.n || instance.ear_window.len() != instance.n {
        return bad(format!(
            "price/solar windows have lengths {}/{}, expected {}",
            instance.rho_window.len(),
            instance.ear_window.len(),
            instance.n
        ));
    }
    let p = &instance.plant;
    if p.x.len() != t.n_x || p.delta_prev.len() != t.n_u {
        return bad("plant state does not match the topology".into());
    }
    if !p.run_remaining.is_empty() && p.run_remaining.len() != t.n_u {
        return bad("run obligations do not match the machine count".into());
    }
    if !(instance.gamma >= 0.0) || !(p.lambda >= 0.0) {
        return bad("demand and delivered quantity must be nonnegative".into());
    }
    Ok(())
}

/// Builds the MIQP for one control step.
///
/// Row order of the inequality block: material availability, rate gating,
/// startup logic, minimum run, then per product the production requirement
/// followed (after all requirements) by the delivery caps. The last `2 n_p`
/// rows are therefore the requirement and cap rows.
pub fn assemble(
    instance: &LmpcInstance,
    params: &LmpcParams,
) -> Result<(MiqpProblem, VariableLayout), LmpcError> {
    check(instance, params)?;
    let topo = params.topology;
    let m = params.machines;
    let buf = params.buffers;
    let w = params.weights;
    let (nx, nu, np, n) = (topo.n_x, topo.n_u, topo.n_p, instance.n);
    let layout = VariableLayout::new(nx, nu, np, n);
    let mut qp = QpProblem::new(layout.len());
    let bo = topo.outflow();
    let x0 = &instance.plant.x;
    let dt = params.horizon.dt_hours;

    // ---- objective
    for i in 0..nx {
        let dev = x0[i] - buf.x_g[i];
        qp.c0 += buf.qg[i] * dev * dev;
    }
    for k in 0..n {
        let (qw, target) = if k + 1 == n { (&buf.qt, &buf.x_t) } else { (&buf.qg, &buf.x_g) };
        for i in 0..nx {
            let v = layout.x(k, i);
            qp.p_diag[v] = 2.0 * qw[i];
            qp.q[v] = -2.0 * qw[i] * target[i];
            qp.c0 += qw[i] * target[i] * target[i];
        }
        qp.q[layout.e_g(k)] = w.omega_e * instance.rho_window[k];
        qp.q[layout.e_r(k)] = -w.omega_r;
        for j in 0..nu {
            qp.q[layout.delta_on(k, j)] = m.c_on[j];
        }
    }
    for p in 0..np {
        qp.q[layout.s(p)] = w.omega_s;
    }

    // ---- bounds
    let remaining = |j: usize| instance.plant.run_remaining.get(j).copied().unwrap_or(0);
    for k in 0..n {
        for i in 0..nx {
            qp.lb[layout.x(k, i)] = buf.x_min[i];
            qp.ub[layout.x(k, i)] = buf.x_max[i];
        }
        for j in 0..nu {
            qp.lb[layout.u(k, j)] = 0.0;
            qp.ub[layout.u(k, j)] = m.u_max[j];
            qp.lb[layout.delta(k, j)] = if k < remaining(j) { 1.0 } else { 0.0 };
            qp.ub[layout.delta(k, j)] = 1.0;
            qp.lb[layout.delta_on(k, j)] = 0.0;
            qp.ub[layout.delta_on(k, j)] = 1.0;
        }
        for p in 0..np {
            qp.lb[layout.d(k, p)] = 0.0;
        }
        qp.lb[layout.e_g(k)] = 0.0;
        qp.lb[layout.e_r(k)] = 0.0;
        qp.ub[layout.e_r(k)] = instance.ear_window[k];
    }
    // a machine that was on cannot start at step 0
    for j in 0..nu {
        if instance.plant.delta_prev[j] {
            qp.ub[layout.delta_on(0, j)] = 0.0;
        }
    }
    let alpha_end = slack_fraction(0, instance.h + n, params.horizon.steps_per_day, params.slack)?;
    let remaining_demand = instance.gamma - instance.plant.lambda;
    for p in 0..np {
        qp.lb[layout.s(p)] = 0.0;
        qp.ub[layout.s(p)] = alpha_end * instance.gamma;
    }

    // ---- equalities: dynamics and energy balance
    let mut eq = Vec::new();
    let mut b_eq = Vec::new();
    for k in 0..n {
        for i in 0..nx {
            let r = b_eq.len();
            eq.push((r, layout.x(k, i), 1.0));
            if k > 0 {
                eq.push((r, layout.x(k - 1, i), -1.0));
            }
            for j in 0..nu {
                if topo.b[i][j] != 0 {
                    eq.push((r, layout.u(k, j), -(topo.b[i][j] as f64)));
                }
            }
            for p in 0..np {
                if topo.w[i][p] != 0 {
                    eq.push((r, layout.d(k, p), -(topo.w[i][p] as f64)));
                }
            }
            b_eq.push(if k == 0 { x0[i] } else { 0.0 });
        }
        let r = b_eq.len();
        eq.push((r, layout.e_g(k), 1.0));
        eq.push((r, layout.e_r(k), 1.0));
        for j in 0..nu {
            if m.epsilon[j] != 0.0 {
                eq.push((r, layout.u(k, j), -m.epsilon[j] * dt));
            }
        }
        b_eq.push(0.0);
    }

    // ---- inequalities
    let mut rows = Rows::default();
    // material availability: x(k) + B_o u(k) + W d(k) >= 0
    for k in 0..n {
        for i in 0..nx {
            let mut e: Vec<(usize, f64)> = Vec::new();
            for j in 0..nu {
                if bo[i][j] != 0 {
                    e.push((layout.u(k, j), bo[i][j] as f64));
                }
            }
            for p in 0..np {
                if topo.w[i][p] != 0 {
                    e.push((layout.d(k, p), topo.w[i][p] as f64));
                }
            }
            if e.is_empty() {
                continue;
            }
            if k == 0 {
                rows.push(&e, -x0[i], INF);
            } else {
                e.push((layout.x(k - 1, i), 1.0));
                rows.push(&e, 0.0, INF);
            }
        }
    }
    // gated rates: δ u_min <= u <= δ u_max
    for k in 0..n {
        for j in 0..nu {
            let (u, d) = (layout.u(k, j), layout.delta(k, j));
            rows.push(&[(u, 1.0), (d, -m.u_max[j])], -INF, 0.0);
            if m.u_min[j] > 0.0 {
                rows.push(&[(u, 1.0), (d, -m.u_min[j])], 0.0, INF);
            }
        }
    }
    // startup logic
    for k in 0..n {
        for j in 0..nu {
            let (on, d) = (layout.delta_on(k, j), layout.delta(k, j));
            if k == 0 {
                let prev = if instance.plant.delta_prev[j] { 1.0 } else { 0.0 };
                rows.push(&[(on, 1.0), (d, -1.0)], -prev, INF);
            } else {
                let dp = layout.delta(k - 1, j);
                rows.push(&[(on, 1.0), (d, -1.0), (dp, 1.0)], 0.0, INF);
                rows.push(&[(on, 1.0), (dp, 1.0)], -INF, 1.0);
            }
            rows.push(&[(on, 1.0), (d, -1.0)], -INF, 0.0);
        }
    }
    // minimum run, truncated at the horizon end
    for k in 0..n {
        for j in 0..nu {
            for t in 1..m.min_run[j] {
                if k + t >= n {
                    break;
                }
                rows.push(&[(layout.delta(k + t, j), 1.0), (layout.delta_on(k, j), -1.0)], 0.0, INF);
            }
        }
    }
    // Aggregated form of the same rule, δ(k) >= Σ_{t=k-ϱ+1..k} δ_on(t).
    // Identical integer points, much tighter relaxation.
    for k in 0..n {
        for j in 0..nu {
            let run = m.min_run[j];
            if run < 2 {
                continue;
            }
            let mut e: Vec<(usize, f64)> = (k.saturating_sub(run - 1)..=k)
                .map(|t| (layout.delta_on(t, j), -1.0))
                .collect();
            if e.len() < 2 {
                continue;
            }
            e.push((layout.delta(k, j), 1.0));
            rows.push(&e, 0.0, INF);
        }
    }
    // end-of-horizon production requirement, then delivery caps
    for p in 0..np {
        let mut e: Vec<(usize, f64)> = (0..n).map(|k| (layout.d(k, p), 1.0)).collect();
        e.push((layout.s(p), 1.0));
        rows.push(&e, remaining_demand, INF);
    }
    for p in 0..np {
        let e: Vec<(usize, f64)> = (0..n).map(|k| (layout.d(k, p), 1.0)).collect();
        rows.push(&e, -INF, remaining_demand.max(0.0));
    }

    qp.a_eq = SparseMatrix::from_triplets(b_eq.len(), layout.len(), &eq);
    qp.b_eq = b_eq;
    qp.a_in = SparseMatrix::from_triplets(rows.len(), layout.len(), &rows.t);
    qp.l_in = rows.lo;
    qp.u_in = rows.hi;
    let binaries = layout.binaries();
    Ok((
        MiqpProblem {
            base: qp,
            binary_indices: binaries,
        },
        layout,
    ))
}

/// Inequality rows holding the production requirement.
pub(crate) fn requirement_rows(problem: &MiqpProblem, layout: &VariableLayout) -> Vec<usize> {
    let m = problem.base.a_in.nrows();
    (m - 2 * layout.n_p..m - layout.n_p).collect()
}

/// Inequality rows holding the delivery caps.
pub(crate) fn delivery_cap_rows(problem: &QpProblem, layout: &VariableLayout) -> Vec<usize> {
    let m = problem.a_in.nrows();
    (m - layout.n_p..m).collect()
}
