use crate::linalg::SparseMatrix;
use crate::qp::{solve_qp, QpOptions, QpProblem, QpStatus};
use crate::sim::{Scenario, ScenarioConfig};

/// Every violated invariant of a scenario, as human-readable lines. An empty
/// list means the scenario is valid.
pub fn validate_scenario(scenario: &Scenario) -> Vec<String> {
    let cfg = &scenario.config;
    let mut out = validate_config(cfg);
    let want = cfg.horizon.steps_per_day * cfg.horizon.days;
    let s = &scenario.series;
    if s.rho_e.len() != want || s.e_ar.len() != want {
        out.push(format!(
            "series length mismatch: expected {want} steps, got {} prices and {} solar values",
            s.rho_e.len(),
            s.e_ar.len()
        ));
    }
    if let Some(k) = s.rho_e.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        out.push(format!("grid price at step {k} must be finite and nonnegative"));
    }
    if let Some(k) = s.e_ar.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        out.push(format!("renewable energy at step {k} must be finite and nonnegative"));
    }
    out
}

fn lengths(out: &mut Vec<String>, section: &str, want: usize, fields: &[(&str, usize)]) -> bool {
    let mut ok = true;
    for (name, got) in fields {
        if *got != want {
            out.push(format!("{section}.{name} has length {got}, expected {want}"));
            ok = false;
        }
    }
    ok
}

/// Invariants of the configuration alone (no time series).
pub fn validate_config(cfg: &ScenarioConfig) -> Vec<String> {
    let mut out = Vec::new();
    let topo = &cfg.topology;
    out.extend(topo.diagnostics());
    let topo_ok = out.is_empty();

    let m = &cfg.machines;
    let machines_ok = lengths(
        &mut out,
        "machines",
        topo.n_u,
        &[
            ("u_min", m.u_min.len()),
            ("u_max", m.u_max.len()),
            ("epsilon", m.epsilon.len()),
            ("c_on", m.c_on.len()),
            ("min_run", m.min_run.len()),
        ],
    );
    if machines_ok {
        for j in 0..topo.n_u {
            if !(m.u_min[j] >= 0.0 && m.u_min[j] <= m.u_max[j]) || !m.u_max[j].is_finite() {
                out.push(format!("machine {j}: rates must satisfy 0 <= u_min <= u_max"));
            }
            if !(m.epsilon[j] >= 0.0) {
                out.push(format!("machine {j}: energy intensity must be nonnegative"));
            }
            if !(m.c_on[j] >= 0.0) {
                out.push(format!("machine {j}: startup cost must be nonnegative"));
            }
            if m.min_run[j] < 1 {
                out.push(format!("machine {j}: minimum run must be at least one step"));
            }
        }
    }

    let b = &cfg.buffers;
    let buffers_ok = lengths(
        &mut out,
        "buffers",
        topo.n_x,
        &[
            ("x_min", b.x_min.len()),
            ("x_max", b.x_max.len()),
            ("x0", b.x0.len()),
            ("x_g", b.x_g.len()),
            ("x_t", b.x_t.len()),
            ("qg", b.qg.len()),
            ("qt", b.qt.len()),
        ],
    );
    if buffers_ok {
        for i in 0..topo.n_x {
            if !(b.x_min[i] <= b.x0[i] && b.x0[i] <= b.x_max[i]) {
                out.push(format!("buffer {i}: initial level outside [x_min, x_max]"));
            }
            if !(b.x_min[i] <= b.x_g[i] && b.x_g[i] <= b.x_max[i]) {
                out.push(format!("buffer {i}: desired level outside [x_min, x_max]"));
            }
            if !(b.qg[i] >= 0.0 && b.qt[i] >= 0.0) {
                out.push(format!("buffer {i}: deviation weights must be nonnegative"));
            }
        }
    }

    let e = &cfg.elasticity;
    if !(e.b > 0.0) {
        out.push("price sensitivity must be positive".to_string());
    }
    if !(e.p_min <= e.p_max) {
        out.push("price bounds must satisfy p_min <= p_max".to_string());
    }
    if !(e.a - e.b * e.p_max >= 0.0) {
        out.push("demand must be nonnegative at p_max".to_string());
    }

    let s = &cfg.slack;
    if !(0.0..=1.0).contains(&s.tau) {
        out.push("slack.tau must lie in [0, 1]".to_string());
    }
    if !(0.0..=1.0).contains(&s.xi) {
        out.push("slack.xi must lie in [0, 1]".to_string());
    }

    let w = &cfg.weights;
    if !(w.omega_e >= 0.0 && w.omega_r >= 0.0 && w.omega_s >= 0.0) {
        out.push("L-MPC weights must be nonnegative".to_string());
    }

    let h = &cfg.horizon;
    if h.steps_per_day < 1 {
        out.push("horizon.steps_per_day must be at least 1".to_string());
    }
    if !(h.dt_hours > 0.0) {
        out.push("horizon.dt_hours must be positive".to_string());
    }

    out.extend(cfg.pricing.diagnostics(e));
    out.extend(cfg.bnb.validate());

    if out.is_empty() && topo_ok {
        if let Some(cap) = max_daily_throughput(cfg) {
            let need = (e.a - e.b * e.p_min) * (1.0 - s.tau * s.xi);
            if cap + 1e-6 < need {
                out.push(format!(
                    "throughput: at most {cap:.2} units can be delivered per day, but demand at p_min requires {need:.2}"
                ));
            }
        }
    }
    out
}

/// Largest quantity deliverable in one day starting from `x0`, ignoring
/// on/off logic (an upper bound on what the scheduler can achieve).
pub fn max_daily_throughput(cfg: &ScenarioConfig) -> Option<f64> {
    let topo = &cfg.topology;
    let (nx, nu, np) = (topo.n_x, topo.n_u, topo.n_p);
    let steps = cfg.horizon.steps_per_day;
    let per = nx + nu + np;
    let n = steps * per;
    let xi = |k: usize, i: usize| k * per + i; // x(k+1)
    let ui = |k: usize, j: usize| k * per + nx + j;
    let di = |k: usize, p: usize| k * per + nx + nu + p;
    let mut qp = QpProblem::new(n);
    let bo = topo.outflow();
    let mut eq = Vec::new();
    let mut b_eq = Vec::new();
    let mut ineq = Vec::new();
    let mut l_in = Vec::new();
    for k in 0..steps {
        for i in 0..nx {
            let row = b_eq.len();
            eq.push((row, xi(k, i), 1.0));
            if k > 0 {
                eq.push((row, xi(k - 1, i), -1.0));
            }
            for j in 0..nu {
                if topo.b[i][j] != 0 {
                    eq.push((row, ui(k, j), -(topo.b[i][j] as f64)));
                }
            }
            for p in 0..np {
                if topo.w[i][p] != 0 {
                    eq.push((row, di(k, p), -(topo.w[i][p] as f64)));
                }
            }
            b_eq.push(if k == 0 { cfg.buffers.x0[i] } else { 0.0 });

            let row = l_in.len();
            let mut any = false;
            for j in 0..nu {
                if bo[i][j] != 0 {
                    ineq.push((row, ui(k, j), bo[i][j] as f64));
                    any = true;
                }
            }
            for p in 0..np {
                if topo.w[i][p] != 0 {
                    ineq.push((row, di(k, p), topo.w[i][p] as f64));
                    any = true;
                }
            }
            if any {
                if k > 0 {
                    ineq.push((row, xi(k - 1, i), 1.0));
                }
                l_in.push(if k == 0 { -cfg.buffers.x0[i] } else { 0.0 });
            }
        }
        for i in 0..nx {
            qp.lb[xi(k, i)] = cfg.buffers.x_min[i];
            qp.ub[xi(k, i)] = cfg.buffers.x_max[i];
        }
        for j in 0..nu {
            qp.lb[ui(k, j)] = 0.0;
            qp.ub[ui(k, j)] = cfg.machines.u_max[j];
        }
        for p in 0..np {
            qp.lb[di(k, p)] = 0.0;
            qp.q[di(k, p)] = -1.0;
        }
    }
    qp.a_eq = SparseMatrix::from_triplets(b_eq.len(), n, &eq);
    qp.b_eq = b_eq;
    qp.a_in = SparseMatrix::from_triplets(l_in.len(), n, &ineq);
    qp.u_in = vec![f64::INFINITY; l_in.len()];
    qp.l_in = l_in;
    // Deliveries are bounded through the buffer rows; cap them explicitly
    // so the LP stays bounded even for odd topologies.
    let cap: f64 = cfg.machines.u_max.iter().sum::<f64>() + cfg.buffers.x0.iter().sum::<f64>();
    for k in 0..steps {
        for p in 0..np {
            qp.ub[di(k, p)] = cap.max(0.0);
        }
    }
    let s = solve_qp(&qp, &QpOptions::default(), None).ok()?;
    (s.status == QpStatus::Optimal).then_some(-s.objective)
}
