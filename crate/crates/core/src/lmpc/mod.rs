//! Lower-level shrinking-horizon scheduler: assembles one MIQP per control
//! step and decodes its solution.

mod assemble;
mod layout;

pub use assemble::assemble;
pub use layout::VariableLayout;

use serde::{Deserialize, Serialize};

use crate::error::LmpcError;
use crate::miqp::{solve_miqp, solve_miqp_with_hint, BnbConfig, MiqpProblem, MiqpStatus};
use crate::model::{BufferParams, HorizonConfig, MachineParams, NetworkTopology, PlantState, SlackParams};
use crate::qp::{solve_qp, QpOptions, QpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmpcWeights {
    /// Weight on grid energy cost.
    pub omega_e: f64,
    /// Reward per kWh of renewable energy used.
    pub omega_r: f64,
    /// Penalty per unit of production shortfall.
    pub omega_s: f64,
}

/// Static plant data the scheduler needs.
#[derive(Debug, Clone, Copy)]
pub struct LmpcParams<'a> {
    pub topology: &'a NetworkTopology,
    pub machines: &'a MachineParams,
    pub buffers: &'a BufferParams,
    pub weights: &'a LmpcWeights,
    pub slack: &'a SlackParams,
    pub horizon: &'a HorizonConfig,
}

/// One shrinking-horizon problem: measured state, daily target and the
/// price/solar windows covering the remaining `n` steps of the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmpcInstance {
    pub plant: PlantState,
    pub gamma: f64,
    /// Step of the day at which the horizon starts.
    pub h: usize,
    /// Horizon length.
    pub n: usize,
    pub rho_window: Vec<f64>,
    pub ear_window: Vec<f64>,
}

/// Decoded schedule. Step-indexed vectors have length `N`; `x[k]` is the
/// buffer vector after step `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmpcSolution {
    pub u: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub delta: Vec<Vec<bool>>,
    pub delta_on: Vec<Vec<f64>>,
    /// End-of-horizon production slack per product.
    pub s: Vec<f64>,
    pub e_g: Vec<f64>,
    pub e_r: Vec<f64>,
    /// Planned energy `Σ_j ε_j u_j Δt` per step, from the unrounded solver
    /// rates (so it balances `e_g + e_r` to solver tolerance).
    pub energy: Vec<f64>,
    pub e_ar: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub objective: f64,
    pub iota: f64,
    pub status: MiqpStatus,
    pub gap: f64,
    pub nodes: usize,
    /// Branch-and-bound stopped at the node limit; the schedule is the best
    /// incumbent, not a proven optimum.
    pub degraded: bool,
}

impl LmpcSolution {
    /// Total delivered quantity over the horizon, summed over products.
    pub fn delivered(&self) -> f64 {
        self.d.iter().flatten().sum()
    }

    /// Largest `|E_r(k) - min(E(k), E_ar(k))|` over the horizon.
    pub fn saturation_residual(&self) -> f64 {
        self.e_r
            .iter()
            .zip(&self.energy)
            .zip(&self.e_ar)
            .map(|((r, e), a)| (r - e.min(*a)).abs())
            .fold(0.0, f64::max)
    }
}

/// Controls to apply at the current step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstControl {
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub delta: Vec<bool>,
    pub delta_on: Vec<bool>,
}

/// Step-0 slice of a schedule.
pub fn extract_first_control(solution: &LmpcSolution) -> FirstControl {
    FirstControl {
        u: solution.u[0].clone(),
        d: solution.d[0].clone(),
        delta: solution.delta[0].clone(),
        delta_on: solution.delta_on[0].iter().map(|&v| v > 0.5).collect(),
    }
}

/// `Σ E_r / Σ E`, or 0 when no energy is used.
pub fn renewable_fraction_of(energy: &[f64], e_r: &[f64]) -> f64 {
    let total: f64 = energy.iter().sum();
    if total <= 1e-9 {
        return 0.0;
    }
    let r: f64 = e_r.iter().sum();
    (r / total).clamp(0.0, 1.0)
}

pub fn renewable_fraction(solution: &LmpcSolution) -> f64 {
    renewable_fraction_of(&solution.energy, &solution.e_r)
}

fn decode(
    z: &[f64],
    layout: &VariableLayout,
    instance: &LmpcInstance,
    params: &LmpcParams,
    objective: f64,
) -> LmpcSolution {
    let n = layout.horizon;
    let (nx, nu, np) = (layout.n_x, layout.n_u, layout.n_p);
    let m = params.machines;
    let dt = params.horizon.dt_hours;
    let mut sol = LmpcSolution {
        u: Vec::with_capacity(n),
        d: Vec::with_capacity(n),
        delta: Vec::with_capacity(n),
        delta_on: Vec::with_capacity(n),
        s: (0..np).map(|p| z[layout.s(p)].max(0.0)).collect(),
        e_g: Vec::with_capacity(n),
        e_r: Vec::with_capacity(n),
        energy: Vec::with_capacity(n),
        e_ar: instance.ear_window.clone(),
        x: Vec::with_capacity(n),
        objective,
        iota: 0.0,
        status: MiqpStatus::Optimal,
        gap: 0.0,
        nodes: 0,
        degraded: false,
    };
    for k in 0..n {
        let delta: Vec<bool> = (0..nu).map(|j| z[layout.delta(k, j)] > 0.5).collect();
        // Snap rates into their gated range so tiny solver residuals never
        // reach the plant.
        let u: Vec<f64> = (0..nu)
            .map(|j| {
                if delta[j] {
                    z[layout.u(k, j)].clamp(m.u_min[j], m.u_max[j])
                } else {
                    0.0
                }
            })
            .collect();
        let energy: f64 = (0..nu).map(|j| m.epsilon[j] * z[layout.u(k, j)] * dt).sum();
        sol.energy.push(energy);
        sol.d.push((0..np).map(|p| z[layout.d(k, p)].max(0.0)).collect());
        sol.delta_on
            .push((0..nu).map(|j| z[layout.delta_on(k, j)].clamp(0.0, 1.0)).collect());
        sol.e_g.push(z[layout.e_g(k)]);
        sol.e_r.push(z[layout.e_r(k)]);
        sol.x.push((0..nx).map(|i| z[layout.x(k, i)]).collect());
        sol.u.push(u);
        sol.delta.push(delta);
    }
    sol.iota = renewable_fraction_of(&sol.energy, &sol.e_r);
    sol
}

/// Assembles and solves one step.
///
/// An infeasible problem is classified by re-solving without the production
/// requirement: if that succeeds the requirement is what binds and a
/// [`LmpcError::DemandInfeasible`] carrying the relaxed capacity is returned.
pub fn solve_step(
    instance: &LmpcInstance,
    params: &LmpcParams,
    bnb: &BnbConfig,
) -> Result<LmpcSolution, LmpcError> {
    solve_step_hinted(instance, params, bnb, None)
}

/// [`solve_step`] seeded with an on/off pattern (one row per horizon step),
/// typically the previous plan shifted by one step. The pattern only
/// provides a starting incumbent; it never changes the optimum.
pub fn solve_step_hinted(
    instance: &LmpcInstance,
    params: &LmpcParams,
    bnb: &BnbConfig,
    hint: Option<&[Vec<bool>]>,
) -> Result<LmpcSolution, LmpcError> {
    let (problem, layout) = assemble(instance, params)?;
    let z_hint = hint.filter(|h| h.len() == layout.horizon).map(|h| {
        let mut z = vec![0.0; layout.len()];
        for (k, row) in h.iter().enumerate() {
            for (j, &on) in row.iter().enumerate().take(layout.n_u) {
                z[layout.delta(k, j)] = if on { 1.0 } else { 0.0 };
            }
        }
        z
    });
    let r = solve_miqp_with_hint(&problem, bnb, z_hint.as_deref())?;
    match r.status {
        MiqpStatus::Optimal | MiqpStatus::GapReached | MiqpStatus::NodeLimit => {
            let mut sol = decode(&r.z, &layout, instance, params, r.objective);
            sol.status = r.status;
            sol.gap = r.gap;
            sol.nodes = r.nodes_explored;
            sol.degraded = r.status == MiqpStatus::NodeLimit;
            Ok(sol)
        }
        MiqpStatus::Unknown => Err(LmpcError::NoIncumbent),
        MiqpStatus::Infeasible => Err(classify_infeasibility(instance, params, bnb, problem, &layout)),
    }
}

fn classify_infeasibility(
    instance: &LmpcInstance,
    params: &LmpcParams,
    bnb: &BnbConfig,
    mut problem: MiqpProblem,
    layout: &VariableLayout,
) -> LmpcError {
    let requirement_rows = assemble::requirement_rows(&problem, layout);
    for &r in &requirement_rows {
        problem.base.l_in[r] = f64::NEG_INFINITY;
    }
    let without = solve_miqp(&problem, bnb);
    if !matches!(&without, Ok(s) if s.status.has_solution()) {
        return LmpcError::ScheduleInfeasible;
    }
    // capacity: maximize total delivery over the relaxation
    let mut lp = problem.base.clone();
    lp.p_diag.iter_mut().for_each(|p| *p = 0.0);
    lp.q.iter_mut().for_each(|q| *q = 0.0);
    lp.c0 = 0.0;
    for k in 0..layout.horizon {
        for p in 0..layout.n_p {
            lp.q[layout.d(k, p)] = -1.0;
        }
    }
    // drop the delivery cap so the capacity is not masked by the target
    let caps = assemble::delivery_cap_rows(&lp, layout);
    for &r in &caps {
        lp.u_in[r] = f64::INFINITY;
    }
    let capacity = match solve_qp(&lp, &QpOptions::default(), None) {
        Ok(s) if s.status == QpStatus::Optimal => -s.objective,
        _ => 0.0,
    };
    let end = instance.h + instance.n;
    let alpha = crate::model::slack_fraction(0, end, params.horizon.steps_per_day, params.slack).unwrap_or(0.0);
    LmpcError::DemandInfeasible {
        required: (instance.gamma - instance.plant.lambda - alpha * instance.gamma).max(0.0),
        capacity,
        steps: instance.n,
    }
}

/// JSON fixture of an assembled instance plus a sidecar listing variable
/// names in order.
pub fn dump_instance(problem: &MiqpProblem, layout: &VariableLayout) -> (String, String) {
    let names = serde_json::to_string_pretty(&layout.names()).expect("names serialize");
    (problem.to_json(), names)
}
