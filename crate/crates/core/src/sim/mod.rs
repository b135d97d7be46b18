//! Closed-loop multi-day simulation: daily pricing followed by hourly
//! shrinking-horizon scheduling on a nominal plant.

use serde::{Deserialize, Serialize};

use crate::error::{LmpcError, SimError};
use crate::lmpc::{extract_first_control, solve_step_hinted, LmpcInstance, LmpcParams, LmpcSolution, LmpcWeights};
use crate::miqp::BnbConfig;
use crate::model::{
    step_dynamics, validate_scenario, BufferParams, ElasticityParams, EnergySeries, HorizonConfig,
    MachineParams, NetworkTopology, PlantState, SlackParams,
};
use crate::pricing::{optimize_day_price, DayContext, PricingConfig, PricingIterate};

/// Everything in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: NetworkTopology,
    pub machines: MachineParams,
    pub buffers: BufferParams,
    pub elasticity: ElasticityParams,
    pub weights: LmpcWeights,
    pub slack: SlackParams,
    pub pricing: PricingConfig,
    pub bnb: BnbConfig,
    pub horizon: HorizonConfig,
    /// `false` runs the grid-only case: renewable availability is zeroed.
    pub solar_enabled: bool,
}

impl ScenarioConfig {
    /// Fills documented defaults (`x_min = 0`, `p0` = price midpoint).
    pub fn apply_defaults(&mut self) {
        if self.buffers.x_min.is_empty() {
            self.buffers.x_min = vec![0.0; self.topology.n_x];
        }
        if self.pricing.p0.is_none() {
            self.pricing.p0 = Some(self.pricing.initial_price(&self.elasticity));
        }
    }

    pub fn lmpc_params(&self) -> LmpcParams<'_> {
        LmpcParams {
            topology: &self.topology,
            machines: &self.machines,
            buffers: &self.buffers,
            weights: &self.weights,
            slack: &self.slack,
            horizon: &self.horizon,
        }
    }

    pub fn day_context(&self) -> DayContext<'_> {
        DayContext {
            lmpc: self.lmpc_params(),
            elasticity: &self.elasticity,
            pricing: &self.pricing,
            bnb: &self.bnb,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub series: EnergySeries,
}

impl Scenario {
    /// Series as seen by the controller (renewables zeroed when disabled).
    pub fn effective_series(&self) -> EnergySeries {
        let mut s = self.series.clone();
        if !self.config.solar_enabled {
            s.e_ar.iter_mut().for_each(|v| *v = 0.0);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourRecord {
    /// Absolute step since the start of the simulation.
    pub step: usize,
    pub day: usize,
    pub hour: usize,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub delta: Vec<bool>,
    /// Startup variables as planned by the solver at this step.
    pub delta_on: Vec<f64>,
    /// Buffer levels after the step.
    pub x: Vec<f64>,
    pub energy: f64,
    pub e_g: f64,
    pub e_r: f64,
    pub rho_e: f64,
    pub e_ar: f64,
    pub holding_cost: f64,
    pub grid_cost: f64,
    pub startup_cost: f64,
    /// Shortfall penalty `ω_s · max(0, γ - λ)`, charged on the last hour of
    /// the day only; reported separately from profit.
    pub slack_cost: f64,
    /// Run obligations in force when the step was solved.
    pub obligations: Vec<usize>,
    /// Worst renewable-saturation residual of the plan solved at this step.
    pub plan_saturation_residual: f64,
    /// Solver stopped at the node limit or a fallback schedule was applied.
    pub degraded: bool,
    /// Why a fallback was used, if any.
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub day: usize,
    pub price: f64,
    pub gamma: f64,
    pub pricing_converged: bool,
    pub pricing_trace: Vec<PricingIterate>,
    pub delivered: f64,
    pub revenue: f64,
    pub hours: Vec<HourRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub profit: f64,
    pub revenue: f64,
    pub grid_cost: f64,
    pub holding_cost: f64,
    pub startup_cost: f64,
    pub avg_price: f64,
    pub total_production: f64,
    pub renewable_percent: f64,
    pub total_energy: f64,
    pub renewable_energy: f64,
    pub degraded_steps: usize,
    pub days: Vec<DayRecord>,
}

fn weighted_sq(x: &[f64], target: &[f64], w: &[f64]) -> f64 {
    x.iter()
        .zip(target)
        .zip(w)
        .map(|((x, t), w)| w * (x - t) * (x - t))
        .sum()
}

fn all_off(n_u: usize, n_p: usize, n: usize, ear: &[f64]) -> LmpcSolution {
    LmpcSolution {
        u: vec![vec![0.0; n_u]; n],
        d: vec![vec![0.0; n_p]; n],
        delta: vec![vec![false; n_u]; n],
        delta_on: vec![vec![0.0; n_u]; n],
        s: vec![0.0; n_p],
        e_g: vec![0.0; n],
        e_r: vec![0.0; n],
        energy: vec![0.0; n],
        e_ar: ear.to_vec(),
        x: Vec::new(),
        objective: f64::NAN,
        iota: 0.0,
        status: crate::miqp::MiqpStatus::Infeasible,
        gap: f64::INFINITY,
        nodes: 0,
        degraded: true,
    }
}

/// Solves one hourly step, falling back to dropping run obligations and then
/// to an all-off schedule when the problem is infeasible.
fn solve_with_fallback(
    instance: &LmpcInstance,
    params: &LmpcParams,
    bnb: &BnbConfig,
    hint: Option<&[Vec<bool>]>,
) -> Result<(LmpcSolution, Option<String>), LmpcError> {
    let first = match solve_step_hinted(instance, params, bnb, hint) {
        Ok(s) => return Ok((s, None)),
        Err(e @ (LmpcError::DemandInfeasible { .. } | LmpcError::ScheduleInfeasible | LmpcError::NoIncumbent)) => e,
        Err(e) => return Err(e),
    };
    if instance.plant.run_remaining.iter().any(|&r| r > 0) {
        let mut relaxed = instance.clone();
        relaxed.plant.run_remaining.iter_mut().for_each(|r| *r = 0);
        if let Ok(s) = solve_step_hinted(&relaxed, params, bnb, None) {
            return Ok((s, Some(format!("{first}; run obligations dropped"))));
        }
    }
    let t = params.topology;
    Ok((
        all_off(t.n_u, t.n_p, instance.n, &instance.ear_window),
        Some(format!("{first}; all machines switched off")),
    ))
}

/// Prices one day, then runs the hourly shrinking-horizon loop on the plant.
pub fn run_day(scenario: &Scenario, day: usize, plant: &PlantState) -> Result<(DayRecord, PlantState), SimError> {
    let cfg = &scenario.config;
    let steps = cfg.horizon.steps_per_day;
    let series = scenario.effective_series();
    let window = series.window(day * steps, steps);
    let mut plant = PlantState {
        lambda: 0.0,
        ..plant.clone()
    };
    if plant.run_remaining.len() != cfg.topology.n_u {
        plant.run_remaining = vec![0; cfg.topology.n_u];
    }
    let ctx = cfg.day_context();
    let pricing = optimize_day_price(&window, &plant, &ctx).map_err(|source| SimError::Pricing { day, source })?;
    let gamma = pricing.gamma_star;
    let params = cfg.lmpc_params();
    let m = &cfg.machines;
    let mut hours = Vec::with_capacity(steps);
    let mut first_plan = Some(pricing.solution);
    let mut previous: Option<Vec<Vec<bool>>> = None;

    for h in 0..steps {
        let n = steps - h;
        let instance = LmpcInstance {
            plant: plant.clone(),
            gamma,
            h,
            n,
            rho_window: window.rho_e[h..].to_vec(),
            ear_window: window.e_ar[h..].to_vec(),
        };
        // the pricing loop's final schedule is exactly the hour-0 problem
        let (sol, fallback) = match first_plan.take() {
            Some(s) => (s, None),
            None => solve_with_fallback(&instance, &params, &cfg.bnb, previous.as_deref())
                .map_err(|source| SimError::Step { day, hour: h, source })?,
        };
        // the remainder of this plan seeds the next step
        previous = (sol.delta.len() > 1).then(|| sol.delta[1..].to_vec());
        let fc = extract_first_control(&sol);
        let x_next = step_dynamics(&plant.x, &fc.u, &fc.d, &cfg.topology).expect("dimensions validated");
        let energy: f64 = fc
            .u
            .iter()
            .zip(&m.epsilon)
            .map(|(u, e)| e * u * cfg.horizon.dt_hours)
            .sum();
        let e_r = energy.min(window.e_ar[h]);
        let e_g = energy - e_r;
        let started: Vec<bool> = (0..cfg.topology.n_u)
            .map(|j| fc.delta[j] && !plant.delta_prev[j])
            .collect();
        let startup_cost: f64 = started
            .iter()
            .zip(&m.c_on)
            .filter(|(s, _)| **s)
            .map(|(_, c)| c)
            .sum();
        let delivered_now: f64 = fc.d.iter().sum();
        let obligations = plant.run_remaining.clone();

        for j in 0..cfg.topology.n_u {
            plant.run_remaining[j] = if started[j] {
                m.min_run[j].saturating_sub(1)
            } else if fc.delta[j] {
                plant.run_remaining[j].saturating_sub(1)
            } else {
                0
            };
        }
        plant.lambda += delivered_now;
        plant.delta_prev = fc.delta.clone();
        let holding = weighted_sq(&x_next, &cfg.buffers.x_g, &cfg.buffers.qg);
        plant.x = x_next.clone();
        let slack_cost = if h + 1 == steps {
            cfg.weights.omega_s * (gamma - plant.lambda).max(0.0)
        } else {
            0.0
        };
        hours.push(HourRecord {
            step: day * steps + h,
            day,
            hour: h,
            u: fc.u,
            d: fc.d,
            delta: fc.delta,
            delta_on: sol.delta_on[0].clone(),
            x: x_next,
            energy,
            e_g,
            e_r,
            rho_e: window.rho_e[h],
            e_ar: window.e_ar[h],
            holding_cost: holding,
            grid_cost: window.rho_e[h] * e_g,
            startup_cost,
            slack_cost,
            obligations,
            plan_saturation_residual: if fallback.is_some() { 0.0 } else { sol.saturation_residual() },
            degraded: sol.degraded || fallback.is_some(),
            fallback,
        });
    }
    let delivered: f64 = hours.iter().flat_map(|r| r.d.iter()).sum();
    let record = DayRecord {
        day,
        price: pricing.p_star,
        gamma,
        pricing_converged: pricing.converged,
        pricing_trace: pricing.trace,
        delivered,
        revenue: pricing.p_star * delivered,
        hours,
    };
    Ok((record, plant))
}

/// Runs every day of the scenario, carrying buffer levels, machine states
/// and run obligations across days.
pub fn run(scenario: &Scenario) -> Result<SimulationReport, SimError> {
    let cfg = &scenario.config;
    if cfg.horizon.days == 0 {
        return Ok(compute_report(&[]));
    }
    let diags = validate_scenario(scenario);
    if !diags.is_empty() {
        return Err(SimError::InvalidScenario(diags));
    }
    let mut plant = PlantState::initial(&cfg.buffers, cfg.topology.n_u);
    let mut days = Vec::with_capacity(cfg.horizon.days);
    for day in 0..cfg.horizon.days {
        let (rec, next) = run_day(scenario, day, &plant)?;
        days.push(rec);
        plant = next;
    }
    Ok(compute_report(&days))
}

/// Aggregates day records into report totals.
pub fn compute_report(days: &[DayRecord]) -> SimulationReport {
    let hours = || days.iter().flat_map(|d| d.hours.iter());
    let revenue: f64 = days.iter().map(|d| d.revenue).sum();
    let grid_cost: f64 = hours().map(|h| h.grid_cost).sum();
    let holding_cost: f64 = hours().map(|h| h.holding_cost).sum();
    let startup_cost: f64 = hours().map(|h| h.startup_cost).sum();
    let total_production: f64 = days.iter().map(|d| d.delivered).sum();
    let total_energy: f64 = hours().map(|h| h.energy).sum();
    let renewable_energy: f64 = hours().map(|h| h.e_r).sum();
    let avg_price = if total_production > 0.0 {
        days.iter().map(|d| d.price * d.delivered).sum::<f64>() / total_production
    } else {
        0.0
    };
    let renewable_percent = if total_energy > 0.0 {
        100.0 * renewable_energy / total_energy
    } else {
        0.0
    };
    SimulationReport {
        profit: revenue - grid_cost - holding_cost - startup_cost,
        revenue,
        grid_cost,
        holding_cost,
        startup_cost,
        avg_price,
        total_production,
        renewable_percent,
        total_energy,
        renewable_energy,
        degraded_steps: hours().filter(|h| h.degraded).count(),
        days: days.to_vec(),
    }
}
