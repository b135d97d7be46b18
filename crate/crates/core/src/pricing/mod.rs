//! Daily price selection by a projected, component-wise approximate gradient
//! ascent on revenue and renewable use.

use serde::{Deserialize, Serialize};

use crate::error::{LmpcError, PricingError};
use crate::lmpc::{solve_step_hinted, LmpcInstance, LmpcParams, LmpcSolution};
use crate::miqp::BnbConfig;
use crate::model::{demand_from_price, ElasticityParams, EnergySeries, PlantState};

fn default_eps() -> f64 {
    0.01
}

fn default_step_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingConfig {
    pub kappa_u: f64,
    pub kappa_d: f64,
    /// Desired renewable fraction.
    pub iota_star: f64,
    /// Convergence tolerance on successive prices (USD).
    #[serde(default = "default_eps")]
    pub eps: f64,
    pub k_max: usize,
    /// Initial price; the midpoint of the price bounds when absent.
    #[serde(default)]
    pub p0: Option<f64>,
    #[serde(default = "default_step_scale")]
    pub step_scale: f64,
}

impl PricingConfig {
    pub fn initial_price(&self, elasticity: &ElasticityParams) -> f64 {
        self.p0
            .unwrap_or(0.5 * (elasticity.p_min + elasticity.p_max))
    }

    pub fn diagnostics(&self, elasticity: &ElasticityParams) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.kappa_u >= 0.0 && self.kappa_d >= 0.0) {
            out.push("pricing weights must be nonnegative".to_string());
        }
        if !((self.kappa_u + self.kappa_d - 1.0).abs() <= 1e-9) {
            out.push("pricing weights kappa_u + kappa_d must equal 1".to_string());
        }
        if !(self.iota_star > 0.0 && self.iota_star <= 1.0) {
            out.push("pricing.iota_star must lie in (0, 1]".to_string());
        }
        if !(self.eps > 0.0) {
            out.push("pricing.eps must be positive".to_string());
        }
        if !(self.step_scale > 0.0) {
            out.push("pricing.step_scale must be positive".to_string());
        }
        let p0 = self.initial_price(elasticity);
        if !(p0 >= elasticity.p_min && p0 <= elasticity.p_max) {
            out.push(format!(
                "pricing.p0 = {p0} lies outside [{}, {}]",
                elasticity.p_min, elasticity.p_max
            ));
        }
        out
    }
}

/// One evaluated trial price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingIterate {
    pub k: usize,
    pub p: f64,
    pub gamma: f64,
    pub iota: f64,
    /// Scheduler objective at this price (NaN when infeasible).
    pub lower_objective: f64,
    /// Higher-level objective `-p Σd - Σ E_r` over the planned day.
    pub f: f64,
    pub feasible: bool,
    /// No energy was planned, so `iota` is zero by convention.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingResult {
    pub p_star: f64,
    pub gamma_star: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<PricingIterate>,
    /// Full-day schedule at `p_star`.
    pub solution: LmpcSolution,
}

/// Revenue component `a - 2 b p` (derivative of `p (a - b p)`).
pub fn grad_revenue(p: f64, elasticity: &ElasticityParams) -> f64 {
    elasticity.a - 2.0 * elasticity.b * p
}

/// Renewable component `(1 - ι/ι*) (p_max - p_min)`.
pub fn grad_renewable(iota: f64, config: &PricingConfig, elasticity: &ElasticityParams) -> f64 {
    (1.0 - iota / config.iota_star) * (elasticity.p_max - elasticity.p_min)
}

pub fn project_price(p: f64, elasticity: &ElasticityParams) -> f64 {
    p.min(elasticity.p_max).max(elasticity.p_min)
}

/// Everything the daily loop needs besides the plant state.
#[derive(Debug, Clone, Copy)]
pub struct DayContext<'a> {
    pub lmpc: LmpcParams<'a>,
    pub elasticity: &'a ElasticityParams,
    pub pricing: &'a PricingConfig,
    pub bnb: &'a BnbConfig,
}

fn day_instance(window: &EnergySeries, plant: &PlantState, gamma: f64) -> LmpcInstance {
    LmpcInstance {
        plant: PlantState {
            lambda: 0.0,
            ..plant.clone()
        },
        gamma,
        h: 0,
        n: window.len(),
        rho_window: window.rho_e.clone(),
        ear_window: window.e_ar.clone(),
    }
}

fn is_demand_failure(e: &LmpcError) -> bool {
    matches!(e, LmpcError::DemandInfeasible { .. } | LmpcError::ScheduleInfeasible)
}

/// Runs the pricing iteration for one day and re-solves the full-day
/// schedule at the final price.
///
/// Each iteration schedules the whole day at `γ_k = a - b p_k` and moves to
/// `Π[p_k + step_scale (κ_u G_u + κ_d G_d)]`; the loop stops once the move
/// is at most `eps` or after `k_max` iterations. A trial price whose demand
/// cannot be scheduled is replaced by `p_k + 0.1 (p_max - p_k)` without a
/// convergence test.
pub fn optimize_day_price(
    window: &EnergySeries,
    plant: &PlantState,
    ctx: &DayContext,
) -> Result<PricingResult, PricingError> {
    let el = ctx.elasticity;
    let cfg = ctx.pricing;
    let diags = cfg.diagnostics(el);
    if !diags.is_empty() {
        return Err(PricingError::Config(diags.join("; ")));
    }
    if window.len() != ctx.lmpc.horizon.steps_per_day {
        return Err(PricingError::Config(format!(
            "day window has {} steps, expected {}",
            window.len(),
            ctx.lmpc.horizon.steps_per_day
        )));
    }

    let mut p = project_price(cfg.initial_price(el), el);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last: Option<(f64, LmpcSolution)> = None;
    let mut k = 0;
    while k < cfg.k_max {
        let gamma = demand_from_price(p, el)?;
        let hint = last.as_ref().map(|(_, s)| s.delta.as_slice());
        match solve_step_hinted(&day_instance(window, plant, gamma), &ctx.lmpc, ctx.bnb, hint) {
            Ok(sol) => {
                let iota = sol.iota;
                let step = cfg.kappa_u * grad_renewable(iota, cfg, el) + cfg.kappa_d * grad_revenue(p, el);
                let next = project_price(p + cfg.step_scale * step, el);
                let renewable: f64 = sol.e_r.iter().sum();
                trace.push(PricingIterate {
                    k,
                    p,
                    gamma,
                    iota,
                    lower_objective: sol.objective,
                    f: -p * sol.delivered() - renewable,
                    feasible: true,
                    degenerate: sol.energy.iter().sum::<f64>() <= 1e-9,
                });
                k += 1;
                let done = (next - p).abs() <= cfg.eps;
                last = Some((p, sol));
                p = next;
                if done {
                    converged = true;
                    break;
                }
            }
            Err(e) if is_demand_failure(&e) => {
                if p >= el.p_max {
                    return Err(PricingError::Unrecoverable { p_max: el.p_max, source: e });
                }
                trace.push(PricingIterate {
                    k,
                    p,
                    gamma,
                    iota: 0.0,
                    lower_objective: f64::NAN,
                    f: f64::NAN,
                    feasible: false,
                    degenerate: false,
                });
                k += 1;
                p = project_price(p + 0.1 * (el.p_max - p), el);
            }
            Err(e) => return Err(e.into()),
        }
    }

    // final schedule at p*
    let solution = match last {
        Some((lp, sol)) if lp == p => sol,
        _ => {
            let gamma = demand_from_price(p, el)?;
            let hint = last.as_ref().map(|(_, s)| s.delta.as_slice());
            match solve_step_hinted(&day_instance(window, plant, gamma), &ctx.lmpc, ctx.bnb, hint) {
                Ok(sol) => sol,
                Err(e) if is_demand_failure(&e) => {
                    if p >= el.p_max {
                        return Err(PricingError::Unrecoverable { p_max: el.p_max, source: e });
                    }
                    // fall back to the highest price, which sheds the most demand
                    p = el.p_max;
                    let gamma = demand_from_price(p, el)?;
                    solve_step_hinted(&day_instance(window, plant, gamma), &ctx.lmpc, ctx.bnb, None).map_err(|e| {
                        if is_demand_failure(&e) {
                            PricingError::Unrecoverable { p_max: el.p_max, source: e }
                        } else {
                            e.into()
                        }
                    })?
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    Ok(PricingResult {
        p_star: p,
        gamma_star: demand_from_price(p, el)?,
        converged,
        iterations: trace.len(),
        trace,
        solution,
    })
}

/// CSV with one row per iteration: `k,p_k,gamma_k,iota_k,f_k,feasible`.
pub fn trace_csv(trace: &[PricingIterate]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "p_k", "gamma_k", "iota_k", "f_k", "feasible"])
        .expect("in-memory write");
    for it in trace {
        w.write_record([
            it.k.to_string(),
            it.p.to_string(),
            it.gamma.to_string(),
            it.iota.to_string(),
            it.f.to_string(),
            it.feasible.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ElasticityParams {
        ElasticityParams {
            a: 120.0,
            b: 0.8,
            p_min: 70.0,
            p_max: 120.0,
        }
    }

    fn cfg() -> PricingConfig {
        PricingConfig {
            kappa_u: 0.4,
            kappa_d: 0.6,
            iota_star: 0.5,
            eps: 0.01,
            k_max: 30,
            p0: None,
            step_scale: 1.0,
        }
    }

    #[test]
    fn revenue_gradient_examples() {
        let e = table();
        assert!(grad_revenue(75.0, &e).abs() < 1e-12);
        assert!((grad_revenue(70.0, &e) - 8.0).abs() < 1e-12);
        assert!((grad_revenue(120.0, &e) + 72.0).abs() < 1e-12);
    }

    #[test]
    fn renewable_gradient_examples() {
        let e = table();
        assert_eq!(grad_renewable(0.5, &cfg(), &e), 0.0);
        assert_eq!(grad_renewable(0.0, &cfg(), &e), 50.0);
        assert_eq!(grad_renewable(1.0, &cfg(), &e), -50.0);
    }

    #[test]
    fn projection_examples() {
        let e = table();
        assert_eq!(project_price(130.0, &e), 120.0);
        assert_eq!(project_price(65.0, &e), 70.0);
        assert_eq!(project_price(95.0, &e), 95.0);
    }

    #[test]
    fn initial_price_defaults_to_midpoint() {
        assert_eq!(cfg().initial_price(&table()), 95.0);
        assert!(cfg().diagnostics(&table()).is_empty());
        let bad = PricingConfig {
            kappa_u: 0.5,
            ..cfg()
        };
        assert!(!bad.diagnostics(&table()).is_empty());
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let t = vec![PricingIterate {
            k: 0,
            p: 95.0,
            gamma: 44.0,
            iota: 0.25,
            lower_objective: 1.0,
            f: -10.0,
            feasible: true,
            degenerate: false,
        }];
        let s = trace_csv(&t);
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("k,p_k,gamma_k,iota_k,f_k,feasible"));
        assert_eq!(lines.next(), Some("0,95,44,0.25,-10,true"));
    }
}
