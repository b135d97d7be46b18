//! Shared fixtures for the solver benchmarks in `benches/`.

use bimpc_core::io::{parse_scenario_config, synthetic};
use bimpc_core::{LmpcInstance, PlantState, ScenarioConfig};

const DEFAULT: &str = include_str!("../../core/data/default_scenario.json");

pub fn default_config() -> ScenarioConfig {
    parse_scenario_config(DEFAULT, "default_scenario.json").expect("shipped scenario is valid")
}

/// Scheduling problem for the remaining steps of the first synthetic day,
/// starting from stocked buffers with `lambda` units already delivered.
pub fn day_instance(cfg: &ScenarioConfig, gamma: f64, hour: usize, lambda: f64) -> LmpcInstance {
    let series = synthetic::generate(&synthetic::SyntheticSpec {
        days: 1,
        steps_per_day: cfg.horizon.steps_per_day,
        ..Default::default()
    });
    let steps = cfg.horizon.steps_per_day;
    let mut plant = PlantState::initial(&cfg.buffers, cfg.topology.n_u);
    if hour > 0 {
        plant.x = cfg.buffers.x_max.iter().map(|m| m / 4.0).collect();
    }
    plant.lambda = lambda;
    LmpcInstance {
        plant,
        gamma,
        h: hour,
        n: steps - hour,
        rho_window: series.rho_e[hour..].to_vec(),
        ear_window: series.e_ar[hour..].to_vec(),
    }
}
