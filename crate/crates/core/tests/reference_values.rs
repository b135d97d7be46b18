use bimpc_core::io::{dump_scenario_config, parse_scenario_config};
use bimpc_core::model::demand_from_price;

const DEFAULT: &str = include_str!("../data/default_scenario.json");

#[test]
fn default_scenario_carries_the_reference_parameters() {
    let c = parse_scenario_config(DEFAULT, "default_scenario.json").unwrap();
    assert_eq!(c.horizon.steps_per_day, 24);
    assert_eq!(c.horizon.dt_hours, 1.0);
    assert_eq!((c.elasticity.a, c.elasticity.b), (120.0, 0.8));
    assert_eq!((c.elasticity.p_min, c.elasticity.p_max), (70.0, 120.0));
    assert_eq!((c.slack.xi, c.slack.tau), (0.5, 0.05));
    assert_eq!(c.pricing.iota_star, 0.5);
    assert_eq!((c.weights.omega_e, c.weights.omega_r, c.weights.omega_s), (10.0, 5.0, 5000.0));
    assert_eq!((c.pricing.kappa_d, c.pricing.kappa_u), (0.6, 0.4));
    assert_eq!(c.pricing.k_max, 30);

    let m = &c.machines;
    assert_eq!(m.u_max, vec![10.0, 8.0, 8.0, 8.0, 8.0, 8.0]);
    assert_eq!(m.c_on, vec![2.0, 3.0, 2.5, 2.8, 3.5, 3.0]);
    assert_eq!(m.epsilon, vec![3.5, 8.2, 6.7, 4.3, 5.8, 9.5]);
    assert_eq!(m.min_run, vec![3, 4, 3, 2, 4, 3]);
    let b = &c.buffers;
    assert_eq!(b.x_max, vec![20.0, 20.0, 20.0, 20.0, 40.0]);
    assert_eq!(b.qg, vec![0.01, 0.01, 0.01, 0.02, 0.2]);
    assert_eq!(b.qt, vec![0.05, 0.05, 0.05, 0.1, 1.0]);
    assert!(b.x_g.iter().chain(&b.x_t).all(|&v| v == 0.0));
}

#[test]
fn default_scenario_round_trips_through_dump() {
    let c = parse_scenario_config(DEFAULT, "default_scenario.json").unwrap();
    let again = parse_scenario_config(&dump_scenario_config(&c), "dumped.json").unwrap();
    assert_eq!(c, again);
}

#[test]
fn reference_baseline_row_is_consistent_with_the_model() {
    let c = parse_scenario_config(DEFAULT, "default_scenario.json").unwrap();
    // a flat 82.50 price gives 54 units/day, 270 over five days
    let gamma = demand_from_price(82.5, &c.elasticity).unwrap();
    assert_eq!(gamma, 54.0);
    assert_eq!(5.0 * gamma, 270.0);
    // revenue 82.5 · 270 less grid, holding and startup cost
    let revenue = 82.5 * 270.0;
    assert_eq!(revenue, 22275.0);
    assert_eq!(revenue - 1299.0 - 4926.0 - 113.0, 15937.0);
    // relative changes of the solar column, rounded to one decimal
    let pct = |base: f64, new: f64| (1000.0 * (new - base) / base).round() / 10.0;
    assert_eq!(pct(1299.0, 657.0), -49.4);
    assert_eq!(pct(82.50, 74.77), -9.4);
    assert_eq!(pct(270.0, 301.0), 11.5);
    assert_eq!(pct(15937.0, 16530.0), 3.7);
}
