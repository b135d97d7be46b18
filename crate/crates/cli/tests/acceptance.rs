//! Acceptance suite: every criterion prints one PASS/FAIL line and the
//! process exits nonzero if any of them fails.
//!
//! The three five-day closed-loop runs (solar, grid-only baseline, pinned
//! baseline price) are computed once and shared by the criteria that need
//! them.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bimpc_core::io::{self, synthetic};
use bimpc_core::linalg::SparseMatrix;
use bimpc_core::miqp::{enumerate_oracle, solve_miqp};
use bimpc_core::model::PlantState;
use bimpc_core::pricing::optimize_day_price;
use bimpc_core::qp::{check_kkt, solve_qp};
use bimpc_core::random::{feasible_miqp, feasible_qp};
use bimpc_core::sim::run;
use bimpc_core::{
    BnbConfig, QpOptions, QpProblem, QpStatus, Scenario, ScenarioConfig, SimulationReport,
};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data");
const TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Runs a criterion, turning a panic into a failure line.
fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    })
}

fn data(name: &str) -> PathBuf {
    Path::new(DATA).join(name)
}

fn default_config() -> ScenarioConfig {
    io::load_scenario_config(data("default_scenario.json")).unwrap()
}

fn scenario(config: ScenarioConfig) -> Scenario {
    let series = synthetic::generate(&synthetic::SyntheticSpec {
        days: config.horizon.days,
        steps_per_day: config.horizon.steps_per_day,
        ..Default::default()
    });
    Scenario { config, series }
}

struct Run {
    name: &'static str,
    scenario: Scenario,
    report: SimulationReport,
    elapsed: Duration,
}

fn simulate(name: &'static str, config: ScenarioConfig) -> Result<Run, String> {
    let scenario = scenario(config);
    let start = Instant::now();
    let report = run(&scenario).map_err(|e| format!("{name} run failed: {e}"))?;
    Ok(Run {
        name,
        scenario,
        report,
        elapsed: start.elapsed(),
    })
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let options = QpOptions::default();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let n_bin = 1 + (seed % 10) as usize;
        let n_cont = 5 + (seed * 7 % 36) as usize;
        let (p, _) = feasible_miqp(50_000 + seed, n_cont, n_bin);
        let bb = solve_miqp(&p, &BnbConfig::default()).unwrap();
        let oracle = enumerate_oracle(&p, &options).unwrap();
        let diff = (bb.objective - oracle.objective).abs();
        worst = worst.max(diff);
        if !bb.status.has_solution() || !(diff <= 1e-5) {
            failures.push(seed);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 300.0,
        format!("100 instances, worst |bb - oracle| = {worst:.2e}, {secs:.1} s, mismatched seeds {failures:?}"),
    )
}

/// Infeasible by construction: a row (or bound set) that contradicts
/// another constraint, layered on top of a random feasible instance.
fn infeasible_qp(seed: u64) -> QpProblem {
    let (mut p, _) = feasible_qp(90_000 + seed, 20);
    let n = p.n;
    let row: Vec<(usize, f64)> = (0..n).map(|j| (j, 1.0 + ((j as u64 + seed) % 3) as f64)).collect();
    let mut eq: Vec<(usize, usize, f64)> = p.a_eq.triplets().collect();
    let mut ineq: Vec<(usize, usize, f64)> = p.a_in.triplets().collect();
    let (m_eq, m_in) = (p.a_eq.nrows(), p.a_in.nrows());
    match seed % 3 {
        0 => {
            // a·z in [5, 6] and a·z in [8, 9]
            ineq.extend(row.iter().map(|&(j, v)| (m_in, j, v)));
            ineq.extend(row.iter().map(|&(j, v)| (m_in + 1, j, v)));
            p.l_in.extend([5.0, 8.0]);
            p.u_in.extend([6.0, 9.0]);
            p.a_in = SparseMatrix::from_triplets(m_in + 2, n, &ineq);
        }
        1 => {
            // a·z = 3 and a·z <= 1
            eq.extend(row.iter().map(|&(j, v)| (m_eq, j, v)));
            p.b_eq.push(3.0);
            p.a_eq = SparseMatrix::from_triplets(m_eq + 1, n, &eq);
            ineq.extend(row.iter().map(|&(j, v)| (m_in, j, v)));
            p.l_in.push(f64::NEG_INFINITY);
            p.u_in.push(1.0);
            p.a_in = SparseMatrix::from_triplets(m_in + 1, n, &ineq);
        }
        _ => {
            // every variable in [0, 1] but Σ z >= n + 1
            p.lb = vec![0.0; n];
            p.ub = vec![1.0; n];
            ineq.extend((0..n).map(|j| (m_in, j, 1.0)));
            p.l_in.push(n as f64 + 1.0);
            p.u_in.push(f64::INFINITY);
            p.a_in = SparseMatrix::from_triplets(m_in + 1, n, &ineq);
        }
    }
    p
}

fn criterion_2() -> Outcome {
    let options = QpOptions::default();
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for seed in 0..200u64 {
        let (p, _) = feasible_qp(seed, 50);
        let s = solve_qp(&p, &options, None).unwrap();
        let r = check_kkt(&p, &s.z, &s.y_eq, &s.y_in, &s.y_bound).max();
        worst = worst.max(r);
        if s.status != QpStatus::Optimal || !(r <= 1e-6) {
            bad.push(seed);
        }
    }
    let flagged = (0..10u64)
        .filter(|&seed| solve_qp(&infeasible_qp(seed), &options, None).unwrap().status == QpStatus::Infeasible)
        .count();
    outcome(
        bad.is_empty() && flagged == 10,
        format!("200 feasible: worst KKT residual {worst:.2e}, failing seeds {bad:?}; infeasible flagged {flagged}/10"),
    )
}

fn criterion_3() -> Outcome {
    let mut cfg = default_config();
    cfg.pricing.kappa_u = 0.0;
    cfg.pricing.kappa_d = 1.0;
    cfg.pricing.p0 = Some(95.0);
    let el = cfg.elasticity;
    let series = synthetic::generate(&synthetic::SyntheticSpec {
        days: 1,
        ..Default::default()
    });
    let plant = PlantState::initial(&cfg.buffers, cfg.topology.n_u);
    let r = optimize_day_price(&series, &plant, &cfg.day_context()).unwrap();
    let target = el.a / (2.0 * el.b);
    outcome(
        (el.a, el.b) == (120.0, 0.8) && r.converged && r.iterations <= 30 && (r.p_star - target).abs() <= 0.1,
        format!("p* = {:.4} (target {target}), {} iterations, converged {}", r.p_star, r.iterations, r.converged),
    )
}

fn criterion_4(pinned: &Run) -> Outcome {
    let days = &pinned.report.days;
    let gamma_ok = days.iter().all(|d| d.gamma == 54.0 && d.price == 82.5);
    let per_day_ok = days.iter().all(|d| d.delivered >= 52.65 - TOL && d.delivered <= 54.0 + TOL);
    let total = pinned.report.total_production;
    let delivered: Vec<String> = days.iter().map(|d| format!("{:.3}", d.delivered)).collect();
    outcome(
        days.len() == 5 && gamma_ok && per_day_ok && (263.25 - TOL..=270.0 + TOL).contains(&total),
        format!("gamma 54 every day: {gamma_ok}; delivered per day [{}]; total {total:.3}", delivered.join(", ")),
    )
}

fn criterion_5(solar: &Run) -> Outcome {
    let hours: Vec<_> = solar.report.days.iter().flat_map(|d| &d.hours).collect();
    let solved: Vec<_> = hours.iter().filter(|h| h.fallback.is_none()).collect();
    let worst_plan = solved.iter().map(|h| h.plan_saturation_residual).fold(0.0, f64::max);
    let worst_applied = hours
        .iter()
        .map(|h| (h.e_r - h.energy.min(h.e_ar)).abs())
        .fold(0.0, f64::max);
    outcome(
        worst_plan <= TOL && worst_applied <= TOL,
        format!(
            "{} solved steps, worst planned residual {worst_plan:.2e}, worst applied residual {worst_applied:.2e}",
            solved.len()
        ),
    )
}

fn criterion_6(runs: &[&Run]) -> Outcome {
    let mut violations = Vec::new();
    let mut checked = 0;
    for run in runs {
        let n_u = run.scenario.config.topology.n_u;
        let mut prev = vec![false; n_u];
        for h in run.report.days.iter().flat_map(|d| &d.hours) {
            for j in 0..n_u {
                let expected = f64::from(u8::from(h.delta[j] && !prev[j]));
                if (h.delta_on[j] - expected).abs() > TOL {
                    violations.push(format!("{} step {} machine {}: startup", run.name, h.step, j + 1));
                }
                if h.obligations[j] > 0 && !h.delta[j] {
                    violations.push(format!("{} step {} machine {}: obligation", run.name, h.step, j + 1));
                }
                prev[j] = h.delta[j];
                checked += 1;
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("{checked} machine-steps checked; violations {violations:?}"),
    )
}

fn criterion_7(solar: &Run, baseline: &Run) -> Outcome {
    let (s, b) = (&solar.report, &baseline.report);
    let grid_drop = (b.grid_cost - s.grid_cost) / b.grid_cost;
    let checks = [
        grid_drop >= 0.2,
        s.avg_price < b.avg_price,
        s.total_production > b.total_production,
        s.renewable_percent >= 40.0,
    ];
    outcome(
        checks.iter().all(|&c| c),
        format!(
            "grid {:.2} vs {:.2} ({:+.1}%), price {:.2} vs {:.2}, production {:.2} vs {:.2}, renewable {:.1}%",
            s.grid_cost,
            b.grid_cost,
            -100.0 * grid_drop,
            s.avg_price,
            b.avg_price,
            s.total_production,
            b.total_production,
            s.renewable_percent
        ),
    )
}

fn profit_gap(r: &SimulationReport) -> f64 {
    (r.profit - (r.revenue - r.grid_cost - r.holding_cost - r.startup_cost)).abs()
}

/// Column lookup for a CSV produced by the CLI.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Table {
        let text = std::fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        Table { header, rows }
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
    }
}

/// Profit rebuilt from the exported CSVs and the scenario parameters alone.
fn profit_from_csv(dir: &Path, cfg: &ScenarioConfig) -> f64 {
    let daily = Table::read(&dir.join("daily.csv"));
    let (price, delivered) = (daily.col("price"), daily.col("delivered"));
    let revenue: f64 = daily.rows.iter().map(|r| r[price] * r[delivered]).sum();

    let hourly = Table::read(&dir.join("hourly.csv"));
    let (rho, e_g) = (hourly.col("rho_e"), hourly.col("e_g_kwh"));
    let grid: f64 = hourly.rows.iter().map(|r| r[rho] * r[e_g]).sum();
    let b = &cfg.buffers;
    let holding: f64 = hourly
        .rows
        .iter()
        .map(|r| {
            (0..cfg.topology.n_x)
                .map(|i| b.qg[i] * (r[hourly.col(&format!("x_{}", i + 1))] - b.x_g[i]).powi(2))
                .sum::<f64>()
        })
        .sum();
    let mut startup = 0.0;
    let mut prev = vec![0.0; cfg.topology.n_u];
    for r in &hourly.rows {
        for j in 0..cfg.topology.n_u {
            let on = r[hourly.col(&format!("delta_{}", j + 1))];
            if on == 1.0 && prev[j] == 0.0 {
                startup += cfg.machines.c_on[j];
            }
            prev[j] = on;
        }
    }
    revenue - grid - holding - startup
}

fn criterion_8(runs: &[&Run], cli: &CliRuns) -> Outcome {
    let worst = runs.iter().map(|r| profit_gap(&r.report)).fold(0.0, f64::max);
    let report: serde_json::Value = serde_json::from_slice(&cli.first).unwrap();
    let profit = report["profit"].as_f64().unwrap();
    let recomputed = profit_from_csv(&cli.series_dir, &default_config());
    let csv_gap = (profit - recomputed).abs();
    outcome(
        worst <= TOL && csv_gap <= TOL,
        format!("worst identity gap {worst:.2e} over {} runs; CSV recomputation {recomputed:.6} vs report {profit:.6}", runs.len()),
    )
}

fn criterion_9(solar: &Run) -> Outcome {
    let cfg = &solar.scenario.config;
    let (b, m) = (&cfg.buffers, &cfg.machines);
    let mut violations = 0;
    let mut steps = 0;
    for h in solar.report.days.iter().flat_map(|d| &d.hours) {
        steps += 1;
        for i in 0..cfg.topology.n_x {
            if h.x[i] < b.x_min[i] - TOL || h.x[i] > b.x_max[i] + TOL {
                violations += 1;
            }
        }
        for j in 0..cfg.topology.n_u {
            let (lo, hi) = if h.delta[j] { (m.u_min[j], m.u_max[j]) } else { (0.0, 0.0) };
            if h.u[j] < lo - TOL || h.u[j] > hi + TOL {
                violations += 1;
            }
        }
    }
    let secs = solar.elapsed.as_secs_f64();
    outcome(
        violations == 0 && steps == 120 && secs < 1800.0 && cfg.bnb.rel_gap == 1e-2,
        format!(
            "{steps} steps, {violations} bound violations, {secs:.1} s at rel_gap {} / node limit {}, degraded steps {}",
            cfg.bnb.rel_gap, cfg.bnb.node_limit, solar.report.degraded_steps
        ),
    )
}

struct CliRuns {
    _dir: tempfile::TempDir,
    first: Vec<u8>,
    second: Vec<u8>,
    series_dir: PathBuf,
}

fn cli_runs() -> CliRuns {
    let dir = tempfile::tempdir().unwrap();
    let series_dir = dir.path().join("series");
    let run = |out: &Path, series: Option<&Path>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_bimpc"));
        cmd.arg("simulate")
            .arg("--scenario")
            .arg(data("default_scenario.json"))
            .arg("--rtp")
            .arg(data("rtp.csv"))
            .arg("--solar")
            .arg(data("solar.csv"))
            .arg("--out")
            .arg(out);
        if let Some(s) = series {
            cmd.arg("--series-out").arg(s);
        }
        let status = cmd.output().unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    let first = run(&dir.path().join("a.json"), Some(&series_dir));
    let second = run(&dir.path().join("b.json"), None);
    CliRuns {
        _dir: dir,
        first,
        second,
        series_dir,
    }
}

fn criterion_10(cli: &CliRuns) -> Outcome {
    let cfg = default_config();
    outcome(
        cfg.bnb.deterministic && !cli.first.is_empty() && cli.first == cli.second,
        format!("two report files of {} and {} bytes, identical: {}", cli.first.len(), cli.second.len(), cli.first == cli.second),
    )
}

fn get(r: &Result<Run, String>) -> &Run {
    r.as_ref().unwrap_or_else(|e| panic!("{e}"))
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are not meaningful here
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    let mut report = |id: u8, name: &'static str, o: Outcome| {
        println!("criterion {id:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };

    report(1, "MIQP oracle equivalence", guarded(criterion_1));
    report(2, "QP KKT suite", guarded(criterion_2));
    report(3, "pricing fixed point", guarded(criterion_3));

    let solar = simulate("solar", default_config());
    let mut cfg = default_config();
    cfg.solar_enabled = false;
    let baseline = simulate("baseline", cfg.clone());
    cfg.elasticity.p_min = 82.5;
    cfg.elasticity.p_max = 82.5;
    cfg.pricing.p0 = Some(82.5);
    let pinned = simulate("pinned", cfg);
    let cli = std::panic::catch_unwind(cli_runs).map_err(|_| "simulate command failed".to_string());
    let get_cli = || cli.as_ref().unwrap_or_else(|e| panic!("{e}"));

    report(4, "baseline demand reproduction", guarded(|| criterion_4(get(&pinned))));
    report(5, "renewable saturation", guarded(|| criterion_5(get(&solar))));
    report(
        6,
        "startup and min-run structure",
        guarded(|| criterion_6(&[get(&solar), get(&baseline), get(&pinned)])),
    );
    report(7, "solar versus baseline direction", guarded(|| criterion_7(get(&solar), get(&baseline))));
    report(
        8,
        "profit identity",
        guarded(|| criterion_8(&[get(&solar), get(&baseline), get(&pinned)], get_cli())),
    );
    report(9, "closed-loop feasibility", guarded(|| criterion_9(get(&solar))));
    report(10, "determinism", guarded(|| criterion_10(get_cli())));

    let failed: Vec<u8> = results.iter().filter(|(_, _, o)| !o.pass).map(|(id, _, _)| *id).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
