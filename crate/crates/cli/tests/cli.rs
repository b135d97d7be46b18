use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bimpc_core::io::{self, dump_scenario_config, series_csv, RTP_HEADER, SOLAR_HEADER};
use bimpc_core::miqp::solve_miqp;
use bimpc_core::random::feasible_miqp;
use bimpc_core::{BnbConfig, ScenarioConfig};
use tempfile::TempDir;

const DEFAULT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/default_scenario.json");

fn bimpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bimpc")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn default_config() -> ScenarioConfig {
    io::load_scenario_config(DEFAULT).unwrap()
}

struct Files {
    _dir: TempDir,
    scenario: PathBuf,
    rtp: PathBuf,
    solar: PathBuf,
}

impl Files {
    fn path(&self, name: &str) -> PathBuf {
        self._dir.path().join(name)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_files(cfg: &ScenarioConfig, rtp: &[f64], solar: &[f64]) -> Files {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    let rtp_path = dir.path().join("rtp.csv");
    let solar_path = dir.path().join("solar.csv");
    std::fs::write(&scenario, dump_scenario_config(cfg)).unwrap();
    std::fs::write(&rtp_path, series_csv(rtp, RTP_HEADER)).unwrap();
    std::fs::write(&solar_path, series_csv(solar, SOLAR_HEADER)).unwrap();
    Files {
        _dir: dir,
        scenario,
        rtp: rtp_path,
        solar: solar_path,
    }
}

/// Two eight-step days with a small market.
fn short_files(solar_enabled: bool, solar: f64) -> Files {
    let mut cfg = default_config();
    cfg.horizon.steps_per_day = 8;
    cfg.horizon.days = 2;
    cfg.elasticity.a = 30.0;
    cfg.elasticity.b = 0.2;
    cfg.solar_enabled = solar_enabled;
    let rtp: Vec<f64> = (0..16).map(|k| 0.03 + 0.01 * (k % 8) as f64).collect();
    write_files(&cfg, &rtp, &[solar; 16])
}

#[test]
fn validate_accepts_the_default_scenario() {
    let out = bimpc(&["validate", "--scenario", DEFAULT]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "OK");
}

#[test]
fn malformed_inputs_exit_with_one_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(DEFAULT).unwrap();

    let missing = dir.path().join("missing.json");
    std::fs::write(&missing, text.replace("\"b\": 0.8,", "")).unwrap();
    let out = bimpc(&["validate", "--scenario", s(&missing)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("elasticity"), "{}", stderr(&out));
    assert!(stderr(&out).contains("`b`"), "{}", stderr(&out));

    let bad_entry = dir.path().join("bad_entry.json");
    std::fs::write(&bad_entry, text.replacen("[1, -1, 0, 0, 0, 0]", "[2, -1, 0, 0, 0, 0]", 1)).unwrap();
    let out = bimpc(&["validate", "--scenario", s(&bad_entry)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("topology"), "{}", stderr(&out));

    let gap = dir.path().join("solar.csv");
    std::fs::write(&gap, "hour,solar_kwh\n0,1\n1,2\n3,4\n").unwrap();
    let rtp = dir.path().join("rtp.csv");
    std::fs::write(&rtp, "hour,price_usd_per_kwh\n0,0.1\n").unwrap();
    let out = bimpc(&["validate", "--scenario", DEFAULT, "--rtp", s(&rtp), "--solar", s(&gap)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("row 4"), "{}", stderr(&out));

    assert_eq!(code(&bimpc(&["validate", "--scenario", "/no/such/file.json"])), 1);
    assert_eq!(code(&bimpc(&["no-such-command"])), 1);
}

#[test]
fn unwritable_report_path_exits_with_two() {
    let f = short_files(false, 0.0);
    let out = bimpc(&[
        "simulate",
        "--scenario",
        s(&f.scenario),
        "--rtp",
        s(&f.rtp),
        "--solar",
        s(&f.solar),
        "--out",
        "/no/such/dir/report.json",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn simulate_writes_a_report_and_consistent_csvs() {
    let f = short_files(true, 40.0);
    let report = f.path("report.json");
    let series = f.path("series");
    let out = bimpc(&[
        "simulate",
        "--scenario",
        s(&f.scenario),
        "--rtp",
        s(&f.rtp),
        "--solar",
        s(&f.solar),
        "--out",
        s(&report),
        "--series-out",
        s(&series),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["profit", "revenue", "grid_cost", "holding_cost", "startup_cost", "avg_price", "total_production", "renewable_percent"] {
        assert!(json[key].is_number(), "{key}");
    }
    let hourly = std::fs::read_to_string(series.join("hourly.csv")).unwrap();
    let daily = std::fs::read_to_string(series.join("daily.csv")).unwrap();
    assert_eq!(hourly.lines().count(), 1 + 16);
    assert_eq!(daily.lines().count(), 1 + 2);
    assert!(hourly.starts_with("hour,day,hour_of_day,u_1,"));
    assert!(daily.starts_with("day,price,gamma,delivered,revenue"));
}

#[test]
fn zero_solar_file_matches_disabled_solar() {
    let run = |f: &Files| {
        let report = f.path("report.json");
        let out = bimpc(&[
            "simulate",
            "--scenario",
            s(&f.scenario),
            "--rtp",
            s(&f.rtp),
            "--solar",
            s(&f.solar),
            "--out",
            s(&report),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        std::fs::read(report).unwrap()
    };
    assert_eq!(run(&short_files(true, 0.0)), run(&short_files(false, 55.0)));
}

#[test]
fn zero_days_give_a_report_with_zero_aggregates() {
    let mut cfg = default_config();
    cfg.horizon.days = 0;
    let f = write_files(&cfg, &[], &[]);
    let report = f.path("report.json");
    let out = bimpc(&["simulate", "--scenario", s(&f.scenario), "--rtp", s(&f.rtp), "--solar", s(&f.solar), "--out", s(&report)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["profit"], 0.0);
    assert_eq!(json["total_production"], 0.0);
    assert_eq!(json["days"].as_array().unwrap().len(), 0);
}

#[test]
fn price_day_with_revenue_only_gradient_ends_near_the_revenue_optimum() {
    let mut cfg = default_config();
    cfg.pricing.kappa_u = 0.0;
    cfg.pricing.kappa_d = 1.0;
    cfg.pricing.p0 = Some(95.0);
    cfg.horizon.days = 1;
    let rtp = vec![0.05; 24];
    let f = write_files(&cfg, &rtp, &[0.0; 24]);
    let trace = f.path("trace.csv");
    let out = bimpc(&[
        "price-day",
        "--scenario",
        s(&f.scenario),
        "--rtp",
        s(&f.rtp),
        "--solar",
        s(&f.solar),
        "--day",
        "0",
        "--trace",
        s(&trace),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(trace).unwrap();
    let last = text.lines().last().unwrap();
    let p: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!((p - 75.0).abs() <= 0.1, "last p_k = {p}");
    assert!(stdout(&out).contains("converged"));
}

#[test]
fn solve_lmpc_prints_a_schedule_and_aborts_on_impossible_demand() {
    let dir = tempfile::tempdir().unwrap();
    let out = bimpc(&["solve-lmpc", "--scenario", DEFAULT, "--gamma", "20", "--hour", "16", "--dump", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("hour\tu_1"));
    assert_eq!(text.lines().count(), 1 + 8 + 1);
    assert!(dir.path().join("instance.json").exists());
    let names: Vec<String> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("names.json")).unwrap()).unwrap();
    assert!(names.contains(&"u[3][2]".to_string()), "{:?}", &names[..8]);

    let out = bimpc(&["solve-lmpc", "--scenario", DEFAULT, "--gamma", "500"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("demand infeasible"), "{}", stderr(&out));
}

#[test]
fn oracle_agrees_with_branch_and_bound_on_a_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (problem, _) = feasible_miqp(7, 12, 6);
    let path = dir.path().join("fixture.json");
    std::fs::write(&path, problem.to_json()).unwrap();
    let out = bimpc(&["oracle", "--instance", s(&path)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let bb = solve_miqp(&problem, &BnbConfig::default()).unwrap();
    let oracle = json["objective"].as_f64().unwrap();
    assert_eq!(json["status"], "optimal");
    assert!((oracle - bb.objective).abs() <= 1e-5, "{oracle} vs {}", bb.objective);

    std::fs::write(&path, "{\"not\": \"a fixture\"}").unwrap();
    assert_eq!(code(&bimpc(&["oracle", "--instance", s(&path)])), 1);
}

#[test]
fn gen_series_writes_loadable_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = bimpc(&["gen-series", "--out-dir", s(dir.path()), "--days", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let series = io::load_series(dir.path().join("rtp.csv"), dir.path().join("solar.csv")).unwrap();
    assert_eq!(series.len(), 48);
    assert!(series.e_ar.iter().any(|&e| e > 0.0));
}
