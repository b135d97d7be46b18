//! `bimpc`: run closed-loop pricing and scheduling simulations from scenario
//! and series files.
//!
//! Exit codes: 0 on success, 1 for invalid or malformed input, 2 when a
//! solver aborts or an output cannot be written.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use bimpc_core::io::{self, synthetic, RTP_HEADER, SOLAR_HEADER};
use bimpc_core::lmpc::{assemble, dump_instance, solve_step, LmpcInstance, LmpcSolution};
use bimpc_core::miqp::enumerate_oracle;
use bimpc_core::pricing::{optimize_day_price, trace_csv};
use bimpc_core::sim::{run, run_day};
use bimpc_core::{EnergySeries, MiqpProblem, PlantState, Scenario, ScenarioConfig, SimError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bimpc", version, about = "Bi-level pricing and energy-aware production scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the multi-day closed loop and write the report.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        rtp: PathBuf,
        #[arg(long)]
        solar: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for hourly.csv and daily.csv.
        #[arg(long)]
        series_out: Option<PathBuf>,
    },
    /// Optimize the price of one day, simulating the preceding days first.
    PriceDay {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        rtp: PathBuf,
        #[arg(long)]
        solar: PathBuf,
        #[arg(long, default_value_t = 0)]
        day: usize,
        /// Write the iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Solve a single scheduling problem from the initial plant state and
    /// print the schedule.
    SolveLmpc {
        #[arg(long)]
        scenario: PathBuf,
        /// Daily production target.
        #[arg(long)]
        gamma: f64,
        /// First step of the horizon within the day.
        #[arg(long, default_value_t = 0)]
        hour: usize,
        #[arg(long, default_value_t = 0)]
        day: usize,
        /// Units already delivered today.
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Series files; synthetic profiles are used when omitted.
        #[arg(long, requires = "solar")]
        rtp: Option<PathBuf>,
        #[arg(long, requires = "rtp")]
        solar: Option<PathBuf>,
        /// Write the decoded schedule as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the assembled MIQP (`instance.json`) and its variable names
        /// (`names.json`) into this directory.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Check a scenario file, and optionally its series, and print "OK".
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, requires = "solar")]
        rtp: Option<PathBuf>,
        #[arg(long, requires = "rtp")]
        solar: Option<PathBuf>,
    },
    /// Solve an MIQP fixture by exhaustive enumeration and print the result.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Write synthetic price and solar series.
    GenSeries {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 5)]
        days: usize,
        #[arg(long, default_value_t = 24)]
        steps_per_day: usize,
        /// Solar peak in kWh per step; 0 gives a grid-only series.
        #[arg(long)]
        solar_peak: Option<f64>,
    },
}

/// An error paired with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait Classify<T> {
    /// Bad or unreadable input: exit 1.
    fn invalid(self) -> Result<T, Failure>;
    /// Solver abort or unwritable output: exit 2.
    fn abort(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 1, error: e.into() })
    }
    fn abort(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 2, error: e.into() })
    }
}

fn sim_failure(e: SimError) -> Failure {
    let code = if matches!(e, SimError::InvalidScenario(_)) { 1 } else { 2 };
    Failure { code, error: e.into() }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .abort()
}

fn load(scenario: &Path, rtp: &Path, solar: &Path) -> Result<Scenario, Failure> {
    io::load_scenario(scenario, rtp, solar).invalid()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(&f.error));
            ExitCode::from(f.code)
        }
    }
}

/// The error chain on one line, skipping causes already quoted by their
/// parent's message.
fn describe(error: &anyhow::Error) -> String {
    let mut text = error.to_string();
    for cause in error.chain().skip(1) {
        let c = cause.to_string();
        if !text.contains(&c) {
            text = format!("{text}: {c}");
        }
    }
    text
}

/// Fails before a long run when the report could not be written anyway.
fn check_writable_parent(path: &Path) -> Result<(), Failure> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if parent.is_dir() {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            error: anyhow!("cannot write {}: directory {} does not exist", path.display(), parent.display()),
        })
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate {
            scenario,
            rtp,
            solar,
            out,
            series_out,
        } => {
            let sc = load(&scenario, &rtp, &solar)?;
            check_writable_parent(&out)?;
            let report = run(&sc).map_err(sim_failure)?;
            io::export_report(&report, &out, series_out.as_deref()).abort()?;
            println!(
                "profit {:.2} USD | revenue {:.2} | grid {:.2} | holding {:.2} | startup {:.2}",
                report.profit, report.revenue, report.grid_cost, report.holding_cost, report.startup_cost
            );
            println!(
                "production {:.2} units | avg price {:.2} USD | renewable {:.1}% | degraded steps {}",
                report.total_production, report.avg_price, report.renewable_percent, report.degraded_steps
            );
            Ok(())
        }
        Command::PriceDay {
            scenario,
            rtp,
            solar,
            day,
            trace,
        } => {
            let sc = load(&scenario, &rtp, &solar)?;
            price_day(&sc, day, trace.as_deref())
        }
        Command::SolveLmpc {
            scenario,
            gamma,
            hour,
            day,
            lambda,
            rtp,
            solar,
            json,
            dump,
        } => {
            let cfg = io::load_scenario_config(&scenario).invalid()?;
            let series = match (rtp, solar) {
                (Some(rtp), Some(solar)) => io::load_series(rtp, solar).invalid()?,
                _ => default_series(&cfg),
            };
            solve_lmpc(&cfg, &series, gamma, day, hour, lambda, json.as_deref(), dump.as_deref())
        }
        Command::Validate { scenario, rtp, solar } => {
            match (rtp, solar) {
                (Some(rtp), Some(solar)) => {
                    load(&scenario, &rtp, &solar)?;
                }
                _ => {
                    io::load_scenario_config(&scenario).invalid()?;
                }
            }
            println!("OK");
            Ok(())
        }
        Command::Oracle { instance } => {
            let text = fs::read_to_string(&instance)
                .with_context(|| format!("cannot read {}", instance.display()))
                .invalid()?;
            let problem = MiqpProblem::from_json(&text)
                .with_context(|| format!("{}: malformed instance", instance.display()))
                .invalid()?;
            let options = bimpc_core::BnbConfig::default().qp_options();
            let solution = enumerate_oracle(&problem, &options).invalid()?;
            println!("{}", serde_json::to_string_pretty(&solution).expect("solution serializes"));
            Ok(())
        }
        Command::GenSeries {
            out_dir,
            days,
            steps_per_day,
            solar_peak,
        } => {
            let mut spec = synthetic::SyntheticSpec {
                days,
                steps_per_day,
                ..Default::default()
            };
            if let Some(peak) = solar_peak {
                spec.solar_peak = peak;
            }
            let series = synthetic::generate(&spec);
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("cannot create {}", out_dir.display()))
                .abort()?;
            write_file(&out_dir.join("rtp.csv"), &io::series_csv(&series.rho_e, RTP_HEADER))?;
            write_file(&out_dir.join("solar.csv"), &io::series_csv(&series.e_ar, SOLAR_HEADER))?;
            println!("wrote {} steps to {}", series.len(), out_dir.display());
            Ok(())
        }
    }
}

fn default_series(cfg: &ScenarioConfig) -> EnergySeries {
    synthetic::generate(&synthetic::SyntheticSpec {
        days: cfg.horizon.days.max(1),
        steps_per_day: cfg.horizon.steps_per_day,
        ..Default::default()
    })
}

fn price_day(sc: &Scenario, day: usize, trace: Option<&Path>) -> Result<(), Failure> {
    let cfg = &sc.config;
    if day >= cfg.horizon.days {
        return Err(Failure {
            code: 1,
            error: anyhow!("day {day} is outside the {}-day horizon", cfg.horizon.days),
        });
    }
    let mut plant = PlantState::initial(&cfg.buffers, cfg.topology.n_u);
    for d in 0..day {
        plant = run_day(sc, d, &plant).map_err(sim_failure)?.1;
    }
    let steps = cfg.horizon.steps_per_day;
    let window = sc.effective_series().window(day * steps, steps);
    let result = optimize_day_price(&window, &plant, &cfg.day_context())
        .with_context(|| format!("pricing day {day}"))
        .abort()?;
    if let Some(path) = trace {
        write_file(path, &trace_csv(&result.trace))?;
    }
    println!(
        "day {day}: price {:.4} USD | demand {:.4} units | {} iterations | {}",
        result.p_star,
        result.gamma_star,
        result.iterations,
        if result.converged { "converged" } else { "not converged" }
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve_lmpc(
    cfg: &ScenarioConfig,
    series: &EnergySeries,
    gamma: f64,
    day: usize,
    hour: usize,
    lambda: f64,
    json: Option<&Path>,
    dump: Option<&Path>,
) -> Result<(), Failure> {
    let steps = cfg.horizon.steps_per_day;
    if hour >= steps {
        return Err(Failure {
            code: 1,
            error: anyhow!("hour {hour} is outside the {steps}-step day"),
        });
    }
    let start = day * steps + hour;
    let end = (day + 1) * steps;
    if end > series.len() {
        return Err(Failure {
            code: 1,
            error: anyhow!("series cover {} steps, day {day} needs {end}", series.len()),
        });
    }
    let mut ear = series.e_ar[start..end].to_vec();
    if !cfg.solar_enabled {
        ear.iter_mut().for_each(|v| *v = 0.0);
    }
    let instance = LmpcInstance {
        plant: PlantState {
            lambda,
            ..PlantState::initial(&cfg.buffers, cfg.topology.n_u)
        },
        gamma,
        h: hour,
        n: steps - hour,
        rho_window: series.rho_e[start..end].to_vec(),
        ear_window: ear,
    };
    let params = cfg.lmpc_params();
    if let Some(dir) = dump {
        let (problem, layout) = assemble(&instance, &params).invalid()?;
        let (fixture, names) = dump_instance(&problem, &layout);
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .abort()?;
        write_file(&dir.join("instance.json"), &fixture)?;
        write_file(&dir.join("names.json"), &names)?;
    }
    let sol = solve_step(&instance, &params, &cfg.bnb).abort()?;
    print_schedule(&sol, hour);
    if let Some(path) = json {
        write_file(path, &serde_json::to_string_pretty(&sol).expect("schedule serializes"))?;
    }
    Ok(())
}

fn print_schedule(sol: &LmpcSolution, hour: usize) {
    let row = |cells: Vec<String>| cells.join("\t");
    let n_u = sol.u.first().map_or(0, Vec::len);
    let n_x = sol.x.first().map_or(0, Vec::len);
    let n_p = sol.d.first().map_or(0, Vec::len);
    let mut header = vec!["hour".to_string()];
    header.extend((1..=n_u).map(|j| format!("u_{j}")));
    header.extend((1..=n_p).map(|p| format!("d_{p}")));
    header.extend(["E", "E_g", "E_r"].map(String::from));
    header.extend((1..=n_x).map(|i| format!("x_{i}")));
    println!("{}", row(header));
    for k in 0..sol.u.len() {
        let fmt = |v: &f64| format!("{v:.3}");
        let mut cells = vec![(hour + k).to_string()];
        cells.extend(
            sol.u[k]
                .iter()
                .zip(&sol.delta[k])
                .map(|(u, &on)| if on { fmt(u) } else { "-".to_string() }),
        );
        cells.extend(sol.d[k].iter().map(fmt));
        cells.extend([sol.energy[k], sol.e_g[k], sol.e_r[k]].iter().map(fmt));
        cells.extend(sol.x[k].iter().map(fmt));
        println!("{}", row(cells));
    }
    println!(
        "status {} | objective {:.4} | delivered {:.4} | renewable fraction {:.4}",
        format!("{:?}", sol.status).to_lowercase(),
        sol.objective,
        sol.delivered(),
        sol.iota
    );
}
