//! Scenario files, time-series CSVs and report export.

use std::fs;
use std::path::Path;

use crate::error::IoError;
use crate::model::{validate_config, validate_scenario, EnergySeries};
use crate::sim::{Scenario, ScenarioConfig, SimulationReport};

pub mod synthetic;

pub const RTP_HEADER: [&str; 2] = ["hour", "price_usd_per_kwh"];
pub const SOLAR_HEADER: [&str; 2] = ["hour", "solar_kwh"];

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Parses a scenario document, applies documented defaults and checks every
/// configuration invariant. `file` only labels diagnostics.
pub fn parse_scenario_config(text: &str, file: &str) -> Result<ScenarioConfig, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        IoError::Json {
            file: file.to_string(),
            json_path: path,
            message: inner.to_string(),
        }
    })?;
    cfg.apply_defaults();
    let diags = validate_config(&cfg);
    if !diags.is_empty() {
        return Err(IoError::Invalid(diags));
    }
    Ok(cfg)
}

pub fn load_scenario_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, IoError> {
    let path = path.as_ref();
    parse_scenario_config(&read(path)?, &path.display().to_string())
}

/// Pretty JSON with every default written out explicitly.
pub fn dump_scenario_config(cfg: &ScenarioConfig) -> String {
    let mut s = serde_json::to_string_pretty(cfg).expect("scenario serializes");
    s.push('\n');
    s
}

/// Parses a two-column series CSV with the given header. Hours must run
/// `0, 1, 2, ...` without gaps and values must be finite and nonnegative.
/// Diagnostics carry the 1-based line number of the first bad row.
pub fn parse_series_csv(text: &str, file: &str, header: [&str; 2]) -> Result<Vec<f64>, IoError> {
    let err = |row: usize, message: String| IoError::Csv {
        file: file.to_string(),
        row,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let got = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if got.len() != 2 || got.get(0) != Some(header[0]) || got.get(1) != Some(header[1]) {
        return Err(err(
            1,
            format!("expected header `{},{}`, found `{}`", header[0], header[1], got.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        if rec.len() != 2 {
            return Err(err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let hour: usize = rec[0]
            .parse()
            .map_err(|_| err(line, format!("hour `{}` is not a nonnegative integer", &rec[0])))?;
        if hour != out.len() {
            return Err(err(line, format!("hour {hour} breaks the contiguous sequence (expected {})", out.len())));
        }
        let v: f64 = rec[1]
            .parse()
            .map_err(|_| err(line, format!("{} `{}` is not a number", header[1], &rec[1])))?;
        if !v.is_finite() || v < 0.0 {
            return Err(err(line, format!("{} must be finite and nonnegative, got {v}", header[1])));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn load_series(rtp: impl AsRef<Path>, solar: impl AsRef<Path>) -> Result<EnergySeries, IoError> {
    let (rtp, solar) = (rtp.as_ref(), solar.as_ref());
    Ok(EnergySeries {
        rho_e: parse_series_csv(&read(rtp)?, &rtp.display().to_string(), RTP_HEADER)?,
        e_ar: parse_series_csv(&read(solar)?, &solar.display().to_string(), SOLAR_HEADER)?,
    })
}

pub fn series_csv(values: &[f64], header: [&str; 2]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for (h, v) in values.iter().enumerate() {
        w.write_record([h.to_string(), v.to_string()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Loads a scenario file plus both series and validates the combination.
pub fn load_scenario(
    scenario: impl AsRef<Path>,
    rtp: impl AsRef<Path>,
    solar: impl AsRef<Path>,
) -> Result<Scenario, IoError> {
    let config = load_scenario_config(scenario)?;
    let scenario = Scenario {
        config,
        series: load_series(rtp, solar)?,
    };
    let diags = validate_scenario(&scenario);
    if !diags.is_empty() {
        return Err(IoError::Invalid(diags));
    }
    Ok(scenario)
}

pub fn report_json(report: &SimulationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// One row per applied hour: controls, energy split, prices, buffer levels
/// and deliveries, followed by the per-hour cost terms.
pub fn hourly_csv(report: &SimulationReport) -> String {
    let first = report.days.iter().flat_map(|d| d.hours.first()).next();
    let (nu, nx, np) = first.map_or((0, 0, 0), |h| (h.u.len(), h.x.len(), h.d.len()));
    let mut header = vec!["hour".to_string(), "day".to_string(), "hour_of_day".to_string()];
    header.extend((1..=nu).map(|j| format!("u_{j}")));
    header.extend((1..=nu).map(|j| format!("delta_{j}")));
    header.extend(["energy_kwh", "e_g_kwh", "e_r_kwh", "rho_e", "e_ar_kwh"].map(String::from));
    header.extend((1..=nx).map(|i| format!("x_{i}")));
    header.extend((1..=np).map(|p| format!("d_{p}")));
    header.extend(["grid_cost", "holding_cost", "startup_cost", "degraded"].map(String::from));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for h in report.days.iter().flat_map(|d| d.hours.iter()) {
        let mut row = vec![h.step.to_string(), h.day.to_string(), h.hour.to_string()];
        row.extend(h.u.iter().map(f64::to_string));
        row.extend(h.delta.iter().map(|&b| u8::from(b).to_string()));
        row.extend([h.energy, h.e_g, h.e_r, h.rho_e, h.e_ar].map(|v| v.to_string()));
        row.extend(h.x.iter().map(f64::to_string));
        row.extend(h.d.iter().map(f64::to_string));
        row.extend([h.grid_cost, h.holding_cost, h.startup_cost].map(|v| v.to_string()));
        row.push(u8::from(h.degraded).to_string());
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn daily_csv(report: &SimulationReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["day", "price", "gamma", "delivered", "revenue"])
        .expect("in-memory write");
    for d in &report.days {
        w.write_record([
            d.day.to_string(),
            d.price.to_string(),
            d.gamma.to_string(),
            d.delivered.to_string(),
            d.revenue.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Writes `report.json` to `out` and, when `series_dir` is given,
/// `hourly.csv` and `daily.csv` into that directory.
pub fn export_report(report: &SimulationReport, out: &Path, series_dir: Option<&Path>) -> Result<(), IoError> {
    write(out, &report_json(report))?;
    if let Some(dir) = series_dir {
        fs::create_dir_all(dir).map_err(|source| IoError::File {
            path: dir.display().to_string(),
            source,
        })?;
        write(&dir.join("hourly.csv"), &hourly_csv(report))?;
        write(&dir.join("daily.csv"), &daily_csv(report))?;
    }
    Ok(())
}
