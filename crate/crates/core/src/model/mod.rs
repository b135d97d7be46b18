//! Plant description: buffer network, machines, energy accounting, price
//! elasticity and the production-slack schedule.

mod validate;

pub use validate::{max_daily_throughput, validate_config, validate_scenario};

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Buffer/machine/product incidence.
///
/// `b[i][j]` is `+1` when machine `j` feeds buffer `i` and `-1` when it
/// draws from it; `w[i][p]` is `-1` when product `p` ships from buffer `i`.
/// The buffer transition matrix is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkTopology {
    pub n_x: usize,
    pub n_u: usize,
    pub n_p: usize,
    #[serde(rename = "B")]
    pub b: Vec<Vec<i32>>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<i32>>,
}

impl NetworkTopology {
    /// Entry-domain and shape diagnostics.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let shape = |m: &Vec<Vec<i32>>, rows: usize, cols: usize, name: &str, out: &mut Vec<String>| {
            if m.len() != rows || m.iter().any(|r| r.len() != cols) {
                out.push(format!("topology.{name} must be {rows}x{cols}"));
                false
            } else {
                true
            }
        };
        if shape(&self.b, self.n_x, self.n_u, "B", &mut out) {
            if let Err(e) = derive_outflow_matrix(&self.b) {
                out.push(format!("topology: {e}"));
            }
        }
        if shape(&self.w, self.n_x, self.n_p, "W", &mut out) {
            for (i, row) in self.w.iter().enumerate() {
                for (p, &v) in row.iter().enumerate() {
                    if v != 0 && v != -1 {
                        out.push(format!("topology: W[{i}][{p}] = {v} must be 0 or -1"));
                    }
                }
            }
            for p in 0..self.n_p {
                if !self.w.iter().any(|r| r[p] == -1) {
                    out.push(format!("topology: product {p} leaves no buffer"));
                }
            }
        }
        out
    }

    /// `B_o = min(B, 0)`. Panics on an invalid topology; validate first.
    pub fn outflow(&self) -> Vec<Vec<i32>> {
        derive_outflow_matrix(&self.b).expect("topology validated")
    }
}

/// Outflow part of the machine incidence matrix: `B_o[i][j] = min(B[i][j], 0)`.
pub fn derive_outflow_matrix(b: &[Vec<i32>]) -> Result<Vec<Vec<i32>>, ModelError> {
    b.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| match v {
                    -1 | 0 | 1 => Ok(v.min(0)),
                    _ => Err(ModelError::InvalidEntry {
                        matrix: "B",
                        row: i,
                        col: j,
                        value: v,
                    }),
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineParams {
    /// Rates in units/hour.
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    /// kWh per unit processed.
    pub epsilon: Vec<f64>,
    /// USD per startup.
    pub c_on: Vec<f64>,
    /// Minimum run length in steps.
    pub min_run: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BufferParams {
    /// Defaults to zeros when omitted.
    #[serde(default)]
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub x0: Vec<f64>,
    pub x_g: Vec<f64>,
    pub x_t: Vec<f64>,
    /// Diagonal of the running deviation weight.
    pub qg: Vec<f64>,
    /// Diagonal of the terminal deviation weight.
    pub qt: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticityParams {
    /// Base demand potential, units/day.
    pub a: f64,
    /// Price sensitivity, units/USD.
    pub b: f64,
    pub p_min: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlackParams {
    pub tau: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    pub steps_per_day: usize,
    pub dt_hours: f64,
    pub days: usize,
}

/// Measured plant state at the start of a control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub x: Vec<f64>,
    pub delta_prev: Vec<bool>,
    /// Units delivered since the start of the day.
    pub lambda: f64,
    /// Steps each machine must still stay on to honour a started run.
    #[serde(default)]
    pub run_remaining: Vec<usize>,
}

impl PlantState {
    /// Initial state: buffers at `x0`, all machines off, nothing delivered.
    pub fn initial(buffers: &BufferParams, n_u: usize) -> Self {
        Self {
            x: buffers.x0.clone(),
            delta_prev: vec![false; n_u],
            lambda: 0.0,
            run_remaining: vec![0; n_u],
        }
    }
}

/// Per-step grid price (USD/kWh) and available renewable energy (kWh).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergySeries {
    pub rho_e: Vec<f64>,
    pub e_ar: Vec<f64>,
}

impl EnergySeries {
    /// Slice `[start, start + len)` of both series.
    pub fn window(&self, start: usize, len: usize) -> EnergySeries {
        EnergySeries {
            rho_e: self.rho_e[start..start + len].to_vec(),
            e_ar: self.e_ar[start..start + len].to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.rho_e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_e.is_empty()
    }
}

fn check_len(what: &'static str, got: usize, want: usize) -> Result<(), ModelError> {
    if got == want {
        Ok(())
    } else {
        Err(ModelError::Dimension { what, got, want })
    }
}

/// `x + B u + W d`.
pub fn step_dynamics(
    x: &[f64],
    u: &[f64],
    d: &[f64],
    topology: &NetworkTopology,
) -> Result<Vec<f64>, ModelError> {
    check_len("x", x.len(), topology.n_x)?;
    check_len("u", u.len(), topology.n_u)?;
    check_len("d", d.len(), topology.n_p)?;
    Ok((0..topology.n_x)
        .map(|i| {
            let inflow: f64 = topology.b[i].iter().zip(u).map(|(&b, u)| b as f64 * u).sum();
            let ship: f64 = topology.w[i].iter().zip(d).map(|(&w, d)| w as f64 * d).sum();
            x[i] + inflow + ship
        })
        .collect())
}

/// Energy drawn in one step, `Σ_j ε_j u_j Δt` (kWh).
pub fn energy_of_controls(u: &[f64], epsilon: &[f64], dt: f64) -> Result<f64, ModelError> {
    check_len("u", u.len(), epsilon.len())?;
    Ok(u.iter().zip(epsilon).map(|(u, e)| e * u * dt).sum())
}

/// Daily demand `a - b p`. The price must already be projected.
pub fn demand_from_price(p: f64, elasticity: &ElasticityParams) -> Result<f64, ModelError> {
    if !(p >= elasticity.p_min && p <= elasticity.p_max) {
        return Err(ModelError::PriceOutOfBounds {
            price: p,
            p_min: elasticity.p_min,
            p_max: elasticity.p_max,
        });
    }
    Ok(elasticity.a - elasticity.b * p)
}

/// Allowed shortfall fraction `τ (1 - η (1 - ξ))` with day progress
/// `η = (h + k) / H`.
pub fn slack_fraction(k: usize, h: usize, steps_per_day: usize, slack: &SlackParams) -> Result<f64, ModelError> {
    let step = h + k;
    if step > steps_per_day {
        return Err(ModelError::ClockOverrun { step, steps_per_day });
    }
    let eta = step as f64 / steps_per_day as f64;
    Ok(slack.tau * (1.0 - eta * (1.0 - slack.xi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn serial_two() -> NetworkTopology {
        NetworkTopology {
            n_x: 2,
            n_u: 2,
            n_p: 1,
            b: vec![vec![1, -1], vec![0, 1]],
            w: vec![vec![0], vec![-1]],
        }
    }

    #[test]
    fn outflow_is_negative_part() {
        let b = vec![vec![1, -1], vec![0, 1]];
        assert_eq!(derive_outflow_matrix(&b).unwrap(), vec![vec![0, -1], vec![0, 0]]);
        assert_eq!(derive_outflow_matrix(&[vec![1, 1, 1]]).unwrap(), vec![vec![0, 0, 0]]);
    }

    #[test]
    fn outflow_rejects_bad_entry() {
        assert_eq!(
            derive_outflow_matrix(&[vec![0, 2]]),
            Err(ModelError::InvalidEntry {
                matrix: "B",
                row: 0,
                col: 1,
                value: 2
            })
        );
    }

    #[test]
    fn dynamics_examples() {
        let t = serial_two();
        assert_eq!(step_dynamics(&[0.0, 0.0], &[2.0, 0.0], &[0.0], &t).unwrap(), vec![2.0, 0.0]);
        let single = NetworkTopology {
            n_x: 1,
            n_u: 1,
            n_p: 1,
            b: vec![vec![0]],
            w: vec![vec![-1]],
        };
        assert_eq!(step_dynamics(&[5.0], &[0.0], &[3.0], &single).unwrap(), vec![2.0]);
        assert_eq!(step_dynamics(&[1.5, 2.5], &[0.0, 0.0], &[0.0], &t).unwrap(), vec![1.5, 2.5]);
        assert!(step_dynamics(&[0.0], &[0.0, 0.0], &[0.0], &t).is_err());
    }

    #[test]
    fn energy_examples() {
        let eps = [3.5, 8.2, 6.7, 4.3, 5.8, 9.5];
        assert_eq!(energy_of_controls(&[0.0; 6], &eps, 1.0).unwrap(), 0.0);
        let e = energy_of_controls(&[10.0, 8.0, 8.0, 8.0, 8.0, 8.0], &eps, 1.0).unwrap();
        // 35 + 8 * (8.2 + 6.7 + 4.3 + 5.8 + 9.5) = 35 + 276
        assert!((e - 311.0).abs() < 1e-12);
        assert_eq!(energy_of_controls(&[10.0], &[3.5], 1.0).unwrap(), 35.0);
    }

    #[test]
    fn demand_examples() {
        let el = ElasticityParams {
            a: 120.0,
            b: 0.8,
            p_min: 70.0,
            p_max: 120.0,
        };
        assert!((demand_from_price(82.5, &el).unwrap() - 54.0).abs() < 1e-12);
        assert!((demand_from_price(120.0, &el).unwrap() - 24.0).abs() < 1e-12);
        assert!((demand_from_price(70.0, &el).unwrap() - 64.0).abs() < 1e-12);
        assert!(demand_from_price(65.0, &el).is_err());
    }

    #[test]
    fn slack_examples() {
        let s = SlackParams { tau: 0.05, xi: 0.5 };
        assert!((slack_fraction(0, 0, 24, &s).unwrap() - 0.05).abs() < 1e-15);
        assert!((slack_fraction(4, 20, 24, &s).unwrap() - 0.025).abs() < 1e-15);
        assert!((slack_fraction(0, 12, 24, &s).unwrap() - 0.0375).abs() < 1e-15);
        assert!(slack_fraction(2, 23, 24, &s).is_err());
    }
}
