//! Deterministic synthetic price and solar profiles for tests and demos.
//!
//! Solar follows a half-sine between 06:00 and 18:00 peaking at noon; grid
//! prices sit on a flat base with a morning and an evening peak.

use std::f64::consts::PI;

use crate::model::EnergySeries;

/// Shape parameters of the generated series.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub days: usize,
    pub steps_per_day: usize,
    /// Clear-sky solar peak (kWh per step).
    pub solar_peak: f64,
    /// Per-day multiplier on the solar peak, cycled over the days.
    pub solar_day_scale: Vec<f64>,
    /// Off-peak grid price (USD/kWh).
    pub price_base: f64,
    /// Grid price at the top of each peak (USD/kWh).
    pub price_peak: f64,
}

impl Default for SyntheticSpec {
    /// Five days of hourly data with solar sized at roughly half the line's
    /// full-rate energy draw.
    fn default() -> Self {
        Self {
            days: 5,
            steps_per_day: 24,
            solar_peak: 155.0,
            solar_day_scale: vec![1.0, 0.85, 1.1, 0.95, 1.05],
            price_base: 0.03,
            price_peak: 0.09,
        }
    }
}

/// Solar availability at fractional hour-of-day `t`.
pub fn solar_shape(t: f64) -> f64 {
    if (6.0..=18.0).contains(&t) {
        (PI * (t - 6.0) / 12.0).sin().max(0.0)
    } else {
        0.0
    }
}

/// Two-peak price shape in `[0, 1]`: mornings around 08:00, evenings
/// around 18:00.
pub fn price_shape(t: f64) -> f64 {
    let bump = |c: f64, w: f64| (-((t - c) / w).powi(2)).exp();
    bump(8.0, 1.5).max(bump(18.0, 2.0))
}

pub fn generate(spec: &SyntheticSpec) -> EnergySeries {
    let n = spec.days * spec.steps_per_day;
    let step_hours = 24.0 / spec.steps_per_day as f64;
    let mut series = EnergySeries {
        rho_e: Vec::with_capacity(n),
        e_ar: Vec::with_capacity(n),
    };
    for day in 0..spec.days {
        let scale = if spec.solar_day_scale.is_empty() {
            1.0
        } else {
            spec.solar_day_scale[day % spec.solar_day_scale.len()]
        };
        for k in 0..spec.steps_per_day {
            // sample at the middle of the step
            let t = (k as f64 + 0.5) * step_hours;
            let price = spec.price_base + (spec.price_peak - spec.price_base) * price_shape(t);
            series.rho_e.push(round6(price));
            series.e_ar.push(round6(spec.solar_peak * scale * solar_shape(t)));
        }
    }
    series
}

// keeps CSV files short and exactly reproducible
fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solar_is_zero_at_night_and_peaks_midday() {
        let s = generate(&SyntheticSpec::default());
        assert_eq!(s.len(), 120);
        assert_eq!(s.e_ar[0], 0.0);
        assert_eq!(s.e_ar[23], 0.0);
        let (imax, _) = s.e_ar[..24]
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert!(imax == 11 || imax == 12);
    }

    #[test]
    fn prices_between_base_and_peak() {
        let spec = SyntheticSpec::default();
        let s = generate(&spec);
        assert!(s.rho_e.iter().all(|&p| p >= spec.price_base - 1e-9 && p <= spec.price_peak + 1e-9));
        assert!(s.rho_e[8] > 0.08 && s.rho_e[3] < 0.035);
    }
}
