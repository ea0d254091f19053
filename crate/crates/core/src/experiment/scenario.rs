//! Result rows, sweeps and the spin-1/2 proper-mixture scenario.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{detect_prob_property, DetectionModel};
use crate::error::{EsrError, Result};
use crate::montecarlo::{run_ensemble, McOptions};
use crate::observables::Property;
use crate::probability::{conditional_prob, overall_prob, quantum_prob};
use crate::states::State;

use super::config::{ExperimentConfig, ResolvedConfig, SweepSpec};

/// One line of an experiment table. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub p_conditional: f64,
    pub p_overall: f64,
    pub p_quantum: f64,
    pub p_detect: f64,
    pub mc_frequency: Option<f64>,
    pub mc_halfwidth: Option<f64>,
}

impl ResultRow {
    pub const CSV_HEADER: [&'static str; 7] = [
        "sweep_value",
        "p_conditional",
        "p_overall",
        "p_quantum",
        "p_detect",
        "mc_frequency",
        "mc_halfwidth",
    ];

    pub fn csv_fields(&self) -> [String; 7] {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        [
            self.sweep_value.to_string(),
            self.p_conditional.to_string(),
            self.p_overall.to_string(),
            self.p_quantum.to_string(),
            self.p_detect.to_string(),
            opt(self.mc_frequency),
            opt(self.mc_halfwidth),
        ]
    }
}

/// All analytic columns (and optionally Monte Carlo columns) for one
/// property of one state.
pub fn evaluate_row(
    state: &State,
    prop: &Property,
    model: &DetectionModel,
    sweep_value: f64,
    mc: Option<&McOptions>,
) -> Result<ResultRow> {
    let (mc_frequency, mc_halfwidth) = match mc {
        Some(opts) => {
            let report = run_ensemble(state, prop, model, opts)?;
            (Some(report.yes_frequency), Some(report.confidence_halfwidth))
        }
        None => (None, None),
    };
    Ok(ResultRow {
        sweep_value,
        p_conditional: conditional_prob(state, prop, model)?,
        p_overall: overall_prob(state, prop, model)?,
        p_quantum: quantum_prob(state, prop)?,
        p_detect: detect_prob_property(model, state, prop)?,
        mc_frequency,
        mc_halfwidth,
    })
}

/// Evaluates the configured experiment at every sweep point, in parallel,
/// keeping sweep order. Row `i` uses Monte Carlo seed `seed + i`.
pub fn run_sweep(
    resolved: &ResolvedConfig,
    sweep: Option<&SweepSpec>,
    mc: Option<&McOptions>,
) -> Result<Vec<ResultRow>> {
    let points: Vec<Option<(String, f64)>> = match sweep {
        Some(s) => s
            .values()?
            .into_iter()
            .map(|v| Some((s.parameter.clone(), v)))
            .collect(),
        None => vec![None],
    };
    points
        .par_iter()
        .enumerate()
        .map(|(i, point)| {
            let prop = resolved.property(point.as_ref().map(|(p, v)| (p.as_str(), *v)))?;
            let sweep_value = match point {
                Some((_, v)) => *v,
                None => resolved.recipe().parameter("theta").unwrap_or(0.0),
            };
            let row_mc = mc.map(|o| McOptions {
                seed: o.seed.wrapping_add(i as u64),
                ..*o
            });
            evaluate_row(
                &resolved.experiment_state,
                &prop,
                &resolved.model,
                sweep_value,
                row_mc.as_ref(),
            )
        })
        .collect()
}

/// Spin-1/2 proper mixture of the sigma_z eigenstates, measured for spin
/// up along the direction at polar angle `theta` in the xz-plane. Everything
/// is computed through the generic probability engine.
pub fn spin_scenario(p_plus: f64, d_plus: f64, d_minus: f64, theta: f64) -> Result<ResultRow> {
    for (name, v) in [("p_plus", p_plus), ("d_plus", d_plus), ("d_minus", d_minus)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(EsrError::InvalidParameter(format!("{name} = {v} must lie in [0, 1]")));
        }
    }
    if !theta.is_finite() {
        return Err(EsrError::InvalidParameter("theta must be finite".into()));
    }
    let resolved = ResolvedConfig::resolve(&ExperimentConfig::spin_mixture(p_plus, d_plus, d_minus))?;
    let prop = resolved.property(Some(("theta", theta)))?;
    evaluate_row(&resolved.experiment_state, &prop, &resolved.model, theta, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_3, PI};

    /// Closed forms with c = cos^2(theta/2).
    fn closed(p: f64, dp: f64, dm: f64, theta: f64) -> (f64, f64, f64) {
        let c = (theta / 2.0).cos().powi(2);
        let q = p * c + (1.0 - p) * (1.0 - c);
        let o = p * dp * c + (1.0 - p) * dm * (1.0 - c);
        (o / (p * dp + (1.0 - p) * dm), o, q)
    }

    #[test]
    fn spin_example_values() {
        let row = spin_scenario(0.6, 0.9, 0.8, FRAC_PI_3).unwrap();
        assert!((row.p_quantum - 0.55).abs() < 1e-12);
        assert!((row.p_overall - 0.485).abs() < 1e-12);
        assert!((row.p_conditional - 0.485 / 0.86).abs() < 1e-12);
        assert!((row.p_detect - 0.86).abs() < 1e-12);
    }

    #[test]
    fn matches_closed_form_on_grid() {
        for k in 0..100 {
            let theta = PI * k as f64 / 99.0;
            let row = spin_scenario(0.35, 0.55, 0.95, theta).unwrap();
            let (cnd, o, q) = closed(0.35, 0.55, 0.95, theta);
            assert!((row.p_conditional - cnd).abs() < 1e-12);
            assert!((row.p_overall - o).abs() < 1e-12);
            assert!((row.p_quantum - q).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_detection_factors_out() {
        for theta in [0.0, 0.8, 2.0, PI] {
            let row = spin_scenario(0.6, 0.7, 0.7, theta).unwrap();
            assert!((row.p_conditional - row.p_quantum).abs() < 1e-12);
            assert!((row.p_overall - 0.7 * row.p_quantum).abs() < 1e-12);
            let ideal = spin_scenario(0.6, 1.0, 1.0, theta).unwrap();
            assert!((ideal.p_conditional - ideal.p_quantum).abs() < 1e-12);
            assert!((ideal.p_overall - ideal.p_quantum).abs() < 1e-12);
        }
    }

    #[test]
    fn parameter_ranges() {
        assert!(spin_scenario(1.2, 0.9, 0.8, 0.0).is_err());
        assert!(spin_scenario(0.6, -0.1, 0.8, 0.0).is_err());
        // single-component limits
        assert!(spin_scenario(1.0, 0.9, 0.8, 0.5).is_ok());
        assert!(spin_scenario(0.0, 0.9, 0.8, 0.5).is_ok());
    }
}
