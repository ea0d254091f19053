//! Invariant checks run by `esr validate` on the objects of a config.

use serde::Serialize;

use crate::detection::{detect_prob_property, DetectionModel, StateRepr};
use crate::error::Result;
use crate::linalg::ComplexOperator;
use crate::observables::{complement, effect, GeneralizedObservable, OutcomeSet, Property};
use crate::probability::{
    composite_conditional_prob, composite_overall_prob, conditional_prob, overall_prob, quantum_prob, ZERO_PROBABILITY,
};
use crate::states::State;

use super::config::ResolvedConfig;

/// Outcome sets are enumerated exhaustively up to this spectrum size.
const MAX_ENUMERATED_SPECTRUM: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub worst: f64,
    pub tolerance: f64,
}

struct Check {
    name: &'static str,
    tolerance: f64,
    checked: usize,
    worst: f64,
}

impl Check {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            checked: 0,
            worst: 0.0,
        }
    }

    fn record(&mut self, deviation: f64) {
        self.checked += 1;
        if deviation.is_nan() || deviation > self.worst {
            self.worst = if deviation.is_nan() { f64::INFINITY } else { deviation };
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            passed: self.worst <= self.tolerance,
            checked: self.checked,
            worst: self.worst,
            tolerance: self.tolerance,
        }
    }
}

fn reprs(state: &State) -> Vec<StateRepr<'_>> {
    match state {
        State::Pure(s) => vec![s.repr()],
        State::Improper(n) => vec![n.repr()],
        State::Proper(m) => m.components().iter().map(|c| c.repr()).collect(),
    }
}

fn pov_checks(
    obs: &GeneralizedObservable,
    sets: &[OutcomeSet],
    repr: StateRepr<'_>,
    model: &DetectionModel,
    pov: &mut Check,
    commute: &mut Check,
    bounds: &mut Check,
) -> Result<()> {
    let identity = ComplexOperator::identity(obs.dim());
    let effects = sets
        .iter()
        .map(|x| effect(obs, x, model, repr))
        .collect::<Result<Vec<_>>>()?;
    for (x, t) in sets.iter().zip(&effects) {
        let tc = effect(obs, &complement(x, obs), model, repr)?;
        pov.record(t.add(&tc)?.max_abs_diff(&identity));
        let eig = t.hermitian_eigenvalues();
        let below = -eig.first().copied().unwrap_or(0.0);
        let above = eig.last().copied().unwrap_or(0.0) - 1.0;
        bounds.record(below.max(above).max(0.0));
    }
    for (i, a) in effects.iter().enumerate() {
        for b in &effects[i + 1..] {
            commute.record(a.mul(b)?.max_abs_diff(&b.mul(a)?));
        }
    }
    Ok(())
}

/// Runs every invariant on the experiment observable against every state
/// of matching dimension.
pub fn validate_config(resolved: &ResolvedConfig) -> Result<Vec<CheckResult>> {
    let obs = resolved.property(None)?.observable().clone();
    let len = obs.eigenvalues().len().min(MAX_ENUMERATED_SPECTRUM);
    let sets: Vec<OutcomeSet> = OutcomeSet::enumerate_all(len);
    let model = &resolved.model;

    let mut pov = Check::new("effect(X) + effect(X^c) = I", 1e-10);
    let mut commute = Check::new("effects commute", 1e-10);
    let mut bounds = Check::new("0 <= effect <= I", 1e-10);
    let mut factorization = Check::new("overall = detection x conditional", 1e-12);
    let mut complement_rule = Check::new("overall(F) + overall(F^c) = 1", 1e-12);
    let mut reduction = Check::new("ideal model reduces to quantum", 1e-10);
    let mut improper_qm = Check::new("improper conditional = quantum", 1e-12);
    let mut composite = Check::new("composite path = reduced path", 1e-12);

    for (_, state) in resolved.states.iter().filter(|(_, s)| s.dim() == obs.dim()) {
        for repr in reprs(state) {
            pov_checks(&obs, &sets, repr, model, &mut pov, &mut commute, &mut bounds)?;
        }
        for x in &sets {
            let prop = Property::new(obs.clone(), x.clone())?;
            let o = overall_prob(state, &prop, model)?;
            let oc = overall_prob(state, &prop.complement(), model)?;
            complement_rule.record((o + oc - 1.0).abs());
            if !prop.in_f_class() {
                continue;
            }
            let q = quantum_prob(state, &prop)?;
            reduction.record((overall_prob(state, &prop, &DetectionModel::Ideal)? - q).abs());
            if q > ZERO_PROBABILITY {
                reduction.record((conditional_prob(state, &prop, &DetectionModel::Ideal)? - q).abs());
            }
            let defined = match state {
                State::Proper(_) => detect_prob_property(model, state, &prop)
                    .map(|d| d > ZERO_PROBABILITY)
                    .unwrap_or(false),
                _ => q > ZERO_PROBABILITY,
            };
            if defined {
                let d = detect_prob_property(model, state, &prop)?;
                let cnd = conditional_prob(state, &prop, model)?;
                factorization.record((o - d * cnd).abs());
            }
            if let (State::Improper(n), true) = (state, q > ZERO_PROBABILITY) {
                improper_qm.record((conditional_prob(state, &prop, model)? - q).abs());
                if let Some(prov) = n.provenance() {
                    let a = composite_conditional_prob(&prov.psi, prov.dim_first, prov.dim_second, &prop)?;
                    composite.record((a - conditional_prob(state, &prop, model)?).abs());
                    let b = composite_overall_prob(
                        &prov.psi,
                        prov.dim_first,
                        prov.dim_second,
                        &prop,
                        model,
                        Some(n.label()),
                    )?;
                    composite.record((b - o).abs());
                }
            }
        }
    }

    Ok([
        pov,
        commute,
        bounds,
        factorization,
        complement_rule,
        reduction,
        improper_qm,
        composite,
    ]
    .into_iter()
    .map(Check::finish)
    .collect())
}
