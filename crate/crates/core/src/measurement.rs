//! Nondestructive idealized measurements and the state updates they induce.
//!
//! A yes outcome sandwiches the state with the effect of the measured
//! property; a no outcome uses the effect of the complementary property,
//! whose outcome set carries the no-registration outcome. Detection
//! probabilities are always evaluated at the state being updated, so a later
//! measurement on the post-measurement state re-queries the model with the
//! new vector or density operator.

use rand::Rng;
use serde::Serialize;

use crate::detection::{DetectionModel, StateRepr};
use crate::error::{EsrError, Result};
use crate::linalg::{default_tol, ComplexOperator, StateVector};
use crate::observables::{effect, Property};
use crate::probability::{overall_prob, ZERO_PROBABILITY};
use crate::states::{
    make_proper_mixture, ImproperMixture, MixtureComponent, ProperMixture, PureState, State, MIN_WEIGHT,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementOutcome {
    Yes,
    No,
}

impl MeasurementOutcome {
    /// The property whose effect drives the update for this outcome.
    fn selected(self, prop: &Property) -> Property {
        match self {
            MeasurementOutcome::Yes => prop.clone(),
            MeasurementOutcome::No => prop.complement(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub property: Property,
    pub outcome: MeasurementOutcome,
    pub pre_state: State,
    pub post_state: State,
    pub probability_of_outcome: f64,
}

/// `T|psi> / ||T|psi>||` with canonical phase, plus `<psi|T|psi>`.
fn sandwich_vector(
    repr_vector: &StateVector,
    key: &str,
    selected: &Property,
    model: &DetectionModel,
) -> Result<(StateVector, f64)> {
    let repr = StateRepr::vector(repr_vector).with_key(key);
    let t = effect(selected.observable(), selected.outcomes(), model, repr)?;
    let prob = t.expectation(repr_vector)?.re;
    if prob <= ZERO_PROBABILITY {
        return Err(EsrError::ZeroProbabilityOutcome);
    }
    let updated = StateVector::from_dvector(t.apply(repr_vector)?)?;
    Ok((updated.with_canonical_phase(default_tol()), prob))
}

/// Generalized projection update of a pure state.
pub fn gpp_update(
    s: &PureState,
    prop: &Property,
    outcome: MeasurementOutcome,
    model: &DetectionModel,
) -> Result<PureState> {
    let selected = outcome.selected(prop);
    let (v, _) = sandwich_vector(s.vector(), s.label(), &selected, model)?;
    Ok(PureState::new(v, s.label()))
}

/// Generalized Lüders update of a proper mixture: each component is updated
/// as a pure state and reweighted by its share of the outcome probability.
///
/// Components that cannot produce the outcome are dropped. Components whose
/// updated vectors coincide are merged, keeping the first one's label and
/// device.
pub fn glp_update(
    m: &ProperMixture,
    prop: &Property,
    outcome: MeasurementOutcome,
    model: &DetectionModel,
) -> Result<ProperMixture> {
    let selected = outcome.selected(prop);
    let mut survivors: Vec<MixtureComponent> = Vec::new();
    let mut total = 0.0;
    for c in m.components() {
        let repr = c.repr();
        let t = effect(selected.observable(), selected.outcomes(), model, repr)?;
        let p_t = repr.expectation(&t)?.max(0.0);
        total += c.weight * p_t;
        if p_t <= ZERO_PROBABILITY {
            continue;
        }
        let (v, _) = sandwich_vector(c.state.vector(), &c.device, &selected, model)?;
        let weight = c.weight * p_t;
        let tol = default_tol();
        match survivors.iter_mut().find(|s| s.state.vector().max_abs_diff(&v) <= tol) {
            Some(existing) => existing.weight += weight,
            None => survivors.push(MixtureComponent::new(
                PureState::new(v, c.state.label()),
                weight,
                c.device.clone(),
            )),
        }
    }
    if total <= ZERO_PROBABILITY || survivors.is_empty() {
        return Err(EsrError::ZeroProbabilityOutcome);
    }
    let kept: f64 = survivors.iter().map(|s| s.weight).sum();
    for s in &mut survivors {
        s.weight /= kept;
    }
    survivors.retain(|s| s.weight >= MIN_WEIGHT);
    let kept: f64 = survivors.iter().map(|s| s.weight).sum();
    for s in &mut survivors {
        s.weight /= kept;
    }
    make_proper_mixture(survivors)
}

/// Generalized projection update applied to an improper mixture:
/// `T rho T / Tr[T rho T]`. The composite provenance is dropped.
pub fn improper_update(
    n: &ImproperMixture,
    prop: &Property,
    outcome: MeasurementOutcome,
    model: &DetectionModel,
) -> Result<ImproperMixture> {
    let selected = outcome.selected(prop);
    let repr = n.repr();
    let t = effect(selected.observable(), selected.outcomes(), model, repr)?;
    if repr.expectation(&t)? <= ZERO_PROBABILITY {
        return Err(EsrError::ZeroProbabilityOutcome);
    }
    let sandwiched = t.mul(n.rho())?.mul(&t)?;
    let norm = sandwiched.trace().re;
    if norm <= ZERO_PROBABILITY {
        return Err(EsrError::ZeroProbabilityOutcome);
    }
    let rho: ComplexOperator = sandwiched.scale(1.0 / norm).hermitian_part();
    Ok(ImproperMixture::updated(rho, n.label()))
}

/// Applies the update rule matching the state kind.
pub fn update_state(
    state: &State,
    prop: &Property,
    outcome: MeasurementOutcome,
    model: &DetectionModel,
) -> Result<State> {
    Ok(match state {
        State::Pure(s) => State::Pure(gpp_update(s, prop, outcome, model)?),
        State::Proper(m) => State::Proper(glp_update(m, prop, outcome, model)?),
        State::Improper(n) => State::Improper(improper_update(n, prop, outcome, model)?),
    })
}

/// Samples a yes/no outcome with the overall probability and applies the
/// matching update.
pub fn measure<R: Rng + ?Sized>(
    state: &State,
    prop: &Property,
    model: &DetectionModel,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    let p_yes = overall_prob(state, prop, model)?;
    let u: f64 = rng.random();
    let (outcome, probability) = if u < p_yes {
        (MeasurementOutcome::Yes, p_yes)
    } else {
        (MeasurementOutcome::No, 1.0 - p_yes)
    };
    let post_state = update_state(state, prop, outcome, model)?;
    Ok(MeasurementRecord {
        property: prop.clone(),
        outcome,
        pre_state: state.clone(),
        post_state,
        probability_of_outcome: probability,
    })
}
