//! Analytic probabilities for the three state kinds.
//!
//! * conditional: probability of the property given detection,
//! * overall: unconditional probability, including outcome sets that
//!   contain the no-registration outcome,
//! * quantum: the standard quantum prediction ignoring detection.

use crate::detection::{DetectionModel, StateRepr};
use crate::error::{EsrError, Result};
use crate::linalg::{tensor_product, trace_product, ComplexOperator, StateVector};
use crate::observables::{effect, projector, Property};
use crate::states::{bayes_weights, make_improper_from_composite, State};

/// Probabilities at or below this are treated as zero when they appear as
/// denominators or when deciding whether an outcome is possible.
pub const ZERO_PROBABILITY: f64 = 1e-14;

/// Slack allowed outside [0, 1] before a raw value counts as corrupt.
pub const INTEGRITY_SLACK: f64 = 1e-10;

/// Clamps a raw probability to [0, 1], failing if it strays further than
/// [`INTEGRITY_SLACK`].
pub fn checked_probability(raw: f64, context: &'static str) -> Result<f64> {
    if !raw.is_finite() || !(-INTEGRITY_SLACK..=1.0 + INTEGRITY_SLACK).contains(&raw) {
        return Err(EsrError::NumericalIntegrity { context, value: raw });
    }
    Ok(raw.clamp(0.0, 1.0))
}

fn check_dim(state: &State, prop: &Property) -> Result<()> {
    if state.dim() != prop.observable().dim() {
        return Err(EsrError::DimensionMismatch {
            expected: prop.observable().dim(),
            found: state.dim(),
        });
    }
    Ok(())
}

fn repr_quantum(repr: StateRepr<'_>, p: &ComplexOperator) -> Result<f64> {
    repr.expectation(p)
}

fn repr_overall(repr: StateRepr<'_>, prop: &Property, model: &DetectionModel) -> Result<f64> {
    let t = effect(prop.observable(), prop.outcomes(), model, repr)?;
    repr.expectation(&t)
}

/// Probability that the property is displayed given that the object is
/// detected. Undefined for outcome sets containing a0.
pub fn conditional_prob(state: &State, prop: &Property, model: &DetectionModel) -> Result<f64> {
    prop.require_f_class()?;
    check_dim(state, prop)?;
    let p = projector(prop.observable(), prop.outcomes())?;
    let raw = match state {
        State::Pure(s) => repr_quantum(s.repr(), &p)?,
        State::Improper(n) => repr_quantum(n.repr(), &p)?,
        State::Proper(m) => {
            let (weights, _) = bayes_weights(m, prop, model)?;
            m.components()
                .iter()
                .zip(&weights)
                .map(|(c, w)| Ok(w * repr_quantum(c.repr(), &p)?))
                .sum::<Result<f64>>()?
        }
    };
    checked_probability(raw, "conditional probability")
}

/// Unconditional probability that a measurement displays the property.
pub fn overall_prob(state: &State, prop: &Property, model: &DetectionModel) -> Result<f64> {
    check_dim(state, prop)?;
    let raw = match state {
        State::Pure(s) => repr_overall(s.repr(), prop, model)?,
        State::Improper(n) => repr_overall(n.repr(), prop, model)?,
        State::Proper(m) => m
            .components()
            .iter()
            .map(|c| Ok(c.weight * repr_overall(c.repr(), prop, model)?))
            .sum::<Result<f64>>()?,
    };
    checked_probability(raw, "overall probability")
}

/// Standard quantum prediction `Tr[rho P(X)]`.
pub fn quantum_prob(state: &State, prop: &Property) -> Result<f64> {
    prop.require_f_class()?;
    check_dim(state, prop)?;
    let p = projector(prop.observable(), prop.outcomes())?;
    let raw = trace_product(&state.qm_density(), &p)?.re;
    checked_probability(raw, "quantum probability")
}

/// Overall probability of a proper mixture through its property-indexed
/// representation, `Tr[p_M^d(F) rho_M(F) P(X)]`. Agrees with
/// [`overall_prob`] wherever both are defined.
pub fn overall_prob_via_representation(
    m: &crate::states::ProperMixture,
    prop: &Property,
    model: &DetectionModel,
) -> Result<f64> {
    let pair = crate::states::esr_representation(m, prop, model)?;
    let p = projector(prop.observable(), prop.outcomes())?;
    let raw = pair.pd_of_f * trace_product(&pair.rho_of_f, &p)?.re;
    checked_probability(raw, "overall probability")
}

/// `A (x) I` on the composite space.
pub fn lift_first(op: &ComplexOperator, dim_second: usize) -> ComplexOperator {
    tensor_product(op, &ComplexOperator::identity(dim_second))
}

/// Conditional probability of a first-subsystem property evaluated on the
/// composite space: `Tr[rho_Psi P(X) (x) I]`.
pub fn composite_conditional_prob(
    psi: &StateVector,
    dim_first: usize,
    dim_second: usize,
    prop: &Property,
) -> Result<f64> {
    prop.require_f_class()?;
    check_composite(psi, dim_first, dim_second, prop)?;
    let p = lift_first(&projector(prop.observable(), prop.outcomes())?, dim_second);
    checked_probability(p.expectation(psi)?.re, "composite conditional probability")
}

/// Overall probability of a first-subsystem property evaluated on the
/// composite space: `Tr[rho_Psi T_{rho_N}(X) (x) I]`. Detection is looked
/// up for the reduced density operator under `key`.
pub fn composite_overall_prob(
    psi: &StateVector,
    dim_first: usize,
    dim_second: usize,
    prop: &Property,
    model: &DetectionModel,
    key: Option<&str>,
) -> Result<f64> {
    check_composite(psi, dim_first, dim_second, prop)?;
    let reduced = make_improper_from_composite(psi, dim_first, dim_second)?;
    let mut repr = StateRepr::density(reduced.rho());
    if let Some(k) = key {
        repr = repr.with_key(k);
    }
    let t = effect(prop.observable(), prop.outcomes(), model, repr)?;
    let lifted = lift_first(&t, dim_second);
    checked_probability(lifted.expectation(psi)?.re, "composite overall probability")
}

fn check_composite(psi: &StateVector, dim_first: usize, dim_second: usize, prop: &Property) -> Result<()> {
    if psi.dim() != dim_first * dim_second {
        return Err(EsrError::DimensionMismatch {
            expected: dim_first * dim_second,
            found: psi.dim(),
        });
    }
    if prop.observable().dim() != dim_first {
        return Err(EsrError::DimensionMismatch {
            expected: dim_first,
            found: prop.observable().dim(),
        });
    }
    Ok(())
}
