//! Pure states, proper mixtures and improper mixtures.
//!
//! A proper mixture keeps its preparation recipe: the ordered list of pure
//! components with their weights and preparing devices. Two mixtures with
//! the same quantum density operator but different recipes are different
//! states here. The quantum density operator is only computed on demand for
//! baseline comparisons.

use num_complex::Complex64;

use crate::detection::{repr_detection, DetectionModel, StateRepr};
use crate::error::{EsrError, Result};
use crate::linalg::{default_tol, partial_trace_second, ComplexOperator, StateVector};
use crate::observables::Property;
use crate::probability::ZERO_PROBABILITY;

/// Smallest admissible mixture weight.
pub const MIN_WEIGHT: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    vector: StateVector,
    label: String,
}

impl PureState {
    pub fn new(vector: StateVector, label: impl Into<String>) -> Self {
        Self {
            vector,
            label: label.into(),
        }
    }

    pub fn vector(&self) -> &StateVector {
        &self.vector
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn density(&self) -> ComplexOperator {
        self.vector.density()
    }

    pub fn dim(&self) -> usize {
        self.vector.dim()
    }

    /// Detection lookups for a bare pure state use its label as key.
    pub fn repr(&self) -> StateRepr<'_> {
        StateRepr::vector(&self.vector).with_key(&self.label)
    }
}

/// Builds a pure state from amplitudes that must already be normalized.
pub fn make_pure(amplitudes: &[Complex64], label: impl Into<String>) -> Result<PureState> {
    Ok(PureState::new(StateVector::new(amplitudes, default_tol())?, label))
}

/// One preparation channel of a proper mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureComponent {
    pub state: PureState,
    pub weight: f64,
    /// Identifier of the preparing device; detection tables are keyed by it.
    pub device: String,
}

impl MixtureComponent {
    pub fn new(state: PureState, weight: f64, device: impl Into<String>) -> Self {
        Self {
            state,
            weight,
            device: device.into(),
        }
    }

    pub fn repr(&self) -> StateRepr<'_> {
        StateRepr::vector(self.state.vector()).with_key(&self.device)
    }
}

/// Equality is componentwise, never by density operator.
#[derive(Clone, Debug, PartialEq)]
pub struct ProperMixture {
    components: Vec<MixtureComponent>,
}

impl ProperMixture {
    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].state.dim()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    /// Quantum-mechanical density operator `sum_j p_j |psi_j><psi_j|`.
    pub fn qm_density(&self) -> ComplexOperator {
        self.components
            .iter()
            .fold(ComplexOperator::zeros(self.dim()), |acc, c| {
                acc.add(&c.state.density().scale(c.weight)).expect("equal dims")
            })
    }
}

/// Validates and builds a proper mixture, keeping component order.
pub fn make_proper_mixture(components: Vec<MixtureComponent>) -> Result<ProperMixture> {
    let first = components.first().ok_or(EsrError::EmptyMixture)?;
    let dim = first.state.dim();
    for c in &components {
        if !c.weight.is_finite() || c.weight < MIN_WEIGHT || c.weight > 1.0 + default_tol() {
            return Err(EsrError::InvalidWeight { weight: c.weight });
        }
        if c.state.dim() != dim {
            return Err(EsrError::DimensionMismatch {
                expected: dim,
                found: c.state.dim(),
            });
        }
    }
    let sum: f64 = components.iter().map(|c| c.weight).sum();
    if (sum - 1.0).abs() > default_tol() {
        return Err(EsrError::WeightSum { sum });
    }
    Ok(ProperMixture { components })
}

/// Where an improper mixture came from: a pure state of a composite system.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeProvenance {
    pub psi: StateVector,
    pub dim_first: usize,
    pub dim_second: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImproperMixture {
    rho: ComplexOperator,
    provenance: Option<CompositeProvenance>,
    label: String,
}

impl ImproperMixture {
    /// Wraps a density operator without composite provenance.
    pub fn from_density(rho: ComplexOperator, label: impl Into<String>) -> Result<Self> {
        let tol = default_tol();
        if !rho.is_density(tol) {
            return Err(EsrError::NotDensity(
                "expected Hermitian, positive semidefinite, unit trace".into(),
            ));
        }
        Ok(Self {
            rho: rho.hermitian_part(),
            provenance: None,
            label: label.into(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn rho(&self) -> &ComplexOperator {
        &self.rho
    }

    pub fn provenance(&self) -> Option<&CompositeProvenance> {
        self.provenance.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn purity(&self) -> f64 {
        crate::linalg::trace_product(&self.rho, &self.rho).expect("square").re
    }

    /// Rank one: the subsystem is in a pure state.
    pub fn is_pure(&self, tol: f64) -> bool {
        (self.purity() - 1.0).abs() <= tol
    }

    pub fn repr(&self) -> StateRepr<'_> {
        StateRepr::density(&self.rho).with_key(&self.label)
    }

    pub(crate) fn updated(rho: ComplexOperator, label: &str) -> Self {
        Self {
            rho,
            provenance: None,
            label: label.to_string(),
        }
    }
}

/// Reduced state of the first factor of the composite pure state `psi`.
pub fn make_improper_from_composite(psi: &StateVector, dim_first: usize, dim_second: usize) -> Result<ImproperMixture> {
    let rho = partial_trace_second(&psi.density(), dim_first, dim_second)?.hermitian_part();
    Ok(ImproperMixture {
        rho,
        provenance: Some(CompositeProvenance {
            psi: psi.clone(),
            dim_first,
            dim_second,
        }),
        label: "N".to_string(),
    })
}

/// Any of the three state kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Pure(PureState),
    Proper(ProperMixture),
    Improper(ImproperMixture),
}

impl State {
    pub fn dim(&self) -> usize {
        match self {
            State::Pure(s) => s.dim(),
            State::Proper(m) => m.dim(),
            State::Improper(n) => n.dim(),
        }
    }

    /// Density operator assigned by standard quantum mechanics.
    pub fn qm_density(&self) -> ComplexOperator {
        match self {
            State::Pure(s) => s.density(),
            State::Proper(m) => m.qm_density(),
            State::Improper(n) => n.rho().clone(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            State::Pure(_) => "pure",
            State::Proper(_) => "proper",
            State::Improper(_) => "improper",
        }
    }
}

impl From<PureState> for State {
    fn from(s: PureState) -> Self {
        State::Pure(s)
    }
}

impl From<ProperMixture> for State {
    fn from(m: ProperMixture) -> Self {
        State::Proper(m)
    }
}

impl From<ImproperMixture> for State {
    fn from(n: ImproperMixture) -> Self {
        State::Improper(n)
    }
}

/// Property-indexed representation of a proper mixture: the detection-
/// conditioned density operator and the mixture's detection probability.
#[derive(Clone, Debug, PartialEq)]
pub struct EsrPair {
    pub rho_of_f: ComplexOperator,
    pub pd_of_f: f64,
}

/// Per-component detection probabilities `p_{S_j}^d(F)`.
pub(crate) fn component_detections(m: &ProperMixture, prop: &Property, model: &DetectionModel) -> Result<Vec<f64>> {
    m.components()
        .iter()
        .map(|c| repr_detection(model, c.repr(), prop, true))
        .collect()
}

/// Bayes weights `p_j p_{S_j}^d(F) / p_M^d(F)` and the total `p_M^d(F)`.
pub(crate) fn bayes_weights(m: &ProperMixture, prop: &Property, model: &DetectionModel) -> Result<(Vec<f64>, f64)> {
    prop.require_f_class()?;
    let detections = component_detections(m, prop, model)?;
    let pd: f64 = m.components().iter().zip(&detections).map(|(c, d)| c.weight * d).sum();
    if pd <= ZERO_PROBABILITY {
        return Err(EsrError::ZeroTotalDetection);
    }
    let weights = m
        .components()
        .iter()
        .zip(&detections)
        .map(|(c, d)| c.weight * d / pd)
        .collect();
    Ok((weights, pd))
}

/// Evaluates the mixture's representation at the single property `prop`.
pub fn esr_representation(m: &ProperMixture, prop: &Property, model: &DetectionModel) -> Result<EsrPair> {
    let (weights, pd) = bayes_weights(m, prop, model)?;
    let rho = m
        .components()
        .iter()
        .zip(&weights)
        .try_fold(ComplexOperator::zeros(m.dim()), |acc, (c, w)| {
            acc.add(&c.state.density().scale(*w))
        })?;
    Ok(EsrPair {
        rho_of_f: rho,
        pd_of_f: pd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::DetectionTable;
    use crate::linalg::c;
    use crate::observables::{GeneralizedObservable, OutcomeSet};

    fn s_plus() -> PureState {
        PureState::new(StateVector::basis(2, 0), "S+")
    }

    fn s_minus() -> PureState {
        PureState::new(StateVector::basis(2, 1), "S-")
    }

    fn spin_mixture() -> ProperMixture {
        make_proper_mixture(vec![
            MixtureComponent::new(s_plus(), 0.6, "plus"),
            MixtureComponent::new(s_minus(), 0.4, "minus"),
        ])
        .unwrap()
    }

    fn spin_model() -> DetectionModel {
        let mut table = DetectionTable::new();
        for lambda in [-1.0, 1.0] {
            table = table
                .with_entry(Some("plus"), "sigma_n", lambda, 0.9)
                .unwrap()
                .with_entry(Some("minus"), "sigma_n", lambda, 0.8)
                .unwrap();
        }
        DetectionModel::PerEigenvalue(table)
    }

    fn f_n(theta: f64) -> Property {
        let obs = GeneralizedObservable::spin("sigma_n", theta, 0.0).unwrap();
        let x = OutcomeSet::from_eigenvalues(&obs, &[1.0], false, 1e-10).unwrap();
        Property::new(obs, x).unwrap()
    }

    #[test]
    fn make_pure_cases() {
        let s = make_pure(&[c(1.0, 0.0), c(0.0, 0.0)], "S+").unwrap();
        assert_eq!(s.density(), ComplexOperator::diagonal(&[1.0, 0.0]));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(make_pure(&[c(h, 0.0), c(h, 0.0)], "x+").is_ok());
        assert_eq!(make_pure(&[c(0.0, 0.0); 2], "zero"), Err(EsrError::ZeroVector));
        assert!(matches!(
            make_pure(&[c(1.0, 0.0), c(1.0, 0.0)], "unnormalized"),
            Err(EsrError::NotNormalized { .. })
        ));
    }

    #[test]
    fn proper_mixture_validation() {
        assert!(make_proper_mixture(vec![MixtureComponent::new(s_plus(), 1.0, "a")]).is_ok());
        assert!(matches!(
            make_proper_mixture(vec![
                MixtureComponent::new(s_plus(), 0.5, "a"),
                MixtureComponent::new(s_minus(), 0.6, "b"),
            ]),
            Err(EsrError::WeightSum { .. })
        ));
        assert_eq!(make_proper_mixture(vec![]), Err(EsrError::EmptyMixture));
        assert!(matches!(
            make_proper_mixture(vec![
                MixtureComponent::new(s_plus(), 1.0, "a"),
                MixtureComponent::new(s_minus(), 0.0, "b"),
            ]),
            Err(EsrError::InvalidWeight { .. })
        ));
    }

    #[test]
    fn operational_equality() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let x_plus = PureState::new(StateVector::new(&[c(h, 0.0), c(h, 0.0)], 1e-12).unwrap(), "x+");
        let x_minus = PureState::new(StateVector::new(&[c(h, 0.0), c(-h, 0.0)], 1e-12).unwrap(), "x-");
        let m_z = make_proper_mixture(vec![
            MixtureComponent::new(s_plus(), 0.5, "a"),
            MixtureComponent::new(s_minus(), 0.5, "b"),
        ])
        .unwrap();
        let m_x = make_proper_mixture(vec![
            MixtureComponent::new(x_plus, 0.5, "a"),
            MixtureComponent::new(x_minus, 0.5, "b"),
        ])
        .unwrap();
        assert!(m_z.qm_density().distance(&m_x.qm_density()) < 1e-15);
        assert_ne!(m_z, m_x);
    }

    #[test]
    fn improper_from_composite() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = StateVector::new(&[c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)], 1e-12).unwrap();
        let n = make_improper_from_composite(&singlet, 2, 2).unwrap();
        assert!(n.rho().distance(&ComplexOperator::identity(2).scale(0.5)) < 1e-15);
        assert!(!n.is_pure(1e-10));
        assert!(n.provenance().is_some());

        let phi = StateVector::normalized(&[c(0.3, 0.1), c(-0.2, 0.5), c(0.7, 0.0)]).unwrap();
        let product = StateVector::basis(2, 0).tensor(&phi);
        let n = make_improper_from_composite(&product, 2, 3).unwrap();
        assert!(n.rho().distance(&ComplexOperator::diagonal(&[1.0, 0.0])) < 1e-14);
        assert!(n.is_pure(1e-10));

        let (a, b) = (0.8f64.sqrt(), 0.2f64.sqrt());
        let psi = StateVector::new(&[c(0.0, 0.0), c(a, 0.0), c(b, 0.0), c(0.0, 0.0)], 1e-12).unwrap();
        let n = make_improper_from_composite(&psi, 2, 2).unwrap();
        assert!(n.rho().distance(&ComplexOperator::diagonal(&[0.8, 0.2])) < 1e-14);

        assert!(matches!(
            make_improper_from_composite(&psi, 3, 2),
            Err(EsrError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn representation_ideal_is_qm() {
        let m = spin_mixture();
        let pair = esr_representation(&m, &f_n(0.7), &DetectionModel::Ideal).unwrap();
        assert_eq!(pair.pd_of_f, 1.0);
        assert!(pair.rho_of_f.distance(&m.qm_density()) < 1e-15);
    }

    #[test]
    fn representation_of_spin_example() {
        let pair = esr_representation(&spin_mixture(), &f_n(std::f64::consts::FRAC_PI_3), &spin_model()).unwrap();
        assert!((pair.pd_of_f - 0.86).abs() < 1e-14);
        let expected = ComplexOperator::diagonal(&[0.54 / 0.86, 0.32 / 0.86]);
        assert!(pair.rho_of_f.distance(&expected) < 1e-14);
        assert!((pair.rho_of_f.trace().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn representation_single_component() {
        let m = make_proper_mixture(vec![MixtureComponent::new(s_plus(), 1.0, "plus")]).unwrap();
        let pair = esr_representation(&m, &f_n(0.4), &spin_model()).unwrap();
        assert!(pair.rho_of_f.distance(&s_plus().density()) < 1e-15);
        assert!((pair.pd_of_f - 0.9).abs() < 1e-15);
    }

    #[test]
    fn representation_errors() {
        let m = spin_mixture();
        let obs = GeneralizedObservable::spin("sigma_n", 0.3, 0.0).unwrap();
        let with_a0 = Property::new(obs.clone(), OutcomeSet::new([1], true)).unwrap();
        assert_eq!(
            esr_representation(&m, &with_a0, &spin_model()),
            Err(EsrError::NoRegistrationInOutcomes)
        );
        let x = OutcomeSet::from_eigenvalues(&obs, &[1.0], false, 1e-10).unwrap();
        let blind = DetectionModel::Constant(0.0);
        assert_eq!(
            esr_representation(&m, &Property::new(obs, x).unwrap(), &blind),
            Err(EsrError::ZeroTotalDetection)
        );
    }
}
