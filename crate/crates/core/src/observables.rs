//! Generalized observables: a Hermitian operator with a finite spectrum plus
//! a symbolic no-registration outcome that carries no projector.

use std::collections::BTreeSet;
use std::fmt;

use crate::detection::{DetectionModel, StateRepr};
use crate::error::{EsrError, Result};
use crate::linalg::{pauli, spectral_decompose, ComplexOperator, SpectralDecomposition};

pub const DEFAULT_A0_LABEL: &str = "a0";

/// A quantum observable extended by the no-registration outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedObservable {
    name: String,
    operator: ComplexOperator,
    spectral: SpectralDecomposition,
    a0_label: String,
}

impl GeneralizedObservable {
    pub fn new(name: impl Into<String>, operator: ComplexOperator, tol: f64) -> Result<Self> {
        let spectral = spectral_decompose(&operator, tol)?;
        Ok(Self {
            name: name.into(),
            operator,
            spectral,
            a0_label: DEFAULT_A0_LABEL.to_string(),
        })
    }

    /// Spin-1/2 observable along the direction with polar angle `theta` and
    /// azimuth `phi`.
    pub fn spin(name: impl Into<String>, theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(EsrError::InvalidParameter(
                "spin direction angles must be finite".into(),
            ));
        }
        let obs = Self::new(name, pauli::along(theta, phi), crate::linalg::default_tol())?;
        Ok(obs)
    }

    /// The label must not read as a real number.
    pub fn with_a0_label(mut self, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.trim().parse::<f64>().is_ok() {
            return Err(EsrError::InvalidParameter(format!(
                "no-registration label {label:?} must not be a real number"
            )));
        }
        self.a0_label = label;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn operator(&self) -> &ComplexOperator {
        &self.operator
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectral.eigenvalues()
    }

    pub fn a0_label(&self) -> &str {
        &self.a0_label
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn eigenvalue(&self, index: usize) -> Result<f64> {
        self.eigenvalues()
            .get(index)
            .copied()
            .ok_or(EsrError::UnknownEigenIndex {
                index,
                len: self.spectral.len(),
            })
    }

    pub fn index_of(&self, value: f64, tol: f64) -> Result<usize> {
        self.spectral
            .index_of(value, tol)
            .ok_or(EsrError::UnknownEigenvalue(value))
    }
}

/// A single measurement outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    /// Index into the observable's ascending spectrum.
    Eigenvalue(usize),
    NoRegistration,
}

/// Subset of the outcomes of a generalized observable: eigenvalues by
/// spectrum index, plus whether the no-registration outcome is included.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct OutcomeSet {
    eigen: BTreeSet<usize>,
    includes_a0: bool,
}

impl OutcomeSet {
    pub fn new(indices: impl IntoIterator<Item = usize>, includes_a0: bool) -> Self {
        Self {
            eigen: indices.into_iter().collect(),
            includes_a0,
        }
    }

    pub fn from_eigenvalues(obs: &GeneralizedObservable, values: &[f64], includes_a0: bool, tol: f64) -> Result<Self> {
        let eigen = values
            .iter()
            .map(|&v| obs.index_of(v, tol))
            .collect::<Result<BTreeSet<_>>>()?;
        Ok(Self { eigen, includes_a0 })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn no_registration() -> Self {
        Self::new([], true)
    }

    pub fn full_spectrum(obs: &GeneralizedObservable) -> Self {
        Self::new(0..obs.eigenvalues().len(), false)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.eigen.iter().copied()
    }

    pub fn includes_a0(&self) -> bool {
        self.includes_a0
    }

    pub fn contains(&self, outcome: Outcome) -> bool {
        match outcome {
            Outcome::Eigenvalue(i) => self.eigen.contains(&i),
            Outcome::NoRegistration => self.includes_a0,
        }
    }

    pub fn eigenvalues(&self, obs: &GeneralizedObservable) -> Result<Vec<f64>> {
        self.indices().map(|i| obs.eigenvalue(i)).collect()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.eigen.is_subset(&other.eigen) && (!self.includes_a0 || other.includes_a0)
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            eigen: self.eigen.union(&other.eigen).copied().collect(),
            includes_a0: self.includes_a0 || other.includes_a0,
        }
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.eigen.is_disjoint(&other.eigen) && !(self.includes_a0 && other.includes_a0)
    }

    pub fn validate(&self, obs: &GeneralizedObservable) -> Result<()> {
        let len = obs.eigenvalues().len();
        match self.eigen.iter().find(|&&i| i >= len) {
            Some(&index) => Err(EsrError::UnknownEigenIndex { index, len }),
            None => Ok(()),
        }
    }

    /// Every subset of a spectrum of `len` values, with and without a0.
    pub fn enumerate_all(len: usize) -> Vec<Self> {
        let mut out = Vec::with_capacity(1 << (len + 1));
        for mask in 0u64..(1u64 << len) {
            for a0 in [false, true] {
                out.push(Self::new((0..len).filter(|i| mask >> i & 1 == 1), a0));
            }
        }
        out
    }
}

impl fmt::Display for OutcomeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.eigen.iter().map(|i| format!("#{i}")).collect();
        if self.includes_a0 {
            parts.push("a0".into());
        }
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// A macroscopic property `(A0, X)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Property {
    observable: GeneralizedObservable,
    outcomes: OutcomeSet,
}

impl Property {
    pub fn new(observable: GeneralizedObservable, outcomes: OutcomeSet) -> Result<Self> {
        outcomes.validate(&observable)?;
        Ok(Self { observable, outcomes })
    }

    pub fn observable(&self) -> &GeneralizedObservable {
        &self.observable
    }

    pub fn outcomes(&self) -> &OutcomeSet {
        &self.outcomes
    }

    /// True when the outcome set excludes the no-registration outcome.
    pub fn in_f_class(&self) -> bool {
        !self.outcomes.includes_a0
    }

    /// The property `(A0, complement of X)`.
    pub fn complement(&self) -> Self {
        Self {
            observable: self.observable.clone(),
            outcomes: complement(&self.outcomes, &self.observable),
        }
    }

    pub(crate) fn require_f_class(&self) -> Result<()> {
        if self.in_f_class() {
            Ok(())
        } else {
            Err(EsrError::NoRegistrationInOutcomes)
        }
    }
}

/// Spectral projector `P(X)`; the no-registration flag is ignored.
pub fn projector(obs: &GeneralizedObservable, x: &OutcomeSet) -> Result<ComplexOperator> {
    x.validate(obs)?;
    let projectors = obs.spectral().projectors();
    x.indices()
        .try_fold(ComplexOperator::zeros(obs.dim()), |acc, i| acc.add(&projectors[i]))
}

/// Detection-weighted effect operator.
///
/// Without a0: `T(X) = sum_{l in X} d(l) P_l`.
/// With a0: `T(X) = I - sum_{l not in X} d(l) P_l`.
pub fn effect(
    obs: &GeneralizedObservable,
    x: &OutcomeSet,
    model: &DetectionModel,
    state: StateRepr<'_>,
) -> Result<ComplexOperator> {
    x.validate(obs)?;
    if state.dim() != obs.dim() {
        return Err(EsrError::DimensionMismatch {
            expected: obs.dim(),
            found: state.dim(),
        });
    }
    let projectors = obs.spectral().projectors();
    let weighted = |indices: Vec<usize>| -> Result<ComplexOperator> {
        indices
            .into_iter()
            .try_fold(ComplexOperator::zeros(obs.dim()), |acc, i| {
                let d = model.evaluate(state, obs, i)?;
                acc.add(&projectors[i].scale(d))
            })
    };
    if x.includes_a0() {
        let outside = (0..obs.eigenvalues().len()).filter(|i| !x.eigen.contains(i)).collect();
        ComplexOperator::identity(obs.dim()).sub(&weighted(outside)?)
    } else {
        weighted(x.indices().collect())
    }
}

/// Complement within the full outcome set: eigenvalues are complemented in
/// the spectrum and a0 switches sides.
pub fn complement(x: &OutcomeSet, obs: &GeneralizedObservable) -> OutcomeSet {
    OutcomeSet {
        eigen: (0..obs.eigenvalues().len()).filter(|i| !x.eigen.contains(i)).collect(),
        includes_a0: !x.includes_a0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{DetectionTable, StateRepr};
    use crate::linalg::StateVector;

    fn sigma_z() -> GeneralizedObservable {
        GeneralizedObservable::new("sigma_z", pauli::z(), 1e-10).unwrap()
    }

    fn up() -> StateVector {
        StateVector::basis(2, 0)
    }

    #[test]
    fn projector_cases() {
        let z = sigma_z();
        let plus = OutcomeSet::from_eigenvalues(&z, &[1.0], false, 1e-10).unwrap();
        assert!(
            projector(&z, &plus)
                .unwrap()
                .distance(&ComplexOperator::diagonal(&[1.0, 0.0]))
                < 1e-14
        );
        let both = OutcomeSet::from_eigenvalues(&z, &[-1.0, 1.0], false, 1e-10).unwrap();
        assert!(projector(&z, &both).unwrap().distance(&ComplexOperator::identity(2)) < 1e-14);
        assert_eq!(projector(&z, &OutcomeSet::empty()).unwrap(), ComplexOperator::zeros(2));
        // a0 has no quantum projector
        assert_eq!(
            projector(&z, &OutcomeSet::no_registration()).unwrap(),
            ComplexOperator::zeros(2)
        );
    }

    #[test]
    fn unknown_eigenvalue() {
        let z = sigma_z();
        assert_eq!(
            OutcomeSet::from_eigenvalues(&z, &[0.5], false, 1e-10),
            Err(EsrError::UnknownEigenvalue(0.5))
        );
        assert!(matches!(
            projector(&z, &OutcomeSet::new([2], false)),
            Err(EsrError::UnknownEigenIndex { index: 2, len: 2 })
        ));
    }

    #[test]
    fn ideal_effect_is_projector() {
        let z = sigma_z();
        let v = up();
        for x in OutcomeSet::enumerate_all(2).into_iter().filter(|x| !x.includes_a0()) {
            let t = effect(&z, &x, &DetectionModel::Ideal, StateRepr::vector(&v)).unwrap();
            assert!(t.distance(&projector(&z, &x).unwrap()) < 1e-15);
        }
    }

    #[test]
    fn single_term_effect() {
        let z = sigma_z();
        let model = DetectionModel::PerEigenvalue(DetectionTable::new().with_entry(None, "sigma_z", 1.0, 0.9).unwrap());
        let x = OutcomeSet::from_eigenvalues(&z, &[1.0], false, 1e-10).unwrap();
        let t = effect(&z, &x, &model, StateRepr::vector(&up())).unwrap();
        assert!(t.distance(&ComplexOperator::diagonal(&[0.9, 0.0])) < 1e-15);
    }

    #[test]
    fn no_registration_effect() {
        let z = sigma_z();
        let model = DetectionModel::Constant(0.9);
        let t = effect(&z, &OutcomeSet::no_registration(), &model, StateRepr::vector(&up())).unwrap();
        assert!(t.distance(&ComplexOperator::identity(2).scale(0.1)) < 1e-15);
    }

    #[test]
    fn detection_out_of_range() {
        let z = sigma_z();
        let x = OutcomeSet::full_spectrum(&z);
        let err = effect(&z, &x, &DetectionModel::Constant(1.2), StateRepr::vector(&up()));
        assert_eq!(err, Err(EsrError::DetectionOutOfRange { value: 1.2 }));
    }

    #[test]
    fn complement_cases() {
        let z = sigma_z();
        let plus = OutcomeSet::from_eigenvalues(&z, &[1.0], false, 1e-10).unwrap();
        let minus_a0 = OutcomeSet::from_eigenvalues(&z, &[-1.0], true, 1e-10).unwrap();
        assert_eq!(complement(&plus, &z), minus_a0);
        let everything = OutcomeSet::new([0, 1], true);
        assert_eq!(complement(&everything, &z), OutcomeSet::empty());
        for x in OutcomeSet::enumerate_all(2) {
            assert_eq!(complement(&complement(&x, &z), &z), x);
            assert!(complement(&x, &z).is_disjoint(&x));
        }
    }

    #[test]
    fn numeric_a0_label_rejected() {
        assert!(sigma_z().with_a0_label("0.0").is_err());
        assert_eq!(sigma_z().with_a0_label("none").unwrap().a0_label(), "none");
    }
}
