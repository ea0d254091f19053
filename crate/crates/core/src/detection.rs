//! Detection-probability models and the per-property detection probability.
//!
//! A model maps (state, observable, eigenvalue) to the probability that an
//! object in that state is detected when the observable yields that
//! eigenvalue. The state is passed as a [`StateRepr`], which also carries an
//! optional lookup key (a state label or preparing-device id) so that tables
//! can assign different detection probabilities to different preparations.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{EsrError, Result};
use crate::linalg::{default_tol, ComplexOperator, StateVector};
use crate::observables::{effect, projector, GeneralizedObservable, Property};
use crate::probability::ZERO_PROBABILITY;
use crate::states::State;

/// State handed to a detection model: a vector for pure states, a density
/// operator for improper mixtures.
#[derive(Clone, Copy, Debug)]
pub enum StateRepr<'a> {
    Vector {
        vector: &'a StateVector,
        key: Option<&'a str>,
    },
    Density {
        rho: &'a ComplexOperator,
        key: Option<&'a str>,
    },
}

impl<'a> StateRepr<'a> {
    pub fn vector(vector: &'a StateVector) -> Self {
        StateRepr::Vector { vector, key: None }
    }

    pub fn density(rho: &'a ComplexOperator) -> Self {
        StateRepr::Density { rho, key: None }
    }

    pub fn with_key(self, key: &'a str) -> Self {
        match self {
            StateRepr::Vector { vector, .. } => StateRepr::Vector { vector, key: Some(key) },
            StateRepr::Density { rho, .. } => StateRepr::Density { rho, key: Some(key) },
        }
    }

    pub fn key(&self) -> Option<&'a str> {
        match *self {
            StateRepr::Vector { key, .. } | StateRepr::Density { key, .. } => key,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            StateRepr::Vector { vector, .. } => vector.dim(),
            StateRepr::Density { rho, .. } => rho.dim(),
        }
    }

    /// `Tr[rho A]`, real part.
    pub fn expectation(&self, op: &ComplexOperator) -> Result<f64> {
        match self {
            StateRepr::Vector { vector, .. } => Ok(op.expectation(vector)?.re),
            StateRepr::Density { rho, .. } => Ok(crate::linalg::trace_product(rho, op)?.re),
        }
    }
}

type CustomFn = dyn for<'a> Fn(StateRepr<'a>, &GeneralizedObservable, f64) -> f64 + Send + Sync;

/// User-supplied detection function. Must be pure.
#[derive(Clone)]
pub struct CustomDetection(Arc<CustomFn>);

impl CustomDetection {
    pub fn new<F>(f: F) -> Self
    where
        F: for<'a> Fn(StateRepr<'a>, &GeneralizedObservable, f64) -> f64 + Send + Sync + 'static,
    {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for CustomDetection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomDetection(..)")
    }
}

/// One row of a detection table. `key: None` matches any state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionEntry {
    #[serde(default)]
    pub key: Option<String>,
    pub observable: String,
    pub eigenvalue: f64,
    pub probability: f64,
}

/// Detection probabilities keyed by (state key, observable name, eigenvalue).
///
/// Lookup prefers an entry for the exact state key, then a keyless entry,
/// then the table default.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionTable {
    entries: Vec<DetectionEntry>,
    default: Option<f64>,
    tol: f64,
}

impl Default for DetectionTable {
    fn default() -> Self {
        Self::new()
    }
}

impl DetectionTable {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            default: None,
            tol: default_tol(),
        }
    }

    fn check(p: f64) -> Result<f64> {
        if (0.0..=1.0).contains(&p) {
            Ok(p)
        } else {
            Err(EsrError::DetectionOutOfRange { value: p })
        }
    }

    pub fn with_default(mut self, p: f64) -> Result<Self> {
        self.default = Some(Self::check(p)?);
        Ok(self)
    }

    pub fn with_entry(
        mut self,
        key: Option<&str>,
        observable: &str,
        eigenvalue: f64,
        probability: f64,
    ) -> Result<Self> {
        self.insert(DetectionEntry {
            key: key.map(str::to_string),
            observable: observable.to_string(),
            eigenvalue,
            probability,
        })?;
        Ok(self)
    }

    /// Later entries for the same (key, observable, eigenvalue) replace earlier ones.
    pub fn insert(&mut self, entry: DetectionEntry) -> Result<()> {
        Self::check(entry.probability)?;
        if !entry.eigenvalue.is_finite() {
            return Err(EsrError::InvalidParameter(
                "detection entry eigenvalue must be finite".into(),
            ));
        }
        let tol = self.tol;
        self.entries.retain(|e| {
            !(e.key == entry.key && e.observable == entry.observable && (e.eigenvalue - entry.eigenvalue).abs() <= tol)
        });
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[DetectionEntry] {
        &self.entries
    }

    pub fn default_probability(&self) -> Option<f64> {
        self.default
    }

    pub fn lookup(&self, key: Option<&str>, observable: &str, eigenvalue: f64) -> Result<f64> {
        let matches = |e: &&DetectionEntry, k: Option<&str>| {
            e.key.as_deref() == k && e.observable == observable && (e.eigenvalue - eigenvalue).abs() <= self.tol
        };
        let keyed = key.and_then(|k| self.entries.iter().find(|e| matches(e, Some(k))));
        keyed
            .or_else(|| self.entries.iter().find(|e| matches(e, None)))
            .map(|e| e.probability)
            .or(self.default)
            .ok_or_else(|| EsrError::MissingDetectionEntry {
                key: key.map(str::to_string),
                observable: observable.to_string(),
                eigenvalue,
            })
    }
}

/// Detection-probability model.
///
/// The built-in variants ignore the state vector; `PerEigenvalue` uses only
/// the state's lookup key. `Custom` may inspect the full state.
#[derive(Clone, Debug)]
pub enum DetectionModel {
    Ideal,
    Constant(f64),
    PerEigenvalue(DetectionTable),
    Custom(CustomDetection),
}

impl DetectionModel {
    pub fn constant(p: f64) -> Result<Self> {
        Ok(DetectionModel::Constant(DetectionTable::check(p)?))
    }

    pub fn custom<F>(f: F) -> Self
    where
        F: for<'a> Fn(StateRepr<'a>, &GeneralizedObservable, f64) -> f64 + Send + Sync + 'static,
    {
        DetectionModel::Custom(CustomDetection::new(f))
    }

    pub fn is_ideal(&self) -> bool {
        matches!(self, DetectionModel::Ideal)
    }

    /// Detection probability for the eigenvalue at `index` of `obs`.
    pub fn evaluate(&self, state: StateRepr<'_>, obs: &GeneralizedObservable, index: usize) -> Result<f64> {
        let lambda = obs.eigenvalue(index)?;
        let p = match self {
            DetectionModel::Ideal => 1.0,
            DetectionModel::Constant(c) => *c,
            DetectionModel::PerEigenvalue(table) => table.lookup(state.key(), obs.name(), lambda)?,
            DetectionModel::Custom(f) => (f.0)(state, obs, lambda),
        };
        if (0.0..=1.0).contains(&p) {
            Ok(p)
        } else {
            Err(EsrError::DetectionOutOfRange { value: p })
        }
    }
}

/// Detection probability for eigenvalue `lambda` of `obs`.
pub fn detect_prob_eigenvalue(
    model: &DetectionModel,
    state: StateRepr<'_>,
    obs: &GeneralizedObservable,
    lambda: f64,
) -> Result<f64> {
    let index = obs.index_of(lambda, default_tol())?;
    model.evaluate(state, obs, index)
}

/// Detection probability of the property `prop` for an object in `state`.
///
/// Pure states and improper mixtures: `Tr[rho T(X)] / Tr[rho P(X)]`, an
/// error when the denominator vanishes. Proper mixtures: the weighted sum of
/// the component values.
pub fn detect_prob_property(model: &DetectionModel, state: &State, prop: &Property) -> Result<f64> {
    prop.require_f_class()?;
    match state {
        State::Pure(s) => repr_detection(model, s.repr(), prop, false),
        State::Improper(n) => repr_detection(model, n.repr(), prop, false),
        State::Proper(m) => m
            .components()
            .iter()
            .map(|c| Ok(c.weight * repr_detection(model, c.repr(), prop, true)?))
            .sum(),
    }
}

/// Quotient `Tr[rho T(X)] / Tr[rho P(X)]` for one state representation.
///
/// When the quantum probability vanishes the quotient is 0/0. With
/// `degenerate_fallback` set, the value is still returned when every
/// eigenvalue in X has the same detection probability, since every convex
/// combination then agrees; this is how mixture components that cannot
/// yield X keep a well-defined detection probability.
pub(crate) fn repr_detection(
    model: &DetectionModel,
    state: StateRepr<'_>,
    prop: &Property,
    degenerate_fallback: bool,
) -> Result<f64> {
    let obs = prop.observable();
    let x = prop.outcomes();
    let denominator = state.expectation(&projector(obs, x)?)?;
    if denominator > ZERO_PROBABILITY {
        let numerator = state.expectation(&effect(obs, x, model, state)?)?;
        return Ok((numerator / denominator).clamp(0.0, 1.0));
    }
    if degenerate_fallback {
        let values = x
            .indices()
            .map(|i| model.evaluate(state, obs, i))
            .collect::<Result<Vec<_>>>()?;
        if let Some(&first) = values.first() {
            if values.iter().all(|v| (v - first).abs() <= default_tol()) {
                return Ok(first);
            }
        }
    }
    Err(EsrError::UndefinedDetection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, pauli};
    use crate::observables::OutcomeSet;
    use crate::states::{make_proper_mixture, MixtureComponent, PureState};

    fn sigma_z() -> GeneralizedObservable {
        GeneralizedObservable::new("sigma_z", pauli::z(), 1e-10).unwrap()
    }

    fn prop(obs: &GeneralizedObservable, values: &[f64]) -> Property {
        Property::new(
            obs.clone(),
            OutcomeSet::from_eigenvalues(obs, values, false, 1e-10).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn eigenvalue_models() {
        let z = sigma_z();
        let v = StateVector::basis(2, 0);
        let repr = StateRepr::vector(&v);
        assert_eq!(
            detect_prob_eigenvalue(&DetectionModel::Ideal, repr, &z, -1.0).unwrap(),
            1.0
        );
        assert_eq!(
            detect_prob_eigenvalue(&DetectionModel::Constant(0.75), repr, &z, -1.0).unwrap(),
            0.75
        );
        let table = DetectionTable::new().with_entry(None, "sigma_z", 1.0, 0.9).unwrap();
        let model = DetectionModel::PerEigenvalue(table);
        assert_eq!(detect_prob_eigenvalue(&model, repr, &z, 1.0).unwrap(), 0.9);
        assert!(matches!(
            detect_prob_eigenvalue(&model, repr, &z, -1.0),
            Err(EsrError::MissingDetectionEntry { .. })
        ));
        assert_eq!(
            detect_prob_eigenvalue(&model, repr, &z, 0.3),
            Err(EsrError::UnknownEigenvalue(0.3))
        );
    }

    #[test]
    fn keyed_lookup_prefers_exact_key() {
        let table = DetectionTable::new()
            .with_entry(None, "A", 1.0, 0.5)
            .unwrap()
            .with_entry(Some("dev"), "A", 1.0, 0.8)
            .unwrap()
            .with_default(0.1)
            .unwrap();
        assert_eq!(table.lookup(Some("dev"), "A", 1.0).unwrap(), 0.8);
        assert_eq!(table.lookup(Some("other"), "A", 1.0).unwrap(), 0.5);
        assert_eq!(table.lookup(None, "A", -1.0).unwrap(), 0.1);
        assert!(DetectionTable::new().with_entry(None, "A", 1.0, 1.5).is_err());
    }

    #[test]
    fn custom_escaping_range() {
        let z = sigma_z();
        let v = StateVector::basis(2, 0);
        let model = DetectionModel::custom(|_, _, lambda| lambda);
        assert_eq!(
            detect_prob_eigenvalue(&model, StateRepr::vector(&v), &z, -1.0),
            Err(EsrError::DetectionOutOfRange { value: -1.0 })
        );
    }

    #[test]
    fn property_detection_pure() {
        let z = sigma_z();
        let up = State::Pure(PureState::new(StateVector::basis(2, 0), "S+"));
        let model = DetectionModel::PerEigenvalue(DetectionTable::new().with_entry(None, "sigma_z", 1.0, 0.9).unwrap());
        assert!((detect_prob_property(&model, &up, &prop(&z, &[1.0])).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(
            detect_prob_property(&DetectionModel::Ideal, &up, &prop(&z, &[1.0])).unwrap(),
            1.0
        );
        assert_eq!(
            detect_prob_property(&model, &up, &prop(&z, &[-1.0])),
            Err(EsrError::UndefinedDetection)
        );
        let a0 = Property::new(z.clone(), OutcomeSet::no_registration()).unwrap();
        assert_eq!(
            detect_prob_property(&model, &up, &a0),
            Err(EsrError::NoRegistrationInOutcomes)
        );
    }

    #[test]
    fn property_detection_mixture() {
        let theta = std::f64::consts::FRAC_PI_3;
        let n = GeneralizedObservable::spin("sigma_n", theta, 0.0).unwrap();
        let table = DetectionTable::new()
            .with_entry(Some("plus"), "sigma_n", 1.0, 0.9)
            .unwrap()
            .with_entry(Some("minus"), "sigma_n", 1.0, 0.8)
            .unwrap();
        let m = make_proper_mixture(vec![
            MixtureComponent::new(PureState::new(StateVector::basis(2, 0), "S+"), 0.6, "plus"),
            MixtureComponent::new(PureState::new(StateVector::basis(2, 1), "S-"), 0.4, "minus"),
        ])
        .unwrap();
        let p = detect_prob_property(
            &DetectionModel::PerEigenvalue(table),
            &State::Proper(m),
            &prop(&n, &[1.0]),
        )
        .unwrap();
        assert!((p - 0.86).abs() < 1e-14);
    }

    #[test]
    fn convex_bound_on_multi_eigenvalue_set() {
        let h = ComplexOperator::diagonal(&[0.0, 1.0, 2.0]);
        let obs = GeneralizedObservable::new("h", h, 1e-10).unwrap();
        let table = DetectionTable::new()
            .with_entry(None, "h", 0.0, 0.2)
            .unwrap()
            .with_entry(None, "h", 1.0, 0.7)
            .unwrap()
            .with_entry(None, "h", 2.0, 0.4)
            .unwrap();
        let s = State::Pure(PureState::new(
            StateVector::normalized(&[c(1.0, 0.0), c(0.5, 0.5), c(0.0, 2.0)]).unwrap(),
            "s",
        ));
        let p = detect_prob_property(&DetectionModel::PerEigenvalue(table), &s, &prop(&obs, &[0.0, 1.0])).unwrap();
        // weights 1 and 0.5 out of total norm^2 5.5
        let oracle = (1.0 * 0.2 + 0.5 * 0.7) / 1.5;
        assert!((p - oracle).abs() < 1e-14);
        assert!((0.2..=0.7).contains(&p));
    }
}
