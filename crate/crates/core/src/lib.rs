//! Detection-conditioned measurement simulation.
//!
//! Generalized observables extend a quantum observable with a
//! no-registration outcome. Each state assigns every eigenvalue a detection
//! probability, which turns the spectral projectors into a commutative
//! family of effects. On top of that the crate provides:
//!
//! * conditional, overall and standard quantum probabilities for pure
//!   states, proper mixtures (kept as their preparation recipe) and improper
//!   mixtures (reduced states of composite pure states),
//! * post-measurement state updates for all three kinds,
//! * a seeded Monte Carlo harness that checks the analytic formulas by
//!   sampling and exposes the unfair-sampling signature of proper mixtures,
//! * the `esr` command-line tool for config-driven sweeps.
//!
//! ```
//! use esr_core::*;
//!
//! let obs = GeneralizedObservable::spin("sigma_n", std::f64::consts::FRAC_PI_3, 0.0)?;
//! let x = OutcomeSet::from_eigenvalues(&obs, &[1.0], false, 1e-10)?;
//! let prop = Property::new(obs, x)?;
//! let m = make_proper_mixture(vec![
//!     MixtureComponent::new(PureState::new(StateVector::basis(2, 0), "up"), 0.6, "up"),
//!     MixtureComponent::new(PureState::new(StateVector::basis(2, 1), "down"), 0.4, "down"),
//! ])?;
//! let model = DetectionModel::constant(0.9)?;
//! let state = State::Proper(m);
//! let p = overall_prob(&state, &prop, &model)?;
//! assert!((p - 0.9 * 0.55).abs() < 1e-12);
//! let post = update_state(&state, &prop, MeasurementOutcome::Yes, &model)?;
//! assert!((conditional_prob(&post, &prop, &model)? - 1.0).abs() < 1e-12);
//! # Ok::<(), EsrError>(())
//! ```

pub mod detection;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod measurement;
pub mod montecarlo;
pub mod observables;
pub mod probability;
pub mod states;

pub use detection::{detect_prob_eigenvalue, detect_prob_property, DetectionModel, DetectionTable, StateRepr};
pub use error::{EsrError, Result};
pub use linalg::{ComplexOperator, SpectralDecomposition, StateVector};
pub use measurement::{
    glp_update, gpp_update, improper_update, measure, update_state, MeasurementOutcome, MeasurementRecord,
};
pub use montecarlo::{fair_sampling_diagnostic, run_ensemble, sample_outcome, EnsembleReport, McOptions};
pub use observables::{complement, effect, projector, GeneralizedObservable, Outcome, OutcomeSet, Property};
pub use probability::{conditional_prob, overall_prob, quantum_prob};
pub use states::{
    esr_representation, make_improper_from_composite, make_proper_mixture, make_pure, EsrPair, ImproperMixture,
    MixtureComponent, ProperMixture, PureState, State,
};
