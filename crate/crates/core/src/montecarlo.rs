//! Ensemble sampling at the macroscopic level.
//!
//! Each trial prepares an object (drawing a mixture component first for
//! proper mixtures), draws an eigenvalue with its quantum weight, and then
//! detects it with the model's detection probability; a failed detection
//! yields the no-registration outcome.
//!
//! Trials are split into fixed-size shards. Shard `k` draws from a ChaCha8
//! stream seeded with the run seed and stream id `k`, so results do not
//! depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{DetectionModel, StateRepr};
use crate::error::{EsrError, Result};
use crate::observables::{GeneralizedObservable, Outcome, Property};
use crate::states::{ProperMixture, State};

pub const SHARD_SIZE: u64 = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub n: u64,
    pub seed: u64,
    /// Normal quantile for the reported confidence half-width.
    pub z: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            n: 100_000,
            seed: 0,
            z: 3.0,
        }
    }
}

#[derive(Clone, Debug)]
struct Channel {
    weight: f64,
    born: Vec<f64>,
    detect: Vec<f64>,
}

/// Precomputed sampling tables for one (state, observable, model) triple.
#[derive(Clone, Debug)]
pub struct OutcomeSampler {
    channels: Vec<Channel>,
}

fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // u landed on the rounding gap at the top; take the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn channel(repr: StateRepr<'_>, obs: &GeneralizedObservable, model: &DetectionModel, weight: f64) -> Result<Channel> {
    let projectors = obs.spectral().projectors();
    let born = projectors
        .iter()
        .map(|p| Ok(repr.expectation(p)?.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    let detect = (0..projectors.len())
        .map(|i| model.evaluate(repr, obs, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Channel { weight, born, detect })
}

impl OutcomeSampler {
    pub fn new(state: &State, obs: &GeneralizedObservable, model: &DetectionModel) -> Result<Self> {
        if state.dim() != obs.dim() {
            return Err(EsrError::DimensionMismatch {
                expected: obs.dim(),
                found: state.dim(),
            });
        }
        let channels = match state {
            State::Pure(s) => vec![channel(s.repr(), obs, model, 1.0)?],
            State::Improper(n) => vec![channel(n.repr(), obs, model, 1.0)?],
            State::Proper(m) => m
                .components()
                .iter()
                .map(|c| channel(c.repr(), obs, model, c.weight))
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(Self { channels })
    }

    pub fn components(&self) -> usize {
        self.channels.len()
    }

    /// Draws (component index, outcome).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Outcome) {
        let j = if self.channels.len() == 1 {
            0
        } else {
            let weights: Vec<f64> = self.channels.iter().map(|c| c.weight).collect();
            draw_index(&weights, rng)
        };
        let ch = &self.channels[j];
        let lambda = draw_index(&ch.born, rng);
        let detected = rng.random::<f64>() < ch.detect[lambda];
        let outcome = if detected {
            Outcome::Eigenvalue(lambda)
        } else {
            Outcome::NoRegistration
        };
        (j, outcome)
    }

    /// Exact marginal distribution over outcomes: eigenvalues in spectrum
    /// order, then the no-registration outcome.
    pub fn distribution(&self) -> Vec<(Outcome, f64)> {
        let len = self.channels[0].born.len();
        let mut probs = vec![0.0; len];
        for ch in &self.channels {
            let total: f64 = ch.born.iter().sum();
            for (i, p) in probs.iter_mut().enumerate() {
                *p += ch.weight * ch.born[i] / total * ch.detect[i];
            }
        }
        let detected: f64 = probs.iter().sum();
        let mut out: Vec<(Outcome, f64)> = probs
            .into_iter()
            .enumerate()
            .map(|(i, p)| (Outcome::Eigenvalue(i), p))
            .collect();
        out.push((Outcome::NoRegistration, (1.0 - detected).max(0.0)));
        out
    }
}

/// Draws one outcome of `obs` for an object prepared in `state`.
pub fn sample_outcome<R: Rng + ?Sized>(
    state: &State,
    obs: &GeneralizedObservable,
    model: &DetectionModel,
    rng: &mut R,
) -> Result<Outcome> {
    Ok(OutcomeSampler::new(state, obs, model)?.sample(rng).1)
}

/// Analytic marginal outcome distribution matching [`sample_outcome`].
pub fn outcome_distribution(
    state: &State,
    obs: &GeneralizedObservable,
    model: &DetectionModel,
) -> Result<Vec<(Outcome, f64)>> {
    Ok(OutcomeSampler::new(state, obs, model)?.distribution())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentTally {
    pub component: usize,
    pub prepared: u64,
    pub detected: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub n_total: u64,
    pub n_detected: u64,
    pub n_yes: u64,
    pub yes_frequency: f64,
    pub per_component_detected: Vec<ComponentTally>,
    pub confidence_halfwidth: f64,
    pub z: f64,
}

impl EnsembleReport {
    /// Fractions of the detected subensemble coming from each component.
    pub fn detected_fractions(&self) -> Vec<f64> {
        self.per_component_detected
            .iter()
            .map(|c| {
                if self.n_detected == 0 {
                    0.0
                } else {
                    c.detected as f64 / self.n_detected as f64
                }
            })
            .collect()
    }

    pub fn prepared_fractions(&self) -> Vec<f64> {
        self.per_component_detected
            .iter()
            .map(|c| c.prepared as f64 / self.n_total as f64)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report is always serializable")
    }

    pub const CSV_HEADER: [&'static str; 7] = [
        "n_total",
        "n_detected",
        "n_yes",
        "yes_frequency",
        "confidence_halfwidth",
        "z",
        "per_component",
    ];

    /// Flat CSV fields; components are packed as `index:prepared:detected`
    /// joined by `;`.
    pub fn csv_row(&self) -> Vec<String> {
        let components = self
            .per_component_detected
            .iter()
            .map(|c| format!("{}:{}:{}", c.component, c.prepared, c.detected))
            .collect::<Vec<_>>()
            .join(";");
        vec![
            self.n_total.to_string(),
            self.n_detected.to_string(),
            self.n_yes.to_string(),
            self.yes_frequency.to_string(),
            self.confidence_halfwidth.to_string(),
            self.z.to_string(),
            components,
        ]
    }
}

#[derive(Clone, Debug, Default)]
struct Tally {
    total: u64,
    yes: u64,
    prepared: Vec<u64>,
    detected: Vec<u64>,
}

impl Tally {
    fn new(components: usize) -> Self {
        Self {
            prepared: vec![0; components],
            detected: vec![0; components],
            ..Self::default()
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.total += other.total;
        self.yes += other.yes;
        for (a, b) in self.prepared.iter_mut().zip(other.prepared) {
            *a += b;
        }
        for (a, b) in self.detected.iter_mut().zip(other.detected) {
            *a += b;
        }
        self
    }

    fn finish(self, z: f64) -> EnsembleReport {
        let n = self.total as f64;
        let f = self.yes as f64 / n;
        EnsembleReport {
            n_total: self.total,
            n_detected: self.detected.iter().sum(),
            n_yes: self.yes,
            yes_frequency: f,
            per_component_detected: self
                .prepared
                .iter()
                .zip(&self.detected)
                .enumerate()
                .map(|(component, (&prepared, &detected))| ComponentTally {
                    component,
                    prepared,
                    detected,
                })
                .collect(),
            confidence_halfwidth: z * (f * (1.0 - f) / n).sqrt(),
            z,
        }
    }
}

/// Runs `opts.n` independent prepare-and-measure trials of `prop`.
pub fn run_ensemble(
    state: &State,
    prop: &Property,
    model: &DetectionModel,
    opts: &McOptions,
) -> Result<EnsembleReport> {
    if opts.n == 0 {
        return Err(EsrError::InvalidParameter("ensemble size must be at least 1".into()));
    }
    if !opts.z.is_finite() || opts.z < 0.0 {
        return Err(EsrError::InvalidParameter(
            "z must be a nonnegative finite number".into(),
        ));
    }
    let sampler = OutcomeSampler::new(state, prop.observable(), model)?;
    let outcomes = prop.outcomes();
    let shards = opts.n.div_ceil(SHARD_SIZE);
    let tallies: Vec<Tally> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(shard);
            let count = SHARD_SIZE.min(opts.n - shard * SHARD_SIZE);
            let mut tally = Tally::new(sampler.components());
            for _ in 0..count {
                let (j, outcome) = sampler.sample(&mut rng);
                tally.total += 1;
                tally.prepared[j] += 1;
                if outcome != Outcome::NoRegistration {
                    tally.detected[j] += 1;
                }
                if outcomes.contains(outcome) {
                    tally.yes += 1;
                }
            }
            tally
        })
        .collect();
    let merged = tallies.into_iter().fold(Tally::new(sampler.components()), Tally::merge);
    Ok(merged.finish(opts.z))
}

/// Ensemble run on a proper mixture reporting which components end up in
/// the detected subensemble.
pub fn fair_sampling_diagnostic(
    m: &ProperMixture,
    prop: &Property,
    model: &DetectionModel,
    opts: &McOptions,
) -> Result<EnsembleReport> {
    prop.require_f_class()?;
    run_ensemble(&State::Proper(m.clone()), prop, model, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::DetectionTable;
    use crate::linalg::{pauli, StateVector};
    use crate::observables::OutcomeSet;
    use crate::states::{make_proper_mixture, MixtureComponent, PureState};

    fn sz() -> GeneralizedObservable {
        GeneralizedObservable::new("sigma_z", pauli::z(), 1e-10).unwrap()
    }

    fn up() -> State {
        State::Pure(PureState::new(StateVector::basis(2, 0), "S+"))
    }

    #[test]
    fn blind_detector_always_a0() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let o = sample_outcome(&up(), &sz(), &DetectionModel::Constant(0.0), &mut rng).unwrap();
            assert_eq!(o, Outcome::NoRegistration);
        }
    }

    #[test]
    fn distribution_for_eigenstate() {
        let model = DetectionModel::PerEigenvalue(
            DetectionTable::new()
                .with_entry(None, "sigma_z", 1.0, 0.9)
                .unwrap()
                .with_default(0.5)
                .unwrap(),
        );
        let dist = outcome_distribution(&up(), &sz(), &model).unwrap();
        // spectrum ascending: index 0 is -1, index 1 is +1
        assert_eq!(dist[0], (Outcome::Eigenvalue(0), 0.0));
        assert!((dist[1].1 - 0.9).abs() < 1e-15);
        assert!((dist[2].1 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn single_trial() {
        let z = sz();
        let prop = Property::new(z.clone(), OutcomeSet::full_spectrum(&z)).unwrap();
        let r = run_ensemble(
            &up(),
            &prop,
            &DetectionModel::Constant(0.5),
            &McOptions { n: 1, seed: 9, z: 3.0 },
        )
        .unwrap();
        assert!(r.yes_frequency == 0.0 || r.yes_frequency == 1.0);
        assert_eq!(r.n_total, 1);
    }

    #[test]
    fn reports_are_deterministic() {
        let z = sz();
        let prop = Property::new(z.clone(), OutcomeSet::new([1], false)).unwrap();
        let opts = McOptions {
            n: 50_000,
            seed: 42,
            z: 3.0,
        };
        let a = run_ensemble(&up(), &prop, &DetectionModel::Constant(0.7), &opts).unwrap();
        let b = run_ensemble(&up(), &prop, &DetectionModel::Constant(0.7), &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        assert!(run_ensemble(&up(), &prop, &DetectionModel::Ideal, &McOptions { n: 0, ..opts }).is_err());
    }

    #[test]
    fn counts_are_consistent() {
        let m = make_proper_mixture(vec![
            MixtureComponent::new(PureState::new(StateVector::basis(2, 0), "S+"), 0.3, "a"),
            MixtureComponent::new(PureState::new(StateVector::basis(2, 1), "S-"), 0.7, "b"),
        ])
        .unwrap();
        let z = sz();
        let prop = Property::new(z.clone(), OutcomeSet::new([1], false)).unwrap();
        let r = fair_sampling_diagnostic(
            &m,
            &prop,
            &DetectionModel::Constant(0.6),
            &McOptions {
                n: 40_000,
                seed: 3,
                z: 3.0,
            },
        )
        .unwrap();
        let prepared: u64 = r.per_component_detected.iter().map(|c| c.prepared).sum();
        assert_eq!(prepared, r.n_total);
        assert!(r.per_component_detected.iter().all(|c| c.detected <= c.prepared));
        assert!(r.n_detected <= r.n_total);
        assert_eq!(r.csv_row().len(), EnsembleReport::CSV_HEADER.len());
    }

    #[test]
    fn extreme_filter() {
        let table = DetectionTable::new()
            .with_entry(Some("minus"), "sigma_z", 1.0, 0.0)
            .unwrap()
            .with_entry(Some("minus"), "sigma_z", -1.0, 0.0)
            .unwrap()
            .with_default(0.9)
            .unwrap();
        let m = make_proper_mixture(vec![
            MixtureComponent::new(PureState::new(StateVector::basis(2, 0), "S+"), 0.6, "plus"),
            MixtureComponent::new(PureState::new(StateVector::basis(2, 1), "S-"), 0.4, "minus"),
        ])
        .unwrap();
        let z = sz();
        let prop = Property::new(z.clone(), OutcomeSet::new([1], false)).unwrap();
        let r = fair_sampling_diagnostic(
            &m,
            &prop,
            &DetectionModel::PerEigenvalue(table),
            &McOptions {
                n: 20_000,
                seed: 5,
                z: 3.0,
            },
        )
        .unwrap();
        assert_eq!(r.per_component_detected[1].detected, 0);
        assert_eq!(r.detected_fractions()[0], 1.0);
    }
}
