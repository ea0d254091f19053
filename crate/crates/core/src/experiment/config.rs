//! JSON experiment configuration and its resolution into library objects.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detection::{DetectionEntry, DetectionModel, DetectionTable};
use crate::error::{EsrError, Result};
use crate::linalg::{default_tol, ComplexOperator, StateVector};
use crate::montecarlo::McOptions;
use crate::observables::{GeneralizedObservable, OutcomeSet, Property};
use crate::states::{
    make_improper_from_composite, make_proper_mixture, ImproperMixture, MixtureComponent, PureState, State,
};

/// A complex number written either as a bare real or as `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexSpec {
    fn value(self) -> Complex64 {
        match self {
            ComplexSpec::Real(re) => Complex64::new(re, 0.0),
            ComplexSpec::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

/// A real number or an expression such as `"pi"`, `"pi/3"`, `"2*pi"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RealSpec {
    Number(f64),
    Expr(String),
}

impl RealSpec {
    pub fn value(&self) -> Result<f64> {
        match self {
            RealSpec::Number(v) => Ok(*v),
            RealSpec::Expr(s) => parse_real(s),
        }
    }
}

/// Parses a number, optionally scaled by `pi`: `1.5`, `pi`, `-pi/2`,
/// `2pi`, `2*pi`, `3*pi/4`.
pub fn parse_real(text: &str) -> Result<f64> {
    let s: String = text
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_ascii_lowercase();
    let bad = || EsrError::Config(format!("cannot parse {text:?} as a real number"));
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let (numer, denom) = match s.split_once('/') {
        Some((n, d)) => (n.to_string(), d.parse::<f64>().map_err(|_| bad())?),
        None => (s.clone(), 1.0),
    };
    let Some(coef) = numer.strip_suffix("pi") else {
        return Err(bad());
    };
    let coef = coef.strip_suffix('*').unwrap_or(coef);
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let v = coef * PI / denom;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSpec {
    pub theta: RealSpec,
    #[serde(default = "zero")]
    pub phi: RealSpec,
}

fn zero() -> RealSpec {
    RealSpec::Number(0.0)
}

/// Either a spin direction or an explicit Hermitian matrix (rows).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub name: String,
    #[serde(default)]
    pub spin: Option<SpinSpec>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<ComplexSpec>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PureSpec {
    pub amplitudes: Vec<ComplexSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    /// Name of a pure state.
    pub state: String,
    pub weight: f64,
    /// Preparing-device id; defaults to the state name.
    #[serde(default)]
    pub device: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProperSpec {
    pub components: Vec<ComponentSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeSpec {
    pub amplitudes: Vec<ComplexSpec>,
    pub dim_first: usize,
    pub dim_second: usize,
}

/// Exactly one of `pure`, `proper`, `composite`, `density` must be set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub name: String,
    #[serde(default)]
    pub pure: Option<PureSpec>,
    #[serde(default)]
    pub proper: Option<ProperSpec>,
    #[serde(default)]
    pub composite: Option<CompositeSpec>,
    #[serde(default)]
    pub density: Option<Vec<Vec<ComplexSpec>>>,
}

/// No fields set means the ideal model. `constant` excludes table entries.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSpec {
    #[serde(default)]
    pub constant: Option<f64>,
    #[serde(default)]
    pub default: Option<f64>,
    #[serde(default)]
    pub entries: Vec<DetectionEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomesSpec {
    #[serde(default)]
    pub eigenvalues: Vec<f64>,
    #[serde(default)]
    pub a0: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub state: String,
    pub observable: String,
    pub outcomes: OutcomesSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub start: RealSpec,
    pub end: RealSpec,
    pub steps: usize,
}

impl SweepSpec {
    /// Parses the CLI triple `NAME START..END STEPS`.
    pub fn from_cli(name: &str, range: &str, steps: &str) -> Result<Self> {
        let (start, end) = range
            .split_once("..")
            .ok_or_else(|| EsrError::Config(format!("sweep range {range:?} must look like START..END")))?;
        let steps = steps
            .parse::<usize>()
            .map_err(|_| EsrError::Config(format!("sweep steps {steps:?} must be a positive integer")))?;
        Ok(Self {
            parameter: name.to_string(),
            start: RealSpec::Number(parse_real(start)?),
            end: RealSpec::Number(parse_real(end)?),
            steps,
        })
    }

    /// `steps` evenly spaced values including both ends.
    pub fn values(&self) -> Result<Vec<f64>> {
        let (a, b) = (self.start.value()?, self.end.value()?);
        if !a.is_finite() || !b.is_finite() {
            return Err(EsrError::Config("sweep: range must be finite".into()));
        }
        if self.steps == 0 {
            return Err(EsrError::Config("sweep.steps: must be at least 1".into()));
        }
        if self.steps == 1 {
            return Ok(vec![a]);
        }
        let last = (self.steps - 1) as f64;
        Ok((0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    b
                } else {
                    a + (b - a) * i as f64 / last
                }
            })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = EsrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(EsrError::Config(format!("unknown output format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub path: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub n: u64,
    pub seed: u64,
    #[serde(default = "default_z")]
    pub z: f64,
}

fn default_z() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    #[serde(default)]
    pub states: Vec<StateSpec>,
    #[serde(default)]
    pub detection: DetectionSpec,
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub monte_carlo: Option<McSpec>,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| EsrError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| EsrError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn mc_options(&self) -> McOptions {
        self.monte_carlo
            .as_ref()
            .map(|m| McOptions {
                n: m.n,
                seed: m.seed,
                z: m.z,
            })
            .unwrap_or_default()
    }

    /// The proper-mixture spin experiment: a mixture of the two sigma_z
    /// eigenstates with weights `p_plus`, `1 - p_plus`, measured along a
    /// direction in the xz-plane for outcome +1. Each component has its own
    /// detection probability, the same for both eigenvalues.
    pub fn spin_mixture(p_plus: f64, d_plus: f64, d_minus: f64) -> Self {
        let entries = [("S_plus", d_plus), ("S_minus", d_minus)]
            .into_iter()
            .flat_map(|(key, d)| {
                [-1.0, 1.0].into_iter().map(move |lambda| DetectionEntry {
                    key: Some(key.to_string()),
                    observable: "sigma_n".to_string(),
                    eigenvalue: lambda,
                    probability: d,
                })
            })
            .collect();
        let mut components = Vec::new();
        for (state, weight) in [("S_plus", p_plus), ("S_minus", 1.0 - p_plus)] {
            if weight > 0.0 {
                components.push(ComponentSpec {
                    state: state.to_string(),
                    weight,
                    device: None,
                });
            }
        }
        Self {
            observables: vec![ObservableSpec {
                name: "sigma_n".into(),
                spin: Some(SpinSpec {
                    theta: RealSpec::Expr("pi/3".into()),
                    phi: zero(),
                }),
                matrix: None,
            }],
            states: vec![
                StateSpec {
                    name: "S_plus".into(),
                    pure: Some(PureSpec {
                        amplitudes: vec![ComplexSpec::Real(1.0), ComplexSpec::Real(0.0)],
                    }),
                    proper: None,
                    composite: None,
                    density: None,
                },
                StateSpec {
                    name: "S_minus".into(),
                    pure: Some(PureSpec {
                        amplitudes: vec![ComplexSpec::Real(0.0), ComplexSpec::Real(1.0)],
                    }),
                    proper: None,
                    composite: None,
                    density: None,
                },
                StateSpec {
                    name: "M".into(),
                    pure: None,
                    proper: Some(ProperSpec { components }),
                    composite: None,
                    density: None,
                },
            ],
            detection: DetectionSpec {
                constant: None,
                default: None,
                entries,
            },
            experiment: ExperimentSpec {
                state: "M".into(),
                observable: "sigma_n".into(),
                outcomes: OutcomesSpec {
                    eigenvalues: vec![1.0],
                    a0: false,
                },
            },
            sweep: Some(SweepSpec {
                parameter: "theta".into(),
                start: RealSpec::Number(0.0),
                end: RealSpec::Expr("pi".into()),
                steps: 25,
            }),
            monte_carlo: Some(McSpec {
                n: 100_000,
                seed: 42,
                z: 3.0,
            }),
            output: None,
        }
    }
}

fn matrix_operator(rows: &[Vec<ComplexSpec>], field: &str) -> Result<ComplexOperator> {
    let dim = rows.len();
    if dim == 0 || rows.iter().any(|r| r.len() != dim) {
        return Err(EsrError::Config(format!("{field}: matrix must be square and nonempty")));
    }
    let entries: Vec<Complex64> = rows.iter().flatten().map(|z| z.value()).collect();
    ComplexOperator::from_row_major(dim, &entries).map_err(|e| EsrError::Config(format!("{field}: {e}")))
}

fn amplitudes(values: &[ComplexSpec]) -> Vec<Complex64> {
    values.iter().map(|z| z.value()).collect()
}

/// How an observable can be rebuilt at a different sweep point.
#[derive(Clone, Debug)]
pub enum ObservableRecipe {
    Spin { theta: f64, phi: f64 },
    Fixed(GeneralizedObservable),
}

/// A config with every name resolved.
#[derive(Clone, Debug)]
pub struct ResolvedConfig {
    pub observables: HashMap<String, ObservableRecipe>,
    pub states: Vec<(String, State)>,
    pub model: DetectionModel,
    pub experiment_state: State,
    pub experiment_observable: String,
    pub outcomes: OutcomesSpec,
}

impl ObservableRecipe {
    pub fn build(&self, name: &str) -> Result<GeneralizedObservable> {
        match self {
            ObservableRecipe::Spin { theta, phi } => GeneralizedObservable::spin(name, *theta, *phi),
            ObservableRecipe::Fixed(obs) => Ok(obs.clone()),
        }
    }

    /// Current value of a sweepable parameter, if this recipe has it.
    pub fn parameter(&self, parameter: &str) -> Option<f64> {
        match (self, parameter) {
            (ObservableRecipe::Spin { theta, .. }, "theta") => Some(*theta),
            (ObservableRecipe::Spin { phi, .. }, "phi") => Some(*phi),
            _ => None,
        }
    }

    pub fn with_parameter(&self, parameter: &str, value: f64) -> Result<Self> {
        match (self, parameter) {
            (ObservableRecipe::Spin { phi, .. }, "theta") => Ok(ObservableRecipe::Spin {
                theta: value,
                phi: *phi,
            }),
            (ObservableRecipe::Spin { theta, .. }, "phi") => Ok(ObservableRecipe::Spin {
                theta: *theta,
                phi: value,
            }),
            (ObservableRecipe::Spin { .. }, other) => Err(EsrError::Config(format!(
                "sweep.parameter: unknown parameter {other:?} (expected theta or phi)"
            ))),
            (ObservableRecipe::Fixed(_), other) => Err(EsrError::Config(format!(
                "sweep.parameter: {other:?} can only be swept on a spin observable"
            ))),
        }
    }
}

impl ResolvedConfig {
    pub fn resolve(config: &ExperimentConfig) -> Result<Self> {
        let tol = default_tol();
        let mut observables = HashMap::new();
        for (i, spec) in config.observables.iter().enumerate() {
            let field = format!("observables[{i}]");
            let recipe = match (&spec.spin, &spec.matrix) {
                (Some(spin), None) => {
                    let theta = spin
                        .theta
                        .value()
                        .map_err(|e| EsrError::Config(format!("{field}.spin.theta: {e}")))?;
                    let phi = spin
                        .phi
                        .value()
                        .map_err(|e| EsrError::Config(format!("{field}.spin.phi: {e}")))?;
                    ObservableRecipe::Spin { theta, phi }
                }
                (None, Some(rows)) => {
                    let op = matrix_operator(rows, &format!("{field}.matrix"))?;
                    let obs = GeneralizedObservable::new(&spec.name, op, tol)
                        .map_err(|e| EsrError::Config(format!("{field}.matrix: {e}")))?;
                    ObservableRecipe::Fixed(obs)
                }
                _ => {
                    return Err(EsrError::Config(format!(
                        "{field}: exactly one of `spin` or `matrix` must be given"
                    )))
                }
            };
            if observables.insert(spec.name.clone(), recipe).is_some() {
                return Err(EsrError::Config(format!(
                    "{field}.name: duplicate observable {:?}",
                    spec.name
                )));
            }
        }

        let mut states: Vec<(String, State)> = Vec::new();
        for (i, spec) in config.states.iter().enumerate() {
            let field = format!("states[{i}]");
            if states.iter().any(|(n, _)| n == &spec.name) {
                return Err(EsrError::Config(format!(
                    "{field}.name: duplicate state {:?}",
                    spec.name
                )));
            }
            let set = [
                spec.pure.is_some(),
                spec.proper.is_some(),
                spec.composite.is_some(),
                spec.density.is_some(),
            ];
            if set.iter().filter(|b| **b).count() != 1 {
                return Err(EsrError::Config(format!(
                    "{field}: exactly one of `pure`, `proper`, `composite`, `density` must be given"
                )));
            }
            let state = if let Some(p) = &spec.pure {
                let v = StateVector::normalized(&amplitudes(&p.amplitudes))
                    .map_err(|e| EsrError::Config(format!("{field}.pure.amplitudes: {e}")))?;
                State::Pure(PureState::new(v, &spec.name))
            } else if let Some(p) = &spec.proper {
                let mut components = Vec::with_capacity(p.components.len());
                for (k, c) in p.components.iter().enumerate() {
                    let cfield = format!("{field}.proper.components[{k}]");
                    let pure = match states.iter().find(|(n, _)| n == &c.state) {
                        Some((_, State::Pure(s))) => s.clone(),
                        Some(_) => {
                            return Err(EsrError::Config(format!(
                                "{cfield}.state: {:?} is not a pure state; nested mixtures are not supported",
                                c.state
                            )))
                        }
                        None => {
                            return Err(EsrError::UnresolvedReference(format!(
                                "{cfield}.state: no earlier pure state named {:?}",
                                c.state
                            )))
                        }
                    };
                    let device = c.device.clone().unwrap_or_else(|| c.state.clone());
                    components.push(MixtureComponent::new(pure, c.weight, device));
                }
                State::Proper(
                    make_proper_mixture(components).map_err(|e| EsrError::Config(format!("{field}.proper: {e}")))?,
                )
            } else if let Some(c) = &spec.composite {
                let v = StateVector::normalized(&amplitudes(&c.amplitudes))
                    .map_err(|e| EsrError::Config(format!("{field}.composite.amplitudes: {e}")))?;
                let n = make_improper_from_composite(&v, c.dim_first, c.dim_second)
                    .map_err(|e| EsrError::Config(format!("{field}.composite: {e}")))?;
                State::Improper(n.with_label(&spec.name))
            } else {
                let rows = spec.density.as_ref().expect("checked above");
                let rho = matrix_operator(rows, &format!("{field}.density"))?;
                State::Improper(
                    ImproperMixture::from_density(rho, &spec.name)
                        .map_err(|e| EsrError::Config(format!("{field}.density: {e}")))?,
                )
            };
            states.push((spec.name.clone(), state));
        }

        let model = resolve_detection(&config.detection)?;

        let experiment_state = states
            .iter()
            .find(|(n, _)| n == &config.experiment.state)
            .map(|(_, s)| s.clone())
            .ok_or_else(|| {
                EsrError::UnresolvedReference(format!(
                    "experiment.state: no state named {:?}",
                    config.experiment.state
                ))
            })?;
        if !observables.contains_key(&config.experiment.observable) {
            return Err(EsrError::UnresolvedReference(format!(
                "experiment.observable: no observable named {:?}",
                config.experiment.observable
            )));
        }

        let resolved = Self {
            observables,
            states,
            model,
            experiment_state,
            experiment_observable: config.experiment.observable.clone(),
            outcomes: config.experiment.outcomes.clone(),
        };
        let prop = resolved.property(None)?;
        if prop.observable().dim() != resolved.experiment_state.dim() {
            return Err(EsrError::Config(format!(
                "experiment: state has dimension {} but observable has dimension {}",
                resolved.experiment_state.dim(),
                prop.observable().dim()
            )));
        }
        Ok(resolved)
    }

    pub fn recipe(&self) -> &ObservableRecipe {
        &self.observables[&self.experiment_observable]
    }

    /// The experiment property, optionally with one observable parameter
    /// overridden by a sweep value.
    pub fn property(&self, sweep: Option<(&str, f64)>) -> Result<Property> {
        let recipe = match sweep {
            Some((parameter, value)) => self.recipe().with_parameter(parameter, value)?,
            None => self.recipe().clone(),
        };
        let obs = recipe.build(&self.experiment_observable)?;
        let x = OutcomeSet::from_eigenvalues(&obs, &self.outcomes.eigenvalues, self.outcomes.a0, default_tol())
            .map_err(|e| EsrError::Config(format!("experiment.outcomes.eigenvalues: {e}")))?;
        Property::new(obs, x)
    }
}

fn resolve_detection(spec: &DetectionSpec) -> Result<DetectionModel> {
    let range = |field: &str, p: f64| {
        if (0.0..=1.0).contains(&p) {
            Ok(p)
        } else {
            Err(EsrError::Config(format!(
                "{field}: detection probability {p} outside [0, 1]"
            )))
        }
    };
    if let Some(c) = spec.constant {
        if !spec.entries.is_empty() || spec.default.is_some() {
            return Err(EsrError::Config(
                "detection.constant: cannot be combined with `entries` or `default`".into(),
            ));
        }
        return Ok(DetectionModel::Constant(range("detection.constant", c)?));
    }
    if spec.entries.is_empty() && spec.default.is_none() {
        return Ok(DetectionModel::Ideal);
    }
    let mut table = DetectionTable::new();
    if let Some(d) = spec.default {
        table = table.with_default(range("detection.default", d)?)?;
    }
    for (i, e) in spec.entries.iter().enumerate() {
        range(&format!("detection.entries[{i}].probability"), e.probability)?;
        table
            .insert(e.clone())
            .map_err(|err| EsrError::Config(format!("detection.entries[{i}]: {err}")))?;
    }
    Ok(DetectionModel::PerEigenvalue(table))
}
