use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EsrError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator or vector contains non-finite entries")]
    NonFinite,

    #[error("operator is not Hermitian within tolerance {tol:e}")]
    NotHermitian { tol: f64 },

    #[error("operator is not a density operator: {0}")]
    NotDensity(String),

    #[error("zero vector cannot represent a state")]
    ZeroVector,

    #[error("state vector has norm {norm}, expected 1")]
    NotNormalized { norm: f64 },

    #[error("value {0} is not an eigenvalue of the observable")]
    UnknownEigenvalue(f64),

    #[error("eigenvalue index {index} out of range for a spectrum of {len} values")]
    UnknownEigenIndex { index: usize, len: usize },

    #[error("detection probability {value} lies outside [0, 1]")]
    DetectionOutOfRange { value: f64 },

    #[error("no detection table entry for state {key:?}, observable {observable:?}, eigenvalue {eigenvalue}")]
    MissingDetectionEntry {
        key: Option<String>,
        observable: String,
        eigenvalue: f64,
    },

    #[error("detection probability undefined: the property has zero quantum probability in this state")]
    UndefinedDetection,

    #[error("total detection probability of the mixture is zero for this property")]
    ZeroTotalDetection,

    #[error("outcome set contains the no-registration outcome; only the overall probability is defined there")]
    NoRegistrationInOutcomes,

    #[error("the selected outcome has zero probability")]
    ZeroProbabilityOutcome,

    #[error("mixture weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },

    #[error("a mixture needs at least one component")]
    EmptyMixture,

    #[error("mixture weight {weight} is not a valid positive probability")]
    InvalidWeight { weight: f64 },

    #[error("numerical integrity violated in {context}: raw probability {value}")]
    NumericalIntegrity { context: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unresolved reference: {0}")]
    UnresolvedReference(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, EsrError>;

impl From<std::io::Error> for EsrError {
    fn from(err: std::io::Error) -> Self {
        EsrError::Io(err.to_string())
    }
}
