use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("site index {index} out of range for {sites} sites")]
    SiteOutOfRange { index: usize, sites: usize },

    #[error("operator maps sector state {bitstring} outside the {particles}-particle sector")]
    OutOfSector { bitstring: String, particles: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("iterative eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigenvector has non-negligible imaginary part ({0:.3e}) after phase fixing")]
    ComplexAmplitudes(f64),

    #[error("inconsistent overlap/defect pair: alpha={alpha}, epsilon={epsilon}")]
    InconsistentTruncation { alpha: f64, epsilon: f64 },

    #[error("invalid truncation request: {0}")]
    InvalidTruncation(String),

    #[error("duplicate bitstring {0}")]
    DuplicateBitstring(String),

    #[error("bitstring {bitstring} has length {got}, expected {expected}")]
    LengthMismatch { bitstring: String, expected: usize, got: usize },

    #[error("all LCU magnitudes are zero")]
    ZeroMagnitudes,

    #[error("amplification overshoots: bare success probability {0:.4} exceeds 1/2")]
    Overshoot(f64),

    #[error("qubit index {index} out of range for {qubits}-qubit register")]
    QubitOutOfRange { index: usize, qubits: usize },

    #[error("gate acts twice on qubit {0}")]
    OverlappingQubits(usize),

    #[error("layer {layer} contains non-commuting terms {a} and {b}")]
    NonCommutingLayer { layer: String, a: String, b: String },

    #[error("operator has no layer decomposition")]
    MissingLayers,

    #[error("post-selection impossible: probability {0:.3e}")]
    SelectionImpossible(f64),

    #[error("states are not orthogonal (overlap {0:.3e})")]
    NotOrthogonal(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
