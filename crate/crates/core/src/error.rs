use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch at node {node} ({op}): {detail}")]
    ShapeMismatch {
        node: usize,
        op: &'static str,
        detail: String,
    },
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("loss node {node} is not scalar (shape {shape:?})")]
    NonScalarLoss { node: usize, shape: Vec<usize> },
    #[error("non-finite gradient in parameter `{tensor}`")]
    NonFiniteGradient { tensor: String },
    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("feature mismatch: missing {missing:?}, unexpected {extra:?}")]
    FeatureMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("class id {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("network error: {0}")]
    Network(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("incomplete assignment: missing {0:?}")]
    IncompleteAssignment(Vec<String>),
    #[error("alteration error: {0}")]
    Alteration(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("distribution not normalized (sum {sum})")]
    NotNormalized { sum: f64 },
    #[error("model file: {0}")]
    Persistence(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
