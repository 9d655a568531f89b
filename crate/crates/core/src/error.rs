use thiserror::Error;

/// Failure signals raised by the laboratory's operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("point lies outside the domain: {0}")]
    Domain(String),
    #[error("grid resolution too coarse: {0}")]
    Resolution(String),
    #[error("stencil leaves the domain near {0:?}")]
    NearBoundary(Vec<f64>),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("section too small: {0}")]
    TooSmall(String),
    #[error("degenerate section: {0}")]
    DegenerateSection(String),
    #[error("empty slice at level {0}")]
    EmptySlice(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("function is not monotone in the e_n direction: {0}")]
    Monotonicity(String),
    #[error("partial transform is multivalued: {0}")]
    Multivalued(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
