use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is singular to working precision (pivot {pivot})")]
    Singular { pivot: usize },
    #[error("Schur factor at site {site} is singular to working precision")]
    SingularSite { site: usize },
    #[error("dense oracle refused: dimension {dim} exceeds guard {guard}")]
    TooLarge { dim: usize, guard: usize },
    #[error("chained split records do not match: {0}")]
    ChainMismatch(String),
    #[error("rejection sampler exhausted {attempts} attempts (acceptance rate estimate {rate:.3e})")]
    SamplerExhausted { attempts: u64, rate: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("degenerate split record at site {site}: zero first column")]
    DegenerateSplit { site: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
