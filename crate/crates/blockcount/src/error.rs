use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pole: bottom parameter {0} is a nonpositive integer")]
    Pole(f64),
    #[error("integrability error: {0}")]
    Integrability(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("shooting boundary equation is singular: {0}")]
    SingularShooting(String),
    #[error("not positive recurrent: {0}")]
    NotPositiveRecurrent(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("instability detected: {0}")]
    InstabilityDetected(String),
    #[error("ill-conditioned system (condition number {0:e})")]
    IllConditioned(f64),
    #[error("root order violated: {0}")]
    RootOrderViolation(String),
    #[error("negative mass {0:e} beyond tolerance")]
    NegativeMass(f64),
    #[error("exit rate {0:e} exceeds the simulation limit")]
    RateOverflow(f64),
    #[error("replicate did not absorb within {0} events")]
    NonAbsorbing(u64),
    #[error("path is empty")]
    EmptyPath,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("atom list exceeds the cap of {0} atoms")]
    AtomCap(usize),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
