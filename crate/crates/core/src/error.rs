use std::fmt;

use thiserror::Error;

/// What went wrong while reading a polynomial expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedToken(String),
    UnexpectedEnd,
    InvalidNumber(String),
    UnknownVariable(String),
    /// Division by a non-constant, negative or fractional exponent, ...
    NonPolynomial(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the source text.
    pub position: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}")?,
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected token {t}")?,
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input")?,
            ParseErrorKind::InvalidNumber(s) => write!(f, "invalid number literal {s:?}")?,
            ParseErrorKind::UnknownVariable(s) => write!(f, "unknown variable {s:?}")?,
            ParseErrorKind::NonPolynomial(s) => write!(f, "non-polynomial construct: {s}")?,
        }
        write!(f, " at position {}", self.position)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("polynomials live in different rings ({left} vs {right} variables)")]
    MixedVariables { left: usize, right: usize },
    #[error("operation requires {expected} variables, polynomial has {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("point is the origin")]
    ZeroVector,
    #[error("polynomial is constant")]
    ConstantPolynomial,
    #[error("gradient vanishes at the point")]
    VanishingGradient,
    #[error("newton projection did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("constraint jacobian is rank deficient")]
    RankDeficient,
    #[error("no draws fell inside the slab of half-width {delta:e}")]
    Starved { delta: f64 },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("interval ({a}, {b}) is within {margin} of asymptotic critical value candidate {candidate}; max ratio per radius: {per_radius_max:?}")]
    IntervalNearCandidate {
        a: f64,
        b: f64,
        candidate: f64,
        margin: f64,
        /// `(r, max ratio)` observed anyway, showing the growth near the candidate.
        per_radius_max: Vec<(f64, f64)>,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
