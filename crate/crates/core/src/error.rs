use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid route: {0}")]
    InvalidRoute(String),

    #[error("beta must lie in [0, 1], got {0}")]
    BetaOutOfRange(f64),

    #[error("probability must lie in [0, 1], got {0}")]
    ProbabilityOutOfRange(f64),

    #[error("{solver} supports between {min} and {max} nodes, got {found}")]
    UnsupportedSize {
        solver: &'static str,
        min: usize,
        max: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("auc needs at least one positive and one negative label")]
    SingleClass,

    #[error("traversal-cost cap C_g = {cg} must exceed the intercept term {c_tilde0}")]
    CapBelowIntercept { cg: f64, c_tilde0: f64 },

    #[error("incomplete beta argument out of domain: x = {x}, a = {a}, b = {b}")]
    BetaDomain { x: f64, a: f64, b: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
