//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // --- numerics ---
    #[error("no sign change on [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("root finder did not converge within {0} iterations")]
    MaxIterations(usize),
    #[error("no bracket found after {expansions} expansions from {start}")]
    NoBracketFound { start: f64, expansions: usize },
    #[error("start point lies outside the bounds")]
    InfeasibleStart,
    #[error("domain error: {0}")]
    Domain(String),

    // --- smile model ---
    #[error("invalid SVI parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate sigma: the normalized machinery needs sigma > 0")]
    DegenerateSigma,
    #[error("non-positive total variance {w} at k={k}")]
    NonPositiveVariance { k: f64, w: f64 },

    // --- Black-Scholes ---
    #[error("price {price} outside the no-arbitrage range ({lower}, {upper}) at k={k}")]
    PriceOutOfRange { k: f64, price: f64, lower: f64, upper: f64 },

    // --- thresholds and domain ---
    #[error("optimum of L is attained at infinity (boundary wing regime)")]
    NoFiniteOptimum,
    #[error("could not bracket the Fukasawa threshold: {0}")]
    BracketFailure(String),
    #[error("Fukasawa conditions violated: {0}")]
    FukasawaViolated(String),
    #[error("parameters are not strictly inside the no-arbitrage domain: {0}")]
    NotInDomain(String),

    // --- calibration ---
    #[error("insufficient data: {got} points, need at least {need}")]
    InsufficientData { got: usize, need: usize },
    #[error("no start produced a usable fit")]
    NoConvergedStart,
    #[error("invalid market slice: {0}")]
    InvalidSlice(String),
    #[error("invalid calibration config: {0}")]
    InvalidConfig(String),

    // --- market data ---
    #[error("need at least 2 strikes quoted on both sides, got {0}")]
    InsufficientPairs(usize),
    #[error("non-positive discount factor {0}")]
    NonPositiveDiscount(f64),
    #[error("implausible discount factor {0} (expected at most 1.1)")]
    ImplausibleDiscount(f64),
    #[error("no invertible quote survived for expiry {0}")]
    EmptySlice(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
