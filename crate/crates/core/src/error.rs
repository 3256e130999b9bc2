use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: non-positive price {price}")]
    NonPositivePrice { line: usize, price: f64 },

    #[error("line {line}: timestamp {timestamp} is not after the previous one")]
    Unsorted { line: usize, timestamp: String },

    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("intraday pattern requires minute data (bar_interval > 0)")]
    DailyData,

    #[error("trading days have differing slot layouts: day {day} has {got} bars, expected {expected}")]
    RaggedDays { day: usize, got: usize, expected: usize },

    #[error("pattern has {pattern} slots but series has slot index {slot}")]
    IncompatiblePattern { pattern: usize, slot: usize },

    #[error("degenerate intraday slot {slot} (D = 0) hit by nonzero volatility at bar {bar}")]
    DegenerateSlot { slot: usize, bar: usize },

    #[error("average volatility is zero; no event threshold can be formed")]
    ZeroSigma,

    #[error("invalid threshold multiplier {0}")]
    InvalidZeta(f64),

    #[error("event index {index} outside series of {len} bars")]
    EventOutOfRange { index: usize, len: usize },

    #[error("origin tagging is only supported for daily data")]
    TaggingUnsupported,

    #[error("duplicate calendar date {0}")]
    DuplicateDate(String),

    #[error("empty event set")]
    EmptyEvents,

    #[error("non-positive normalization Z = {0}")]
    NonPositiveZ(f64),

    #[error("curve kind {found} where {expected} was required")]
    WrongCurveKind { expected: &'static str, found: &'static str },

    #[error("invalid fit window [{lo}, {hi}]: {reason}")]
    InvalidWindow { lo: usize, hi: usize, reason: String },

    #[error("non-positive curve value {value} at lag {lag} inside the fit window")]
    NonPositiveValue { lag: usize, value: f64 },

    #[error("fit converged onto search bound ({which}): p = {p:.4}, tau = {tau:.4}")]
    AtBound { which: &'static str, p: f64, tau: f64, fit: Box<crate::fitting::PowerLawFit> },

    #[error("{failed} of {total} bootstrap replicates failed to fit")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("bootstrap needs at least {min} replicates, got {got}")]
    TooFewReplicates { min: usize, got: usize },

    #[error("degenerate KS window: curve is constant over the window")]
    DegenerateKsWindow,

    #[error("noise replicate lags do not match the fit sample lags")]
    NoiseMismatch,

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
