//! Large-fluctuation relaxation analysis for price series.
//!
//! The pipeline runs from raw prices to fitted power-law exponents for the
//! volatility relaxation before (`p-`) and after (`p+`) large events:
//!
//! ```text
//! prices -> |returns| -> (intraday detrend) -> events |R| > zeta*sigma
//!        -> remanent v(t) -> cumulative V(t) -> fit A[(t+tau)^(1-p) - tau^(1-p)]
//! ```
//!
//! Every estimator is checked against the generators in [`synth`], which
//! produce series with known relaxation exponents.

pub mod detrend;
pub mod error;
pub mod events;
pub mod fitting;
pub mod relaxation;
pub mod series;
pub mod synth;

pub use detrend::{estimate_pattern, normalize, IntradayPattern};
pub use error::{Error, Result};
pub use events::{
    filter_events, select_events, tag_origins, Event, EventCalendar, EventFilter, EventSet, Origin, Sign, TagSummary,
};

pub use relaxation::{cumulate, omori_count, remanent, CurveKind, Direction, RelaxationCurve};
pub use series::{apply_overnight_policy, compute_returns, ingest_prices, PriceSeries, VolatilitySeries};

pub use fitting::{
    bootstrap_error, fit_cumulative, fit_lenient, ks_test, tail_slope, BootstrapConfig, BootstrapResult, FitMethod,
    FitWindow, KsOutcome, PowerLawFit, SampledCurve,
};
pub use synth::{generate, generate_returns, spaced_shock_times, GeneratorKind, GeneratorSpec, Shock, ShockSign};
