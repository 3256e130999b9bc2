//! Synthetic price series with known relaxation behaviour.
//!
//! Returns are zero-mean Gaussians with standard deviation
//!
//! ```text
//! s(t) = base_scale * [1 + K * sum_e (|t - t_e| + tau_env)^(-p_side)]
//! ```
//!
//! where `p_side` is `p_pre` before a shock and `p_post` after it. At each
//! shock time the return is forced to `magnitude * base_scale`.

use chrono::{Days, Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::PriceSeries;

const INITIAL_PRICE: f64 = 100.0;
const GAUSSIAN_STREAM: u64 = 0;
const SIGN_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    IidNull,
    OmoriSymmetric,
    OmoriAsymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockSign {
    #[default]
    Random,
    Crash,
    Rally,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shock {
    pub time: usize,
    /// Forced `|R(t_e)|` in units of `base_scale`.
    pub magnitude: f64,
    #[serde(default)]
    pub sign: ShockSign,
}

fn default_base_scale() -> f64 {
    0.01
}
fn default_exponent() -> f64 {
    0.5
}
fn default_tau_env() -> f64 {
    1.0
}
fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date")
}
fn default_bars_per_day() -> usize {
    240
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    /// Number of returns; the price series has one more observation.
    pub n_bars: usize,
    #[serde(default = "default_base_scale")]
    pub base_scale: f64,
    #[serde(default)]
    pub shocks: Vec<Shock>,
    #[serde(default = "default_exponent")]
    pub p_post: f64,
    #[serde(default = "default_exponent")]
    pub p_pre: f64,
    #[serde(default = "default_tau_env")]
    pub tau_env: f64,
    /// Envelope amplitude `K`.
    #[serde(default)]
    pub amplitude: f64,
    /// Envelope support `|t - t_e| <= reach`; 0 means unlimited.
    #[serde(default)]
    pub reach: usize,
    #[serde(default)]
    pub seed: u64,
    /// Minutes per bar; 0 emits one bar per calendar day.
    #[serde(default)]
    pub bar_interval: u32,
    #[serde(default = "default_bars_per_day")]
    pub bars_per_day: usize,
    #[serde(default = "default_start")]
    pub start: NaiveDate,
}

impl GeneratorSpec {
    /// Daily iid Gaussian returns with no shocks.
    pub fn iid_null(n_bars: usize, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::IidNull,
            n_bars,
            base_scale: default_base_scale(),
            shocks: Vec::new(),
            p_post: default_exponent(),
            p_pre: default_exponent(),
            tau_env: default_tau_env(),
            amplitude: 0.0,
            reach: 0,
            seed,
            bar_interval: 0,
            bars_per_day: default_bars_per_day(),
            start: default_start(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_bars == 0 {
            return bad("n_bars must be positive".into());
        }
        if !(self.base_scale > 0.0 && self.base_scale.is_finite()) {
            return bad(format!("base_scale must be positive, got {}", self.base_scale));
        }
        for (name, p) in [("p_post", self.p_post), ("p_pre", self.p_pre)] {
            if !(p > 0.0 && p < 1.5) {
                return bad(format!("{name} must lie in (0, 1.5), got {p}"));
            }
        }
        if !(self.tau_env > 0.0 && self.tau_env.is_finite()) {
            return bad(format!("tau_env must be positive, got {}", self.tau_env));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return bad(format!("amplitude must be non-negative, got {}", self.amplitude));
        }
        if self.bar_interval > 0 && self.bars_per_day < 2 {
            return bad("minute data needs at least two bars per day".into());
        }
        for s in &self.shocks {
            if s.time >= self.n_bars {
                return bad(format!("shock at {} outside {} bars", s.time, self.n_bars));
            }
            if !(s.magnitude > 0.0 && s.magnitude.is_finite()) {
                return bad(format!("shock magnitude must be positive, got {}", s.magnitude));
            }
        }
        Ok(())
    }

    /// Standard deviation `s(t)` of every bar.
    pub fn envelope(&self) -> Vec<f64> {
        let mut env = vec![1.0; self.n_bars];
        if self.kind != GeneratorKind::IidNull && self.amplitude > 0.0 {
            let (p_pre, p_post) = match self.kind {
                GeneratorKind::OmoriAsymmetric => (self.p_pre, self.p_post),
                _ => (self.p_post, self.p_post),
            };
            let reach = if self.reach == 0 { self.n_bars } else { self.reach };
            for shock in &self.shocks {
                let te = shock.time;
                let lo = te.saturating_sub(reach);
                let hi = (te + reach).min(self.n_bars - 1);
                for (t, e) in env.iter_mut().enumerate().take(hi + 1).skip(lo) {
                    let (dist, p) = if t < te { (te - t, p_pre) } else { (t - te, p_post) };
                    *e += self.amplitude * (dist as f64 + self.tau_env).powf(-p);
                }
            }
        }
        env.iter_mut().for_each(|e| *e *= self.base_scale);
        env
    }
}

/// Shock times drawn uniformly subject to a minimum spacing, keeping
/// `margin` bars clear at both ends.
pub fn spaced_shock_times(
    n_bars: usize,
    count: usize,
    min_spacing: usize,
    margin: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let needed = 2 * margin + (count - 1) * min_spacing;
    if needed >= n_bars {
        return Err(Error::InvalidSpec(format!(
            "{count} shocks spaced {min_spacing} apart need more than {n_bars} bars"
        )));
    }
    // uniform order statistics on the slack, then re-insert the gaps
    let slack = n_bars - 1 - needed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offsets: Vec<usize> = (0..count).map(|_| rng.random_range(0..=slack)).collect();
    offsets.sort_unstable();
    Ok(offsets.iter().enumerate().map(|(i, o)| margin + o + i * min_spacing).collect())
}

/// The signed returns `R(t)`, `t = 0..n_bars`.
pub fn generate_returns(spec: &GeneratorSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let env = spec.envelope();
    let mut gauss = ChaCha8Rng::seed_from_u64(spec.seed);
    gauss.set_stream(GAUSSIAN_STREAM);
    let mut returns: Vec<f64> = env.iter().map(|s| s * gauss.sample::<f64, _>(StandardNormal)).collect();
    let mut signs = ChaCha8Rng::seed_from_u64(spec.seed);
    signs.set_stream(SIGN_STREAM);
    for shock in &spec.shocks {
        let negative = match shock.sign {
            ShockSign::Random => signs.random_bool(0.5),
            ShockSign::Crash => true,
            ShockSign::Rally => false,
        };
        let size = shock.magnitude * spec.base_scale;
        returns[shock.time] = if negative { -size } else { size };
    }
    Ok(returns)
}

fn timestamps(spec: &GeneratorSpec, n: usize) -> Vec<NaiveDateTime> {
    let midnight = |d: NaiveDate| d.and_hms_opt(0, 0, 0).expect("valid time");
    if spec.bar_interval == 0 {
        return (0..n).map(|i| midnight(spec.start + Days::new(i as u64))).collect();
    }
    let open = spec.start.and_hms_opt(9, 30, 0).expect("valid time");
    (0..n)
        .map(|i| {
            let day = (i / spec.bars_per_day) as u64;
            let slot = (i % spec.bars_per_day) as i64;
            open + Days::new(day) + Duration::minutes(slot * i64::from(spec.bar_interval))
        })
        .collect()
}

/// Prices from `P(0) = 100` by exponentiating cumulative returns.
pub fn generate(spec: &GeneratorSpec) -> Result<PriceSeries> {
    let returns = generate_returns(spec)?;
    let mut prices = Vec::with_capacity(returns.len() + 1);
    let mut log_p = INITIAL_PRICE.ln();
    prices.push(INITIAL_PRICE);
    for r in &returns {
        log_p += r;
        prices.push(log_p.exp());
    }
    PriceSeries::new(timestamps(spec, prices.len()), prices, spec.bar_interval)
}
