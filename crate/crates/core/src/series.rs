//! Price ingestion, log-return volatilities and the average volatility `sigma`.
//!
//! Bars excluded by the overnight policy are masked rather than removed so
//! that lags downstream are always measured on the original bar axis.

use std::io::BufRead;

use chrono::{NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Timestamped prices partitioned into trading days by calendar date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    timestamps: Vec<NaiveDateTime>,
    prices: Vec<f64>,
    bar_interval: u32,
    day_boundaries: Vec<usize>,
}

impl PriceSeries {
    /// `bar_interval` is in minutes; 0 marks daily data.
    pub fn new(timestamps: Vec<NaiveDateTime>, prices: Vec<f64>, bar_interval: u32) -> Result<Self> {
        if timestamps.len() != prices.len() {
            return Err(Error::Parse {
                line: 0,
                message: format!("{} timestamps for {} prices", timestamps.len(), prices.len()),
            });
        }
        for (i, &p) in prices.iter().enumerate() {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::NonPositivePrice { line: i + 1, price: p });
            }
        }
        for i in 1..timestamps.len() {
            if timestamps[i] <= timestamps[i - 1] {
                return Err(Error::Unsorted {
                    line: i + 1,
                    timestamp: timestamps[i].format(TIMESTAMP_FORMAT).to_string(),
                });
            }
        }
        let mut day_boundaries = Vec::new();
        for i in 0..timestamps.len() {
            if i == 0 || timestamps[i].date() != timestamps[i - 1].date() {
                day_boundaries.push(i);
            }
        }
        Ok(Self { timestamps, prices, bar_interval, day_boundaries })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn bar_interval(&self) -> u32 {
        self.bar_interval
    }

    pub fn is_daily(&self) -> bool {
        self.bar_interval == 0
    }

    /// Indices at which a new trading day begins; always starts with 0 when non-empty.
    pub fn day_boundaries(&self) -> &[usize] {
        &self.day_boundaries
    }

    pub fn n_days(&self) -> usize {
        self.day_boundaries.len()
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        self.timestamps[i].date()
    }

    /// Observation count of each trading day, in order.
    pub fn day_lengths(&self) -> Vec<usize> {
        let mut lengths = Vec::with_capacity(self.day_boundaries.len());
        for (k, &start) in self.day_boundaries.iter().enumerate() {
            let end = self.day_boundaries.get(k + 1).copied().unwrap_or(self.len());
            lengths.push(end - start);
        }
        lengths
    }

    /// Serializes to the `timestamp,price` CSV format read by [`ingest_prices`].
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 32);
        out.push_str("timestamp,price\n");
        for (ts, p) in self.timestamps.iter().zip(&self.prices) {
            out.push_str(&ts.format(TIMESTAMP_FORMAT).to_string());
            out.push(',');
            out.push_str(&p.to_string());
            out.push('\n');
        }
        out
    }
}

/// Reads `timestamp,price` records. A header line and `#` comments are skipped.
pub fn ingest_prices<R: BufRead>(source: R, bar_interval: u32) -> Result<PriceSeries> {
    let mut timestamps = Vec::new();
    let mut prices = Vec::new();
    let mut seen_record = false;
    for (k, line) in source.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split(',');
        let (Some(ts_field), Some(price_field), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected `timestamp,price`, got {trimmed:?}"),
            });
        };
        let ts_field = ts_field.trim();
        let price_field = price_field.trim();
        let ts = match NaiveDateTime::parse_from_str(ts_field, TIMESTAMP_FORMAT) {
            Ok(ts) => ts,
            Err(_) if !seen_record && price_field.parse::<f64>().is_err() => {
                // header
                seen_record = true;
                continue;
            }
            Err(e) => return Err(Error::Parse { line: line_no, message: format!("bad timestamp {ts_field:?}: {e}") }),
        };
        seen_record = true;
        let price: f64 = price_field
            .parse()
            .map_err(|e| Error::Parse { line: line_no, message: format!("bad price {price_field:?}: {e}") })?;
        if !(price > 0.0 && price.is_finite()) {
            return Err(Error::NonPositivePrice { line: line_no, price });
        }
        if let Some(prev) = timestamps.last() {
            if ts <= *prev {
                return Err(Error::Unsorted { line: line_no, timestamp: ts_field.to_string() });
            }
        }
        timestamps.push(ts);
        prices.push(price);
    }
    PriceSeries::new(timestamps, prices, bar_interval)
}

/// Absolute returns with per-bar calendar metadata.
///
/// `values` holds `|R(t)|` or, after detrending, `r(t) = |R(t)| / D(slot)`.
/// The signed raw returns are kept alongside for crash/rally tagging.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilitySeries {
    values: Vec<f64>,
    returns: Vec<f64>,
    overnight: Vec<bool>,
    excluded: Vec<bool>,
    slot_index: Vec<usize>,
    day_index: Vec<usize>,
    bars_per_day: usize,
    bar_interval: u32,
    sigma: f64,
    normalized: bool,
    exclude_overnight: bool,
}

impl VolatilitySeries {
    /// Daily-layout series from signed returns: one bar per day, no overnight bars.
    pub fn from_returns(returns: Vec<f64>) -> Self {
        let n = returns.len();
        let mut vol = Self {
            values: returns.iter().map(|r| r.abs()).collect(),
            returns,
            overnight: vec![false; n],
            excluded: vec![false; n],
            slot_index: vec![0; n],
            day_index: (0..n).collect(),
            bars_per_day: 1,
            bar_interval: 0,
            sigma: 0.0,
            normalized: false,
            exclude_overnight: false,
        };
        vol.recompute_sigma();
        vol
    }

    /// Daily-layout series of non-negative volatilities, all treated as rallies.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self::from_returns(values)
    }

    /// Series with an explicit intraday layout, as produced from minute data.
    pub fn with_layout(
        returns: Vec<f64>,
        overnight: Vec<bool>,
        slot_index: Vec<usize>,
        day_index: Vec<usize>,
        bars_per_day: usize,
        bar_interval: u32,
    ) -> Result<Self> {
        let n = returns.len();
        if overnight.len() != n || slot_index.len() != n || day_index.len() != n {
            return Err(Error::Parse { line: 0, message: "layout vectors differ in length".into() });
        }
        if let Some(&slot) = slot_index.iter().find(|&&s| s >= bars_per_day) {
            return Err(Error::IncompatiblePattern { pattern: bars_per_day, slot });
        }
        let mut vol = Self {
            values: returns.iter().map(|r| r.abs()).collect(),
            returns,
            overnight,
            excluded: vec![false; n],
            slot_index,
            day_index,
            bars_per_day,
            bar_interval,
            sigma: 0.0,
            normalized: false,
            exclude_overnight: false,
        };
        vol.recompute_sigma();
        Ok(vol)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Signed log-returns `R(t)`, never normalized.
    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn overnight_mask(&self) -> &[bool] {
        &self.overnight
    }

    /// Bars masked out of every average under the active overnight policy.
    pub fn excluded_mask(&self) -> &[bool] {
        &self.excluded
    }

    #[inline]
    pub fn is_excluded(&self, i: usize) -> bool {
        self.excluded[i]
    }

    pub fn slot_index(&self) -> &[usize] {
        &self.slot_index
    }

    pub fn day_index(&self) -> &[usize] {
        &self.day_index
    }

    pub fn bars_per_day(&self) -> usize {
        self.bars_per_day
    }

    pub fn bar_interval(&self) -> u32 {
        self.bar_interval
    }

    pub fn is_daily(&self) -> bool {
        self.bar_interval == 0
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn excludes_overnight(&self) -> bool {
        self.exclude_overnight
    }

    /// Number of bars that take part in averages.
    pub fn included_count(&self) -> usize {
        self.excluded.iter().filter(|&&x| !x).count()
    }

    /// The series read backwards in time. Returns change sign, magnitudes
    /// and masks are mirrored, so bar `t` maps to `len - 1 - t`.
    pub fn reversed(&self) -> Self {
        let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<_>>();
        let revb = |v: &[bool]| v.iter().rev().copied().collect::<Vec<_>>();
        let revu = |v: &[usize]| v.iter().rev().copied().collect::<Vec<_>>();
        let mut out = Self {
            values: rev(&self.values),
            returns: self.returns.iter().rev().map(|r| -r).collect(),
            overnight: revb(&self.overnight),
            excluded: revb(&self.excluded),
            slot_index: revu(&self.slot_index),
            day_index: revu(&self.day_index),
            ..self.clone()
        };
        out.recompute_sigma();
        out
    }

    /// Multiplies every volatility (and return) by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = Self {
            values: self.values.iter().map(|v| v * c).collect(),
            returns: self.returns.iter().map(|r| r * c).collect(),
            ..self.clone()
        };
        out.recompute_sigma();
        out
    }

    pub(crate) fn replace_values(&mut self, values: Vec<f64>, normalized: bool) {
        debug_assert_eq!(values.len(), self.values.len());
        self.values = values;
        self.normalized = normalized;
        self.recompute_sigma();
    }

    fn recompute_sigma(&mut self) {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (v, &ex) in self.values.iter().zip(&self.excluded) {
            if !ex {
                sum += v;
                count += 1;
            }
        }
        self.sigma = if count == 0 { 0.0 } else { sum / count as f64 };
    }
}

/// `R(t) = ln P(t+1) - ln P(t)` and `|R(t)|` for `t = 0..n-2`.
///
/// Bar `t` belongs to the trading day and intraday slot of `P(t+1)`. A
/// return is overnight when `P(t)` and `P(t+1)` fall on different dates;
/// daily data never has overnight bars.
pub fn compute_returns(prices: &PriceSeries) -> Result<VolatilitySeries> {
    let n = prices.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    let logs: Vec<f64> = prices.prices().iter().map(|p| p.ln()).collect();
    let returns: Vec<f64> = logs.windows(2).map(|w| w[1] - w[0]).collect();

    if prices.is_daily() {
        return Ok(VolatilitySeries::from_returns(returns));
    }

    let mut day_of = vec![0usize; n];
    let mut slot_of = vec![0usize; n];
    let bounds = prices.day_boundaries();
    for (day, &start) in bounds.iter().enumerate() {
        let end = bounds.get(day + 1).copied().unwrap_or(n);
        for i in start..end {
            day_of[i] = day;
            slot_of[i] = i - start;
        }
    }
    let bars_per_day = prices.day_lengths().into_iter().max().unwrap_or(1);
    let overnight: Vec<bool> = (0..n - 1).map(|t| day_of[t] != day_of[t + 1]).collect();
    VolatilitySeries::with_layout(
        returns,
        overnight,
        slot_of[1..].to_vec(),
        day_of[1..].to_vec(),
        bars_per_day,
        prices.bar_interval(),
    )
}

/// Masks (or unmasks) overnight bars and recomputes `sigma` over the rest.
pub fn apply_overnight_policy(vol: &VolatilitySeries, exclude: bool) -> VolatilitySeries {
    let mut out = vol.clone();
    out.exclude_overnight = exclude;
    out.excluded = if exclude { vol.overnight.clone() } else { vec![false; vol.len()] };
    out.recompute_sigma();
    out
}
