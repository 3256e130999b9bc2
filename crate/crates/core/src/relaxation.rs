//! Remanent and anti-remanent volatility, its cumulative, and Omori counts.
//!
//! For events `t'` and average volatility `sigma`,
//!
//! ```text
//! v±(t) = (<|R(t' ± t)|> - sigma) / Z,    Z = <|R(t')|> - sigma
//! V±(t) = sum_{k=1..t} v±(k)
//! N±(t) = <#{1 <= k <= t : |R(t' ± k)| > zeta1 * sigma}>
//! ```
//!
//! An event contributes at lag `t` only when `t' ± t` lies inside the series
//! and is not excluded; per-lag contributor counts are kept with the curve.

use std::fmt;

use crate::error::{Error, Result};
use crate::events::EventSet;
use crate::series::VolatilitySeries;

pub const DEFAULT_TMAX_MINUTE: usize = 1000;
pub const DEFAULT_TMAX_DAILY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// After the event, `v+`.
    Post,
    /// Before the event, `v-`.
    Pre,
}

impl Direction {
    /// Bar index `t' ± lag` when it falls inside `0..len`.
    #[inline]
    pub fn offset(self, origin: usize, lag: usize, len: usize) -> Option<usize> {
        match self {
            Direction::Post => origin.checked_add(lag).filter(|&i| i < len),
            Direction::Pre => origin.checked_sub(lag),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::Post => "plus",
            Direction::Pre => "minus",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Post => "+",
            Direction::Pre => "-",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Direction::Post => Direction::Pre,
            Direction::Pre => Direction::Post,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "plus" | "+" | "post" => Ok(Direction::Post),
            "minus" | "-" | "pre" => Ok(Direction::Pre),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveKind {
    RemanentV,
    CumulativeV,
    OmoriN,
}

impl CurveKind {
    pub fn label(self) -> &'static str {
        match self {
            CurveKind::RemanentV => "remanent_v",
            CurveKind::CumulativeV => "cumulative_V",
            CurveKind::OmoriN => "omori_N",
        }
    }
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for CurveKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "remanent_v" => Ok(CurveKind::RemanentV),
            "cumulative_V" => Ok(CurveKind::CumulativeV),
            "omori_N" => Ok(CurveKind::OmoriN),
            other => Err(format!("unknown curve kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationCurve {
    direction: Direction,
    kind: CurveKind,
    lags: Vec<usize>,
    values: Vec<f64>,
    contributing: Vec<usize>,
    event_dispersion: Vec<f64>,
    // per-lag spread of each event's running sum; feeds the V dispersion
    running_dispersion: Vec<f64>,
    z: Option<f64>,
}

impl RelaxationCurve {
    /// Curve on lags `0..values.len()` with one contributor per lag and no dispersion.
    pub fn from_values(kind: CurveKind, direction: Direction, values: Vec<f64>) -> Self {
        let n = values.len();
        Self {
            direction,
            kind,
            lags: (0..n).collect(),
            values,
            contributing: vec![1; n],
            event_dispersion: vec![0.0; n],
            running_dispersion: Vec::new(),
            z: None,
        }
    }

    /// Curve on explicit (strictly increasing) lags.
    pub fn from_points(
        kind: CurveKind,
        direction: Direction,
        lags: Vec<usize>,
        values: Vec<f64>,
        contributing: Vec<usize>,
        event_dispersion: Vec<f64>,
    ) -> Self {
        debug_assert!(lags.windows(2).all(|w| w[0] < w[1]));
        Self { direction, kind, lags, values, contributing, event_dispersion, running_dispersion: Vec::new(), z: None }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contributing(&self) -> &[usize] {
        &self.contributing
    }

    /// Per-lag sample standard deviation across events.
    pub fn event_dispersion(&self) -> &[f64] {
        &self.event_dispersion
    }

    /// `Z = <|R(t')|> - sigma`; `None` for Omori counts.
    pub fn z(&self) -> Option<f64> {
        self.z
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn max_lag(&self) -> usize {
        self.lags.last().copied().unwrap_or(0)
    }

    pub fn value_at(&self, lag: usize) -> Option<f64> {
        self.lags.binary_search(&lag).ok().map(|i| self.values[i])
    }

    /// `lag<TAB>value<TAB>n_events<TAB>stddev` with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("lag\tvalue\tn_events\tstddev\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                self.lags[i], self.values[i], self.contributing[i], self.event_dispersion[i]
            ));
        }
        out
    }

    /// Parses the format written by [`RelaxationCurve::to_tsv`].
    pub fn from_tsv(kind: CurveKind, direction: Direction, text: &str) -> Result<Self> {
        let mut lags = Vec::new();
        let mut values = Vec::new();
        let mut contributing = Vec::new();
        let mut dispersion = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (k == 0 && line.starts_with("lag")) {
                continue;
            }
            let bad = |message: String| Error::Parse { line: k + 1, message };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 {
                return Err(bad(format!("expected at least lag and value, got {line:?}")));
            }
            let lag: usize = fields[0].parse().map_err(|e| bad(format!("bad lag: {e}")))?;
            if lags.last().is_some_and(|&prev| lag <= prev) {
                return Err(bad(format!("lag {lag} is not increasing")));
            }
            lags.push(lag);
            values.push(fields[1].parse().map_err(|e| bad(format!("bad value: {e}")))?);
            contributing.push(match fields.get(2) {
                Some(f) => f.parse().map_err(|e| bad(format!("bad n_events: {e}")))?,
                None => 1,
            });
            dispersion.push(match fields.get(3) {
                Some(f) => f.parse().map_err(|e| bad(format!("bad stddev: {e}")))?,
                None => 0.0,
            });
        }
        Ok(Self::from_points(kind, direction, lags, values, contributing, dispersion))
    }
}

fn check_events(vol: &VolatilitySeries, events: &EventSet) -> Result<()> {
    if events.is_empty() {
        return Err(Error::EmptyEvents);
    }
    let n = vol.len();
    match events.events().iter().find(|e| e.index >= n) {
        Some(e) => Err(Error::EventOutOfRange { index: e.index, len: n }),
        None => Ok(()),
    }
}

#[derive(Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn std_dev(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0).sqrt()
    }
}

/// `v±(t)` for `t = 0..=t_max`. Lags no event reaches are omitted.
pub fn remanent(
    vol: &VolatilitySeries,
    events: &EventSet,
    direction: Direction,
    t_max: usize,
) -> Result<RelaxationCurve> {
    check_events(vol, events)?;
    let n = vol.len();
    let values = vol.values();
    let sigma = vol.sigma();
    let origins: Vec<usize> = events.events().iter().map(|e| e.index).collect();

    let (mut m0_sum, mut m0_n) = (0.0, 0usize);
    for &o in &origins {
        if !vol.is_excluded(o) {
            m0_sum += values[o];
            m0_n += 1;
        }
    }
    if m0_n == 0 {
        return Err(Error::EmptyEvents);
    }
    let z = m0_sum / m0_n as f64 - sigma;
    if !(z > 0.0) {
        return Err(Error::NonPositiveZ(z));
    }

    let mut curve = RelaxationCurve {
        direction,
        kind: CurveKind::RemanentV,
        lags: Vec::with_capacity(t_max + 1),
        values: Vec::with_capacity(t_max + 1),
        contributing: Vec::with_capacity(t_max + 1),
        event_dispersion: Vec::with_capacity(t_max + 1),
        running_dispersion: Vec::with_capacity(t_max + 1),
        z: Some(z),
    };
    let mut running = vec![0.0; origins.len()];
    for lag in 0..=t_max {
        let mut sum = 0.0;
        let mut spread = Moments::default();
        let mut run_spread = Moments::default();
        for (e, &o) in origins.iter().enumerate() {
            let Some(i) = direction.offset(o, lag, n) else { continue };
            if vol.is_excluded(i) {
                continue;
            }
            sum += values[i];
            let x = (values[i] - sigma) / z;
            spread.push(x);
            if lag > 0 {
                running[e] += x;
            }
            run_spread.push(running[e]);
        }
        if spread.n == 0 {
            continue;
        }
        curve.lags.push(lag);
        curve.values.push((sum / spread.n as f64 - sigma) / z);
        curve.contributing.push(spread.n);
        curve.event_dispersion.push(spread.std_dev());
        curve.running_dispersion.push(run_spread.std_dev());
    }
    Ok(curve)
}

/// Prefix sums `V(t) = sum_{k=1..t} v(k)` over the reported lags, `V(0) = 0`.
pub fn cumulate(curve: &RelaxationCurve) -> Result<RelaxationCurve> {
    if curve.kind != CurveKind::RemanentV {
        return Err(Error::WrongCurveKind { expected: "remanent_v", found: curve.kind.label() });
    }
    let mut acc = 0.0;
    let values = curve
        .lags
        .iter()
        .zip(&curve.values)
        .map(|(&lag, &v)| {
            if lag > 0 {
                acc += v;
            }
            acc
        })
        .collect();
    let event_dispersion = if curve.running_dispersion.len() == curve.len() {
        curve.running_dispersion.clone()
    } else {
        vec![0.0; curve.len()]
    };
    Ok(RelaxationCurve {
        kind: CurveKind::CumulativeV,
        values,
        event_dispersion,
        running_dispersion: Vec::new(),
        ..curve.clone()
    })
}

/// Mean number of exceedances of `zeta1 * sigma` within `t` bars of each event.
pub fn omori_count(
    vol: &VolatilitySeries,
    events: &EventSet,
    zeta1: f64,
    direction: Direction,
    t_max: usize,
) -> Result<RelaxationCurve> {
    check_events(vol, events)?;
    if !(zeta1 > 0.0 && zeta1.is_finite()) {
        return Err(Error::InvalidZeta(zeta1));
    }
    if vol.sigma() <= 0.0 {
        return Err(Error::ZeroSigma);
    }
    let threshold = zeta1 * vol.sigma();
    let n = vol.len();
    let origins: Vec<usize> = events.events().iter().map(|e| e.index).collect();
    let n_events = origins.len();

    let mut counts = vec![0u64; n_events];
    let mut lags = vec![0];
    let mut values = vec![0.0];
    let mut contributing = vec![n_events];
    let mut dispersion = vec![0.0];
    for lag in 1..=t_max {
        let mut in_range = 0usize;
        for (e, &o) in origins.iter().enumerate() {
            let Some(i) = direction.offset(o, lag, n) else { continue };
            in_range += 1;
            if !vol.is_excluded(i) && vol.values()[i] > threshold {
                counts[e] += 1;
            }
        }
        if in_range == 0 {
            break;
        }
        let mut m = Moments::default();
        counts.iter().for_each(|&c| m.push(c as f64));
        lags.push(lag);
        values.push(m.sum / n_events as f64);
        contributing.push(in_range);
        dispersion.push(m.std_dev());
    }
    Ok(RelaxationCurve {
        direction,
        kind: CurveKind::OmoriN,
        lags,
        values,
        contributing,
        event_dispersion: dispersion,
        running_dispersion: Vec::new(),
        z: None,
    })
}

/// `V(t)` at `sample_lags` for a weighted multiset of events; the bootstrap's
/// inner loop. Returns `None` when the weighted `Z` is not positive.
pub(crate) fn weighted_cumulative(
    vol: &VolatilitySeries,
    origins: &[usize],
    weights: &[u32],
    direction: Direction,
    t_max: usize,
    sample_lags: &[usize],
) -> Option<Vec<f64>> {
    let n = vol.len();
    let values = vol.values();
    let sigma = vol.sigma();
    let mut sums = vec![0.0; t_max + 1];
    let mut counts = vec![0u64; t_max + 1];
    for (&o, &w) in origins.iter().zip(weights) {
        if w == 0 {
            continue;
        }
        let wf = f64::from(w);
        let reach = match direction {
            Direction::Post => t_max.min(n - 1 - o),
            Direction::Pre => t_max.min(o),
        };
        for lag in 0..=reach {
            let i = match direction {
                Direction::Post => o + lag,
                Direction::Pre => o - lag,
            };
            if !vol.is_excluded(i) {
                sums[lag] += wf * values[i];
                counts[lag] += u64::from(w);
            }
        }
    }
    if counts[0] == 0 {
        return None;
    }
    let z = sums[0] / counts[0] as f64 - sigma;
    if !(z > 0.0) {
        return None;
    }
    let mut out = Vec::with_capacity(sample_lags.len());
    let mut acc = 0.0;
    let mut next = sample_lags.iter().peekable();
    for lag in 0..=t_max {
        if lag > 0 && counts[lag] > 0 {
            acc += (sums[lag] / counts[lag] as f64 - sigma) / z;
        }
        while next.peek().is_some_and(|&&s| s == lag) {
            out.push(acc);
            next.next();
        }
    }
    (out.len() == sample_lags.len()).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::select_events;

    fn series(values: &[f64]) -> VolatilitySeries {
        VolatilitySeries::from_values(values.to_vec())
    }

    #[test]
    fn hand_evaluated_remanent() {
        let vol = series(&[1.0, 1.0, 1.0, 9.0, 3.0, 1.0]);
        let sigma = 16.0 / 6.0;
        let events = EventSet::from_indices(&[3]);
        let v = remanent(&vol, &events, Direction::Post, 5).unwrap();
        assert_eq!(v.values()[0], 1.0);
        assert!((v.values()[1] - (3.0 - sigma) / (9.0 - sigma)).abs() < 1e-15);
        assert!((v.values()[2] - (1.0 - sigma) / (9.0 - sigma)).abs() < 1e-15);
        // lags 3..5 run off the end
        assert_eq!(v.lags(), &[0, 1, 2]);
        assert_eq!(v.contributing(), &[1, 1, 1]);

        let pre = remanent(&vol, &events, Direction::Pre, 5).unwrap();
        assert_eq!(pre.lags(), &[0, 1, 2, 3]);
        assert!((pre.values()[3] - (1.0 - sigma) / (9.0 - sigma)).abs() < 1e-15);
    }

    #[test]
    fn empty_events_and_non_positive_z() {
        let vol = series(&[1.0, 2.0, 3.0]);
        assert!(matches!(remanent(&vol, &EventSet::from_indices(&[]), Direction::Post, 2), Err(Error::EmptyEvents)));
        // event at a below-average bar
        assert!(matches!(
            remanent(&vol, &EventSet::from_indices(&[0]), Direction::Post, 2),
            Err(Error::NonPositiveZ(_))
        ));
        assert!(matches!(
            omori_count(&vol, &EventSet::from_indices(&[]), 2.0, Direction::Post, 2),
            Err(Error::EmptyEvents)
        ));
    }

    #[test]
    fn cumulate_prefix_sums() {
        let v = RelaxationCurve::from_values(CurveKind::RemanentV, Direction::Post, vec![1.0, 0.5, 0.25]);
        let cum = cumulate(&v).unwrap();
        assert_eq!(cum.kind(), CurveKind::CumulativeV);
        assert_eq!(cum.values(), &[0.0, 0.5, 0.75]);

        let flat = RelaxationCurve::from_values(CurveKind::RemanentV, Direction::Pre, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(cumulate(&flat).unwrap().values(), &[0.0; 4]);

        assert!(matches!(cumulate(&cum), Err(Error::WrongCurveKind { .. })));
    }

    #[test]
    fn cumulate_tracks_closed_form_integral() {
        let (tau, p) = (5.0f64, 0.5f64);
        let mut v = vec![1.0];
        v.extend((1..=1000).map(|k| (k as f64 + tau).powf(-p)));
        let cum = cumulate(&RelaxationCurve::from_values(CurveKind::RemanentV, Direction::Post, v)).unwrap();
        // The sum from k = 1 undershoots the integral from 0: 2.8% at t = 10,
        // under 2% from t = 25 on.
        for t in 10..=1000 {
            let integral = ((t as f64 + tau).powf(1.0 - p) - tau.powf(1.0 - p)) / (1.0 - p);
            let rel = (cum.values()[t] - integral).abs() / integral;
            let bound = if t < 25 { 0.03 } else { 0.02 };
            assert!(rel < bound, "t = {t}: {} vs {integral}", cum.values()[t]);
        }
    }

    #[test]
    fn omori_counting() {
        let mut vals = vec![0.1; 12];
        vals[3] = 50.0;
        vals[5] = 10.0;
        vals[8] = 10.0;
        let vol = series(&vals);
        // sigma = (9 * 0.1 + 70) / 12 ~ 5.9; threshold 1.5 * sigma ~ 8.9
        let n = omori_count(&vol, &EventSet::from_indices(&[3]), 1.5, Direction::Post, 6).unwrap();
        assert_eq!(n.values(), &[0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 2.0]);
        assert_eq!(n.kind(), CurveKind::OmoriN);

        let quiet = omori_count(&vol, &EventSet::from_indices(&[3]), 20.0, Direction::Post, 6).unwrap();
        assert!(quiet.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn excluded_bars_are_skipped_per_lag() {
        let returns = vec![1.0, 1.0, 8.0, 5.0, 1.0, 1.0];
        let vol = VolatilitySeries::with_layout(
            returns,
            vec![false, false, false, true, false, false],
            vec![0, 1, 2, 0, 1, 2],
            vec![0, 0, 0, 1, 1, 1],
            3,
            1,
        )
        .unwrap();
        let vol = crate::series::apply_overnight_policy(&vol, true);
        let v = remanent(&vol, &EventSet::from_indices(&[2]), Direction::Post, 3).unwrap();
        assert_eq!(v.lags(), &[0, 2, 3]);
        let cum = cumulate(&v).unwrap();
        assert_eq!(cum.values()[1], v.values()[1]);
    }

    #[test]
    fn weighted_accumulator_matches_remanent() {
        let vals: Vec<f64> = (0..300).map(|i| 1.0 + ((i * 37 % 101) as f64) / 25.0).collect();
        let vol = series(&vals);
        let events = select_events(&vol, 1.4).unwrap();
        assert!(events.len() > 5);
        let origins = events.indices();
        let weights = vec![1u32; origins.len()];
        let sample = vec![1, 2, 5, 10, 40, 80];
        for dir in [Direction::Post, Direction::Pre] {
            let cum = cumulate(&remanent(&vol, &events, dir, 80).unwrap()).unwrap();
            let fast = weighted_cumulative(&vol, &origins, &weights, dir, 80, &sample).unwrap();
            for (lag, got) in sample.iter().zip(fast) {
                assert!((cum.value_at(*lag).unwrap() - got).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tsv_round_trip() {
        let vol = series(&[1.0, 2.0, 1.0, 9.0, 3.0, 1.0, 2.0]);
        let v = remanent(&vol, &EventSet::from_indices(&[3]), Direction::Pre, 3).unwrap();
        let back = RelaxationCurve::from_tsv(CurveKind::RemanentV, Direction::Pre, &v.to_tsv()).unwrap();
        assert_eq!(back.lags(), v.lags());
        assert_eq!(back.values(), v.values());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vol_and_events() -> impl Strategy<Value = (Vec<f64>, f64)> {
            (prop::collection::vec(-3.0f64..3.0, 20..300), 1.2f64..3.0)
        }

        proptest! {
            #[test]
            fn first_value_is_one((returns, zeta) in vol_and_events(), dir in prop::bool::ANY) {
                let vol = VolatilitySeries::from_returns(returns);
                let events = select_events(&vol, zeta).unwrap();
                prop_assume!(!events.is_empty());
                let d = if dir { Direction::Post } else { Direction::Pre };
                let v = remanent(&vol, &events, d, 30).unwrap();
                prop_assert_eq!(v.values()[0], 1.0);
            }

            #[test]
            fn reversal_duality((returns, zeta) in vol_and_events()) {
                let vol = VolatilitySeries::from_returns(returns);
                let events = select_events(&vol, zeta).unwrap();
                prop_assume!(!events.is_empty());
                let pre = remanent(&vol, &events, Direction::Pre, 40).unwrap();
                let rev = vol.reversed();
                let post_rev = remanent(&rev, &events.reversed(vol.len()), Direction::Post, 40).unwrap();
                prop_assert_eq!(pre.lags(), post_rev.lags());
                for (a, b) in pre.values().iter().zip(post_rev.values()) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }

            #[test]
            fn scale_invariance((returns, zeta) in vol_and_events(), c in 0.01f64..100.0) {
                let vol = VolatilitySeries::from_returns(returns);
                let events = select_events(&vol, zeta).unwrap();
                prop_assume!(!events.is_empty());
                let a = remanent(&vol, &events, Direction::Post, 30).unwrap();
                let b = remanent(&vol.scaled(c), &events, Direction::Post, 30).unwrap();
                for (x, y) in a.values().iter().zip(b.values()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }

            #[test]
            fn omori_monotone((returns, zeta) in vol_and_events(), z1 in 0.5f64..3.0, dz in 0.0f64..2.0) {
                let vol = VolatilitySeries::from_returns(returns);
                let events = select_events(&vol, zeta).unwrap();
                prop_assume!(!events.is_empty());
                let low = omori_count(&vol, &events, z1, Direction::Post, 30).unwrap();
                let high = omori_count(&vol, &events, z1 + dz, Direction::Post, 30).unwrap();
                prop_assert!(low.values().windows(2).all(|w| w[0] <= w[1]));
                prop_assert!(low.values().iter().all(|&x| x >= 0.0));
                for (l, h) in low.values().iter().zip(high.values()) {
                    prop_assert!(h <= l);
                }
            }
        }
    }
}
