//! Intraday volatility pattern: estimation and removal.
//!
//! `D(s)` is the mean volatility at intraday slot `s` over all trading days;
//! the detrended series is `r(t) = |R(t)| / D(slot(t))`.

use crate::error::{Error, Result};
use crate::series::VolatilitySeries;

#[derive(Debug, Clone, PartialEq)]
pub struct IntradayPattern {
    pattern: Vec<f64>,
    counts: Vec<usize>,
    day_count: usize,
}

impl IntradayPattern {
    pub fn pattern(&self) -> &[f64] {
        &self.pattern
    }

    /// Number of non-excluded bars averaged at each slot.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn day_count(&self) -> usize {
        self.day_count
    }

    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }

    /// A slot with `D = 0`: every day was flat there, or no bar was included.
    pub fn is_degenerate(&self, slot: usize) -> bool {
        self.pattern[slot] == 0.0
    }

    pub fn degenerate_slots(&self) -> Vec<usize> {
        (0..self.len()).filter(|&s| self.is_degenerate(s)).collect()
    }

    /// `slot<TAB>D` lines with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("slot\tD\n");
        for (s, d) in self.pattern.iter().enumerate() {
            out.push_str(&format!("{s}\t{d}\n"));
        }
        out
    }
}

pub fn estimate_pattern(vol: &VolatilitySeries) -> Result<IntradayPattern> {
    if vol.is_daily() {
        return Err(Error::DailyData);
    }
    let bars_per_day = vol.bars_per_day();
    let days = vol.day_index();
    let slots = vol.slot_index();

    // Each day must span the full slot layout. The first day lacks slot 0
    // (no return ends on the first observation), which this check allows.
    let n_days = days.last().map_or(0, |d| d + 1);
    let mut day_extent = vec![0usize; n_days];
    for (&d, &s) in days.iter().zip(slots) {
        day_extent[d] = day_extent[d].max(s + 1);
    }
    for (day, &extent) in day_extent.iter().enumerate() {
        if extent != bars_per_day {
            return Err(Error::RaggedDays { day, got: extent, expected: bars_per_day });
        }
    }

    let mut sums = vec![0.0; bars_per_day];
    let mut counts = vec![0usize; bars_per_day];
    for (i, (&v, &s)) in vol.values().iter().zip(slots).enumerate() {
        if vol.is_excluded(i) {
            continue;
        }
        sums[s] += v;
        counts[s] += 1;
    }
    let pattern = sums.iter().zip(&counts).map(|(&sum, &c)| if c == 0 { 0.0 } else { sum / c as f64 }).collect();
    Ok(IntradayPattern { pattern, counts, day_count: n_days })
}

/// Divides every volatility by its slot's `D`.
///
/// Bars at a degenerate slot become 0; that is an error only for an
/// included bar carrying nonzero volatility.
pub fn normalize(vol: &VolatilitySeries, pattern: &IntradayPattern) -> Result<VolatilitySeries> {
    if pattern.len() != vol.bars_per_day() {
        return Err(Error::IncompatiblePattern { pattern: pattern.len(), slot: vol.bars_per_day().saturating_sub(1) });
    }
    let mut r = Vec::with_capacity(vol.len());
    for (i, (&v, &s)) in vol.values().iter().zip(vol.slot_index()).enumerate() {
        let d = pattern.pattern[s];
        if d > 0.0 {
            r.push(v / d);
        } else if v == 0.0 || vol.is_excluded(i) {
            r.push(0.0);
        } else {
            return Err(Error::DegenerateSlot { slot: s, bar: i });
        }
    }
    let mut out = vol.clone();
    out.replace_values(r, true);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::apply_overnight_policy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `days` full days of `bars_per_day` bars, overnight return at slot 0.
    fn minute_series(values: &[f64], bars_per_day: usize) -> VolatilitySeries {
        let n = values.len();
        let slots: Vec<usize> = (0..n).map(|i| i % bars_per_day).collect();
        let days: Vec<usize> = (0..n).map(|i| i / bars_per_day).collect();
        let overnight: Vec<bool> = (0..n).map(|i| i > 0 && i % bars_per_day == 0).collect();
        VolatilitySeries::with_layout(values.to_vec(), overnight, slots, days, bars_per_day, 5).unwrap()
    }

    fn per_slot_means(vol: &VolatilitySeries) -> Vec<f64> {
        let b = vol.bars_per_day();
        let mut sums = vec![0.0; b];
        let mut counts = vec![0usize; b];
        for i in 0..vol.len() {
            if !vol.is_excluded(i) {
                sums[vol.slot_index()[i]] += vol.values()[i];
                counts[vol.slot_index()[i]] += 1;
            }
        }
        sums.iter().zip(counts).map(|(s, c)| s / c as f64).collect()
    }

    fn u_shaped(days: usize, bars: usize, seed: u64) -> (VolatilitySeries, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape: Vec<f64> = (0..bars)
            .map(|s| {
                let x = s as f64 / (bars - 1) as f64 - 0.5;
                1.0 + 8.0 * x * x
            })
            .collect();
        let values: Vec<f64> = (0..days * bars).map(|i| shape[i % bars] * rng.random_range(0.5..1.5)).collect();
        (minute_series(&values, bars), shape)
    }

    #[test]
    fn constant_series_gives_constant_pattern() {
        let vol = minute_series(&[2.0; 12], 4);
        let pat = estimate_pattern(&vol).unwrap();
        assert_eq!(pat.pattern(), &[2.0; 4]);
        assert_eq!(pat.day_count(), 3);
        let r = normalize(&vol, &pat).unwrap();
        assert!(r.values().iter().all(|&x| x == 1.0));
        assert_eq!(r.sigma(), 1.0);
        assert!(r.normalized());
    }

    #[test]
    fn two_day_slot_mean() {
        let vol = minute_series(&[1.0, 5.0, 3.0, 7.0], 2);
        let pat = estimate_pattern(&vol).unwrap();
        assert_eq!(pat.pattern()[0], 2.0);
        assert_eq!(pat.pattern()[1], 6.0);
    }

    #[test]
    fn direct_division() {
        let vol = minute_series(&[3.0, 1.0, 0.0, 1.0], 2);
        let pat = estimate_pattern(&vol).unwrap();
        assert_eq!(pat.pattern()[0], 1.5);
        let r = normalize(&vol, &pat).unwrap();
        assert_eq!(r.values()[0], 2.0);
    }

    #[test]
    fn daily_data_rejected() {
        let vol = VolatilitySeries::from_values(vec![1.0, 2.0]);
        assert!(matches!(estimate_pattern(&vol), Err(Error::DailyData)));
    }

    #[test]
    fn ragged_days_rejected() {
        // day 1 stops after two of three slots
        let vol = VolatilitySeries::with_layout(
            vec![1.0; 5],
            vec![false, false, false, true, false],
            vec![0, 1, 2, 0, 1],
            vec![0, 0, 0, 1, 1],
            3,
            1,
        )
        .unwrap();
        assert!(matches!(estimate_pattern(&vol), Err(Error::RaggedDays { day: 1, .. })));
    }

    #[test]
    fn degenerate_slot_handling() {
        // slot 1 is flat on every day
        let vol = minute_series(&[1.0, 0.0, 2.0, 0.0], 2);
        let pat = estimate_pattern(&vol).unwrap();
        assert_eq!(pat.degenerate_slots(), vec![1]);
        let r = normalize(&vol, &pat).unwrap();
        assert_eq!(r.values()[1], 0.0);

        let other = minute_series(&[1.0, 4.0, 2.0, 0.0], 2);
        assert!(matches!(normalize(&other, &pat), Err(Error::DegenerateSlot { slot: 1, bar: 1 })));
    }

    #[test]
    fn excluded_overnight_slot_is_degenerate_but_harmless() {
        let (vol, _) = u_shaped(6, 8, 3);
        let excl = apply_overnight_policy(&vol, true);
        let pat = estimate_pattern(&excl).unwrap();
        // slot 0 holds the first bar of day 0 plus the overnight bars
        assert_eq!(pat.counts()[0], 1);
        let r = normalize(&excl, &pat).unwrap();
        for (m, slot) in per_slot_means(&r).iter().zip(0..) {
            assert!((m - 1.0).abs() < 1e-12, "slot {slot}: {m}");
        }
    }

    #[test]
    fn pattern_matches_brute_force_slot_means() {
        let (vol, shape) = u_shaped(5, 48, 11);
        let pat = estimate_pattern(&vol).unwrap();
        for s in 0..48 {
            let brute: Vec<f64> = (0..5).map(|d| vol.values()[d * 48 + s]).collect();
            let mean = brute.iter().sum::<f64>() / 5.0;
            assert!((pat.pattern()[s] - mean).abs() < 1e-12);
            // five uniform(0.5, 1.5) draws: sd of the mean is 0.13 * shape
            assert!((pat.pattern()[s] / shape[s] - 1.0).abs() < 0.5);
        }
    }

    #[test]
    fn per_slot_unit_mean_and_idempotence() {
        let (vol, _) = u_shaped(20, 48, 5);
        let pat = estimate_pattern(&vol).unwrap();
        let r = normalize(&vol, &pat).unwrap();
        for m in per_slot_means(&r) {
            assert!((m - 1.0).abs() < 1e-12);
        }
        let again = estimate_pattern(&r).unwrap();
        for d in again.pattern() {
            assert!((d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn detrending_flattens_periodic_modulation() {
        let (vol, _) = u_shaped(40, 48, 9);
        let variance = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
        };
        let before = variance(&per_slot_means(&vol));
        let pat = estimate_pattern(&vol).unwrap();
        let after = variance(&per_slot_means(&normalize(&vol, &pat).unwrap()));
        assert!(after * 100.0 <= before, "before {before}, after {after}");
    }

    #[test]
    fn pattern_tsv_layout() {
        let pat = estimate_pattern(&minute_series(&[1.0, 3.0, 1.0, 3.0], 2)).unwrap();
        assert_eq!(pat.to_tsv(), "slot\tD\n0\t1\n1\t3\n");
    }
}
