//! Event-resampling bootstrap for the uncertainty of fitted exponents.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{fit_samples, FitMethod, FitWindow, SampledCurve};
use crate::error::{Error, Result};
use crate::events::EventSet;
use crate::relaxation::{cumulate, remanent, weighted_cumulative, Direction};
use crate::series::VolatilitySeries;

pub const MIN_REPLICATES: usize = 50;
/// Largest tolerated share of replicates whose fit fails.
pub const MAX_FAILURE_RATE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub t_max: usize,
    pub window: FitWindow,
    pub method: FitMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// Sample standard deviation of the replicate exponents.
    pub p_err: f64,
    pub p_values: Vec<f64>,
    pub failures: usize,
    /// Replicate `V` at the fit's sample lags, one per replicate whose
    /// curve could be formed (including those whose fit failed).
    pub curves: Vec<SampledCurve>,
}

/// Resamples events with replacement, recomputes `V` and refits `p`.
///
/// Replicate `b` draws from its own ChaCha stream, so results do not depend
/// on thread scheduling.
pub fn bootstrap_error(
    vol: &VolatilitySeries,
    events: &EventSet,
    direction: Direction,
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    if config.replicates < MIN_REPLICATES {
        return Err(Error::TooFewReplicates { min: MIN_REPLICATES, got: config.replicates });
    }
    let curve = cumulate(&remanent(vol, events, direction, config.t_max)?)?;
    let lags = SampledCurve::from_curve(&curve, config.window)?.lags;
    let origins = events.indices();
    if origins.len() == 1 {
        warn!("single-event bootstrap: every replicate is identical, p_err = 0");
    }

    let outcomes: Vec<(Option<SampledCurve>, Option<f64>)> = (0..config.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(b as u64);
            let mut weights = vec![0u32; origins.len()];
            for _ in 0..origins.len() {
                weights[rng.random_range(0..origins.len())] += 1;
            }
            let Some(values) = weighted_cumulative(vol, &origins, &weights, direction, config.t_max, &lags) else {
                return (None, None);
            };
            let sampled = SampledCurve { lags: lags.clone(), values };
            let p = match fit_samples(&sampled, config.window, config.method) {
                Ok(fit) => Some(fit.p),
                Err(Error::AtBound { fit, .. }) => Some(fit.p),
                Err(_) => None,
            };
            (Some(sampled), p)
        })
        .collect();

    let p_values: Vec<f64> = outcomes.iter().filter_map(|(_, p)| *p).collect();
    let failures = config.replicates - p_values.len();
    if failures as f64 > MAX_FAILURE_RATE * config.replicates as f64 {
        return Err(Error::BootstrapFailures { failed: failures, total: config.replicates });
    }
    let curves = outcomes.into_iter().filter_map(|(c, _)| c).collect();
    Ok(BootstrapResult { p_err: std_dev(&p_values), p_values, failures, curves })
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 || xs.iter().all(|&x| x == xs[0]) {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(replicates: usize, seed: u64) -> BootstrapConfig {
        BootstrapConfig { replicates, seed, t_max: 60, window: FitWindow::new(1, 60), method: FitMethod::FullModel }
    }

    /// Volatility with a decaying excess after each of `events`.
    fn relaxing_series(n: usize, events: &[usize], seed: u64) -> VolatilitySeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        for &e in events {
            values[e] = 20.0;
            for k in 1..=80 {
                for i in [e + k, e.wrapping_sub(k)] {
                    if i < n {
                        values[i] += 3.0 * (k as f64 + 2.0).powf(-0.4);
                    }
                }
            }
        }
        VolatilitySeries::from_values(values)
    }

    #[test]
    fn single_event_has_zero_error() {
        let vol = relaxing_series(400, &[200], 1);
        let events = EventSet::from_indices(&[200]);
        let res = bootstrap_error(&vol, &events, Direction::Post, &config(50, 7)).unwrap();
        assert_eq!(res.p_err, 0.0);
        assert_eq!(res.p_values.len(), 50);
    }

    #[test]
    fn deterministic_given_seed() {
        let idx: Vec<usize> = (1..30).map(|i| i * 300).collect();
        let vol = relaxing_series(9300, &idx, 2);
        let events = EventSet::from_indices(&idx);
        let a = bootstrap_error(&vol, &events, Direction::Pre, &config(60, 11)).unwrap();
        let b = bootstrap_error(&vol, &events, Direction::Pre, &config(60, 11)).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_error(&vol, &events, Direction::Pre, &config(60, 12)).unwrap();
        assert_ne!(a.p_values, c.p_values);
        assert!(a.p_err > 0.0);
    }

    #[test]
    fn too_few_replicates() {
        let vol = relaxing_series(400, &[200], 1);
        let events = EventSet::from_indices(&[200]);
        assert!(matches!(
            bootstrap_error(&vol, &events, Direction::Post, &config(10, 1)),
            Err(Error::TooFewReplicates { .. })
        ));
    }
}
