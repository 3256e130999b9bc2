//! Repeated-run checks of the bootstrap error and the KS test on series whose
//! ensemble-mean cumulative curve is known exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use volrelax::*;

const EVENTS: usize = 100;
const T_MAX: usize = 200;
const GAP: usize = 10 * T_MAX;

/// Volatility whose mean excess at lag `t` on either side of each event is
/// `scale * increment(t)`, with unit-mean exponential noise on every bar.
/// Background bars are rescaled so that `sigma` is exactly 1, which makes the
/// expected `V(t)` proportional to `sum_{k<=t} increment(k)`.
fn constructed(increment: impl Fn(usize) -> f64, scale: f64, seed: u64) -> (VolatilitySeries, EventSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = EVENTS * GAP + GAP;
    let mut values = vec![0.0; n];
    let mut in_window = vec![false; n];
    let origins: Vec<usize> = (1..=EVENTS).map(|k| k * GAP).collect();
    for &e in &origins {
        values[e] = 20.0;
        in_window[e] = true;
        for t in 1..=T_MAX {
            for i in [e + t, e - t] {
                let base: f64 = rng.sample(Exp1);
                let excess: f64 = rng.sample(Exp1);
                values[i] = base + scale * increment(t) * excess;
                in_window[i] = true;
            }
        }
    }
    let window_sum: f64 = values.iter().sum();
    let background: Vec<usize> = (0..n).filter(|&i| !in_window[i]).collect();
    let raw: Vec<f64> = background.iter().map(|_| rng.sample(Exp1)).collect();
    let target = n as f64 - window_sum;
    assert!(target > 0.0);
    let factor = target / raw.iter().sum::<f64>();
    for (&i, r) in background.iter().zip(raw) {
        values[i] = r * factor;
    }
    let vol = VolatilitySeries::from_values(values);
    (vol, EventSet::from_indices(&origins))
}

fn power_increment(p: f64, tau: f64) -> impl Fn(usize) -> f64 {
    let q = 1.0 - p;
    move |t| (t as f64 + tau).powf(q) - (t as f64 - 1.0 + tau).powf(q)
}

fn exp_increment(scale: f64) -> impl Fn(usize) -> f64 {
    move |t| (-(t as f64 - 1.0) / scale).exp() - (-(t as f64) / scale).exp()
}

fn config(seed: u64, replicates: usize) -> BootstrapConfig {
    BootstrapConfig { replicates, seed, t_max: T_MAX, window: FitWindow::new(1, T_MAX), method: FitMethod::FullModel }
}

#[test]
fn constructed_series_has_unit_sigma() {
    let (vol, _) = constructed(power_increment(0.3, 5.0), 2.0, 0);
    assert!((vol.sigma() - 1.0).abs() < 1e-12);
}

#[test]
fn bootstrap_error_covers_true_exponent() {
    let runs = 100;
    let mut covered = 0;
    for seed in 0..runs {
        let (vol, events) = constructed(power_increment(0.3, 5.0), 4.0, seed);
        let cum = cumulate(&remanent(&vol, &events, Direction::Post, T_MAX).unwrap()).unwrap();
        let fit = fit_lenient(&cum, FitWindow::new(1, T_MAX), FitMethod::FullModel).unwrap();
        let boot = bootstrap_error(&vol, &events, Direction::Post, &config(seed, 100)).unwrap();
        if (fit.p - 0.3).abs() <= 2.0 * boot.p_err {
            covered += 1;
        }
    }
    assert!(covered >= 90, "covered {covered}/{runs}");
}

#[test]
fn ks_calibrated_under_power_law() {
    let runs = 40;
    let mut rejected = 0;
    for seed in 0..runs {
        let (vol, events) = constructed(power_increment(0.3, 5.0), 2.0, 1000 + seed);
        let cum = cumulate(&remanent(&vol, &events, Direction::Pre, T_MAX).unwrap()).unwrap();
        let fit = fit_lenient(&cum, FitWindow::new(1, T_MAX), FitMethod::FullModel).unwrap();
        let boot = bootstrap_error(&vol, &events, Direction::Pre, &config(seed, 100)).unwrap();
        let ks = ks_test(&cum, &fit, &boot.curves).unwrap();
        if !ks.passes(0.05) {
            rejected += 1;
        }
    }
    assert!(rejected * 10 <= runs, "rejected {rejected}/{runs}");
}

#[test]
fn ks_rejects_exponential_relaxation() {
    let runs = 40;
    let mut rejected = 0;
    for seed in 0..runs {
        let (vol, events) = constructed(exp_increment(30.0), 30.0, 2000 + seed);
        let cum = cumulate(&remanent(&vol, &events, Direction::Post, T_MAX).unwrap()).unwrap();
        let fit = fit_lenient(&cum, FitWindow::new(1, T_MAX), FitMethod::FullModel).unwrap();
        let boot = bootstrap_error(&vol, &events, Direction::Post, &config(seed, 100)).unwrap();
        let ks = ks_test(&cum, &fit, &boot.curves).unwrap();
        if !ks.passes(0.05) {
            rejected += 1;
        }
    }
    assert!(rejected * 100 >= 95 * runs, "rejected {rejected}/{runs}");
}

#[test]
fn symmetric_construction_gives_symmetric_verdict() {
    let mut agree = 0;
    for seed in 0..10 {
        let (vol, events) = constructed(power_increment(0.5, 2.0), 2.0, 3000 + seed);
        let mut fits = Vec::new();
        for dir in [Direction::Pre, Direction::Post] {
            let cum = cumulate(&remanent(&vol, &events, dir, T_MAX).unwrap()).unwrap();
            let fit = fit_lenient(&cum, FitWindow::new(1, T_MAX), FitMethod::FullModel).unwrap();
            let boot = bootstrap_error(&vol, &events, dir, &config(seed, 100)).unwrap();
            fits.push((fit.p, boot.p_err));
        }
        let (m, p) = (fits[0], fits[1]);
        if (m.0 - p.0).abs() <= 2.0 * m.1.hypot(p.1) {
            agree += 1;
        }
    }
    assert!(agree >= 8, "agree {agree}/10");
}
