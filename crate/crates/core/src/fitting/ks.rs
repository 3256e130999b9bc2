//! Kolmogorov-Smirnov style goodness of fit for cumulative curves.
//!
//! The curve and the fitted model are each rescaled to `[0, 1]` over the fit
//! window and `D` is their largest gap on the sample lags. The null
//! distribution of `D` comes from a parametric bootstrap: the fitted model
//! plus event-resampled noise `V_b - V`, refitted each time.

use super::{fit_samples, PowerLawFit, SampledCurve};
use crate::error::{Error, Result};
use crate::relaxation::RelaxationCurve;

/// Replicate statistics within this distance of the observed one count as ties.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub d: f64,
    pub p_value: f64,
    pub replicates_used: usize,
}

impl KsOutcome {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

fn unit_scaled(values: &[f64]) -> Option<Vec<f64>> {
    let (first, last) = (values[0], *values.last()?);
    let span = last - first;
    (span != 0.0 && span.is_finite()).then(|| values.iter().map(|v| (v - first) / span).collect())
}

/// Largest gap between the rescaled samples and the rescaled model.
pub fn ks_statistic(samples: &SampledCurve, fit: &PowerLawFit) -> Result<f64> {
    let emp = unit_scaled(&samples.values).ok_or(Error::DegenerateKsWindow)?;
    let model: Vec<f64> = samples.lags.iter().map(|&t| fit.model(t as f64)).collect();
    let model = unit_scaled(&model).ok_or(Error::DegenerateKsWindow)?;
    Ok(emp.iter().zip(&model).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// `p_value = (1 + #{D_b >= D}) / (1 + B)` over the replicates whose
/// synthetic curve could be refitted.
pub fn ks_test(curve: &RelaxationCurve, fit: &PowerLawFit, noise: &[SampledCurve]) -> Result<KsOutcome> {
    let observed = SampledCurve::from_curve(curve, fit.window)?;
    let d = ks_statistic(&observed, fit)?;
    let model: Vec<f64> = observed.lags.iter().map(|&t| fit.model(t as f64)).collect();

    let mut used = 0usize;
    let mut at_least = 0usize;
    for replicate in noise {
        if replicate.lags != observed.lags {
            return Err(Error::NoiseMismatch);
        }
        let values = model.iter().zip(&replicate.values).zip(&observed.values).map(|((m, r), o)| m + (r - o)).collect();
        let synthetic = SampledCurve { lags: observed.lags.clone(), values };
        let refit = match fit_samples(&synthetic, fit.window, fit.method) {
            Ok(f) => f,
            Err(Error::AtBound { fit, .. }) => *fit,
            Err(_) => continue,
        };
        let Ok(d_b) = ks_statistic(&synthetic, &refit) else { continue };
        used += 1;
        if d_b >= d - TIE_EPS {
            at_least += 1;
        }
    }
    if used == 0 {
        return Err(Error::BootstrapFailures { failed: noise.len(), total: noise.len() });
    }
    Ok(KsOutcome { d, p_value: (1 + at_least) as f64 / (1 + used) as f64, replicates_used: used })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::{fit_cumulative, FitWindow};
    use crate::relaxation::{CurveKind, Direction};

    fn curve_of(values: Vec<f64>) -> RelaxationCurve {
        RelaxationCurve::from_values(CurveKind::CumulativeV, Direction::Post, values)
    }

    #[test]
    fn exact_model_has_zero_distance() {
        let curve = curve_of((0..=300).map(|t| (t as f64 + 3.0).powf(0.6) - 3f64.powf(0.6)).collect());
        let fit = fit_cumulative(&curve, FitWindow::new(1, 300)).unwrap();
        let observed = SampledCurve::from_curve(&curve, fit.window).unwrap();
        // noise replicates: small wiggles around the observed curve
        let noise: Vec<SampledCurve> = (0..20)
            .map(|b| SampledCurve {
                lags: observed.lags.clone(),
                values: observed
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * (1.0 + 0.01 * ((i * 7 + b * 13) % 11) as f64 / 11.0))
                    .collect(),
            })
            .collect();
        let out = ks_test(&curve, &fit, &noise).unwrap();
        assert!(out.d < 1e-9, "{out:?}");
        assert_eq!(out.p_value, 1.0);
        assert_eq!(out.replicates_used, 20);
    }

    #[test]
    fn constant_window_is_degenerate() {
        let curve = curve_of(vec![2.0; 50]);
        let fit = PowerLawFit {
            method: crate::fitting::FitMethod::TailSlope,
            p: 1.0,
            tau: 0.0,
            amplitude: 2.0,
            window: FitWindow::new(1, 49),
            residual_rms: 0.0,
            n_points: 0,
            p_err: None,
        };
        assert!(matches!(ks_test(&curve, &fit, &[]), Err(Error::DegenerateKsWindow)));
    }

    #[test]
    fn mismatched_noise_lags() {
        let curve = curve_of((0..=100).map(|t| (t as f64).sqrt()).collect());
        let fit = fit_cumulative(&curve, FitWindow::new(1, 100)).unwrap();
        let noise = vec![SampledCurve { lags: vec![1, 2], values: vec![1.0, 1.4] }];
        assert!(matches!(ks_test(&curve, &fit, &noise), Err(Error::NoiseMismatch)));
    }
}
