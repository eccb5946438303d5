//! Least-squares fits of the saturating loss curve and of the recovery
//! time constant.
//!
//! Both fits are one-dimensional after profiling: for a fixed `P0` the
//! optimal amplitude of `A·(1 − exp(−P/P0))` is linear, so only `ln P0` is
//! searched (log-spaced scan, then golden-section refinement).

use crate::error::{Error, Result};
use crate::modulator::dataset::{IrradiationSeries, Phase};
use crate::modulator::{PhotorefractiveModel, PM_CLASS_RECOVERY_TAU_S};
use crate::primitives::Decibel;

const SCAN_POINTS: usize = 400;
/// Search spans this factor below the smallest and above the largest abscissa.
const SCAN_SPAN: f64 = 100.0;
const GOLDEN_TOL: f64 = 1e-13;

/// Fitted model plus per-step residuals (data minus model, dB).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub model: PhotorefractiveModel,
    pub residuals: Vec<f64>,
}

impl ModelFit {
    pub fn rms_residual(&self) -> f64 {
        if self.residuals.is_empty() {
            return 0.0;
        }
        (self.residuals.iter().map(|r| r * r).sum::<f64>() / self.residuals.len() as f64).sqrt()
    }
}

fn fail(series: &IrradiationSeries, reason: impl Into<String>) -> Error {
    Error::Fit {
        sample: series.sample_id.clone(),
        reason: reason.into(),
    }
}

/// Minimizes `f` over `[lo, hi]`: scan, then golden section around the best
/// scan point. Returns `None` when the minimum sits on the scan boundary.
fn minimize_log_scan(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let xs: Vec<f64> = (0..SCAN_POINTS).map(|i| lo + step * i as f64).collect();
    let best = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (i, f(x)))
        .min_by(|a, b| a.1.total_cmp(&b.1))?
        .0;
    if best == 0 || best == SCAN_POINTS - 1 {
        return None;
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (xs[best - 1], xs[best + 1]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > GOLDEN_TOL * (1.0 + a.abs()) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    Some(0.5 * (a + b))
}

/// Loss increases of an alteration series, relative to its first step when
/// that step has zero injected power.
fn loss_points(series: &IrradiationSeries) -> Vec<(f64, f64)> {
    let baseline = match series.steps.first() {
        Some(s) if s.injected_power_uw == 0.0 => s.insertion_loss.value(),
        _ => 0.0,
    };
    series
        .steps
        .iter()
        .map(|s| (s.injected_power_uw, s.insertion_loss.value() - baseline))
        .collect()
}

/// Fits `ΔL(P) = ΔL_max·(1 − exp(−P/P0))` to an alteration series.
///
/// The returned model carries the phase-modulator default recovery constant
/// and no dark-relaxation rate; see [`super::calibrate`] for attaching both.
pub fn fit_model(series: &IrradiationSeries) -> Result<ModelFit> {
    if series.phase != Phase::Alteration {
        return Err(fail(series, "only alteration series can be fitted"));
    }
    let points = loss_points(series);
    let mut powers: Vec<f64> = points.iter().map(|p| p.0).filter(|&p| p > 0.0).collect();
    powers.sort_by(f64::total_cmp);
    powers.dedup();
    if powers.len() < 3 {
        return Err(fail(series, "need at least 3 distinct non-zero powers"));
    }
    let first = points[0].1;
    if points.iter().all(|p| p.1 == first) {
        return Err(fail(series, "degenerate series: loss is constant"));
    }

    let amplitude = |p0: f64| -> f64 {
        let (num, den) = points.iter().fold((0.0, 0.0), |(n, d), &(p, y)| {
            let g = -(-p / p0).exp_m1();
            (n + g * y, d + g * g)
        });
        num / den
    };
    let sse = |ln_p0: f64| -> f64 {
        let p0 = ln_p0.exp();
        let a = amplitude(p0);
        points
            .iter()
            .map(|&(p, y)| {
                let r = y - a * -(-p / p0).exp_m1();
                r * r
            })
            .sum()
    };

    let lo = (powers[0] / SCAN_SPAN).ln();
    let hi = (powers[powers.len() - 1] * SCAN_SPAN).ln();
    let ln_p0 = minimize_log_scan(lo, hi, sse)
        .ok_or_else(|| fail(series, "no saturation scale identifiable from the data"))?;
    let p0 = ln_p0.exp();
    let a = amplitude(p0);
    if !(a > 0.0) {
        return Err(fail(series, "loss does not increase with power"));
    }

    let model = PhotorefractiveModel::new(Decibel::new(a)?, p0, PM_CLASS_RECOVERY_TAU_S, None)?;
    let residuals = points
        .iter()
        .map(|&(p, y)| y - a * -(-p / p0).exp_m1())
        .collect();
    Ok(ModelFit { model, residuals })
}

/// Fits the illuminated recovery constant `τ` of
/// `L(t) = L0·exp(−t/τ)` given the excess `L0` at the start of recovery.
/// Times are the cumulative step exposures.
pub fn fit_recovery_tau(series: &IrradiationSeries, initial_excess: Decibel) -> Result<f64> {
    if series.phase != Phase::Recovery {
        return Err(fail(series, "not a recovery series"));
    }
    let l0 = initial_excess.value();
    if !(l0 > 0.0) {
        return Err(fail(series, "initial excess must be positive"));
    }
    let times = series.cumulative_time_s();
    let points: Vec<(f64, f64)> = times
        .iter()
        .zip(&series.steps)
        .map(|(&t, s)| (t, s.insertion_loss.value()))
        .filter(|&(t, _)| t > 0.0)
        .collect();
    if points.len() < 2 {
        return Err(fail(series, "need at least 2 timed recovery steps"));
    }
    let sse = |ln_tau: f64| -> f64 {
        let tau = ln_tau.exp();
        points
            .iter()
            .map(|&(t, y)| {
                let r = y - l0 * (-t / tau).exp();
                r * r
            })
            .sum()
    };
    let t_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    minimize_log_scan((t_min / SCAN_SPAN).ln(), (t_max * SCAN_SPAN).ln(), sse)
        .map(f64::exp)
        .ok_or_else(|| {
            fail(
                series,
                "no recovery time constant identifiable from the data",
            )
        })
}
