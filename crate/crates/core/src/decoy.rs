//! Decoy-state estimation of the single-photon gain and error rate, the
//! asymptotic key-rate lower bound built from them, and the intensity
//! accounting of the light-injection attack.
//!
//! Under attack every emitted intensity becomes `k·μ` with
//! `k = 10^(ΔLoss/10)`. Three key rates are compared:
//!
//! * **baseline**: no attack, statistics and estimation both at `μ`;
//! * **unaware**: statistics generated at `k·μ` but estimated with the
//!   nominal `μ` (what Alice and Bob believe);
//! * **secure**: the same statistics estimated with the true `k·μ`.

use crate::channel::{observe, ChannelParams, ObservedStats};
use crate::error::{domain, Error, Result};
use crate::primitives::{
    binary_entropy, db_to_transmittance, Decibel, IntensityLabel, IntensitySet,
};

/// Lower bounds on the single-photon gain and yield.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonGain {
    pub q1_lower: f64,
    pub y1_lower: f64,
}

/// Single-photon quantities needed by the key-rate bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyEstimates {
    pub q1_lower: f64,
    pub y1_lower: f64,
    /// Raw upper bound; may exceed 0.5 on pathological input.
    pub e1_upper: f64,
}

/// Lower bound on `Q1` from the vacuum-plus-weak decoy method.
///
/// The yield bound is
/// `Y1 ≥ μ/(μν1 − μν2 − ν1² + ν2²) · (Q_ν1·e^ν1 − Q_ν2·e^ν2 − (ν1² − ν2²)/μ²·(Q_μ·e^μ − Y0))`,
/// clipped to `[0, 1]`, and `Q1 = Y1·μ·e^(−μ)`, capped at `Q_μ`. Both caps
/// are physical limits of the true values, so the results stay lower bounds.
pub fn estimate_q1(
    stats: &ObservedStats,
    assumed: &IntensitySet,
    ch: &ChannelParams,
) -> Result<SinglePhotonGain> {
    let (mu, nu1, nu2) = (assumed.mu_s(), assumed.nu_1(), assumed.nu_2());
    let denominator = mu * nu1 - mu * nu2 - nu1 * nu1 + nu2 * nu2;
    if !(denominator > 0.0) {
        return Err(Error::InvalidDecoy { denominator });
    }
    let q_mu = stats.gain(IntensityLabel::Signal);
    let q_nu1 = stats.gain(IntensityLabel::Decoy1);
    let q_nu2 = stats.gain(IntensityLabel::Decoy2);

    let bracket = q_nu1 * nu1.exp()
        - q_nu2 * nu2.exp()
        - (nu1 * nu1 - nu2 * nu2) / (mu * mu) * (q_mu * mu.exp() - ch.background_rate());
    let y1_lower = (mu / denominator * bracket).clamp(0.0, 1.0);
    let q1_lower = (y1_lower * mu * (-mu).exp()).min(q_mu);
    Ok(SinglePhotonGain { q1_lower, y1_lower })
}

/// Upper bound on the single-photon error rate,
/// `e1 ≤ (E_ν1·Q_ν1·e^ν1 − E_ν2·Q_ν2·e^ν2) / ((ν1 − ν2)·Y1)`.
pub fn estimate_e1(stats: &ObservedStats, assumed: &IntensitySet, y1_lower: f64) -> Result<f64> {
    if !(y1_lower > 0.0) {
        return Err(Error::ZeroSinglePhotonYield);
    }
    let (nu1, nu2) = (assumed.nu_1(), assumed.nu_2());
    let weighted = |label, nu: f64| stats.qber(label) * stats.gain(label) * nu.exp();
    let numerator = weighted(IntensityLabel::Decoy1, nu1) - weighted(IntensityLabel::Decoy2, nu2);
    Ok(numerator / ((nu1 - nu2) * y1_lower))
}

/// Both bounds at once.
pub fn estimate(
    stats: &ObservedStats,
    assumed: &IntensitySet,
    ch: &ChannelParams,
) -> Result<Option<DecoyEstimates>> {
    let SinglePhotonGain { q1_lower, y1_lower } = estimate_q1(stats, assumed, ch)?;
    if y1_lower == 0.0 {
        return Ok(None);
    }
    let e1_upper = estimate_e1(stats, assumed, y1_lower)?;
    Ok(Some(DecoyEstimates {
        q1_lower,
        y1_lower,
        e1_upper,
    }))
}

fn check_probability(quantity: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(domain(quantity, v, "probability in [0, 1]"));
    }
    Ok(())
}

/// Asymptotic key rate per pulse,
/// `R = ½·(−Q_μ·f_e·H2(E_μ) + Q1·(1 − H2(e1)))`.
///
/// `e1` is clamped to `[0, 0.5]` first. The result may be negative.
pub fn key_rate(q_signal: f64, e_signal: f64, q1: f64, e1: f64, f_e: f64) -> Result<f64> {
    check_probability("signal gain", q_signal)?;
    check_probability("signal QBER", e_signal)?;
    check_probability("single-photon gain", q1)?;
    if e1.is_nan() {
        return Err(domain("single-photon error", e1, "not NaN"));
    }
    if !(f_e >= 1.0 && f_e.is_finite()) {
        return Err(domain("error-correction efficiency", f_e, "f_e >= 1"));
    }
    let e1 = e1.clamp(0.0, 0.5);
    let leaked = q_signal * f_e * binary_entropy(e_signal)?;
    let private = q1 * (1.0 - binary_entropy(e1)?);
    Ok(0.5 * (private - leaked))
}

/// Runs estimation and the key-rate bound on a set of statistics, treating
/// a vanishing single-photon yield as zero single-photon contribution.
pub fn key_rate_from_stats(
    stats: &ObservedStats,
    assumed: &IntensitySet,
    ch: &ChannelParams,
) -> Result<f64> {
    let q_signal = stats.gain(IntensityLabel::Signal);
    let e_signal = stats.qber(IntensityLabel::Signal);
    let f_e = ch.error_correction_efficiency();
    match estimate(stats, assumed, ch)? {
        Some(est) => key_rate(q_signal, e_signal, est.q1_lower, est.e1_upper, f_e),
        None => key_rate(q_signal, e_signal, 0.0, 0.5, f_e),
    }
}

/// No-attack key rate for the given intensities.
pub fn baseline_key_rate(intensities: &IntensitySet, ch: &ChannelParams) -> Result<f64> {
    let stats = observe(intensities, 1.0, ch)?;
    key_rate_from_stats(&stats, intensities, ch)
}

/// Intensity scale factor `k = 10^(ΔLoss/10)` induced by the attack.
pub fn delta_loss_to_k(delta_loss: Decibel) -> Result<f64> {
    if delta_loss.value() < 0.0 {
        return Err(domain("delta loss", delta_loss.value(), "ΔLoss >= 0 dB"));
    }
    Ok(1.0 / db_to_transmittance(delta_loss)?)
}

/// Beam-splitter fraction `1 − 1/k` Eve must divert so that Bob still
/// receives the nominal flux.
pub fn eve_tap_fraction(k: f64) -> Result<f64> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(domain("k", k, "k >= 1"));
    }
    Ok(1.0 - 1.0 / k)
}

/// The three key rates for one attack strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateReport {
    pub baseline: f64,
    pub unaware_estimate: f64,
    pub secure: f64,
    pub delta_loss: Decibel,
    pub total_loss: Decibel,
}

impl KeyRateReport {
    pub fn k(&self) -> f64 {
        delta_loss_to_k(self.delta_loss).expect("validated on construction")
    }
}

/// Baseline, unaware and secure key rates for a given ΔLoss.
pub fn evaluate_scenarios(
    intensities: &IntensitySet,
    ch: &ChannelParams,
    delta_loss: Decibel,
) -> Result<KeyRateReport> {
    let k = delta_loss_to_k(delta_loss)?;
    let baseline = baseline_key_rate(intensities, ch)?;
    let attacked = observe(intensities, k, ch)?;
    let unaware_estimate = key_rate_from_stats(&attacked, intensities, ch)?;
    let secure = key_rate_from_stats(&attacked, &intensities.scaled(k)?, ch)?;
    Ok(KeyRateReport {
        baseline,
        unaware_estimate,
        secure,
        delta_loss,
        total_loss: ch.total_loss(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PerIntensity;
    use crate::primitives::transmittance_to_db;

    fn db(v: f64) -> Decibel {
        Decibel::new(v).unwrap()
    }

    /// True single-photon yield of the Poisson channel.
    fn y1_true(ch: &ChannelParams) -> f64 {
        1.0 - (1.0 - ch.background_rate()) * (1.0 - ch.total_transmittance())
    }

    fn channel_with_eta(eta: f64, y0: f64, e_d: f64) -> ChannelParams {
        ChannelParams::new(transmittance_to_db(eta).unwrap(), 1.0, y0, e_d, 1.12, 0.5).unwrap()
    }

    #[test]
    fn q1_on_perfect_channel_converges_to_truth() {
        // With every n >= 1 yield equal to 1 the bound's gap is
        // -μ/(ν1(μ-ν1))·Σ_{n>=3}(ν1^n - ν1²μ^(n-2))/n! ≈ ν1·μ/6, so it is only
        // tight as ν1 -> 0.
        let ch = ChannelParams::new(Decibel::ZERO, 1.0, 0.0, 0.0, 1.0, 0.5).unwrap();
        let mu: f64 = 0.5;
        let truth = mu * (-mu).exp();
        let mut last_gap = f64::INFINITY;
        for nu1 in [0.1, 0.01, 1e-3, 1e-5, 1e-9] {
            let set = IntensitySet::vacuum_decoy(mu, nu1).unwrap();
            let stats = observe(&set, 1.0, &ch).unwrap();
            let q1 = estimate_q1(&stats, &set, &ch).unwrap().q1_lower;
            let gap = truth - q1;
            assert!(gap >= -1e-15, "nu1={nu1} gap={gap}");
            assert!(gap < last_gap);
            last_gap = gap;
        }
        assert!(last_gap < 1e-10);
    }

    #[test]
    fn q1_sound_and_close_on_reference_channel() {
        let ch = ChannelParams::reference();
        let set = IntensitySet::vacuum_decoy(0.48, 0.05).unwrap();
        let stats = observe(&set, 1.0, &ch).unwrap();
        let est = estimate_q1(&stats, &set, &ch).unwrap();
        let oracle = 0.48 * (-0.48f64).exp() * y1_true(&ch);
        assert!(est.q1_lower <= oracle);
        assert!((oracle - est.q1_lower) / oracle < 0.05);
        assert_eq!(est.q1_lower, est.y1_lower * 0.48 * (-0.48f64).exp());
    }

    #[test]
    fn dead_decoy_floors_at_zero() {
        let ch = ChannelParams::reference();
        let set = IntensitySet::vacuum_decoy(0.48, 0.05).unwrap();
        let mut stats = observe(&set, 1.0, &ch).unwrap();
        stats.gain.decoy1 = ch.background_rate();
        stats.gain.decoy2 = ch.background_rate();
        let est = estimate_q1(&stats, &set, &ch).unwrap();
        assert_eq!(est.q1_lower, 0.0);
        assert_eq!(est.y1_lower, 0.0);
        assert_eq!(estimate(&stats, &set, &ch).unwrap(), None);
    }

    #[test]
    fn invalid_decoy_denominator() {
        let ch = ChannelParams::reference();
        // μ <= ν1 + ν2 makes the denominator (ν1-ν2)(μ-ν1-ν2) non-positive.
        let set = IntensitySet::new(0.5, 0.3, 0.2).unwrap();
        let stats = observe(&set, 1.0, &ch).unwrap();
        assert!(matches!(
            estimate_q1(&stats, &set, &ch),
            Err(Error::InvalidDecoy { .. })
        ));
    }

    #[test]
    fn e1_examples() {
        let clean = channel_with_eta(0.06, 0.0, 0.0);
        let set = IntensitySet::vacuum_decoy(0.48, 0.05).unwrap();
        let stats = observe(&set, 1.0, &clean).unwrap();
        let y1 = estimate_q1(&stats, &set, &clean).unwrap().y1_lower;
        assert!(estimate_e1(&stats, &set, y1).unwrap().abs() < 1e-12);

        let ch = ChannelParams::reference();
        let stats = observe(&set, 1.0, &ch).unwrap();
        assert!((stats.qber.decoy2 * stats.gain.decoy2 - 0.5 * 2.6e-5).abs() < 1e-18);
        let y1 = estimate_q1(&stats, &set, &ch).unwrap().y1_lower;
        let e1 = estimate_e1(&stats, &set, y1).unwrap();
        let eta = ch.total_transmittance();
        let oracle = (0.5 * 2.6e-5 + 0.01 * eta) / y1_true(&ch);
        assert!(e1 >= oracle);

        assert_eq!(
            estimate_e1(&stats, &set, 0.0),
            Err(Error::ZeroSinglePhotonYield)
        );
    }

    #[test]
    fn key_rate_examples() {
        let (q, e, f) = (0.03, 0.02, 1.12);
        let leak = -0.5 * q * f * binary_entropy(e).unwrap();
        assert_eq!(key_rate(q, e, 0.0, 0.1, f).unwrap(), leak);
        assert_eq!(key_rate(q, e, 0.02, 0.5, f).unwrap(), leak);
        // above 0.5 clamps to 0.5
        assert_eq!(key_rate(q, e, 0.02, 0.9, f).unwrap(), leak);
        // below 0 clamps to 0
        assert_eq!(
            key_rate(q, e, 0.02, -0.1, f).unwrap(),
            0.5 * (0.02 - q * f * binary_entropy(e).unwrap())
        );
        assert!(key_rate(1.2, e, 0.0, 0.1, f).is_err());
        assert!(key_rate(q, e, 0.0, f64::NAN, f).is_err());
        assert!(key_rate(q, e, 0.0, 0.1, 0.5).is_err());
    }

    #[test]
    fn delta_loss_conversions() {
        assert_eq!(delta_loss_to_k(Decibel::ZERO).unwrap(), 1.0);
        assert!((delta_loss_to_k(db(3.01)).unwrap() - 2.0).abs() < 1e-3);
        // 10^1.953 = 89.7428794500748...
        assert!((delta_loss_to_k(db(19.53)).unwrap() - 89.7).abs() < 0.1);
        assert!(delta_loss_to_k(db(-0.5)).is_err());
    }

    #[test]
    fn tap_fraction() {
        assert_eq!(eve_tap_fraction(1.0).unwrap(), 0.0);
        assert_eq!(eve_tap_fraction(2.0).unwrap(), 0.5);
        // 1 - 10^-0.5 = 0.68377223398316206...
        let f = eve_tap_fraction(10f64.powf(0.5)).unwrap();
        assert!((f - 0.683_772_233_983_162).abs() < 1e-12);
        assert!(eve_tap_fraction(0.99).is_err());
        for i in 0..=200 {
            let k = 1.0 + i as f64 * 99.0 / 200.0;
            let f = eve_tap_fraction(k).unwrap();
            assert!((k * (1.0 - f) - 1.0).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn scenarios_coincide_without_attack() {
        let ch = ChannelParams::reference();
        let set = IntensitySet::vacuum_decoy(0.79, 0.005).unwrap();
        let r = evaluate_scenarios(&set, &ch, Decibel::ZERO).unwrap();
        assert_eq!(r.baseline, r.unaware_estimate);
        assert_eq!(r.baseline, r.secure);
        assert!(r.baseline > 0.0);
        assert_eq!(r.k(), 1.0);
    }

    #[test]
    fn scenarios_ordering_and_zero_key() {
        let ch = ChannelParams::reference();
        let set = IntensitySet::vacuum_decoy(0.79, 0.005).unwrap();
        let r3 = evaluate_scenarios(&set, &ch, db(3.0)).unwrap();
        assert!(r3.unaware_estimate > r3.baseline && r3.baseline > r3.secure);
        let r5 = evaluate_scenarios(&set, &ch, db(5.0)).unwrap();
        assert!(r5.secure <= 0.0);
    }

    #[test]
    fn strong_attack_estimates_stay_physical() {
        let ch = ChannelParams::reference()
            .with_total_loss(db(12.22))
            .unwrap();
        let set = IntensitySet::vacuum_decoy(0.79, 0.005).unwrap();
        for i in 0..=300 {
            let r = evaluate_scenarios(&set, &ch, db(i as f64 * 0.1)).unwrap();
            assert!(r.secure.is_finite() && r.unaware_estimate.is_finite());
            if i >= 50 {
                assert!(r.secure <= 0.0, "ΔLoss {}", i as f64 * 0.1);
            }
        }
        let k = delta_loss_to_k(db(20.0)).unwrap();
        let stats = observe(&set, k, &ch).unwrap();
        let est = estimate_q1(&stats, &set.scaled(k).unwrap(), &ch).unwrap();
        assert!((0.0..=1.0).contains(&est.y1_lower));
        assert!(est.q1_lower <= stats.gain(IntensityLabel::Signal));
    }

    #[test]
    fn stats_constructor_validates() {
        let ok = PerIntensity {
            signal: 0.1,
            decoy1: 0.01,
            decoy2: 1e-5,
        };
        assert!(ObservedStats::new(ok, ok).is_ok());
        let bad = PerIntensity { signal: 1.1, ..ok };
        assert!(ObservedStats::new(bad, ok).is_err());
    }
}
