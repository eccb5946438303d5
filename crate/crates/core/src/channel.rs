//! Asymptotic forward model of the gains and error rates Alice and Bob
//! observe for a given pulse intensity.
//!
//! Yields follow the usual decoy-state channel: an n-photon pulse clicks with
//! probability `Y_n = 1 - (1 - Y0)(1 - η)^n`. Summed over the Poisson
//! photon-number distribution this gives `Q = Y0 + (1 - Y0)(1 - exp(-η·μ))`.
//! Errors come from background clicks (rate `e_0`) and optical misalignment
//! (`e_d`): `e_n·Y_n = e_0·Y0 + e_d·(1 - (1 - η)^n)`.

use crate::error::{domain, Error, Result};
use crate::primitives::{
    db_to_transmittance, transmittance_to_db, Decibel, IntensityLabel, IntensitySet,
};

/// Background rate per pulse used in the reference simulation.
pub const REFERENCE_BACKGROUND_RATE: f64 = 2.6e-5;
/// Total misalignment error used in the reference simulation.
pub const REFERENCE_MISALIGNMENT: f64 = 0.01;
/// Error-correction inefficiency used in the reference simulation.
pub const REFERENCE_EC_EFFICIENCY: f64 = 1.12;
/// Detection efficiency used in the reference simulation.
pub const REFERENCE_DETECTOR_EFFICIENCY: f64 = 0.6;
/// Link loss of the fixed-loss scenario; with the detector it totals ~12.22 dB.
pub const REFERENCE_LINK_LOSS_DB: f64 = 10.0;
/// Error rate of background (dark) clicks.
pub const DEFAULT_BACKGROUND_ERROR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    link_loss: Decibel,
    detector_efficiency: f64,
    background_rate: f64,
    misalignment_error: f64,
    error_correction_efficiency: f64,
    background_error: f64,
}

impl ChannelParams {
    pub fn new(
        link_loss: Decibel,
        detector_efficiency: f64,
        background_rate: f64,
        misalignment_error: f64,
        error_correction_efficiency: f64,
        background_error: f64,
    ) -> Result<Self> {
        if link_loss.value() < 0.0 {
            return Err(domain("link loss", link_loss.value(), "loss >= 0 dB"));
        }
        if !(detector_efficiency > 0.0 && detector_efficiency <= 1.0) {
            return Err(domain(
                "detector efficiency",
                detector_efficiency,
                "0 < eta_d <= 1",
            ));
        }
        if !(0.0..1.0).contains(&background_rate) {
            return Err(domain("background rate", background_rate, "0 <= Y0 < 1"));
        }
        if !(0.0..0.5).contains(&misalignment_error) {
            return Err(domain(
                "misalignment error",
                misalignment_error,
                "0 <= e_d < 0.5",
            ));
        }
        if !(error_correction_efficiency >= 1.0 && error_correction_efficiency.is_finite()) {
            return Err(domain(
                "error-correction efficiency",
                error_correction_efficiency,
                "f_e >= 1",
            ));
        }
        if !(0.0..=1.0).contains(&background_error) {
            return Err(domain(
                "background error",
                background_error,
                "0 <= e_0 <= 1",
            ));
        }
        Ok(ChannelParams {
            link_loss,
            detector_efficiency,
            background_rate,
            misalignment_error,
            error_correction_efficiency,
            background_error,
        })
    }

    /// The reference parameter set: 10 dB link, η_d = 0.6, Y0 = 2.6e-5,
    /// e_d = 0.01, f_e = 1.12, e_0 = 0.5.
    pub fn reference() -> Self {
        ChannelParams {
            link_loss: Decibel::new(REFERENCE_LINK_LOSS_DB).expect("finite"),
            detector_efficiency: REFERENCE_DETECTOR_EFFICIENCY,
            background_rate: REFERENCE_BACKGROUND_RATE,
            misalignment_error: REFERENCE_MISALIGNMENT,
            error_correction_efficiency: REFERENCE_EC_EFFICIENCY,
            background_error: DEFAULT_BACKGROUND_ERROR,
        }
    }

    pub fn with_link_loss(mut self, link_loss: Decibel) -> Result<Self> {
        if link_loss.value() < 0.0 {
            return Err(domain("link loss", link_loss.value(), "loss >= 0 dB"));
        }
        self.link_loss = link_loss;
        Ok(self)
    }

    /// Re-targets the channel to a given total loss (link plus detector).
    ///
    /// The detector contribution is kept and the link absorbs the rest. A
    /// total below the detector's own loss is realized as a lossless link
    /// with the detector efficiency raised to `10^(-total/10)`, so the total
    /// transmittance always equals the requested one.
    pub fn with_total_loss(self, total: Decibel) -> Result<Self> {
        let eta = db_to_transmittance(total)?;
        let detector_db = transmittance_to_db(self.detector_efficiency)?;
        if total.value() >= detector_db.value() {
            self.with_link_loss(Decibel::new(total.value() - detector_db.value())?)
        } else {
            let mut ch = self.with_link_loss(Decibel::ZERO)?;
            ch.detector_efficiency = eta;
            Ok(ch)
        }
    }

    pub fn link_loss(&self) -> Decibel {
        self.link_loss
    }

    pub fn detector_efficiency(&self) -> f64 {
        self.detector_efficiency
    }

    pub fn background_rate(&self) -> f64 {
        self.background_rate
    }

    pub fn misalignment_error(&self) -> f64 {
        self.misalignment_error
    }

    pub fn error_correction_efficiency(&self) -> f64 {
        self.error_correction_efficiency
    }

    pub fn background_error(&self) -> f64 {
        self.background_error
    }

    /// Total transmittance η = η_d · 10^(-link/10).
    pub fn total_transmittance(&self) -> f64 {
        total_transmittance(self)
    }

    pub fn total_loss(&self) -> Decibel {
        transmittance_to_db(self.total_transmittance()).expect("η in (0, 1]")
    }
}

pub fn total_transmittance(ch: &ChannelParams) -> f64 {
    ch.detector_efficiency * db_to_transmittance(ch.link_loss).expect("validated link loss")
}

fn check_intensity(intensity: f64) -> Result<()> {
    if !(intensity >= 0.0) {
        return Err(domain("intensity", intensity, "mean photon number >= 0"));
    }
    Ok(())
}

/// Probability `1 - exp(-η·μ)` that at least one photon is detected,
/// ignoring background.
fn signal_click(intensity: f64, ch: &ChannelParams) -> f64 {
    -(-ch.total_transmittance() * intensity).exp_m1()
}

/// Overall gain `Q = Y0 + (1 - Y0)(1 - exp(-η·μ))`, at most 1.
pub fn simulate_gain(intensity: f64, ch: &ChannelParams) -> Result<f64> {
    check_intensity(intensity)?;
    let y0 = ch.background_rate;
    Ok((y0 + (1.0 - y0) * signal_click(intensity, ch)).min(1.0))
}

/// Overall QBER `E = (e_0·Y0 + e_d·(1 - exp(-η·μ))) / Q`.
///
/// A channel with no clicks at all (`Q = 0`, only possible with `Y0 = 0` and
/// `μ = 0`) reports zero error.
pub fn simulate_qber(intensity: f64, ch: &ChannelParams) -> Result<f64> {
    let q = simulate_gain(intensity, ch)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    let errors = ch.background_error * ch.background_rate
        + ch.misalignment_error * signal_click(intensity, ch);
    Ok(errors / q)
}

/// One value per protocol intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerIntensity<T> {
    pub signal: T,
    pub decoy1: T,
    pub decoy2: T,
}

impl<T: Copy> PerIntensity<T> {
    pub fn get(&self, label: IntensityLabel) -> T {
        match label {
            IntensityLabel::Signal => self.signal,
            IntensityLabel::Decoy1 => self.decoy1,
            IntensityLabel::Decoy2 => self.decoy2,
        }
    }
}

/// Gains and QBERs as measured at each intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedStats {
    pub gain: PerIntensity<f64>,
    pub qber: PerIntensity<f64>,
}

impl ObservedStats {
    /// Builds stats from externally measured values; every entry must be a
    /// probability.
    pub fn new(gain: PerIntensity<f64>, qber: PerIntensity<f64>) -> Result<Self> {
        for label in IntensityLabel::ALL {
            for (what, v) in [("gain", gain.get(label)), ("qber", qber.get(label))] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain {
                        quantity: what,
                        value: v,
                        expected: "probability in [0, 1]",
                    });
                }
            }
        }
        Ok(ObservedStats { gain, qber })
    }

    pub fn gain(&self, label: IntensityLabel) -> f64 {
        self.gain.get(label)
    }

    pub fn qber(&self, label: IntensityLabel) -> f64 {
        self.qber.get(label)
    }
}

/// Statistics generated by pulses whose true intensities are `scale`·μ.
pub fn observe(
    intensities: &IntensitySet,
    scale: f64,
    ch: &ChannelParams,
) -> Result<ObservedStats> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(domain("scale", scale, "k > 0"));
    }
    let at = |label| -> Result<(f64, f64)> {
        let mu = scale * intensities.get(label);
        Ok((simulate_gain(mu, ch)?, simulate_qber(mu, ch)?))
    };
    let (qs, es) = at(IntensityLabel::Signal)?;
    let (q1, e1) = at(IntensityLabel::Decoy1)?;
    let (q2, e2) = at(IntensityLabel::Decoy2)?;
    Ok(ObservedStats {
        gain: PerIntensity {
            signal: qs,
            decoy1: q1,
            decoy2: q2,
        },
        qber: PerIntensity {
            signal: es,
            decoy1: e1,
            decoy2: e2,
        },
    })
}
