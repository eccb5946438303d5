//! Photorefractive response of lithium-niobate modulators.
//!
//! Injected light raises a modulator's insertion loss following a
//! saturating curve in injected power, `ΔL(P) = ΔL_max·(1 − exp(−P/P0))`.
//! Weak illumination erases the excess exponentially in time; in the dark it
//! relaxes slowly, modelled as a constant rate per day.

pub mod calibrate;
pub mod dataset;
pub mod fit;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::primitives::Decibel;

pub use calibrate::{calibrate_dataset, SampleCalibration};
pub use dataset::{ingest_dataset, ingest_series, Dataset, IrradiationSeries, Phase, Step};
pub use fit::{fit_model, fit_recovery_tau, ModelFit};

/// Recovery time constant assumed for phase modulators when no recovery
/// series has been measured.
pub const PM_CLASS_RECOVERY_TAU_S: f64 = 60.0;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Replicate agreement required of phase-modulator series, dB.
pub const PHASE_REPLICATE_TOLERANCE_DB: f64 = 0.1;
/// Replicate agreement required of intensity-modulator series, dB.
pub const INTENSITY_REPLICATE_TOLERANCE_DB: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModulatorKind {
    Phase,
    Intensity,
}

impl ModulatorKind {
    /// Guesses the kind from a conventional sample label (`IM-…` or `PM-…`).
    pub fn from_label(id: &str) -> ModulatorKind {
        if id.trim_start().to_ascii_uppercase().starts_with("IM") {
            ModulatorKind::Intensity
        } else {
            ModulatorKind::Phase
        }
    }

    pub fn replicate_tolerance(self) -> Decibel {
        let v = match self {
            ModulatorKind::Phase => PHASE_REPLICATE_TOLERANCE_DB,
            ModulatorKind::Intensity => INTENSITY_REPLICATE_TOLERANCE_DB,
        };
        Decibel::new(v).expect("finite")
    }
}

impl fmt::Display for ModulatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModulatorKind::Phase => "phase",
            ModulatorKind::Intensity => "intensity",
        })
    }
}

impl FromStr for ModulatorKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "phase" => Ok(ModulatorKind::Phase),
            "intensity" => Ok(ModulatorKind::Intensity),
            other => Err(format!("unknown modulator kind {other:?}")),
        }
    }
}

/// Half-wave voltages, loss and extinction summary of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulatorRecord {
    pub id: String,
    pub kind: ModulatorKind,
    pub vpi_before: f64,
    pub vpi_after: f64,
    pub vpi_recovered: f64,
    pub max_delta_loss: Decibel,
    pub extinction_before: Option<Decibel>,
    pub extinction_after: Option<Decibel>,
    /// Excess loss that relaxed over three days without illumination.
    pub natural_recovery_3day: Option<Decibel>,
}

impl ModulatorRecord {
    /// Checks that extinction data is present exactly for intensity modulators
    /// and that voltages are positive.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::Record {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        for v in [self.vpi_before, self.vpi_after, self.vpi_recovered] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad("half-wave voltages must be positive"));
            }
        }
        let has_extinction = self.extinction_before.is_some() && self.extinction_after.is_some();
        let any_extinction = self.extinction_before.is_some() || self.extinction_after.is_some();
        match self.kind {
            ModulatorKind::Intensity if !has_extinction => {
                Err(bad("intensity modulator needs extinction before and after"))
            }
            ModulatorKind::Phase if any_extinction => {
                Err(bad("phase modulator cannot carry extinction ratios"))
            }
            _ => Ok(()),
        }
    }

    /// Dark relaxation rate per day implied by the three-day datum.
    pub fn dark_relaxation_per_day(&self) -> Option<Decibel> {
        self.natural_recovery_3day
            .map(|d| Decibel::new(d.value() / 3.0).expect("finite"))
    }
}

/// Fitted saturating loss-response model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotorefractiveModel {
    delta_loss_max: Decibel,
    p0_uw: f64,
    recovery_tau_s: f64,
    dark_relaxation_per_day: Option<Decibel>,
}

impl PhotorefractiveModel {
    pub fn new(
        delta_loss_max: Decibel,
        p0_uw: f64,
        recovery_tau_s: f64,
        dark_relaxation_per_day: Option<Decibel>,
    ) -> Result<Self> {
        if !(delta_loss_max.value() > 0.0) {
            return Err(domain("delta_loss_max", delta_loss_max.value(), "> 0 dB"));
        }
        if !(p0_uw > 0.0 && p0_uw.is_finite()) {
            return Err(domain("p0", p0_uw, "> 0 uW"));
        }
        if !(recovery_tau_s > 0.0 && recovery_tau_s.is_finite()) {
            return Err(domain("recovery tau", recovery_tau_s, "> 0 s"));
        }
        if let Some(d) = dark_relaxation_per_day {
            if !(d.value() > 0.0) {
                return Err(domain("dark relaxation", d.value(), "> 0 dB/day"));
            }
        }
        Ok(PhotorefractiveModel {
            delta_loss_max,
            p0_uw,
            recovery_tau_s,
            dark_relaxation_per_day,
        })
    }

    pub fn delta_loss_max(&self) -> Decibel {
        self.delta_loss_max
    }

    pub fn p0_uw(&self) -> f64 {
        self.p0_uw
    }

    pub fn recovery_tau_s(&self) -> f64 {
        self.recovery_tau_s
    }

    pub fn dark_relaxation_per_day(&self) -> Option<Decibel> {
        self.dark_relaxation_per_day
    }

    pub fn with_recovery_tau(self, tau_s: f64) -> Result<Self> {
        Self::new(
            self.delta_loss_max,
            self.p0_uw,
            tau_s,
            self.dark_relaxation_per_day,
        )
    }

    pub fn with_dark_relaxation(self, per_day: Option<Decibel>) -> Result<Self> {
        Self::new(
            self.delta_loss_max,
            self.p0_uw,
            self.recovery_tau_s,
            per_day,
        )
    }
}

/// Insertion-loss increase at a given injected power.
pub fn loss_increase(model: &PhotorefractiveModel, power_uw: f64) -> Result<Decibel> {
    if !(power_uw >= 0.0) {
        return Err(domain("injected power", power_uw, ">= 0 uW"));
    }
    let fraction = -(-power_uw / model.p0_uw).exp_m1();
    Decibel::new(model.delta_loss_max.value() * fraction)
}

/// How the modulator is left after the attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryMode {
    /// Weak (50 μW) recovery illumination.
    Illuminated,
    /// No illumination at all.
    Dark,
}

/// Remaining excess loss after `elapsed_s` seconds of recovery.
pub fn recovery_excess_loss(
    model: &PhotorefractiveModel,
    initial_excess: Decibel,
    elapsed_s: f64,
    mode: RecoveryMode,
) -> Result<Decibel> {
    if !(initial_excess.value() >= 0.0) {
        return Err(domain("initial excess", initial_excess.value(), ">= 0 dB"));
    }
    if !(elapsed_s >= 0.0) {
        return Err(domain("elapsed time", elapsed_s, ">= 0 s"));
    }
    let remaining = match mode {
        RecoveryMode::Illuminated => {
            initial_excess.value() * (-elapsed_s / model.recovery_tau_s).exp()
        }
        RecoveryMode::Dark => {
            let rate = model
                .dark_relaxation_per_day
                .ok_or_else(|| Error::MissingDarkRelaxation("model".into()))?;
            (initial_excess.value() - rate.value() * elapsed_s / SECONDS_PER_DAY).max(0.0)
        }
    };
    Decibel::new(remaining)
}

/// Effective phase span `δ = π·Vπ_before/Vπ_after` of the encoded states
/// once the half-wave voltage has grown.
pub fn phase_remap_delta(vpi_before: f64, vpi_after: f64) -> Result<f64> {
    if !(vpi_before > 0.0 && vpi_before.is_finite()) {
        return Err(domain("vpi_before", vpi_before, "> 0 V"));
    }
    if !(vpi_after > 0.0 && vpi_after.is_finite()) {
        return Err(domain("vpi_after", vpi_after, "> 0 V"));
    }
    Ok(PI * (vpi_before / vpi_after))
}

/// Drop in extinction ratio of an intensity modulator.
pub fn extinction_penalty(record: &ModulatorRecord) -> Result<Decibel> {
    match (
        record.kind,
        record.extinction_before,
        record.extinction_after,
    ) {
        (ModulatorKind::Intensity, Some(before), Some(after)) => Ok(before - after),
        _ => Err(Error::NotIntensityModulator(record.id.clone())),
    }
}
