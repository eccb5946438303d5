//! Transmitter-side defenses against injected light: an isolator and a
//! narrow-band filter attenuating the attack wavelength, and a power monitor
//! acting as a threshold detector.
//!
//! The monitor only sees light while it is being injected. The induced loss
//! persists for days after the injection stops, so a monitor that is not
//! watching during the attack window cannot attribute the degraded state to
//! an attacker. Achievable thresholds are hardware-dependent and are left as
//! inputs.

use crate::error::{domain, Error, Result};
use crate::modulator::{loss_increase, PhotorefractiveModel};
use crate::primitives::{db_to_transmittance, Decibel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefenseStack {
    isolator: Decibel,
    filter: Decibel,
    monitor_threshold_uw: f64,
    monitor_noise_floor_uw: f64,
}

impl DefenseStack {
    pub fn new(
        isolator: Decibel,
        filter: Decibel,
        monitor_threshold_uw: f64,
        monitor_noise_floor_uw: f64,
    ) -> Result<Self> {
        if isolator.value() < 0.0 || filter.value() < 0.0 {
            return Err(Error::DefenseStack("attenuations must be >= 0 dB".into()));
        }
        if !(monitor_noise_floor_uw >= 0.0 && monitor_noise_floor_uw.is_finite()) {
            return Err(Error::DefenseStack("noise floor must be >= 0 uW".into()));
        }
        if !(monitor_threshold_uw > monitor_noise_floor_uw && monitor_threshold_uw.is_finite()) {
            return Err(Error::DefenseStack(
                "monitor threshold must exceed the noise floor".into(),
            ));
        }
        Ok(DefenseStack {
            isolator,
            filter,
            monitor_threshold_uw,
            monitor_noise_floor_uw,
        })
    }

    /// Lowers the isolator's rating, e.g. to account for degradation under
    /// an external magnetic field. The result is clamped at 0 dB.
    pub fn with_isolator_degradation(mut self, reduction: Decibel) -> Self {
        self.isolator =
            Decibel::new((self.isolator.value() - reduction.value()).max(0.0)).expect("finite");
        self
    }

    pub fn isolator(&self) -> Decibel {
        self.isolator
    }

    pub fn filter(&self) -> Decibel {
        self.filter
    }

    pub fn total_attenuation(&self) -> Decibel {
        self.isolator + self.filter
    }

    pub fn monitor_threshold_uw(&self) -> f64 {
        self.monitor_threshold_uw
    }

    pub fn monitor_noise_floor_uw(&self) -> f64 {
        self.monitor_noise_floor_uw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorPosition {
    BeforeDefenses,
    AfterDefenses,
}

fn check_power(injected_uw: f64) -> Result<()> {
    if !(injected_uw >= 0.0) {
        return Err(domain("injected power", injected_uw, ">= 0 uW"));
    }
    Ok(())
}

/// Injected power left after the isolator and filter.
pub fn power_at_modulator(injected_uw: f64, stack: &DefenseStack) -> Result<f64> {
    check_power(injected_uw)?;
    Ok(injected_uw * db_to_transmittance(stack.total_attenuation())?)
}

/// Whether the monitor sees more than its threshold.
pub fn monitor_detects(
    injected_uw: f64,
    stack: &DefenseStack,
    position: MonitorPosition,
) -> Result<bool> {
    let seen = match position {
        MonitorPosition::BeforeDefenses => {
            check_power(injected_uw)?;
            injected_uw
        }
        MonitorPosition::AfterDefenses => power_at_modulator(injected_uw, stack)?,
    };
    Ok(seen > stack.monitor_threshold_uw)
}

/// Loss increase Eve can still induce through the defenses.
pub fn residual_attack_strength(
    injected_uw: f64,
    stack: &DefenseStack,
    model: &PhotorefractiveModel,
) -> Result<Decibel> {
    loss_increase(model, power_at_modulator(injected_uw, stack)?)
}

/// Smallest total attenuation keeping the induced loss at or below
/// `budget` for the given injected power.
///
/// Returns `None` when no finite attenuation suffices (a zero budget, since
/// the model responds to any non-zero power).
pub fn minimum_defense(
    injected_uw: f64,
    budget: Decibel,
    model: &PhotorefractiveModel,
) -> Result<Option<Decibel>> {
    check_power(injected_uw)?;
    if budget.value() < 0.0 {
        return Err(domain("budget", budget.value(), ">= 0 dB"));
    }
    if injected_uw == 0.0 || budget.value() >= model.delta_loss_max().value() {
        return Ok(Some(Decibel::ZERO));
    }
    if budget.value() == 0.0 {
        return Ok(None);
    }
    // ΔL_max·(1 − exp(−P/P0)) = budget  ⇒  P = −P0·ln(1 − budget/ΔL_max)
    let allowed_uw = -model.p0_uw() * (-budget.value() / model.delta_loss_max().value()).ln_1p();
    let needed = 10.0 * (injected_uw / allowed_uw).log10();
    Ok(Some(Decibel::new(needed.max(0.0))?))
}
