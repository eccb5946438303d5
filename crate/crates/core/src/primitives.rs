//! Scalar building blocks shared by every other module: the [`Decibel`]
//! unit wrapper, the protocol's [`IntensitySet`], and the binary entropy.

use std::fmt;
use std::ops::{Add, Sub};

use crate::error::{domain, Error, Result};

/// A loss, gain or ratio expressed in decibels.
///
/// Any finite value is representable; operations that need a loss
/// (non-negative) check it themselves.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Decibel(f64);

impl Decibel {
    pub const ZERO: Decibel = Decibel(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(domain("decibel value", value, "finite"));
        }
        Ok(Decibel(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Linear power transmittance of this loss, `10^(-dB/10)`.
    pub fn to_transmittance(self) -> Result<f64> {
        db_to_transmittance(self)
    }
}

impl fmt::Display for Decibel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} dB", self.0)
    }
}

impl Add for Decibel {
    type Output = Decibel;
    fn add(self, rhs: Decibel) -> Decibel {
        Decibel(self.0 + rhs.0)
    }
}

impl Sub for Decibel {
    type Output = Decibel;
    fn sub(self, rhs: Decibel) -> Decibel {
        Decibel(self.0 - rhs.0)
    }
}

/// Converts a loss in dB to a linear transmittance in `(0, 1]`.
pub fn db_to_transmittance(loss: Decibel) -> Result<f64> {
    if loss.0 < 0.0 {
        return Err(domain("loss", loss.0, "loss >= 0 dB"));
    }
    Ok(10f64.powf(-loss.0 / 10.0))
}

/// Inverse of [`db_to_transmittance`].
pub fn transmittance_to_db(t: f64) -> Result<Decibel> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(domain("transmittance", t, "0 < t <= 1"));
    }
    // -10·log10(1) is -0.0; report a clean zero.
    Ok(Decibel((-10.0 * t.log10()) + 0.0))
}

/// Binary Shannon entropy in bits, with `0·log2(0) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain("probability", x, "0 <= x <= 1"));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Mean photon numbers of the signal and two decoy intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensitySet {
    mu_s: f64,
    nu_1: f64,
    nu_2: f64,
}

impl IntensitySet {
    /// Builds a set with an explicit second decoy. Requires `mu_s > nu_1 > nu_2 >= 0`.
    pub fn new(mu_s: f64, nu_1: f64, nu_2: f64) -> Result<Self> {
        let finite = mu_s.is_finite() && nu_1.is_finite() && nu_2.is_finite();
        if !finite || !(mu_s > nu_1 && nu_1 > nu_2 && nu_2 >= 0.0) {
            return Err(Error::IntensityOrder { mu_s, nu_1, nu_2 });
        }
        Ok(IntensitySet { mu_s, nu_1, nu_2 })
    }

    /// The protocol's standard configuration: second decoy is vacuum.
    pub fn vacuum_decoy(mu_s: f64, nu_1: f64) -> Result<Self> {
        Self::new(mu_s, nu_1, 0.0)
    }

    pub fn mu_s(&self) -> f64 {
        self.mu_s
    }

    pub fn nu_1(&self) -> f64 {
        self.nu_1
    }

    pub fn nu_2(&self) -> f64 {
        self.nu_2
    }

    /// Every intensity multiplied by `k > 0`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(domain("scale", k, "k > 0"));
        }
        Self::new(k * self.mu_s, k * self.nu_1, k * self.nu_2)
    }

    pub fn get(&self, label: IntensityLabel) -> f64 {
        match label {
            IntensityLabel::Signal => self.mu_s,
            IntensityLabel::Decoy1 => self.nu_1,
            IntensityLabel::Decoy2 => self.nu_2,
        }
    }
}

/// Which of the three intensities a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntensityLabel {
    Signal,
    Decoy1,
    Decoy2,
}

impl IntensityLabel {
    pub const ALL: [IntensityLabel; 3] = [
        IntensityLabel::Signal,
        IntensityLabel::Decoy1,
        IntensityLabel::Decoy2,
    ];
}
