//! Physical constants, the dimensionless unit system, and unit-string parsing.
//!
//! Time is measured in units of `2 / Ω_rf`, so the rf drive has angular
//! frequency exactly 2 and period π. Lengths are measured in the
//! Coulomb-harmonic length `ℓ` with `ℓ³ = k_e q² / (m (Ω_rf/2)²)` for the
//! reference species, which makes the Coulomb pair energy `ζ_i ζ_j / r`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Coulomb constant `1 / (4π ε0)`.
pub fn coulomb_constant() -> f64 {
    1.0 / (4.0 * PI * VACUUM_PERMITTIVITY)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    /// rf angular frequency Ω_rf in rad/s.
    pub rf_angular_frequency: f64,
    /// Reference (lightest) mass in kg.
    pub reference_mass: f64,
    /// Reference charge in C.
    pub reference_charge: f64,
}

impl UnitSystem {
    pub fn new(rf_angular_frequency: f64, reference_mass_amu: f64, reference_charge_e: f64) -> Result<Self> {
        if !(rf_angular_frequency > 0.0) {
            return Err(Error::invalid("rf frequency must be positive"));
        }
        if !(reference_mass_amu > 0.0) || !(reference_charge_e > 0.0) {
            return Err(Error::invalid("reference mass and charge must be positive"));
        }
        Ok(Self {
            rf_angular_frequency,
            reference_mass: reference_mass_amu * ATOMIC_MASS_UNIT,
            reference_charge: reference_charge_e * ELEMENTARY_CHARGE,
        })
    }

    /// Seconds per dimensionless time unit.
    pub fn time_unit(&self) -> f64 {
        2.0 / self.rf_angular_frequency
    }

    /// Metres per dimensionless length unit.
    pub fn length_unit(&self) -> f64 {
        let half = 0.5 * self.rf_angular_frequency;
        (coulomb_constant() * self.reference_charge.powi(2) / (self.reference_mass * half * half)).cbrt()
    }

    /// Joules per dimensionless energy unit.
    pub fn energy_unit(&self) -> f64 {
        let half = 0.5 * self.rf_angular_frequency;
        let l = self.length_unit();
        self.reference_mass * half * half * l * l
    }

    /// ħ expressed in dimensionless action units (energy × time).
    pub fn hbar(&self) -> f64 {
        HBAR / (self.energy_unit() * self.time_unit())
    }

    /// k_B T in dimensionless energy units.
    pub fn thermal_energy(&self, kelvin: f64) -> f64 {
        BOLTZMANN * kelvin / self.energy_unit()
    }

    pub fn angular_to_dimensionless(&self, omega: f64) -> f64 {
        omega * self.time_unit()
    }

    pub fn angular_to_physical(&self, omega: f64) -> f64 {
        omega / self.time_unit()
    }

    pub fn length_to_dimensionless(&self, metres: f64) -> f64 {
        metres / self.length_unit()
    }

    pub fn length_to_physical(&self, length: f64) -> f64 {
        length * self.length_unit()
    }

    pub fn time_to_dimensionless(&self, seconds: f64) -> f64 {
        seconds / self.time_unit()
    }

    pub fn time_to_physical(&self, t: f64) -> f64 {
        t * self.time_unit()
    }

    /// Laser wavenumber `2π/λ` in inverse dimensionless length.
    pub fn wavenumber(&self, wavelength_m: f64) -> f64 {
        2.0 * PI / wavelength_m * self.length_unit()
    }
}

/// Physical dimension of a quantity string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    /// Frequency; converted to angular frequency (rad/s) as `2π f`.
    Frequency,
    Length,
    Temperature,
    Time,
    Mass,
    Dimensionless,
}

/// Parse a quantity such as `"700 kHz"`, `"729 nm"`, `"0.5 mK"` or `"40 u"`
/// into SI (angular frequencies in rad/s, masses in amu).
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let trimmed = text.trim();
    let split = trimmed
        .char_indices()
        .find(|&(_, c)| !(c.is_ascii_digit() || matches!(c, '.' | '+' | '-' | 'e' | 'E')))
        .map(|(i, _)| i)
        .unwrap_or(trimmed.len());
    let (num, unit) = trimmed.split_at(split);
    let value: f64 = num.trim().parse().map_err(|_| Error::config(text, format!("cannot parse number in `{text}`")))?;
    let unit = unit.trim();
    let scale = match (dim, unit) {
        (Dimension::Frequency, "Hz") => 2.0 * PI,
        (Dimension::Frequency, "kHz") => 2.0 * PI * 1e3,
        (Dimension::Frequency, "MHz") => 2.0 * PI * 1e6,
        (Dimension::Frequency, "GHz") => 2.0 * PI * 1e9,
        (Dimension::Frequency, "rad/s") => 1.0,
        (Dimension::Length, "m") => 1.0,
        (Dimension::Length, "mm") => 1e-3,
        (Dimension::Length, "um") | (Dimension::Length, "µm") => 1e-6,
        (Dimension::Length, "nm") => 1e-9,
        (Dimension::Temperature, "K") => 1.0,
        (Dimension::Temperature, "mK") => 1e-3,
        (Dimension::Temperature, "uK") | (Dimension::Temperature, "µK") => 1e-6,
        (Dimension::Time, "s") => 1.0,
        (Dimension::Time, "ms") => 1e-3,
        (Dimension::Time, "us") | (Dimension::Time, "µs") => 1e-6,
        (Dimension::Time, "ns") => 1e-9,
        (Dimension::Mass, "u") | (Dimension::Mass, "amu") => 1.0,
        (Dimension::Dimensionless, "") => 1.0,
        _ => return Err(Error::config(text, format!("unit `{unit}` is not valid for a {dim:?} quantity"))),
    };
    if !value.is_finite() {
        return Err(Error::config(text, "non-finite value"));
    }
    Ok(value * scale)
}
