//! Sørensen–Mølmer gate on the kink bus mode acting on the three core ions.
//!
//! Time is the dimensionless trap time (rf drive frequency 2), ħ = 1 inside
//! the gate Hamiltonian.

mod calibrate;
mod hamiltonian;
mod ideal;
mod metrics;
pub mod ode;
mod propagate;
mod protocol;
mod space;
pub mod special;

pub use calibrate::{analytic_rabi, calibrate_rabi, Calibration, CalibrationOptions};
pub use hamiltonian::{interaction_hamiltonian, HamiltonianOptions, Order};
pub use ideal::{embed, expi_hermitian, fit_alpha, ghz_phases, ground_qubits, ideal_unitary, rotated_sigma_y, spin_operator};
pub use metrics::{concurrence, fidelity, fidelity_pure, metrics, purity, three_tangle, GateMetrics};
pub use propagate::{propagate_master, GateResult, PropagationOptions, QubitPhononState};
pub use protocol::{run_gate, GateProtocol, GateRun, RabiChoice};
pub use space::{projector, qubit_subsystem, GateSpace, SpinBosonOperator, QUBIT_DIM};
pub use special::{bessel_j, bessel_micromotion_factor, displacement};

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::crystal::PeriodicOrbit;
use crate::error::{Error, Result};
use crate::floquet::{FloquetMode, LaserGeometry};

/// Default |ε| / ω₁.
pub const EPSILON_FRACTION: f64 = 0.004;
/// Default ramp length in bus-mode periods.
pub const RAMP_PERIODS: f64 = 2.0;
pub const DEFAULT_N_MAX_FOCK: usize = 10;

/// α = λ̃₂ / [λ̃₁ J₀(2 k_y B₂,₁)].
pub fn compute_alpha(lambda2: f64, lambda1: f64, k_b2: f64) -> Result<f64> {
    let d = lambda1 * special::bessel_j(0, 2.0 * k_b2);
    if d.abs() < 1e-300 || !d.is_finite() {
        return Err(Error::invalid("α denominator λ̃₁ J₀(2kB₂) vanishes"));
    }
    Ok(lambda2 / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowShape {
    RaisedCosine,
}

/// Pulse envelope f(t): `pulses` back-to-back windows of length `pulse`,
/// each with raised-cosine ramps of length `ramp`, the first starting at
/// `anchor` (an rf phase in [0, π)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub shape: WindowShape,
    pub ramp: f64,
    pub pulse: f64,
    pub pulses: usize,
    pub anchor: f64,
}

impl Window {
    pub fn start(&self) -> f64 {
        self.anchor
    }

    pub fn end(&self) -> f64 {
        self.anchor + self.pulses as f64 * self.pulse
    }

    pub fn value(&self, t: f64) -> f64 {
        let s = t - self.anchor;
        if s < 0.0 || s > self.pulses as f64 * self.pulse {
            return 0.0;
        }
        let s = s - (s / self.pulse).floor().min(self.pulses as f64 - 1.0) * self.pulse;
        let edge = s.min(self.pulse - s).max(0.0);
        match self.shape {
            WindowShape::RaisedCosine if edge < self.ramp => 0.5 * (1.0 - (PI * edge / self.ramp).cos()),
            WindowShape::RaisedCosine => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pulse > 0.0) || self.pulses == 0 || self.ramp < 0.0 || 2.0 * self.ramp > self.pulse {
            return Err(Error::invalid("window needs pulse > 2·ramp ≥ 0 and at least one pulse"));
        }
        if !(0.0..PI).contains(&self.anchor) {
            return Err(Error::invalid("window anchor must lie in [0, π)"));
        }
        Ok(())
    }
}

/// Bichromatic drive Ω_i(t) = 2Ω cos(δ(t − t₀)) f(t) with δ = ω₁ − ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParameters {
    pub rabi: f64,
    pub epsilon: f64,
    pub bus_frequency: f64,
    pub optical_phase: f64,
    pub window: Window,
}

impl DriveParameters {
    /// Single gate pulse of length t* with the default ramps.
    pub fn new(rabi: f64, epsilon: f64, bus_frequency: f64, pulses: usize) -> Result<Self> {
        if epsilon == 0.0 || !epsilon.is_finite() {
            return Err(Error::invalid("ε must be nonzero"));
        }
        let window = Window {
            shape: WindowShape::RaisedCosine,
            ramp: RAMP_PERIODS * TAU / bus_frequency,
            pulse: TAU / epsilon.abs(),
            pulses,
            anchor: 0.0,
        };
        let d = Self { rabi, epsilon, bus_frequency, optical_phase: 0.0, window };
        d.validate(None)?;
        Ok(d)
    }

    pub fn detuning(&self) -> f64 {
        self.bus_frequency - self.epsilon
    }

    /// t* = 2π / |ε|.
    pub fn gate_time(&self) -> f64 {
        TAU / self.epsilon.abs()
    }

    /// θ = g₁² / ε, the S² phase rate of the resonant spin-dependent force.
    pub fn effective_coupling(&self, c: &BusCoupling) -> f64 {
        let g = 0.5 * self.rabi * c.ions[0].j0() * c.eta * c.ions[0].lambda_dc().re;
        g * g / self.epsilon
    }

    /// Checks the drive; `gap` = ω₁ − ω₂ enables the |ε| ≪ gap warning.
    pub fn validate(&self, gap: Option<f64>) -> Result<()> {
        if self.epsilon == 0.0 || !self.epsilon.is_finite() {
            return Err(Error::invalid("ε must be nonzero"));
        }
        if !(self.rabi >= 0.0) || !(self.bus_frequency > 0.0) {
            return Err(Error::invalid("Rabi and bus frequencies must be positive"));
        }
        self.window.validate()?;
        if let Some(g) = gap {
            if self.epsilon.abs() > 0.2 * g {
                log::warn!("|ε| = {:.3e} exceeds 1/5 of the spectral gap {g:.3e}", self.epsilon.abs());
            }
        }
        Ok(())
    }
}

/// Ground-state heating of the bus mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingModel {
    /// Phonon-number increase per bus-mode period.
    pub rate: f64,
}

impl HeatingModel {
    pub fn none() -> Self {
        Self { rate: 0.0 }
    }

    /// Jump-operator rate per unit time for the b† channel.
    pub fn kappa(&self, bus_frequency: f64) -> f64 {
        self.rate * bus_frequency / TAU
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0) || !self.rate.is_finite() {
            return Err(Error::invalid("heating rate must be ≥ 0"));
        }
        Ok(())
    }
}

/// Laser coupling of one core ion to the bus mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonCoupling {
    /// Crystal index.
    pub ion: usize,
    /// k·B₀.
    pub phase: f64,
    /// k·B_{2n}, n = 1..; negative harmonics are conjugates.
    pub micromotion: Vec<Complex64>,
    /// Fourier coefficients of λ(t), harmonics −m..m.
    pub lambda: Vec<Complex64>,
}

impl IonCoupling {
    pub fn lambda_dc(&self) -> Complex64 {
        self.lambda[self.lambda.len() / 2]
    }

    /// J₀(2|k·B₂|).
    pub fn j0(&self) -> f64 {
        special::bessel_j(0, 2.0 * self.micromotion.first().map_or(0.0, |c| c.norm()))
    }

    /// e^{ik·(R(t) − B₀)} with all rf harmonics.
    pub fn phase_modulation(&self, t: f64) -> Complex64 {
        let x: f64 =
            self.micromotion.iter().enumerate().map(|(k, c)| 2.0 * (c * Complex64::from_polar(1.0, 2.0 * (k + 1) as f64 * t)).re).sum();
        Complex64::from_polar(1.0, x)
    }

    pub fn lambda_at(&self, t: f64) -> Complex64 {
        let m = (self.lambda.len() / 2) as i64;
        self.lambda.iter().enumerate().map(|(k, c)| c * Complex64::from_polar(1.0, 2.0 * (k as i64 - m) as f64 * t)).sum()
    }
}

/// Everything the gate needs from the crystal: bus frequency, Lamb-Dicke
/// parameter and per-ion couplings of the three core ions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusCoupling {
    pub omega: f64,
    pub eta: f64,
    pub ions: Vec<IonCoupling>,
}

impl BusCoupling {
    /// Couplings of `core` (three crystal indices, middle ion second) to
    /// `bus` for the laser `laser`.
    pub fn from_modes(orbit: &PeriodicOrbit, bus: &FloquetMode, core: &[usize], laser: &LaserGeometry, hbar: f64) -> Result<Self> {
        if core.len() != 3 {
            return Err(Error::invalid("the gate acts on exactly three core ions"));
        }
        let khat = laser.khat();
        let k = laser.wavenumber();
        let kv = khat * k;
        let dot = |b: [Complex64; 3]| b[0] * kv.x + b[1] * kv.y + b[2] * kv.z;
        let ions = core
            .iter()
            .map(|&i| IonCoupling {
                ion: i,
                phase: dot(orbit.coefficient(0, i)).re,
                micromotion: (1..=orbit.n_max as i64).map(|n| dot(orbit.coefficient(n, i))).collect(),
                lambda: bus.projection_harmonics(i, &khat),
            })
            .collect();
        let omega = bus.quasi_frequency;
        Ok(Self { omega, eta: k * (hbar / (2.0 * omega)).sqrt(), ions })
    }

    /// Couplings from quoted values: η λ̃ per ion, k·B₂ per ion, no higher
    /// harmonics.
    pub fn from_values(omega: f64, eta: f64, eta_lambda: [f64; 3], k_b2: [f64; 3]) -> Self {
        let ions = (0..3)
            .map(|i| IonCoupling {
                ion: i,
                phase: 0.0,
                micromotion: vec![Complex64::new(k_b2[i], 0.0)],
                lambda: vec![Complex64::new(eta_lambda[i] / eta, 0.0)],
            })
            .collect();
        Self { omega, eta, ions }
    }

    /// Coupling ratio α from ion 1 and the middle ion.
    pub fn alpha(&self) -> Result<f64> {
        let kb2 = self.ions[0].micromotion.first().map_or(0.0, |c| c.norm());
        compute_alpha(self.ions[1].lambda_dc().re, self.ions[0].lambda_dc().re, kb2)
    }

    /// Local phases φ̃ᵢ = k·B₀ᵢ − φ_L of the rotated Pauli operators
    /// σ̃_y = σ_y cos φ̃ − σ_x sin φ̃ generated by this Hamiltonian (σ₊ = |e⟩⟨g|).
    pub fn local_phases(&self, optical_phase: f64) -> [f64; 3] {
        [0, 1, 2].map(|i| self.ions[i].phase - optical_phase)
    }

    /// Largest first-order Lamb-Dicke coupling η|λ̃ᵢ|.
    pub fn max_eta_lambda(&self) -> f64 {
        self.ions.iter().map(|c| self.eta * c.lambda_dc().norm()).fold(0.0, f64::max)
    }

    /// Default detuning ε = sign(α)·0.004 ω₁, which makes θ t* = π/8α
    /// reachable with θ = g²/ε.
    pub fn default_epsilon(&self) -> Result<f64> {
        Ok(self.alpha()?.signum() * EPSILON_FRACTION * self.omega)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_quotient() {
        assert_eq!(compute_alpha(2.0, 1.0, 0.0).unwrap(), 2.0);
        assert!(compute_alpha(1.0, 0.0, 0.1).is_err());
        // first zero of J₀ at 2.404825557695773
        assert!(compute_alpha(1.0, 1.0, 0.5 * 2.404_825_557_695_773).unwrap().abs() > 1e12);
    }

    #[test]
    fn window_shape() {
        let w = Window { shape: WindowShape::RaisedCosine, ramp: 2.0, pulse: 10.0, pulses: 2, anchor: 0.5 };
        w.validate().unwrap();
        assert_eq!(w.value(0.5), 0.0);
        assert!((w.value(1.5) - 0.5).abs() < 1e-12);
        assert_eq!(w.value(5.5), 1.0);
        assert!(w.value(10.5).abs() < 1e-12);
        assert_eq!(w.value(15.5), 1.0);
        assert!(w.value(20.5).abs() < 1e-12);
        assert_eq!(w.value(21.0), 0.0);
        for k in 0..200 {
            let v = w.value(0.1 * k as f64);
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(Window { anchor: 4.0, ..w }.validate().is_err());
    }

    #[test]
    fn harmonics_of_quoted_coupling() {
        let c = BusCoupling::from_values(1.0, 0.05, [-0.0121, -0.0237, -0.0121], [-0.35, 0.0, -0.35]);
        assert!((c.ions[0].j0() - 0.881_200_888_607_405).abs() < 1e-12);
        assert!((c.ions[0].phase_modulation(0.0) - Complex64::from_polar(1.0, -0.7)).norm() < 1e-14);
        assert!((c.alpha().unwrap() - 2.2227).abs() < 1e-3);
    }
}
