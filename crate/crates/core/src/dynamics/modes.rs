use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::MdState;
use crate::crystal::CrystalConfiguration;
use crate::error::{Error, Result};
use crate::floquet::{FloquetMode, PseudoModes, ZERO_MODE_FRACTION};
use crate::trap::{TrapModel, Vec3};
use crate::units::{BOLTZMANN, HBAR};

/// Doppler cooling limit ħΓ/2k_B (kelvin) for a transition of linewidth Γ/2π.
pub fn doppler_temperature(linewidth_hz: f64) -> f64 {
    HBAR * TAU * linewidth_hz / (2.0 * BOLTZMANN)
}

/// Real deviation Σ_j 2 Re(c_j u_j(t)) from complex mode amplitudes.
pub fn mode_superposition(modes: &[FloquetMode], amps: &[Complex64], t: f64) -> (Vec<Vec3>, Vec<Vec3>) {
    let n = modes.first().map_or(0, |m| m.n_ions());
    let mut dx = vec![Vec3::zeros(); n];
    let mut dv = vec![Vec3::zeros(); n];
    for (m, c) in modes.iter().zip(amps) {
        if c.norm() == 0.0 {
            continue;
        }
        let (x, v) = m.solution(t);
        for i in 0..n {
            for a in 0..3 {
                dx[i][a] += 2.0 * (c * x[i][a]).re;
                dv[i][a] += 2.0 * (c * v[i][a]).re;
            }
        }
    }
    (dx, dv)
}

/// Classical thermal amplitudes: |c_j|² exponential with mean k_B T / ω_j and
/// a uniform phase. Zero modes get no amplitude.
pub fn thermal_amplitudes<R: Rng>(frequencies: &[f64], kt: f64, rng: &mut R) -> Vec<Complex64> {
    let wmax = frequencies.iter().copied().fold(0.0, f64::max);
    frequencies
        .iter()
        .map(|&w| {
            let e: f64 = Exp1.sample(rng);
            let phase = rng.random_range(0.0..TAU);
            if w <= ZERO_MODE_FRACTION * wmax || kt <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            Complex64::from_polar((e * kt / w).sqrt(), phase)
        })
        .collect()
}

/// Reference crystal with every pseudopotential mode thermally populated at
/// `kt`, except the modes listed in `zeroed`.
pub fn doppler_thermal_sample(config: &CrystalConfiguration, modes: &PseudoModes, kt: f64, zeroed: &[usize], seed: u64) -> Result<MdState> {
    if modes.modes.first().is_some_and(|m| m.n_ions() != config.n_ions()) {
        return Err(Error::invalid("modes do not match the configuration"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amps = thermal_amplitudes(&modes.spectrum.frequencies, kt, &mut rng);
    for &j in zeroed {
        if let Some(c) = amps.get_mut(j) {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    let (dx, dv) = mode_superposition(&modes.modes, &amps, 0.0);
    let mut s = MdState::at_rest(config);
    for (p, d) in s.positions.iter_mut().zip(&dx) {
        *p += d;
    }
    s.velocities.copy_from_slice(&dv);
    Ok(s)
}

/// Add a coherent excitation of `n_phonons` quanta (action nħ) to `mode` at
/// oscillation phase `phase`, evaluated at the state's time.
pub fn excite_mode_coherent(state: &MdState, mode: &FloquetMode, masses: &[f64], n_phonons: f64, phase: f64, hbar: f64) -> Result<MdState> {
    if mode.n_ions() != state.n_ions() || masses.len() != state.n_ions() {
        return Err(Error::invalid(format!("mode for {} ions applied to {} ions", mode.n_ions(), state.n_ions())));
    }
    if !(n_phonons >= 0.0) {
        return Err(Error::invalid("phonon number must be ≥ 0"));
    }
    let mut out = state.clone();
    if n_phonons == 0.0 {
        return Ok(out);
    }
    let c = Complex64::from_polar((n_phonons * hbar).sqrt(), phase);
    let (dx, dv) = mode_superposition(std::slice::from_ref(mode), &[c], state.time);
    for i in 0..out.n_ions() {
        out.positions[i] += dx[i];
        out.velocities[i] += dv[i];
    }
    Ok(out)
}

/// Action |c|² of `mode` in the deviation of `state` from a reference
/// trajectory point.
pub fn mode_action(mode: &FloquetMode, state: &MdState, reference: &[Vec3], reference_v: &[Vec3], masses: &[f64]) -> f64 {
    let dx: Vec<Vec3> = state.positions.iter().zip(reference).map(|(a, b)| a - b).collect();
    let dv: Vec<Vec3> = state.velocities.iter().zip(reference_v).map(|(a, b)| a - b).collect();
    mode.amplitude(state.time, &dx, &dv, masses).norm_sqr()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEnergies {
    /// Harmonic energy per mode, `½(p² + ω² q²)` in mass-weighted coordinates.
    pub energies: Vec<f64>,
    /// Energy in units of ħω; zero for zero modes.
    pub phonons: Vec<f64>,
    pub projected_total: f64,
    /// Secular energy above the reference minimum, kinetic included.
    pub actual_total: f64,
    pub residual: f64,
    pub far_from_reference: bool,
}

impl ModeEnergies {
    pub fn share(&self, j: usize) -> f64 {
        if self.projected_total > 0.0 {
            self.energies[j] / self.projected_total
        } else {
            0.0
        }
    }
}

/// Residual above which the state is flagged as too far from the reference
/// for a normal-mode reading.
pub const FAR_FROM_REFERENCE: f64 = 0.2;

/// Project a state onto the secular normal modes of `config`.
pub fn mode_energy(
    state: &MdState,
    config: &CrystalConfiguration,
    modes: &PseudoModes,
    model: &TrapModel,
    hbar: f64,
) -> Result<ModeEnergies> {
    state.check(model)?;
    let n = config.n_ions();
    if state.n_ions() != n || modes.eigenvectors.nrows() != 3 * n {
        return Err(Error::invalid("state, configuration and modes disagree on the ion count"));
    }
    let masses = model.masses();
    let mut q = nalgebra::DVector::zeros(3 * n);
    let mut p = nalgebra::DVector::zeros(3 * n);
    for i in 0..n {
        let s = masses[i].sqrt();
        for a in 0..3 {
            q[3 * i + a] = s * (state.positions[i][a] - config.positions[i][a]);
            p[3 * i + a] = s * state.velocities[i][a];
        }
    }
    let qm = modes.eigenvectors.tr_mul(&q);
    let pm = modes.eigenvectors.tr_mul(&p);
    let freqs = &modes.spectrum.frequencies;
    let wmax = freqs.iter().copied().fold(0.0, f64::max);
    let energies: Vec<f64> = (0..3 * n).map(|j| 0.5 * (pm[j] * pm[j] + freqs[j] * freqs[j] * qm[j] * qm[j])).collect();
    let phonons = energies.iter().zip(freqs).map(|(e, &w)| if w > ZERO_MODE_FRACTION * wmax { e / (hbar * w) } else { 0.0 }).collect();
    let projected_total: f64 = energies.iter().sum();
    let (e, _) = model.pseudo_energy_forces(&state.positions)?;
    let (e0, _) = model.pseudo_energy_forces(&config.positions)?;
    let actual_total = e - e0 + state.kinetic_energy(masses);
    let residual = if actual_total.abs() > 0.0 { ((projected_total - actual_total) / actual_total).abs() } else { projected_total.abs() };
    Ok(ModeEnergies { energies, phonons, projected_total, actual_total, residual, far_from_reference: residual > FAR_FROM_REFERENCE })
}
