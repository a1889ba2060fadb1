//! Reference parameter sets: the 31-ion linear-trap kink crystal and the
//! two-species ring used for transport.

use std::f64::consts::TAU;

use crate::crystal::Ansatz;
use crate::error::Result;
use crate::trap::{Geometry, IonSpecies, Ions, SpeciesRole, TrapModel, TrapParameters};

pub const RF_FREQUENCY_HZ: f64 = 80.8e6;
pub const MATHIEU_Q: f64 = 0.22;
pub const AXIAL_FREQUENCY_HZ: f64 = 700e3;
pub const RADIAL_RATIO: f64 = 8.38;
pub const Z_TO_Y_RATIO: f64 = 1.16;
pub const QUBIT_WAVELENGTH_M: f64 = 729e-9;
/// Cooling-transition linewidth Γ/2π of ⁴⁰Ca⁺ (Hz).
pub const COOLING_LINEWIDTH_HZ: f64 = 21.6e6;

/// Linear Paul trap with secular frequencies ω_x, 8.38 ω_x and 1.16·8.38 ω_x.
/// `scale` multiplies all secular frequencies at fixed rf frequency.
pub fn linear_trap(axial_hz: f64, scale: f64) -> Result<TrapParameters> {
    let wx = TAU * axial_hz * scale;
    let wy = RADIAL_RATIO * TAU * AXIAL_FREQUENCY_HZ * scale;
    TrapParameters::linear_paul_from_secular(TAU * RF_FREQUENCY_HZ, MATHIEU_Q, [wx, wy, Z_TO_Y_RATIO * wy])
}

/// Axial frequency for an N-ion crystal with the radial frequency held fixed,
/// chosen to keep the central spacing (and so the kink geometry) similar to
/// the 31-ion crystal. The central density of a long chain grows roughly as
/// N/L with L ∝ (N ln N / ω²)^{1/3}.
pub fn axial_frequency_for(n_ions: usize) -> f64 {
    let density = |n: f64| n / (n * n.ln()).cbrt();
    let r = density(31.0) / density(n_ions as f64);
    AXIAL_FREQUENCY_HZ * r.powf(1.5)
}

pub fn crystal_model(n_ions: usize, scale: f64) -> Result<TrapModel> {
    let p = linear_trap(axial_frequency_for(n_ions), scale)?;
    TrapModel::new(p, Ions::uniform(IonSpecies::calcium40(), n_ions))
}

/// Seed that places a site-centred kink in the middle of the zigzag.
pub fn kink_ansatz(n_ions: usize) -> Ansatz {
    Ansatz::Zigzag { kink_site: Some(n_ions / 2) }
}

/// Light qubit species used in the two-species ring.
pub fn ring_qubit() -> IonSpecies {
    IonSpecies::new("24Mg+", 23.985, 1.0, SpeciesRole::Qubit).expect("valid species")
}

pub fn ring_coolant() -> IonSpecies {
    IonSpecies::new("40Ca+", 39.963, 1.0, SpeciesRole::Coolant).expect("valid species")
}

/// Alternating light/heavy assignment; with an odd count the two light ions
/// at the seam (sites N−1 and 0) bracket the topological defect.
pub fn alternating_species(n_ions: usize) -> Ions {
    let assignment = (0..n_ions).map(|k| k % 2).collect();
    Ions::new(vec![ring_qubit(), ring_coolant()], assignment).expect("valid assignment")
}

/// Ring trap with radial secular frequency `radial_hz` for the light species
/// and axial (out-of-plane) confinement `axial_ratio` times stronger.
pub fn ring_trap(radius: f64, radial_hz: f64, axial_ratio: f64, rf_hz: f64, q: f64) -> Result<TrapParameters> {
    let beta = radial_hz / (rf_hz / 2.0);
    let a_r = beta * beta - q * q / 2.0;
    let a_z = (axial_ratio * beta).powi(2) - q * q / 2.0;
    let p = TrapParameters {
        geometry: Geometry::RingQuadrupole { radius },
        rf_angular_frequency: TAU * rf_hz,
        mathieu_q: q,
        static_curvature: [a_r, 0.0, a_z],
    };
    p.validate()?;
    Ok(p)
}
