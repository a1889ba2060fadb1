//! End-to-end preparation of a kink crystal for the gate: equilibrium, kink,
//! driven orbit, Floquet and pseudopotential modes, laser direction and bus
//! couplings.

use crate::crystal::{
    detect_kink, find_equilibrium, find_periodic_orbit, CrystalConfiguration, EquilibriumOptions, KinkDescriptor, OrbitOptions,
    PeriodicOrbit,
};
use crate::error::{Error, Result};
use crate::floquet::{
    floquet_modes, identify_localized_modes, optimize_laser_direction, pseudopotential_modes, FloquetMode, FloquetOptions,
    LaserConstraints, LaserGeometry, LocalizeOptions, LocalizedModes, ModeSpectrum, PseudoModes,
};
use crate::gate::BusCoupling;
use crate::presets;
use crate::trap::TrapModel;
use crate::units::UnitSystem;

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub seed: u64,
    pub restarts: usize,
    pub orbit_harmonics: usize,
    pub wavelength: f64,
    pub equilibrium: EquilibriumOptions,
    pub orbit: OrbitOptions,
    pub floquet: FloquetOptions,
    pub localize: LocalizeOptions,
    /// Overrides for the laser constraint thresholds (bus limit, off-resonant ratio).
    pub laser_limits: Option<(f64, f64)>,
}

impl PipelineOptions {
    pub fn for_ions(n_ions: usize) -> Self {
        Self {
            seed: 1,
            restarts: 1,
            orbit_harmonics: 3,
            wavelength: presets::QUBIT_WAVELENGTH_M,
            equilibrium: EquilibriumOptions { ansatz: presets::kink_ansatz(n_ions), ..Default::default() },
            orbit: OrbitOptions::default(),
            floquet: FloquetOptions::default(),
            localize: LocalizeOptions::default(),
            laser_limits: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KinkPipeline {
    pub model: TrapModel,
    pub units: UnitSystem,
    pub config: CrystalConfiguration,
    pub kink: KinkDescriptor,
    pub orbit: PeriodicOrbit,
    pub spectrum: ModeSpectrum,
    pub modes: Vec<FloquetMode>,
    pub pseudo: PseudoModes,
    pub localized: LocalizedModes,
    pub pseudo_localized: LocalizedModes,
    pub laser: LaserGeometry,
    pub coupling: BusCoupling,
}

impl KinkPipeline {
    pub fn run(model: TrapModel, opts: &PipelineOptions) -> Result<Self> {
        let config = find_equilibrium(&model, opts.seed, opts.restarts, None, &opts.equilibrium)?;
        let orbit = find_periodic_orbit(&model, &config, opts.orbit_harmonics, &opts.orbit)?;
        Self::from_crystal(model, config, orbit, opts)
    }

    /// Remaining stages from a known equilibrium and driven orbit.
    pub fn from_crystal(model: TrapModel, config: CrystalConfiguration, orbit: PeriodicOrbit, opts: &PipelineOptions) -> Result<Self> {
        config.verify(&model)?;
        if orbit.n_ions() != model.n_ions() {
            return Err(Error::invalid("orbit does not match the trap model"));
        }
        let units = model.units()?;
        let kink = detect_kink(&config, &model.params)?;
        let (spectrum, modes) = floquet_modes(&orbit, &opts.floquet)?;
        let pseudo = pseudopotential_modes(&config, &model)?;
        let localized = identify_localized_modes(&spectrum, &modes, &kink, &opts.localize)?;
        let pseudo_localized = identify_localized_modes(&pseudo.spectrum, &pseudo.modes, &kink, &opts.localize)?;
        let mut constraints = LaserConstraints::new(units.wavenumber(opts.wavelength), units.hbar());
        if let Some((bus, ratio)) = opts.laser_limits {
            constraints.bus_limit = bus;
            constraints.offres_ratio = ratio;
        }
        let laser = optimize_laser_direction(&spectrum, &modes, &kink, &constraints)?;
        let coupling = BusCoupling::from_modes(&orbit, &modes[localized.bus], &kink.core_indices, &laser, units.hbar())?;
        Ok(Self { model, units, config, kink, orbit, spectrum, modes, pseudo, localized, pseudo_localized, laser, coupling })
    }

    /// The reference crystal of `n_ions` ions with all trap frequencies
    /// multiplied by `scale`.
    pub fn reference(n_ions: usize, scale: f64) -> Result<Self> {
        Self::run(presets::crystal_model(n_ions, scale)?, &PipelineOptions::for_ions(n_ions))
    }

    /// Static axial curvature frequency ω_x in dimensionless units.
    pub fn axial_frequency(&self) -> f64 {
        self.model.params.static_curvature[0].sqrt()
    }

    pub fn frequencies_in_axial_units(&self) -> Vec<f64> {
        let wx = self.axial_frequency();
        self.spectrum.frequencies.iter().map(|w| w / wx).collect()
    }

    pub fn gap_ratio(&self) -> f64 {
        self.localized.gap_ratio
    }

    /// Floquet low in-plane frequency relative to its pseudopotential value, minus one.
    pub fn low_mode_shift(&self) -> f64 {
        self.spectrum.frequencies[self.localized.low_inplane] / self.pseudo.spectrum.frequencies[self.pseudo_localized.low_inplane] - 1.0
    }
}
