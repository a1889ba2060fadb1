//! Experiment configuration: a TOML file with unit strings, converted once
//! into the dimensionless inputs of the simulation crate.

use std::f64::consts::TAU;
use std::path::Path;

use kinkgate::crystal::Ansatz;
use kinkgate::dynamics::{ExcitationSpec, RingSetup, TransportOptions, TransportVariant};
use kinkgate::gate::{GateProtocol, HamiltonianOptions, HeatingModel, Order, PropagationOptions, RabiChoice};
use kinkgate::nonlinear::{BusAmplitude, HeatingOptions};
use kinkgate::pipeline::PipelineOptions;
use kinkgate::units::{parse_quantity, Dimension};
use kinkgate::{IonSpecies, Ions, SpeciesRole, TrapModel, TrapParameters};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trap: TrapSection,
    pub species: SpeciesSection,
    pub crystal: CrystalSection,
    pub modes: ModesSection,
    pub gate: GateSection,
    pub heating: HeatingSection,
    pub transport: TransportSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trap: TrapSection::default(),
            species: SpeciesSection::default(),
            crystal: CrystalSection::default(),
            modes: ModesSection::default(),
            gate: GateSection::default(),
            heating: HeatingSection::default(),
            transport: TransportSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Linear Paul trap given by its secular frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSection {
    pub rf_frequency: String,
    pub mathieu_q: f64,
    pub axial_frequency: String,
    /// In-plane radial frequency ω_y.
    pub radial_frequency: String,
    /// ω_z / ω_y.
    pub out_of_plane_ratio: f64,
    /// Multiplies every secular frequency at fixed rf.
    pub frequency_scale: f64,
}

impl Default for TrapSection {
    fn default() -> Self {
        Self {
            rf_frequency: "80.8 MHz".into(),
            mathieu_q: 0.22,
            axial_frequency: "700 kHz".into(),
            radial_frequency: "5866 kHz".into(),
            out_of_plane_ratio: 1.16,
            frequency_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeciesSection {
    pub label: String,
    pub mass: String,
    pub charge: f64,
}

impl Default for SpeciesSection {
    fn default() -> Self {
        Self { label: "40Ca+".into(), mass: "39.96259 u".into(), charge: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeding {
    /// Zigzag with a domain wall at the centre.
    Kink,
    Zigzag,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrystalSection {
    pub n_ions: usize,
    pub ansatz: Seeding,
    pub restarts: usize,
}

impl Default for CrystalSection {
    fn default() -> Self {
        Self { n_ions: 31, ansatz: Seeding::Kink, restarts: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModesSection {
    pub orbit_harmonics: usize,
    pub wavelength: String,
}

impl Default for ModesSection {
    fn default() -> Self {
        Self { orbit_harmonics: 3, wavelength: "729 nm".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateSection {
    /// Phonon-number increase per bus-mode period.
    pub heating_rate: f64,
    pub pulses: usize,
    pub rabi: RabiChoice,
    pub order: Order,
    pub micromotion_harmonics: bool,
    pub n_max_fock: usize,
    pub samples_per_gate: usize,
}

impl Default for GateSection {
    fn default() -> Self {
        let p = GateProtocol::default();
        Self {
            heating_rate: 0.75e-4,
            pulses: 1,
            rabi: RabiChoice::Calibrated,
            order: Order::FirstOrderLd,
            micromotion_harmonics: false,
            n_max_fock: p.n_max_fock,
            samples_per_gate: p.samples_per_gate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatingSection {
    /// Bath temperature; the Doppler limit when absent.
    pub bath_temperature: Option<String>,
    pub bus_amplitude: BusAmplitude,
    pub ensemble_size: usize,
    pub duration_periods: f64,
    pub steps_per_rf_period: usize,
}

impl Default for HeatingSection {
    fn default() -> Self {
        let h = HeatingOptions::default();
        Self {
            bath_temperature: None,
            bus_amplitude: h.bus_amplitude,
            ensemble_size: h.ensemble_size,
            duration_periods: h.duration_periods,
            steps_per_rf_period: h.steps_per_rf_period,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportSection {
    pub variant: TransportVariant,
    pub phonons: f64,
    pub phase: f64,
    pub n_ions: usize,
    pub rf_frequency: String,
    pub radial_frequency: String,
    pub axial_ratio: f64,
    pub mathieu_q: f64,
    /// Ion spacing along the ring in dimensionless length units.
    pub spacing: f64,
    pub ramp_scale: f64,
    pub ramp_periods: f64,
    pub ramp_mode_phase: f64,
    pub duration_periods: f64,
    pub friction: f64,
    pub cooling_temperature: String,
    pub steps_per_fast_period: usize,
    pub frames: usize,
    /// Mode phases for a RadialDecrease timing scan; empty to skip.
    pub scan_phases: Vec<f64>,
}

impl Default for TransportSection {
    fn default() -> Self {
        let r = RingSetup::default();
        let o = TransportOptions::default();
        Self {
            variant: TransportVariant::RadialDecrease,
            phonons: 1000.0,
            phase: 0.0,
            n_ions: r.n_ions,
            rf_frequency: "20 MHz".into(),
            radial_frequency: "2 MHz".into(),
            axial_ratio: r.axial_ratio,
            mathieu_q: r.mathieu_q,
            spacing: r.spacing,
            ramp_scale: o.ramp_scale,
            ramp_periods: o.ramp_periods,
            ramp_mode_phase: o.ramp_mode_phase,
            duration_periods: o.duration_periods,
            friction: o.friction,
            cooling_temperature: "0.5 mK".into(),
            steps_per_fast_period: o.steps_per_fast_period,
            frames: o.frames,
            scan_phases: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnStale {
    #[default]
    Recompute,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub cache: bool,
    pub on_stale: OnStale,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into(), cache: true, on_stale: OnStale::Recompute }
    }
}

/// Dimensionless inputs derived from a validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: TrapModel,
    pub pipeline: PipelineOptions,
    pub gate: GateProtocol,
    pub heating: HeatingOptions,
    pub ring: RingSetup,
    pub transport: TransportOptions,
    pub variant: TransportVariant,
    pub excitation: ExcitationSpec,
}

fn quantity(field: &str, text: &str, dim: Dimension) -> Result<f64> {
    parse_quantity(text, dim).map_err(|e| CliError::Field { field: field.into(), message: e.to_string() })
}

fn positive(field: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Field { field: field.into(), message: format!("must be positive, got {value}") })
    }
}

fn at_least(field: &str, value: usize, min: usize) -> Result<usize> {
    if value >= min {
        Ok(value)
    } else {
        Err(CliError::Field { field: field.into(), message: format!("must be at least {min}, got {value}") })
    }
}

fn core(field: &str, r: kinkgate::Result<impl Sized>) -> Result<()> {
    r.map(|_| ()).map_err(|e| CliError::Field { field: field.into(), message: e.to_string() })
}

impl ExperimentConfig {
    /// Parse a TOML document; errors carry the line and the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// Applies `key.path=value` overrides; values parse as TOML and fall
    /// back to plain strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Table::try_from(self).map_err(|e| CliError::Parse(e.to_string()))?;
        for item in overrides {
            let (key, raw) =
                item.split_once('=').ok_or_else(|| CliError::Field { field: item.clone(), message: "expected key=value".into() })?;
            let value = format!("v = {}", raw.trim())
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
            let path: Vec<&str> = key.trim().split('.').collect();
            let (last, parents) = path.split_last().expect("split yields at least one item");
            let mut table = &mut root;
            for p in parents {
                table = table
                    .entry(p.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| CliError::Field { field: key.into(), message: format!("`{p}` is not a section") })?;
            }
            table.insert(last.to_string(), value);
        }
        let text = toml::to_string(&root).map_err(|e| CliError::Parse(e.to_string()))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Parse(m) => CliError::Parse(format!("after --set: {m}")),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn trap_model(&self) -> Result<TrapModel> {
        let t = &self.trap;
        let rf = quantity("trap.rf_frequency", &t.rf_frequency, Dimension::Frequency)?;
        let wx = quantity("trap.axial_frequency", &t.axial_frequency, Dimension::Frequency)?;
        let wy = quantity("trap.radial_frequency", &t.radial_frequency, Dimension::Frequency)?;
        let s = positive("trap.frequency_scale", t.frequency_scale)?;
        let ratio = positive("trap.out_of_plane_ratio", t.out_of_plane_ratio)?;
        let params = TrapParameters::linear_paul_from_secular(rf, t.mathieu_q, [wx * s, wy * s, ratio * wy * s])
            .map_err(|e| CliError::Field { field: "trap".into(), message: e.to_string() })?;
        let sp = &self.species;
        let mass = positive("species.mass", quantity("species.mass", &sp.mass, Dimension::Mass)?)?;
        let species = IonSpecies::new(sp.label.clone(), mass, sp.charge, SpeciesRole::Qubit)
            .map_err(|e| CliError::Field { field: "species".into(), message: e.to_string() })?;
        let n = at_least("crystal.n_ions", self.crystal.n_ions, 2)?;
        TrapModel::new(params, Ions::uniform(species, n)).map_err(|e| CliError::Field { field: "trap".into(), message: e.to_string() })
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let model = self.trap_model()?;
        let n = self.crystal.n_ions;

        let mut pipeline = PipelineOptions::for_ions(n);
        pipeline.seed = self.seed;
        pipeline.restarts = at_least("crystal.restarts", self.crystal.restarts, 1)?;
        pipeline.orbit_harmonics = at_least("modes.orbit_harmonics", self.modes.orbit_harmonics, 1)?;
        pipeline.wavelength = positive("modes.wavelength", quantity("modes.wavelength", &self.modes.wavelength, Dimension::Length)?)?;
        pipeline.equilibrium.ansatz = match self.crystal.ansatz {
            Seeding::Kink => Ansatz::Zigzag { kink_site: Some(n / 2) },
            Seeding::Zigzag => Ansatz::Zigzag { kink_site: None },
            Seeding::Random => Ansatz::Random,
        };

        let g = &self.gate;
        let heating_model = HeatingModel { rate: g.heating_rate };
        core("gate.heating_rate", heating_model.validate())?;
        let gate = GateProtocol {
            pulses: at_least("gate.pulses", g.pulses, 1)?,
            heating: heating_model,
            rabi: g.rabi,
            n_max_fock: at_least("gate.n_max_fock", g.n_max_fock, 2)?,
            samples_per_gate: at_least("gate.samples_per_gate", g.samples_per_gate, 1)?,
            propagation: PropagationOptions {
                hamiltonian: HamiltonianOptions { order: g.order, micromotion_harmonics: g.micromotion_harmonics },
                ..Default::default()
            },
        };
        if let RabiChoice::Fixed(r) = g.rabi {
            positive("gate.rabi", r)?;
        }

        let h = &self.heating;
        let bath = match &h.bath_temperature {
            Some(t) => quantity("heating.bath_temperature", t, Dimension::Temperature)?,
            None => HeatingOptions::default().bath_temperature_k,
        };
        if !(bath >= 0.0) {
            return Err(CliError::Field { field: "heating.bath_temperature".into(), message: "must be ≥ 0".into() });
        }
        let heating = HeatingOptions {
            bath_temperature_k: bath,
            bus_amplitude: h.bus_amplitude,
            ensemble_size: at_least("heating.ensemble_size", h.ensemble_size, 4)?,
            duration_periods: positive("heating.duration_periods", h.duration_periods)?,
            steps_per_rf_period: at_least("heating.steps_per_rf_period", h.steps_per_rf_period, 50)?,
            seed: self.seed,
        };
        if !heating.ensemble_size.is_multiple_of(2) {
            return Err(CliError::Field { field: "heating.ensemble_size".into(), message: "must be even".into() });
        }

        let tr = &self.transport;
        let rf = quantity("transport.rf_frequency", &tr.rf_frequency, Dimension::Frequency)?;
        let wr = quantity("transport.radial_frequency", &tr.radial_frequency, Dimension::Frequency)?;
        let n_ring = at_least("transport.n_ions", tr.n_ions, 5)?;
        if n_ring.is_multiple_of(2) {
            return Err(CliError::Field { field: "transport.n_ions".into(), message: "ring transport needs an odd ion count".into() });
        }
        let ring = RingSetup {
            n_ions: n_ring,
            radial_frequency: positive("transport.radial_frequency", wr / (0.5 * rf))?,
            axial_ratio: positive("transport.axial_ratio", tr.axial_ratio)?,
            rf_hz: rf / TAU,
            mathieu_q: tr.mathieu_q,
            spacing: positive("transport.spacing", tr.spacing)?,
            seed: self.seed,
        };
        let transport = TransportOptions {
            ramp_scale: positive("transport.ramp_scale", tr.ramp_scale)?,
            ramp_periods: positive("transport.ramp_periods", tr.ramp_periods)?,
            ramp_mode_phase: tr.ramp_mode_phase,
            duration_periods: positive("transport.duration_periods", tr.duration_periods)?,
            friction: tr.friction,
            temperature_k: quantity("transport.cooling_temperature", &tr.cooling_temperature, Dimension::Temperature)?,
            steps_per_fast_period: at_least("transport.steps_per_fast_period", tr.steps_per_fast_period, 4)?,
            frames: at_least("transport.frames", tr.frames, 1)?,
            seed: self.seed,
        };
        if !(tr.phonons >= 0.0) {
            return Err(CliError::Field { field: "transport.phonons".into(), message: "must be ≥ 0".into() });
        }
        let excitation = ExcitationSpec { phonons: tr.phonons, phase: tr.phase };
        Ok(Resolved { model, pipeline, gate, heating, ring, transport, variant: tr.variant, excitation })
    }
}
