use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::modes::excite_mode_coherent;
use super::{integrate_observed, mode_energy, CoolingModel, ForceField, IntegrateOptions, MdState, RampSchedule};
use crate::crystal::{detect_kink, find_equilibrium, CrystalConfiguration, EquilibriumOptions, KinkDescriptor, KinkKind, KinkTracker};
use crate::error::{Error, Result};
use crate::floquet::{norm_fraction, out_of_plane_fraction, pseudopotential_modes, PseudoModes};
use crate::presets;
use crate::trap::{SpeciesRole, TrapModel, Vec3};
use crate::units::UnitSystem;

/// Two-species ring with a localized kink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingSetup {
    pub n_ions: usize,
    /// Radial secular frequency of the light species in units of Ω_rf/2.
    pub radial_frequency: f64,
    pub axial_ratio: f64,
    pub rf_hz: f64,
    pub mathieu_q: f64,
    /// Mean ion spacing along the ring in dimensionless length units.
    pub spacing: f64,
    pub seed: u64,
}

impl Default for RingSetup {
    fn default() -> Self {
        Self { n_ions: 31, radial_frequency: 0.2, axial_ratio: 3.0, rf_hz: 20e6, mathieu_q: 0.05, spacing: 4.0, seed: 3 }
    }
}

impl RingSetup {
    pub fn model(&self) -> Result<TrapModel> {
        if self.n_ions.is_multiple_of(2) || self.n_ions < 5 {
            return Err(Error::invalid("the transport ring needs an odd ion count ≥ 5"));
        }
        let radius = self.spacing * self.n_ions as f64 / TAU;
        let p = presets::ring_trap(radius, self.radial_frequency * self.rf_hz / 2.0, self.axial_ratio, self.rf_hz, self.mathieu_q)?;
        TrapModel::new(p, presets::alternating_species(self.n_ions))
    }

    /// Build the ring, relax it and check that it holds a localized kink.
    pub fn prepare(&self) -> Result<PreparedRing> {
        let model = self.model()?;
        let config = find_equilibrium(&model, self.seed, 1, None, &EquilibriumOptions::default())?;
        let kink = detect_kink(&config, &model.params)?;
        if kink.kind != KinkKind::Localized {
            return Err(Error::NotLocalized(format!("ring kink is {:?}", kink.kind)));
        }
        let modes = pseudopotential_modes(&config, &model)?;
        let low_mode = low_kink_mode(&modes, &kink)?;
        let tracked = tracked_core_ion(&model, &config, &kink);
        let units = model.units()?;
        Ok(PreparedRing { model, units, config, kink, modes, low_mode, tracked })
    }
}

#[derive(Debug, Clone)]
pub struct PreparedRing {
    pub model: TrapModel,
    pub units: UnitSystem,
    pub config: CrystalConfiguration,
    pub kink: KinkDescriptor,
    pub modes: PseudoModes,
    /// Lowest in-plane mode concentrated on the kink.
    pub low_mode: usize,
    /// Qubit ion at the kink core.
    pub tracked: usize,
}

/// Lowest in-plane mode with at least half its norm on the five sites
/// around the kink centre.
fn low_kink_mode(modes: &PseudoModes, kink: &KinkDescriptor) -> Result<usize> {
    let n = kink.chain_order.len() as i64;
    let c = kink.center_site as i64;
    let window: Vec<usize> = (c - 2..=c + 2).map(|s| kink.chain_order[s.rem_euclid(n) as usize]).collect();
    let f = &modes.spectrum.frequencies;
    let normal = Vec3::from(kink.plane_normal);
    let floor = 1e-3 * f[0];
    (0..f.len())
        .rev()
        .filter(|&j| f[j] > floor)
        .find(|&j| out_of_plane_fraction(&modes.modes[j], &normal) < 0.5 && norm_fraction(&modes.modes[j], &window) >= 0.5)
        .ok_or_else(|| Error::NotLocalized("no low in-plane kink mode".into()))
}

/// Innermost qubit ion of the kink core.
fn tracked_core_ion(model: &TrapModel, config: &CrystalConfiguration, kink: &KinkDescriptor) -> usize {
    kink.core_indices
        .iter()
        .copied()
        .filter(|&i| model.ions.role(i) == SpeciesRole::Qubit)
        .min_by(|&a, &b| config.positions[a].xy().norm().total_cmp(&config.positions[b].xy().norm()))
        .unwrap_or(kink.center_index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportVariant {
    /// Fast drop of the radial confinement, then sympathetic cooling.
    RadialDecrease,
    /// Strong excitation of the low kink mode, no ramp and no cooling.
    KinkSlide,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpec {
    pub phonons: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportOptions {
    /// Final confinement scale of the radial ramp.
    pub ramp_scale: f64,
    /// Ramp duration in low-mode periods.
    pub ramp_periods: f64,
    /// Low-mode phase at which the ramp starts.
    pub ramp_mode_phase: f64,
    /// Total simulated time in low-mode periods.
    pub duration_periods: f64,
    /// Sympathetic cooling friction (dimensionless rate) on the coolant ions.
    pub friction: f64,
    /// Cooling target temperature in kelvin.
    pub temperature_k: f64,
    /// Integration steps per period of the fastest secular mode.
    pub steps_per_fast_period: usize,
    pub frames: usize,
    pub seed: u64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            ramp_scale: 0.35,
            ramp_periods: 0.2,
            ramp_mode_phase: 2.4,
            duration_periods: 60.0,
            friction: 0.01,
            temperature_k: 0.5e-3,
            steps_per_fast_period: 40,
            frames: 400,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolFrame {
    pub time: f64,
    pub kind: Option<KinkKind>,
    pub charge: Option<i32>,
    /// Tracked kink centre (chain sites, with hysteresis).
    pub center: Option<f64>,
    pub displacement: f64,
    pub tracked_radius: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// Share of the projected mode energy in the low kink mode.
    pub low_mode_share: f64,
    pub mode_energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    pub variant: TransportVariant,
    pub excitation: ExcitationSpec,
    pub setup: RingSetup,
    pub low_mode: usize,
    pub low_mode_frequency: f64,
    pub tracked_ion: usize,
    pub initial_charge: i32,
    pub frames: Vec<ProtocolFrame>,
    pub charge_conserved: bool,
    pub max_displacement: f64,
    pub final_kind: Option<KinkKind>,
    pub joined_outer_ring: bool,
    pub success: bool,
    pub diagnostics: Vec<String>,
}

fn ring_radii(model: &TrapModel, x: &[Vec3], tracked: usize) -> (f64, f64, f64) {
    let (mut inner, mut ni, mut outer, mut no) = (0.0, 0, 0.0, 0);
    for (i, p) in x.iter().enumerate() {
        if i == tracked {
            continue;
        }
        let r = p.xy().norm();
        if model.ions.role(i) == SpeciesRole::Qubit {
            inner += r;
            ni += 1;
        } else {
            outer += r;
            no += 1;
        }
    }
    (x[tracked].xy().norm(), inner / ni.max(1) as f64, outer / no.max(1) as f64)
}

/// Run one of the ring transport protocols. Unmet success criteria are
/// reported in the result rather than as errors. Motion uses the secular
/// forces of the ring trap.
pub fn transport_protocol(
    setup: &RingSetup,
    variant: TransportVariant,
    excitation: ExcitationSpec,
    opts: &TransportOptions,
) -> Result<TransportReport> {
    let ring = setup.prepare()?;
    let model = &ring.model;
    let hbar = ring.units.hbar();
    let w_low = ring.modes.spectrum.frequencies[ring.low_mode];
    let period = TAU / w_low;
    let start = excite_mode_coherent(
        &MdState::at_rest(&ring.config),
        &ring.modes.modes[ring.low_mode],
        model.masses(),
        excitation.phonons,
        excitation.phase,
        hbar,
    )?;
    let dt = TAU / (ring.modes.spectrum.frequencies[0] * opts.steps_per_fast_period as f64);
    let n_steps = (opts.duration_periods * period / dt).round() as usize;
    let stride = (n_steps / opts.frames.max(1)).max(1);
    let (schedule, cooling) = match variant {
        TransportVariant::RadialDecrease => {
            // time at which the mode phase advances from its start value to the target
            let delay = (opts.ramp_mode_phase - excitation.phase).rem_euclid(TAU) / w_low;
            let s = RampSchedule::single(delay, opts.ramp_periods * period, opts.ramp_scale, 0.0)?;
            let kt = ring.units.thermal_energy(opts.temperature_k);
            (Some(s), Some(CoolingModel::sympathetic(model, opts.friction, kt)))
        }
        TransportVariant::KinkSlide => (None, None),
    };
    let io = IntegrateOptions {
        dt,
        n_steps,
        stride,
        field: ForceField::Secular,
        escape_distance: Some(4.0 * ring.config.positions.iter().map(|p| p.norm()).fold(0.0, f64::max)),
        seed: opts.seed,
    };
    let mut tracker = KinkTracker::new(setup.n_ions, true);
    tracker.update(&ring.kink);
    let mut frames = Vec::new();
    let mut failure = None;
    let mut state = start;
    let res = integrate_observed(&mut state, model, schedule.as_ref(), cooling.as_ref(), &io, |s| {
        let scale = schedule.as_ref().map_or(1.0, |r| r.scale_at(s.time));
        let frame_params = super::scaled_params(&model.params, scale);
        let probe = CrystalConfiguration { positions: s.positions.clone(), ions: model.ions.clone(), energy: 0.0, gradient_norm: 0.0 };
        let desc = detect_kink(&probe, &frame_params).ok();
        let center = desc.as_ref().and_then(|d| tracker.update(d));
        let (tracked_radius, inner_radius, outer_radius) = ring_radii(model, &s.positions, ring.tracked);
        let (low_mode_share, mode_energies) = match mode_energy(s, &ring.config, &ring.modes, model, hbar) {
            Ok(e) => (e.share(ring.low_mode), e.energies),
            Err(err) => {
                failure = Some(err.to_string());
                (f64::NAN, Vec::new())
            }
        };
        frames.push(ProtocolFrame {
            time: s.time,
            kind: desc.as_ref().map(|d| d.kind),
            charge: desc.as_ref().map(|d| d.topological_charge),
            center,
            displacement: tracker.displacement,
            tracked_radius,
            inner_radius,
            outer_radius,
            low_mode_share,
            mode_energies,
        });
        true
    });
    let mut diagnostics = Vec::new();
    if let Err(e) = res {
        diagnostics.push(format!("integration stopped: {e}"));
    }
    if let Some(f) = failure {
        diagnostics.push(format!("mode projection failed: {f}"));
    }
    let initial_charge = ring.kink.topological_charge;
    let charge_conserved = frames.iter().all(|f| f.charge.is_none_or(|c| c == initial_charge));
    let unclassified = frames.iter().filter(|f| f.charge.is_none()).count();
    if unclassified > 0 {
        diagnostics.push(format!("{unclassified} frames could not be classified"));
    }
    let max_displacement = frames.iter().map(|f| f.displacement.abs()).fold(0.0, f64::max);
    let last = frames.last();
    let final_kind = last.and_then(|f| f.kind);
    let joined_outer_ring = last.is_some_and(|f| f.tracked_radius > 0.5 * (f.inner_radius + f.outer_radius));
    let success = charge_conserved
        && diagnostics.iter().all(|d| !d.starts_with("integration"))
        && match variant {
            TransportVariant::RadialDecrease => joined_outer_ring && final_kind == Some(KinkKind::Extended),
            TransportVariant::KinkSlide => max_displacement >= 1.0,
        };
    if !success {
        diagnostics.push(match variant {
            TransportVariant::RadialDecrease => {
                format!("final kind {final_kind:?}, core ion joined outer ring: {joined_outer_ring}")
            }
            TransportVariant::KinkSlide => format!("kink moved {max_displacement} sites"),
        });
    }
    Ok(TransportReport {
        variant,
        excitation,
        setup: setup.clone(),
        low_mode: ring.low_mode,
        low_mode_frequency: w_low,
        tracked_ion: ring.tracked,
        initial_charge,
        frames,
        charge_conserved,
        max_displacement,
        final_kind,
        joined_outer_ring,
        success,
        diagnostics,
    })
}

/// Run RadialDecrease for each ramp phase; returns (phase, success) pairs.
pub fn scan_radial_decrease(
    setup: &RingSetup,
    excitation: ExcitationSpec,
    opts: &TransportOptions,
    phases: &[f64],
) -> Result<Vec<(f64, bool)>> {
    let runs = crate::par::map_slice(phases, |&p| {
        let o = TransportOptions { ramp_mode_phase: p, ..opts.clone() };
        transport_protocol(setup, TransportVariant::RadialDecrease, excitation, &o).map(|r| (p, r.success))
    });
    runs.into_iter().collect()
}
