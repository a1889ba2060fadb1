//! Classical molecular dynamics of the crystal: rf-driven or secular forces,
//! trap ramps, Langevin cooling, coherent mode excitation and the kink
//! transport protocols.

mod modes;
mod transport;

pub use modes::{
    doppler_temperature, doppler_thermal_sample, excite_mode_coherent, mode_action, mode_energy, mode_superposition, thermal_amplitudes,
    ModeEnergies,
};
pub use transport::{
    scan_radial_decrease, transport_protocol, ExcitationSpec, PreparedRing, ProtocolFrame, RingSetup, TransportOptions, TransportReport,
    TransportVariant,
};

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coulomb;
use crate::crystal::CrystalConfiguration;
use crate::error::{Error, Result};
use crate::trap::{SpeciesRole, TrapModel, TrapParameters, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdState {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub time: f64,
}

impl MdState {
    pub fn at_rest(config: &CrystalConfiguration) -> Self {
        let n = config.n_ions();
        Self { positions: config.positions.clone(), velocities: vec![Vec3::zeros(); n], time: 0.0 }
    }

    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }

    pub fn check(&self, model: &TrapModel) -> Result<()> {
        if self.positions.len() != model.n_ions() || self.velocities.len() != model.n_ions() {
            return Err(Error::invalid(format!(
                "state has {}/{} positions/velocities for {} ions",
                self.positions.len(),
                self.velocities.len(),
                model.n_ions()
            )));
        }
        let finite = |v: &[Vec3]| v.iter().all(|p| p.iter().all(|c| c.is_finite()));
        if !finite(&self.positions) || !finite(&self.velocities) || !self.time.is_finite() {
            return Err(Error::invalid("non-finite state"));
        }
        Ok(())
    }

    pub fn kinetic_energy(&self, masses: &[f64]) -> f64 {
        self.velocities.iter().zip(masses).map(|(v, m)| 0.5 * m * v.norm_squared()).sum()
    }
}

/// Which forces drive the ions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceField {
    /// Static plus rf potential at the instantaneous time.
    #[default]
    Full,
    /// Time-averaged pseudopotential.
    Secular,
}

/// Total energy (kinetic plus potential) in the given force field.
pub fn total_energy(state: &MdState, model: &TrapModel, field: ForceField) -> Result<f64> {
    let (e, _) = match field {
        ForceField::Full => model.energy_forces(&state.positions, state.time)?,
        ForceField::Secular => model.pseudo_energy_forces(&state.positions)?,
    };
    Ok(e + state.kinetic_energy(model.masses()))
}

fn accelerations_into(model: &TrapModel, field: ForceField, x: &[Vec3], t: f64, out: &mut [Vec3]) {
    coulomb::forces_into(x, model.charges(), out);
    let masses = model.masses();
    for (i, p) in x.iter().enumerate() {
        let g = match field {
            ForceField::Full => model.ion_trap_terms(i, p, t).1,
            ForceField::Secular => model.ion_pseudo_terms(i, p).1,
        };
        out[i] = (out[i] - g) / masses[i];
    }
}

/// One segment of a confinement ramp: the scale factor moves from `from` to
/// `to` along a half-cosine between `start` and `start + duration`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSegment {
    pub start: f64,
    pub duration: f64,
    pub from: f64,
    pub to: f64,
}

/// Piecewise scale λ(t) of the trap confinement. Curvatures scale as λ² and
/// the Mathieu q as λ, so every secular frequency scales as λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub segments: Vec<RampSegment>,
    /// rf phase in [0, π) that segment starts are snapped to.
    pub anchor: f64,
}

impl RampSchedule {
    pub fn new(mut segments: Vec<RampSegment>, anchor: f64) -> Result<Self> {
        if !(0.0..PI).contains(&anchor) {
            return Err(Error::invalid(format!("ramp anchor {anchor} outside [0, π)")));
        }
        for s in segments.iter_mut() {
            if !(s.duration >= 0.0 && s.from > 0.0 && s.to > 0.0 && s.start.is_finite()) {
                return Err(Error::invalid("ramp segment needs duration ≥ 0 and positive scales"));
            }
            let k = ((s.start - anchor) / PI).ceil();
            s.start = anchor + k * PI;
        }
        let mut level = 1.0;
        let mut end = f64::NEG_INFINITY;
        for s in &segments {
            if (s.from - level).abs() > 1e-12 {
                return Err(Error::invalid(format!("ramp discontinuous: segment starts at {} after {level}", s.from)));
            }
            if s.start < end {
                return Err(Error::invalid("ramp segments overlap"));
            }
            level = s.to;
            end = s.start + s.duration;
        }
        Ok(Self { segments, anchor })
    }

    /// A single ramp from 1 to `to`.
    pub fn single(start: f64, duration: f64, to: f64, anchor: f64) -> Result<Self> {
        Self::new(vec![RampSegment { start, duration, from: 1.0, to }], anchor)
    }

    pub fn scale_at(&self, t: f64) -> f64 {
        let mut level = 1.0;
        for s in &self.segments {
            if t < s.start {
                return level;
            }
            if t < s.start + s.duration {
                let u = (t - s.start) / s.duration;
                return s.from + (s.to - s.from) * 0.5 * (1.0 - (PI * u).cos());
            }
            level = s.to;
        }
        level
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.start + s.duration)
    }

    pub fn params_at(&self, base: &TrapParameters, t: f64) -> TrapParameters {
        scaled_params(base, self.scale_at(t))
    }
}

pub fn scaled_params(base: &TrapParameters, scale: f64) -> TrapParameters {
    let mut p = *base;
    let s2 = scale * scale;
    p.static_curvature = base.static_curvature.map(|a| a * s2);
    p.mathieu_q = base.mathieu_q * scale;
    p
}

/// Langevin friction and noise, applied to the raw velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingModel {
    /// Friction rate per species (dimensionless).
    pub friction: Vec<f64>,
    /// Target k_B T in dimensionless energy units.
    pub temperature: f64,
    pub coolant_only: bool,
}

impl CoolingModel {
    pub fn uniform(n_species: usize, friction: f64, temperature: f64) -> Self {
        Self { friction: vec![friction; n_species], temperature, coolant_only: false }
    }

    /// Friction only on species marked as coolant.
    pub fn sympathetic(model: &TrapModel, friction: f64, temperature: f64) -> Self {
        let friction = model.ions.species.iter().map(|s| if s.role == SpeciesRole::Coolant { friction } else { 0.0 }).collect();
        Self { friction, temperature, coolant_only: true }
    }

    fn rate(&self, model: &TrapModel, i: usize) -> f64 {
        if self.coolant_only && model.ions.role(i) != SpeciesRole::Coolant {
            return 0.0;
        }
        self.friction.get(model.ions.assignment[i]).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub n_steps: usize,
    /// Record (or observe) every `stride` steps; the start state is always included.
    pub stride: usize,
    pub field: ForceField,
    /// Distance from the trap centre beyond which an ion counts as lost.
    pub escape_distance: Option<f64>,
    pub seed: u64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { dt: PI / 100.0, n_steps: 1000, stride: 100, field: ForceField::Full, escape_distance: None, seed: 0 }
    }
}

/// Default loss radius: ten times the initial extent of the crystal.
fn default_escape(state: &MdState) -> f64 {
    10.0 * state.positions.iter().map(|p| p.norm()).fold(1.0, f64::max)
}

/// Drift-kick-drift leapfrog with the force at the step midpoint, followed
/// by an exact Ornstein-Uhlenbeck velocity update when cooling is on.
/// `observe` sees the state every `stride` steps and may stop the run by
/// returning `false`.
pub fn integrate_observed<F>(
    state: &mut MdState,
    model: &TrapModel,
    schedule: Option<&RampSchedule>,
    cooling: Option<&CoolingModel>,
    opts: &IntegrateOptions,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(&MdState) -> bool,
{
    state.check(model)?;
    if !(opts.dt > 0.0 && opts.dt.is_finite()) || opts.stride == 0 {
        return Err(Error::invalid("dt must be positive and stride non-zero"));
    }
    let n = state.n_ions();
    let h = opts.dt;
    let escape = opts.escape_distance.unwrap_or_else(|| default_escape(state));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut acc = vec![Vec3::zeros(); n];
    let mut current: Option<(f64, TrapModel)> = None;
    let damping: Option<Vec<(f64, f64)>> = cooling.map(|c| {
        (0..n)
            .map(|i| {
                let g = c.rate(model, i);
                let decay = (-g * h).exp();
                let kick = (c.temperature / model.masses()[i] * (1.0 - decay * decay)).max(0.0).sqrt();
                (decay, kick)
            })
            .collect()
    });
    if !observe(state) {
        return Ok(());
    }
    let t0 = state.time;
    for step in 1..=opts.n_steps {
        for (x, v) in state.positions.iter_mut().zip(&state.velocities) {
            *x += v * (0.5 * h);
        }
        let tm = t0 + (step as f64 - 0.5) * h;
        let active = match schedule {
            None => model,
            Some(s) => {
                let lambda = s.scale_at(tm);
                let stale = current.as_ref().is_none_or(|(l, _)| *l != lambda);
                if stale {
                    current = Some((lambda, model.with_params(scaled_params(&model.params, lambda))?));
                }
                &current.as_ref().expect("model built above").1
            }
        };
        accelerations_into(active, opts.field, &state.positions, tm, &mut acc);
        for (v, a) in state.velocities.iter_mut().zip(&acc) {
            *v += a * h;
        }
        if let Some(d) = &damping {
            for (v, &(decay, kick)) in state.velocities.iter_mut().zip(d) {
                if kick > 0.0 || decay < 1.0 {
                    let xi = Vec3::from_fn(|_, _| StandardNormal.sample(&mut rng));
                    *v = *v * decay + xi * kick;
                }
            }
        }
        for (x, v) in state.positions.iter_mut().zip(&state.velocities) {
            *x += v * (0.5 * h);
        }
        state.time = t0 + step as f64 * h;
        if step % opts.stride == 0 || step == opts.n_steps {
            for (i, x) in state.positions.iter().enumerate() {
                let d = x.norm();
                if !(d <= escape) {
                    return Err(Error::Escape { ion: i, time: state.time, distance: d });
                }
            }
            if !observe(state) {
                break;
            }
        }
    }
    Ok(())
}

/// Integrate and keep the sampled frames.
pub fn integrate(
    state: &MdState,
    model: &TrapModel,
    schedule: Option<&RampSchedule>,
    cooling: Option<&CoolingModel>,
    opts: &IntegrateOptions,
) -> Result<Vec<MdState>> {
    let mut s = state.clone();
    let mut frames = Vec::new();
    integrate_observed(&mut s, model, schedule, cooling, opts, |f| {
        frames.push(f.clone());
        true
    })?;
    Ok(frames)
}

/// Angular frequency of the dominant tone in a uniformly sampled signal,
/// from the maximum of the Hann-windowed discrete-time Fourier transform.
pub fn dominant_frequency(signal: &[f64], dt: f64) -> f64 {
    let n = signal.len();
    if n < 4 {
        return 0.0;
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let w: Vec<f64> = (0..n).map(|k| (signal[k] - mean) * (0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos())).collect();
    let power = |omega: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, y) in w.iter().enumerate() {
            let ph = omega * dt * k as f64;
            re += y * ph.cos();
            im += y * ph.sin();
        }
        re * re + im * im
    };
    let bin = 2.0 * PI / (n as f64 * dt);
    let nyquist = PI / dt;
    let mut best = (0.0, bin);
    let mut omega = bin;
    while omega < nyquist {
        let p = power(omega);
        if p > best.0 {
            best = (p, omega);
        }
        omega += 0.25 * bin;
    }
    let (mut lo, mut hi) = (best.1 - 0.25 * bin, best.1 + 0.25 * bin);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if power(a) > power(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}
