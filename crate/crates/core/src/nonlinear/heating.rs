use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crystal::PeriodicOrbit;
use crate::dynamics::{
    doppler_temperature, integrate_observed, mode_superposition, thermal_amplitudes, ForceField, IntegrateOptions, MdState,
};
use crate::error::{Error, Result};
use crate::floquet::FloquetMode;
use crate::par;
use crate::pipeline::KinkPipeline;
use crate::presets;
use crate::trap::TrapModel;

/// Initial amplitude of the bus and the other ground-state modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusAmplitude {
    /// Action ħ/2 with a random phase.
    #[default]
    ZeroPoint,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatingOptions {
    pub bath_temperature_k: f64,
    pub bus_amplitude: BusAmplitude,
    pub ensemble_size: usize,
    /// Run length in bus-mode periods.
    pub duration_periods: f64,
    pub steps_per_rf_period: usize,
    pub seed: u64,
}

impl Default for HeatingOptions {
    fn default() -> Self {
        Self {
            bath_temperature_k: doppler_temperature(presets::COOLING_LINEWIDTH_HZ),
            bus_amplitude: BusAmplitude::ZeroPoint,
            ensemble_size: 200,
            duration_periods: 100.0,
            steps_per_rf_period: 100,
            seed: 1,
        }
    }
}

/// Fits below this R² are flagged; the trace is always attached.
pub const MIN_R_SQUARED: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatingEstimate {
    /// Growth of the bus occupation per bus-mode period.
    pub rate: f64,
    pub std_error: f64,
    /// 95% interval from the spread of per-pair slopes.
    pub confidence_interval: (f64, f64),
    pub ensemble_size: usize,
    pub bath_temperature_k: f64,
    pub r_squared: f64,
    pub nonlinear_fit: bool,
    /// Sample times in bus periods and the ensemble-mean occupation |c|²/ħ.
    pub times: Vec<f64>,
    pub mean_occupation: Vec<f64>,
}

fn fit_line(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in t.iter().zip(y) {
        stt += (a - tm) * (a - tm);
        sty += (a - tm) * (b - ym);
        syy += (b - ym) * (b - ym);
    }
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let r2 = if syy > 0.0 { slope * sty / syy } else { 1.0 };
    (slope, ym - slope * tm, r2)
}

/// Classical ensemble of rf-driven trajectories about `orbit`. Modes listed
/// in `ground` (the bus included) start at the amplitude set by
/// `opts.bus_amplitude`; all other modes are thermal at `kt`. The bus action
/// is read once per rf period.
#[allow(clippy::too_many_arguments)]
pub fn heating_ensemble(
    orbit: &PeriodicOrbit,
    model: &TrapModel,
    modes: &[FloquetMode],
    bus: usize,
    ground: &[usize],
    hbar: f64,
    kt: f64,
    opts: &HeatingOptions,
) -> Result<HeatingEstimate> {
    if opts.ensemble_size < 4 || opts.ensemble_size % 2 == 1 {
        return Err(Error::invalid("the ensemble size must be even and at least 4"));
    }
    if !(opts.duration_periods >= 100.0) {
        return Err(Error::invalid("heating runs need at least 100 bus periods"));
    }
    if bus >= modes.len() || modes.len() != 3 * model.n_ions() {
        return Err(Error::invalid("bus index or mode count does not match the crystal"));
    }
    let w_bus = modes[bus].quasi_frequency;
    let bus_period = TAU / w_bus;
    let rf_periods = (opts.duration_periods * bus_period / PI).ceil() as usize;
    let frequencies: Vec<f64> = modes.iter().map(|m| m.quasi_frequency).collect();
    let x0 = orbit.positions(0.0);
    let v0 = orbit.velocities(0.0);
    let masses = model.masses();
    let io = IntegrateOptions {
        dt: PI / opts.steps_per_rf_period as f64,
        n_steps: rf_periods * opts.steps_per_rf_period,
        stride: opts.steps_per_rf_period,
        field: ForceField::Full,
        escape_distance: None,
        seed: 0,
    };
    // Trajectories come in pairs sharing the bath sample, with the bus
    // amplitude of the second reversed.
    let run = |k: usize| -> Result<Vec<f64>> {
        let pair = (k / 2) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ pair.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut amps = thermal_amplitudes(&frequencies, kt, &mut rng);
        for &j in ground {
            amps[j] = match opts.bus_amplitude {
                BusAmplitude::ZeroPoint => Complex64::from_polar((0.5 * hbar).sqrt(), rng.random_range(0.0..TAU)),
                BusAmplitude::Zero => Complex64::new(0.0, 0.0),
            };
        }
        if k % 2 == 1 {
            amps[bus] = -amps[bus];
        }
        let (dx, dv) = mode_superposition(modes, &amps, 0.0);
        let mut state = MdState {
            positions: x0.iter().zip(&dx).map(|(a, b)| a + b).collect(),
            velocities: v0.iter().zip(&dv).map(|(a, b)| a + b).collect(),
            time: 0.0,
        };
        let mut trace = Vec::with_capacity(rf_periods + 1);
        integrate_observed(&mut state, model, None, None, &io, |s| {
            let dx: Vec<_> = s.positions.iter().zip(&x0).map(|(a, b)| a - b).collect();
            let dv: Vec<_> = s.velocities.iter().zip(&v0).map(|(a, b)| a - b).collect();
            trace.push(modes[bus].amplitude(s.time, &dx, &dv, masses).norm_sqr() / hbar);
            true
        })?;
        Ok(trace)
    };
    let traces: Vec<Vec<f64>> = par::map_indexed(opts.ensemble_size, run).into_iter().collect::<Result<_>>()?;
    let times: Vec<f64> = (0..=rf_periods).map(|p| p as f64 * PI / bus_period).collect();
    let slopes: Vec<f64> = traces.chunks_exact(2).map(|p| 0.5 * (fit_line(&times, &p[0]).0 + fit_line(&times, &p[1]).0)).collect();
    let n = slopes.len() as f64;
    let mean_slope = slopes.iter().sum::<f64>() / n;
    let var = slopes.iter().map(|s| (s - mean_slope).powi(2)).sum::<f64>() / (n - 1.0);
    let std_error = (var / n).sqrt();
    let mean_occupation: Vec<f64> = (0..times.len()).map(|p| traces.iter().map(|t| t[p]).sum::<f64>() / traces.len() as f64).collect();
    let (rate, _, r_squared) = fit_line(&times, &mean_occupation);
    Ok(HeatingEstimate {
        rate,
        std_error,
        confidence_interval: (rate - 1.96 * std_error, rate + 1.96 * std_error),
        ensemble_size: opts.ensemble_size,
        bath_temperature_k: opts.bath_temperature_k,
        r_squared,
        nonlinear_fit: r_squared < MIN_R_SQUARED,
        times,
        mean_occupation,
    })
}

/// Heating of the bus of a prepared kink crystal, with the bus and both low
/// kink modes starting in the ground state.
pub fn estimate_heating_rate(p: &KinkPipeline, opts: &HeatingOptions) -> Result<HeatingEstimate> {
    let kt = p.units.thermal_energy(opts.bath_temperature_k);
    let l = &p.localized;
    let ground = [l.bus, l.low_inplane, l.low_outofplane];
    heating_ensemble(&p.orbit, &p.model, &p.modes, l.bus, &ground, p.units.hbar(), kt, opts)
}
