use serde::{Deserialize, Serialize};

use super::calibrate::{analytic_rabi, calibrate_rabi, Calibration, CalibrationOptions};
use super::propagate::{propagate_master, GateResult, PropagationOptions, QubitPhononState};
use super::{BusCoupling, DriveParameters, HeatingModel, DEFAULT_N_MAX_FOCK};
use crate::error::{Error, Result};

/// How the Rabi frequency is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RabiChoice {
    Analytic,
    /// Numerically maximize the γ = 0 single-pulse fidelity.
    #[default]
    Calibrated,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateProtocol {
    pub pulses: usize,
    pub heating: HeatingModel,
    pub rabi: RabiChoice,
    pub n_max_fock: usize,
    /// Output samples per gate time t*.
    pub samples_per_gate: usize,
    pub propagation: PropagationOptions,
}

impl Default for GateProtocol {
    fn default() -> Self {
        Self {
            pulses: 1,
            heating: HeatingModel::none(),
            rabi: RabiChoice::Calibrated,
            n_max_fock: DEFAULT_N_MAX_FOCK,
            samples_per_gate: 40,
            propagation: PropagationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRun {
    pub drive: DriveParameters,
    pub calibration: Option<Calibration>,
    pub result: GateResult,
}

/// Gate from the ground state with the default detuning, `pulses` gate
/// pulses back to back and the Rabi frequency fixed on a single pulse.
pub fn run_gate(coupling: &BusCoupling, protocol: &GateProtocol) -> Result<GateRun> {
    if protocol.pulses == 0 || protocol.samples_per_gate == 0 {
        return Err(Error::invalid("need at least one pulse and one sample per gate"));
    }
    let eps = coupling.default_epsilon()?;
    let single = DriveParameters::new(analytic_rabi(coupling, eps)?, eps, coupling.omega, 1)?;
    let calibration = match protocol.rabi {
        RabiChoice::Analytic | RabiChoice::Fixed(_) => None,
        RabiChoice::Calibrated => Some(calibrate_rabi(
            &single,
            coupling,
            &protocol.propagation,
            &CalibrationOptions { n_max_fock: protocol.n_max_fock, ..Default::default() },
        )?),
    };
    let rabi = match (protocol.rabi, calibration) {
        (RabiChoice::Fixed(r), _) => r,
        (_, Some(c)) => c.rabi,
        _ => single.rabi,
    };
    let drive = DriveParameters::new(rabi, eps, coupling.omega, protocol.pulses)?;
    let init = QubitPhononState::ground(protocol.n_max_fock, drive.window.start());
    let dt = drive.gate_time() / protocol.samples_per_gate as f64;
    let result = propagate_master(&init, &drive, coupling, &protocol.heating, drive.window.end(), dt, &protocol.propagation)?;
    Ok(GateRun { drive, calibration, result })
}
