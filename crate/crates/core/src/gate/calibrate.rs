//! Numerical calibration of the Rabi frequency to the gate condition.

use serde::{Deserialize, Serialize};

use super::propagate::{propagate_master, PropagationOptions, QubitPhononState};
use super::{BusCoupling, DriveParameters, HeatingModel};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Search interval as multiples of the analytic estimate.
    pub bracket: (f64, f64),
    pub grid_points: usize,
    /// Relative tolerance on Ω.
    pub tolerance: f64,
    pub n_max_fock: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { bracket: (0.85, 1.2), grid_points: 8, tolerance: 1e-4, n_max_fock: super::DEFAULT_N_MAX_FOCK }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub rabi: f64,
    pub analytic_rabi: f64,
    /// Final qubit fidelity at the calibrated Ω.
    pub fidelity: f64,
    pub evaluations: usize,
}

/// Ω satisfying θ t* = π/8α for the resonant force alone:
/// Ω = |ε| / (2 √|α| J₀ η |λ̃₁|).
pub fn analytic_rabi(c: &BusCoupling, epsilon: f64) -> Result<f64> {
    let alpha = c.alpha()?;
    let g = c.ions[0].j0() * c.eta * c.ions[0].lambda_dc().re.abs();
    if g == 0.0 {
        return Err(Error::invalid("ion 1 does not couple to the bus mode"));
    }
    Ok(epsilon.abs() / (2.0 * alpha.abs().sqrt() * g))
}

/// Maximizes the γ = 0 qubit fidelity with the ideal unitary over Ω:
/// a parallel grid scan followed by golden-section refinement.
pub fn calibrate_rabi(
    drive: &DriveParameters,
    coupling: &BusCoupling,
    opts: &PropagationOptions,
    cal: &CalibrationOptions,
) -> Result<Calibration> {
    let omega0 = analytic_rabi(coupling, drive.epsilon)?;
    let w = drive.window;
    let run = |rabi: f64| -> Result<f64> {
        let d = DriveParameters { rabi, ..*drive };
        let init = QubitPhononState::ground(cal.n_max_fock, w.start());
        let r = propagate_master(&init, &d, coupling, &HeatingModel::none(), w.end(), w.end() - w.start(), opts)?;
        Ok(r.final_fidelity())
    };
    let n = cal.grid_points.max(3);
    let (lo, hi) = (cal.bracket.0 * omega0, cal.bracket.1 * omega0);
    let step = (hi - lo) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|k| lo + k as f64 * step).collect();
    let scores = par::map_slice(&grid, |&x| run(x));
    let mut best = (0, f64::NEG_INFINITY);
    for (k, s) in scores.into_iter().enumerate() {
        let s = s?;
        if s > best.1 {
            best = (k, s);
        }
    }
    let mut evals = n;
    let (mut a, mut b) = (grid[best.0] - step, grid[best.0] + step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (run(c)?, run(d)?);
    evals += 2;
    while (b - a) > cal.tolerance * omega0 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = run(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = run(d)?;
        }
        evals += 1;
    }
    let (rabi, fidelity) = if fc > fd { (c, fc) } else { (d, fd) };
    let (rabi, fidelity) = if best.1 > fidelity { (grid[best.0], best.1) } else { (rabi, fidelity) };
    Ok(Calibration { rabi, analytic_rabi: omega0, fidelity, evaluations: evals })
}
