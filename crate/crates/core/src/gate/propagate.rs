//! Schrödinger and Lindblad propagation of qubits ⊗ bus mode.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{self, HamiltonianOptions};
use super::ideal::{ghz_phases, ideal_unitary};
use super::metrics::{fidelity, purity};
use super::ode::{integrate, OdeOptions, StepStats};
use super::space::{GateSpace, QUBIT_DIM};
use super::{BusCoupling, DriveParameters, HeatingModel};
use crate::error::{Error, Result};

type C = Complex64;

/// Density matrix on qubits ⊗ Fock levels 0..=n_max_fock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitPhononState {
    pub rho: DMatrix<C>,
    pub time: f64,
    pub n_max_fock: usize,
}

impl QubitPhononState {
    /// |ggg⟩ ⊗ |0⟩ at time `time`.
    pub fn ground(n_max_fock: usize, time: f64) -> Self {
        let s = GateSpace::new(n_max_fock);
        let v = s.basis(0, 0);
        Self { rho: &v * v.adjoint(), time, n_max_fock }
    }

    pub fn pure(qubits: &DVector<C>, fock: usize, n_max_fock: usize, time: f64) -> Self {
        let s = GateSpace::new(n_max_fock);
        let v = s.product(qubits, fock);
        Self { rho: &v * v.adjoint(), time, n_max_fock }
    }

    pub fn space(&self) -> GateSpace {
        GateSpace::new(self.n_max_fock)
    }

    pub fn qubits(&self) -> DMatrix<C> {
        self.space().qubit_reduced(&self.rho)
    }

    pub fn bus(&self) -> DMatrix<C> {
        self.space().bus_reduced(&self.rho)
    }

    pub fn mean_phonons(&self) -> f64 {
        self.space().mean_phonons(&self.rho)
    }

    pub fn purity(&self) -> f64 {
        purity(&self.rho)
    }

    /// Trace, Hermiticity, positivity and truncation health.
    pub fn validate(&self, truncation_limit: f64) -> Result<()> {
        let d = self.space().dim();
        if self.rho.shape() != (d, d) {
            return Err(Error::invalid("density matrix dimension does not match the Fock cutoff"));
        }
        let tr = self.rho.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::invalid(format!("trace {tr} ≠ 1")));
        }
        if (&self.rho - self.rho.adjoint()).camax() > 1e-10 {
            return Err(Error::invalid("density matrix is not Hermitian"));
        }
        let min = SymmetricEigen::new(self.rho.clone()).eigenvalues.min();
        if min < -1e-9 {
            return Err(Error::invalid(format!("negative eigenvalue {min:.3e}")));
        }
        let top = self.space().top_population(&self.rho);
        if top > truncation_limit {
            return Err(Error::Truncation { population: top });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    pub hamiltonian: HamiltonianOptions,
    /// Tolerances for state-vector propagation.
    pub ode: OdeOptions,
    /// Tolerances for density-matrix propagation.
    pub ode_density: OdeOptions,
    /// Bound on the population of the two top Fock levels.
    pub truncation_limit: f64,
    /// Propagate ρ even when a pure state would do.
    pub force_density_matrix: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            hamiltonian: HamiltonianOptions::default(),
            ode: OdeOptions::tight(),
            ode_density: OdeOptions::default(),
            truncation_limit: 1e-4,
            force_density_matrix: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub times: Vec<f64>,
    /// Uhlmann fidelity of the qubit state with the ideal gate output.
    pub fidelity: Vec<f64>,
    pub bus_purity: Vec<f64>,
    pub mean_phonons: Vec<f64>,
    pub final_state: QubitPhononState,
    /// Ideal output for the qubits.
    pub target: DMatrix<C>,
    pub local_phases: [f64; 3],
    /// Phases of |gee⟩, |ege⟩, |eeg⟩ relative to |ggg⟩ in the dominant
    /// eigenvector of the final qubit state.
    pub ghz_phases: [f64; 3],
    pub alpha: f64,
    pub stats: StepStats,
}

impl GateResult {
    pub fn final_fidelity(&self) -> f64 {
        *self.fidelity.last().unwrap_or(&0.0)
    }

    pub fn final_bus_purity(&self) -> f64 {
        *self.bus_purity.last().unwrap_or(&0.0)
    }

    /// Sample closest to time `t`.
    pub fn sample_at(&self, t: f64) -> usize {
        (0..self.times.len()).min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs())).unwrap_or(0)
    }
}

fn dominant_vector(rho: &DMatrix<C>) -> DVector<C> {
    let e = SymmetricEigen::new(rho.clone());
    let k = e.eigenvalues.imax();
    e.eigenvectors.column(k).into_owned()
}

/// Propagates `initial` to `t_end` under the gate drive with ground-state
/// heating, sampling observables every `dt_control`.
pub fn propagate_master(
    initial: &QubitPhononState,
    drive: &DriveParameters,
    coupling: &BusCoupling,
    heating: &HeatingModel,
    t_end: f64,
    dt_control: f64,
    opts: &PropagationOptions,
) -> Result<GateResult> {
    drive.validate(None)?;
    heating.validate()?;
    initial.validate(opts.truncation_limit)?;
    if coupling.ions.len() != 3 {
        return Err(Error::invalid("the gate acts on exactly three core ions"));
    }
    if !(dt_control > 0.0) || t_end < initial.time {
        return Err(Error::invalid("need dt_control > 0 and t_end ≥ initial time"));
    }
    // validates the Lamb-Dicke precondition
    let space = initial.space();
    hamiltonian::interaction_hamiltonian(initial.time, drive, coupling, &opts.hamiltonian, space)?;

    let alpha = coupling.alpha()?;
    let phases = coupling.local_phases(drive.optical_phase);
    let u = ideal_unitary(alpha, &phases, drive.window.pulses as i32)?;
    let target = &u * initial.qubits() * u.adjoint();
    let target_vec = (purity(&target) > 1.0 - 1e-12).then(|| dominant_vector(&target));

    let cap = if opts.hamiltonian.micromotion_harmonics { PI / 20.0 } else { TAU / coupling.omega / 8.0 };

    let n_out = ((t_end - initial.time) / dt_control).ceil().max(1.0) as usize;
    let outputs: Vec<f64> = (1..=n_out).map(|k| (initial.time + k as f64 * dt_control).min(t_end)).collect();

    let f = space.n_fock;
    let kappa = heating.kappa(coupling.omega);
    let pure = kappa == 0.0 && !opts.force_density_matrix && initial.purity() > 1.0 - 1e-12;
    let mut ode = if pure { opts.ode } else { opts.ode_density };
    ode.max_step = ode.max_step.min(cap);

    let mut times = vec![initial.time];
    let mut fid = Vec::new();
    let mut bus_p = Vec::new();
    let mut nbar = Vec::new();
    let mut record = |rho_q: DMatrix<C>, rho_b: DMatrix<C>, n: f64, top: f64| -> Result<()> {
        if top > opts.truncation_limit {
            return Err(Error::Truncation { population: top });
        }
        let fq = match &target_vec {
            Some(v) => super::metrics::fidelity_pure(&rho_q, v),
            None => fidelity(&rho_q, &target)?,
        };
        fid.push(fq);
        bus_p.push(purity(&rho_b));
        nbar.push(n);
        Ok(())
    };
    let observe_rho =
        |rho: &DMatrix<C>| (space.qubit_reduced(rho), space.bus_reduced(rho), space.mean_phonons(rho), space.top_population(rho));
    let observe_psi = |psi: &DMatrix<C>| {
        // Ψ[q, n] amplitudes
        let m = DMatrix::from_fn(QUBIT_DIM, f, |q, n| psi[(q * f + n, 0)]);
        let rq = &m * m.adjoint();
        let rb = m.transpose() * m.conjugate();
        let occ: Vec<f64> = (0..f).map(|n| rb[(n, n)].re).collect();
        let nb = occ.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        let top = occ[f.saturating_sub(2)..].iter().sum();
        (rq, rb, nb, top)
    };

    let (final_rho, stats) = if pure {
        let psi0 = dominant_vector(&initial.rho);
        let y0 = DMatrix::from_column_slice(psi0.len(), 1, psi0.as_slice());
        let (a, b, c, d) = observe_psi(&y0);
        record(a, b, c, d)?;
        let rhs = |t: f64, y: &DMatrix<C>, dy: &mut DMatrix<C>| {
            hamiltonian::build(t, drive, coupling, &opts.hamiltonian, space).apply(y, dy);
            dy.apply(|z| *z *= C::new(0.0, -1.0));
        };
        let (psi, stats) = integrate(rhs, initial.time, y0, &outputs, &ode, |t, y| {
            times.push(t);
            let (a, b, c, d) = observe_psi(y);
            record(a, b, c, d)
        })?;
        (&psi * psi.adjoint(), stats)
    } else {
        let (a, b, c, d) = observe_rho(&initial.rho);
        record(a, b, c, d)?;
        let n_op: Vec<f64> = (0..f).map(|n| if n + 1 < f { (n + 1) as f64 } else { 0.0 }).collect();
        let rhs = |t: f64, rho: &DMatrix<C>, dr: &mut DMatrix<C>| {
            hamiltonian::build(t, drive, coupling, &opts.hamiltonian, space).apply(rho, dr);
            // −i(Hρ − (Hρ)†)
            let d = dr.nrows();
            for j in 0..d {
                for i in 0..=j {
                    let v = (dr[(i, j)] - dr[(j, i)].conj()) * C::new(0.0, -1.0);
                    dr[(i, j)] = v;
                    dr[(j, i)] = v.conj();
                }
            }
            if kappa > 0.0 {
                // κ(b†ρb − ½{bb†, ρ})
                for j in 0..d {
                    let (qj, nj) = (j / f, j % f);
                    for i in 0..d {
                        let (qi, ni) = (i / f, i % f);
                        let mut v = -0.5 * (n_op[ni] + n_op[nj]) * rho[(i, j)];
                        if ni > 0 && nj > 0 {
                            v += ((ni * nj) as f64).sqrt() * rho[(qi * f + ni - 1, qj * f + nj - 1)];
                        }
                        dr[(i, j)] += v * kappa;
                    }
                }
            }
        };
        integrate(rhs, initial.time, initial.rho.clone(), &outputs, &ode, |t, y| {
            times.push(t);
            let (a, b, c, d) = observe_rho(y);
            record(a, b, c, d)
        })?
    };

    let final_state = QubitPhononState { rho: final_rho, time: *times.last().unwrap(), n_max_fock: initial.n_max_fock };
    let ghz = ghz_phases(&dominant_vector(&final_state.qubits()));
    Ok(GateResult {
        times,
        fidelity: fid,
        bus_purity: bus_p,
        mean_phonons: nbar,
        final_state,
        target,
        local_phases: phases,
        ghz_phases: ghz,
        alpha,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_heating_grows_linearly() {
        let c = BusCoupling::from_values(0.2, 0.03, [-0.0121, -0.0237, -0.0121], [-0.35, 0.0, -0.35]);
        let d = DriveParameters { rabi: 0.0, ..DriveParameters::new(0.0, -0.0008, 0.2, 1).unwrap() };
        let gamma = 1e-4;
        let period = TAU / c.omega;
        let init = QubitPhononState::ground(6, 0.0);
        let r =
            propagate_master(&init, &d, &c, &HeatingModel { rate: gamma }, 100.0 * period, 10.0 * period, &PropagationOptions::default())
                .unwrap();
        let n = *r.mean_phonons.last().unwrap();
        assert!((n / 100.0 - gamma).abs() < 0.01 * gamma, "{n}");
        assert!((r.final_state.rho.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_catches_bad_states() {
        let mut s = QubitPhononState::ground(3, 0.0);
        s.rho[(0, 0)] = C::new(0.5, 0.0);
        assert!(s.validate(1e-4).is_err());
        let s = QubitPhononState::pure(&super::super::ground_qubits(), 3, 3, 0.0);
        assert!(matches!(s.validate(1e-4), Err(Error::Truncation { .. })));
    }
}
