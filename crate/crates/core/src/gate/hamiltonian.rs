//! Laser–bus interaction Hamiltonian in the qubit and phonon interaction
//! picture.
//!
//! Per ion, `H_i = ½Ω_i(t) e^{−iφ_L} e^{ik·R_i(t)} σ₊ e^{ik·δx_i(t)} + h.c.`
//! with `k·δx = η(λ(t) e^{−iωt} b + λ*(t) e^{iωt} b†)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::space::{GateSpace, SpinBosonOperator};
use super::special::displacement;
use super::{BusCoupling, DriveParameters};
use crate::error::{Error, Result};

type C = Complex64;

/// Largest η|λ̃| accepted by the first-order branch.
pub const LD_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    /// Full displacement operator in the truncated Fock space.
    Exact,
    /// First order in η with rotated Pauli operators.
    FirstOrderLd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianOptions {
    pub order: Order,
    /// Keep the n ≠ 0 rf harmonics of the wavefront phase and of λ(t);
    /// otherwise only J₀ and λ̃ survive.
    pub micromotion_harmonics: bool,
}

impl Default for HamiltonianOptions {
    fn default() -> Self {
        Self { order: Order::FirstOrderLd, micromotion_harmonics: false }
    }
}

/// H(t) as a sum of σ₊ᵢ ⊗ Fᵢ(t) terms plus their adjoints.
pub fn interaction_hamiltonian(
    t: f64,
    drive: &DriveParameters,
    coupling: &BusCoupling,
    opts: &HamiltonianOptions,
    space: GateSpace,
) -> Result<SpinBosonOperator> {
    if opts.order == Order::FirstOrderLd && coupling.max_eta_lambda() >= LD_LIMIT {
        return Err(Error::invalid(format!("first-order Lamb-Dicke branch needs η λ̃ < {LD_LIMIT}, got {:.3}", coupling.max_eta_lambda())));
    }
    Ok(build(t, drive, coupling, opts, space))
}

pub(crate) fn build(
    t: f64,
    drive: &DriveParameters,
    coupling: &BusCoupling,
    opts: &HamiltonianOptions,
    space: GateSpace,
) -> SpinBosonOperator {
    let f = space.n_fock;
    let half_rabi = drive.rabi * (drive.detuning() * (t - drive.window.start())).cos() * drive.window.value(t);
    let rot = C::from_polar(1.0, coupling.omega * t);
    let terms = coupling
        .ions
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (m, lambda) =
                if opts.micromotion_harmonics { (c.phase_modulation(t), c.lambda_at(t)) } else { (C::new(c.j0(), 0.0), c.lambda_dc()) };
            let pref = C::from_polar(half_rabi, c.phase - drive.optical_phase) * m;
            let beta = C::new(0.0, coupling.eta) * lambda.conj() * rot;
            let x = match opts.order {
                Order::Exact => displacement(beta, f),
                Order::FirstOrderLd => {
                    let mut x = DMatrix::identity(f, f);
                    for n in 0..f - 1 {
                        let s = ((n + 1) as f64).sqrt();
                        x[(n + 1, n)] += beta * s;
                        x[(n, n + 1)] -= beta.conj() * s;
                    }
                    x
                }
            };
            (i, x * pref)
        })
        .collect();
    SpinBosonOperator { space, terms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate::ideal::{embed, rotated_sigma_y};

    fn coupling(eta: f64) -> BusCoupling {
        BusCoupling::from_values(0.2, eta, [-0.0121, -0.0237, -0.0121], [-0.35, 0.0, -0.35])
    }

    #[test]
    fn hermitian_in_both_orders() {
        let c = coupling(0.03);
        let d = DriveParameters::new(0.025, -0.0008, 0.2, 1).unwrap();
        for order in [Order::Exact, Order::FirstOrderLd] {
            for mm in [false, true] {
                let h = interaction_hamiltonian(100.3, &d, &c, &HamiltonianOptions { order, micromotion_harmonics: mm }, GateSpace::new(6))
                    .unwrap()
                    .to_dense();
                assert!((&h - h.adjoint()).camax() < 1e-14);
                assert!(h.camax() > 0.0);
            }
        }
    }

    #[test]
    fn vanishing_eta_is_pure_carrier() {
        let c = BusCoupling { eta: 0.0, ..coupling(0.03) };
        let d = DriveParameters::new(0.025, -0.0008, 0.2, 1).unwrap();
        let s = GateSpace::new(4);
        let h = interaction_hamiltonian(321.0, &d, &c, &HamiltonianOptions { order: Order::Exact, micromotion_harmonics: false }, s)
            .unwrap()
            .to_dense();
        // carrier: Σ ½Ω_i J₀ σ̃_x ⊗ 1, block diagonal in Fock number
        for a in 0..s.dim() {
            for b in 0..s.dim() {
                if a % s.n_fock != b % s.n_fock {
                    assert!(h[(a, b)].norm() < 1e-20);
                }
            }
        }
    }

    #[test]
    fn ld_branch_matches_rotated_pauli_form() {
        // H = Σ ½Ω_i J₀ [σ̃_x + ηλ̃ (b† e^{iωt} + b e^{−iωt}) σ̃_y], σ̃ at φ̃ = k·B₀ − φ_L
        let c = coupling(0.03);
        let d = DriveParameters::new(0.025, -0.0008, 0.2, 1).unwrap();
        let s = GateSpace::new(3);
        let t = 57.0;
        let h = interaction_hamiltonian(t, &d, &c, &HamiltonianOptions::default(), s).unwrap().to_dense();
        let f = s.n_fock;
        let a = s.annihilation();
        let rot = C::from_polar(1.0, c.omega * t);
        let quad = a.adjoint() * rot + &a * rot.conj();
        let half = d.rabi * (d.detuning() * t).cos() * d.window.value(t);
        let mut expect = DMatrix::zeros(s.dim(), s.dim());
        for (i, ion) in c.ions.iter().enumerate() {
            let phi = ion.phase - d.optical_phase;
            let (sn, cs) = phi.sin_cos();
            let sx = DMatrix::from_row_slice(2, 2, &[C::new(0.0, 0.0), C::new(cs, -sn), C::new(cs, sn), C::new(0.0, 0.0)]);
            let g = half * ion.j0();
            let spin_x = embed(&sx, i).kronecker(&DMatrix::identity(f, f));
            let spin_y = embed(&rotated_sigma_y(phi), i).kronecker(&quad);
            expect += (spin_x + spin_y * C::new(c.eta * ion.lambda_dc().re, 0.0)) * C::new(g, 0.0);
        }
        assert!((h - expect).camax() < 1e-14);
    }

    #[test]
    fn ld_precondition() {
        let c = coupling(0.03);
        let strong = BusCoupling { eta: 10.0, ..c };
        let d = DriveParameters::new(0.025, -0.0008, 0.2, 1).unwrap();
        assert!(interaction_hamiltonian(0.0, &d, &strong, &HamiltonianOptions::default(), GateSpace::new(3)).is_err());
    }
}
