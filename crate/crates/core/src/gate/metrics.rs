//! Fidelity, purity and entanglement measures.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::space::{qubit_subsystem, QUBIT_DIM};
use crate::error::{Error, Result};

type C = Complex64;

/// Pure-state tolerance for the three-tangle.
pub const PURE_TOL: f64 = 1e-9;

fn hermitian_sqrt(m: &DMatrix<C>) -> DMatrix<C> {
    let e = SymmetricEigen::new(m.clone());
    let d = e.eigenvalues.map(|l| C::new(l.max(0.0).sqrt(), 0.0));
    &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.adjoint()
}

/// Uhlmann fidelity tr √(√ρ σ √ρ).
pub fn fidelity(rho: &DMatrix<C>, sigma: &DMatrix<C>) -> Result<f64> {
    if rho.shape() != sigma.shape() || !rho.is_square() {
        return Err(Error::invalid("fidelity: dimension mismatch"));
    }
    let s = hermitian_sqrt(rho);
    let m = &s * sigma * &s;
    let m = (&m + m.adjoint()) * C::new(0.5, 0.0);
    let f: f64 = SymmetricEigen::new(m).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Fidelity against a pure state, √⟨ψ|ρ|ψ⟩.
pub fn fidelity_pure(rho: &DMatrix<C>, psi: &DVector<C>) -> f64 {
    (psi.adjoint() * rho * psi)[(0, 0)].re.max(0.0).sqrt().min(1.0)
}

pub fn purity(rho: &DMatrix<C>) -> f64 {
    // tr ρ² = Σ |ρ_ij|² for Hermitian ρ
    rho.iter().map(|z| z.norm_sqr()).sum()
}

/// Wootters concurrence of a two-qubit density matrix.
pub fn concurrence(rho: &DMatrix<C>) -> Result<f64> {
    if rho.shape() != (4, 4) {
        return Err(Error::invalid("concurrence needs a 4×4 density matrix"));
    }
    let yy =
        DMatrix::from_fn(4, 4, |a, b| if a + b == 3 { C::new(if a == 0 || a == 3 { -1.0 } else { 1.0 }, 0.0) } else { C::new(0.0, 0.0) });
    let tilde = &yy * rho.conjugate() * &yy;
    let s = hermitian_sqrt(rho);
    let m = &s * tilde * &s;
    let m = (&m + m.adjoint()) * C::new(0.5, 0.0);
    let mut l: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().map(|x| x.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

/// Three-tangle of a pure three-qubit state via the residual tangle
/// τ = C²₁₍₂₃₎ − C²₁₂ − C²₁₃.
pub fn three_tangle(rho: &DMatrix<C>) -> Result<f64> {
    if rho.shape() != (QUBIT_DIM, QUBIT_DIM) {
        return Err(Error::invalid("three-tangle needs an 8×8 density matrix"));
    }
    let p = purity(rho);
    if p < 1.0 - PURE_TOL {
        return Err(Error::Unsupported(format!("three-tangle of a mixed state (purity {p:.3e})")));
    }
    let r1 = qubit_subsystem(rho, &[0]);
    let c1_23 = 2.0 * (1.0 - purity(&r1));
    let c12 = concurrence(&qubit_subsystem(rho, &[0, 1]))?;
    let c13 = concurrence(&qubit_subsystem(rho, &[0, 2]))?;
    Ok((c1_23 - c12 * c12 - c13 * c13).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateMetrics {
    pub fidelity: f64,
    pub bus_purity: f64,
    pub three_tangle: Option<f64>,
    /// Concurrence of qubit pairs (1,2), (1,3), (2,3).
    pub concurrence: [f64; 3],
}

/// Qubit-state metrics of a reduced 3-qubit state against a target, plus
/// the bus purity.
pub fn metrics(qubits: &DMatrix<C>, target: &DMatrix<C>, bus: &DMatrix<C>) -> Result<GateMetrics> {
    let pairs = [[0, 1], [0, 2], [1, 2]];
    let mut conc = [0.0; 3];
    for (c, p) in conc.iter_mut().zip(pairs) {
        *c = concurrence(&qubit_subsystem(qubits, &p))?;
    }
    Ok(GateMetrics {
        fidelity: fidelity(qubits, target)?,
        bus_purity: purity(bus),
        three_tangle: three_tangle(qubits).ok(),
        concurrence: conc,
    })
}
