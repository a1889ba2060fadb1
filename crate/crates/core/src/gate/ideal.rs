//! Effective three-qubit unitary exp{i(π/8α) S²}.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::space::{GateSpace, QUBIT_DIM};
use crate::error::{Error, Result};

type C = Complex64;

/// σ̃_y = σ_y cos φ − σ_x sin φ.
pub fn rotated_sigma_y(phi: f64) -> DMatrix<C> {
    let (s, c) = phi.sin_cos();
    // σ_y = [[0, −i], [i, 0]], σ_x = [[0, 1], [1, 0]]
    DMatrix::from_row_slice(2, 2, &[C::new(0.0, 0.0), C::new(-s, -c), C::new(-s, c), C::new(0.0, 0.0)])
}

/// Single-qubit operator on qubit `i` of three.
pub fn embed(op: &DMatrix<C>, i: usize) -> DMatrix<C> {
    let bit = GateSpace::qubit_bit(i);
    DMatrix::from_fn(QUBIT_DIM, QUBIT_DIM, |a, b| {
        if (a & !bit) != (b & !bit) {
            return C::new(0.0, 0.0);
        }
        op[((a & bit != 0) as usize, (b & bit != 0) as usize)]
    })
}

/// S = Σ wᵢ σ̃_{y,i} with weights (1, α, 1).
pub fn spin_operator(alpha: f64, phases: &[f64; 3]) -> DMatrix<C> {
    let w = [1.0, alpha, 1.0];
    (0..3).fold(DMatrix::zeros(QUBIT_DIM, QUBIT_DIM), |acc, i| acc + embed(&rotated_sigma_y(phases[i]), i) * C::new(w[i], 0.0))
}

/// exp(iθ A) for Hermitian A.
pub fn expi_hermitian(a: &DMatrix<C>, theta: f64) -> DMatrix<C> {
    let e = SymmetricEigen::new(a.clone());
    let d = e.eigenvalues.map(|l| C::from_polar(1.0, theta * l));
    &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.adjoint()
}

/// [exp{i(π/8α) S²}]^power with S built from the local phases φ̃ᵢ.
pub fn ideal_unitary(alpha: f64, phases: &[f64; 3], power: i32) -> Result<DMatrix<C>> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::invalid("ideal unitary needs a finite nonzero α"));
    }
    let s = spin_operator(alpha, phases);
    Ok(expi_hermitian(&(&s * &s), power as f64 * std::f64::consts::PI / (8.0 * alpha)))
}

pub fn ground_qubits() -> DVector<C> {
    let mut v = DVector::zeros(QUBIT_DIM);
    v[0] = C::new(1.0, 0.0);
    v
}

/// Phases θᵢ of |gee⟩, |ege⟩, |eeg⟩ relative to |ggg⟩.
pub fn ghz_phases(state: &DVector<C>) -> [f64; 3] {
    let r = state[0];
    [3usize, 5, 6].map(|k| (state[k] * r.conj()).arg())
}

/// Least-squares α fit: the (θ, α) for which exp(iθ S(α)²)|ggg⟩ best
/// matches `state`, returned as the equivalent conventional α with the
/// achieved fidelity.
pub fn fit_alpha(state: &DMatrix<C>, phases: &[f64; 3], alpha_guess: f64) -> Result<(f64, f64)> {
    let g = ground_qubits();
    let fid = |theta: f64, alpha: f64| {
        let s = spin_operator(alpha, phases);
        let psi = expi_hermitian(&(&s * &s), theta) * &g;
        super::metrics::fidelity_pure(state, &psi)
    };
    let golden = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| {
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        for _ in 0..80 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    };
    if alpha_guess == 0.0 {
        return Err(Error::invalid("α guess must be nonzero"));
    }
    let best_theta = |alpha: f64| {
        let t0 = std::f64::consts::PI / (8.0 * alpha);
        let (lo, hi) = if t0 > 0.0 { (0.7 * t0, 1.3 * t0) } else { (1.3 * t0, 0.7 * t0) };
        golden(lo, hi, &|t| fid(t, alpha))
    };
    let a0 = alpha_guess;
    let (lo, hi) = if a0 > 0.0 { (0.8 * a0, 1.2 * a0) } else { (1.2 * a0, 0.8 * a0) };
    let alpha = golden(lo, hi, &|a| fid(best_theta(a), a));
    Ok((alpha, fid(best_theta(alpha), alpha)))
}
