//! Three qubits ⊗ truncated bus-mode Fock space.
//!
//! Basis index is `q · n_fock + n` with the qubit word `q = 4 q₁ + 2 q₂ + q₃`
//! (`0 = g`, `1 = e`).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub const N_QUBITS: usize = 3;
pub const QUBIT_DIM: usize = 1 << N_QUBITS;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateSpace {
    pub n_fock: usize,
}

impl GateSpace {
    pub fn new(n_max_fock: usize) -> Self {
        Self { n_fock: n_max_fock + 1 }
    }

    pub fn dim(&self) -> usize {
        QUBIT_DIM * self.n_fock
    }

    pub fn index(&self, q: usize, n: usize) -> usize {
        q * self.n_fock + n
    }

    /// Bit mask of qubit `i` inside the qubit word.
    pub fn qubit_bit(i: usize) -> usize {
        1 << (N_QUBITS - 1 - i)
    }

    pub fn basis(&self, q: usize, n: usize) -> DVector<C> {
        let mut v = DVector::zeros(self.dim());
        v[self.index(q, n)] = C::new(1.0, 0.0);
        v
    }

    /// |ψ_q⟩ ⊗ |n⟩.
    pub fn product(&self, qubits: &DVector<C>, n: usize) -> DVector<C> {
        let mut v = DVector::zeros(self.dim());
        for q in 0..QUBIT_DIM {
            v[self.index(q, n)] = qubits[q];
        }
        v
    }

    /// Trace over the bus mode.
    pub fn qubit_reduced(&self, rho: &DMatrix<C>) -> DMatrix<C> {
        let f = self.n_fock;
        DMatrix::from_fn(QUBIT_DIM, QUBIT_DIM, |a, b| (0..f).map(|n| rho[(a * f + n, b * f + n)]).sum())
    }

    /// Trace over the qubits.
    pub fn bus_reduced(&self, rho: &DMatrix<C>) -> DMatrix<C> {
        let f = self.n_fock;
        DMatrix::from_fn(f, f, |m, n| (0..QUBIT_DIM).map(|q| rho[(q * f + m, q * f + n)]).sum())
    }

    pub fn mean_phonons(&self, rho: &DMatrix<C>) -> f64 {
        let f = self.n_fock;
        (0..self.dim()).map(|k| (k % f) as f64 * rho[(k, k)].re).sum()
    }

    /// Population of the two highest Fock levels.
    pub fn top_population(&self, rho: &DMatrix<C>) -> f64 {
        let f = self.n_fock;
        (0..self.dim()).filter(|k| k % f + 2 >= f).map(|k| rho[(k, k)].re).sum()
    }

    pub fn annihilation(&self) -> DMatrix<C> {
        let f = self.n_fock;
        DMatrix::from_fn(f, f, |m, n| if n == m + 1 { C::new((n as f64).sqrt(), 0.0) } else { C::new(0.0, 0.0) })
    }
}

/// `σ₊ᵢ ⊗ F + σ₋ᵢ ⊗ F†` summed over ions: the general form of the gate
/// Hamiltonian in the qubit interaction picture.
#[derive(Debug, Clone)]
pub struct SpinBosonOperator {
    pub space: GateSpace,
    /// `(ion, F)` pairs.
    pub terms: Vec<(usize, DMatrix<C>)>,
}

impl SpinBosonOperator {
    /// `H · X` for a column block X (state vector or density matrix).
    pub fn apply(&self, x: &DMatrix<C>, out: &mut DMatrix<C>) {
        let f = self.space.n_fock;
        let d = self.space.dim();
        out.fill(C::new(0.0, 0.0));
        // nonzero (bit, row, col, value) entries of σ₊ ⊗ F
        let mut entries = Vec::new();
        for (ion, op) in &self.terms {
            let bit = GateSpace::qubit_bit(*ion);
            for n in 0..f {
                for m in 0..f {
                    let v = op[(m, n)];
                    if v != C::new(0.0, 0.0) {
                        entries.push((bit, m, n, v));
                    }
                }
            }
        }
        for (xc, oc) in x.as_slice().chunks_exact(d).zip(out.as_mut_slice().chunks_exact_mut(d)) {
            for &(bit, m, n, v) in &entries {
                let vc = v.conj();
                for q in (0..QUBIT_DIM).filter(|q| q & bit == 0) {
                    let (lo, up) = (q * f, (q | bit) * f);
                    oc[up + m] += v * xc[lo + n];
                    oc[lo + n] += vc * xc[up + m];
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<C> {
        let d = self.space.dim();
        let mut out = DMatrix::zeros(d, d);
        self.apply(&DMatrix::identity(d, d), &mut out);
        out
    }
}

/// Reduced state of the listed qubits from a 3-qubit density matrix.
pub fn qubit_subsystem(rho: &DMatrix<C>, keep: &[usize]) -> DMatrix<C> {
    let traced: Vec<usize> = (0..N_QUBITS).filter(|i| !keep.contains(i)).collect();
    let dk = 1 << keep.len();
    let dt = 1 << traced.len();
    let word = |kept: usize, tr: usize| {
        let mut q = 0;
        for (j, &i) in keep.iter().enumerate() {
            if kept & (1 << (keep.len() - 1 - j)) != 0 {
                q |= GateSpace::qubit_bit(i);
            }
        }
        for (j, &i) in traced.iter().enumerate() {
            if tr & (1 << (traced.len() - 1 - j)) != 0 {
                q |= GateSpace::qubit_bit(i);
            }
        }
        q
    };
    DMatrix::from_fn(dk, dk, |a, b| (0..dt).map(|t| rho[(word(a, t), word(b, t))]).sum())
}

pub fn projector(psi: &DVector<C>) -> DMatrix<C> {
    psi * psi.adjoint()
}
