//! Three-phonon couplings of the secular potential and a classical-ensemble
//! estimate of bus-mode heating.

mod heating;

pub use heating::{estimate_heating_rate, heating_ensemble, BusAmplitude, HeatingEstimate, HeatingOptions};

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::coulomb;
use crate::crystal::CrystalConfiguration;
use crate::error::{Error, Result};
use crate::floquet::PseudoModes;
use crate::par;
use crate::trap::{TrapModel, Vec3};

/// Third derivatives `T_jkl = ∂³V / ∂Q_j ∂Q_k ∂Q_l` of the secular potential
/// in mass-weighted normal coordinates, for a subset of modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicCouplingSet {
    /// Global mode indices included, in the order used by `values`.
    pub modes: Vec<usize>,
    pub frequencies: Vec<f64>,
    values: Vec<f64>,
}

impl CubicCouplingSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    fn slot(&self, j: usize) -> Option<usize> {
        self.modes.iter().position(|&m| m == j)
    }

    /// Coefficient for positions `a, b, c` within the subset.
    pub fn local(&self, a: usize, b: usize, c: usize) -> f64 {
        let m = self.modes.len();
        self.values[(a * m + b) * m + c]
    }

    /// Coefficient by global mode indices, if all three are in the subset.
    pub fn get(&self, j: usize, k: usize, l: usize) -> Option<f64> {
        Some(self.local(self.slot(j)?, self.slot(k)?, self.slot(l)?))
    }

    /// Coupling in frequency units for the Hamiltonian term
    /// `ħ g (a_j + a_j†)(a_k + a_k†)(a_l + a_l†)`, i.e. `T √(ħ/8ω_jω_kω_l)`.
    pub fn phonon_coupling(&self, j: usize, k: usize, l: usize, hbar: f64) -> Option<f64> {
        let (a, b, c) = (self.slot(j)?, self.slot(k)?, self.slot(l)?);
        let w = self.frequencies[a] * self.frequencies[b] * self.frequencies[c];
        Some(self.local(a, b, c) * (hbar / (8.0 * w)).sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest |T_abc − T_σ(abc)| over all permutations.
    pub fn max_asymmetry(&self) -> f64 {
        let m = self.modes.len();
        let mut worst: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let v = self.local(a, b, c);
                    for p in [self.local(a, c, b), self.local(b, a, c), self.local(b, c, a), self.local(c, a, b), self.local(c, b, a)] {
                        worst = worst.max((v - p).abs());
                    }
                }
            }
        }
        worst
    }

    /// Pairs (k, l), k ≤ l, coupled to `j`, ordered by decreasing |T_jkl|.
    pub fn ranked_partners(&self, j: usize) -> Vec<(usize, usize, f64)> {
        let Some(a) = self.slot(j) else { return Vec::new() };
        let m = self.modes.len();
        let mut out = Vec::new();
        for b in 0..m {
            for c in b..m {
                if b == a || c == a {
                    continue;
                }
                out.push((self.modes[b], self.modes[c], self.local(a, b, c)));
            }
        }
        out.sort_by(|x, y| y.2.abs().total_cmp(&x.2.abs()));
        out
    }
}

/// Displacement vectors M^{-1/2} e_j of the selected modes as columns.
fn displacement_columns(pseudo: &PseudoModes, masses: &[f64], modes: &[usize]) -> DMatrix<f64> {
    let d = pseudo.eigenvectors.nrows();
    DMatrix::from_fn(d, modes.len(), |r, c| pseudo.eigenvectors[(r, modes[c])] / masses[r / 3].sqrt())
}

/// Derivative of the trap Hessian block of ion `i` along `u`, by a
/// fourth-order central difference.
fn trap_block_derivative(model: &TrapModel, i: usize, x: &Vec3, u: &Vec3, length: f64) -> Matrix3<f64> {
    let nu = u.norm();
    if nu == 0.0 {
        return Matrix3::zeros();
    }
    let h = 1e-3 * length / nu;
    let block = |s: f64| model.ion_pseudo_terms(i, &(x + u * s)).2;
    (8.0 * (block(h) - block(-h)) - (block(2.0 * h) - block(-2.0 * h))) / (12.0 * h)
}

/// Directional derivative of the full secular Hessian along `dir`.
fn hessian_derivative(model: &TrapModel, x: &[Vec3], dir: &[Vec3], length: f64) -> DMatrix<f64> {
    let n = x.len();
    let q = model.charges();
    let mut k = DMatrix::zeros(3 * n, 3 * n);
    let e = [Vec3::x(), Vec3::y(), Vec3::z()];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = x[i] - x[j];
            let u = dir[i] - dir[j];
            let qq = q[i] * q[j];
            let mut b = Matrix3::zeros();
            for r in 0..3 {
                for c in r..3 {
                    let v = coulomb::pair_third(&d, qq, &e[r], &e[c], &u);
                    b[(r, c)] = v;
                    b[(c, r)] = v;
                }
            }
            for r in 0..3 {
                for c in 0..3 {
                    let v = b[(r, c)];
                    k[(3 * i + r, 3 * i + c)] += v;
                    k[(3 * j + r, 3 * j + c)] += v;
                    k[(3 * i + r, 3 * j + c)] -= v;
                    k[(3 * j + r, 3 * i + c)] -= v;
                }
            }
        }
        let b = trap_block_derivative(model, i, &x[i], &dir[i], length);
        for r in 0..3 {
            for c in 0..3 {
                k[(3 * i + r, 3 * i + c)] += b[(r, c)];
            }
        }
    }
    k
}

/// Cubic couplings of the secular potential about `config` for the modes in
/// `filter` (all modes when `None`).
pub fn cubic_couplings(
    config: &CrystalConfiguration,
    model: &TrapModel,
    pseudo: &PseudoModes,
    filter: Option<&[usize]>,
) -> Result<CubicCouplingSet> {
    let n = config.n_ions();
    let d = 3 * n;
    if model.n_ions() != n || pseudo.eigenvectors.nrows() != d {
        return Err(Error::invalid("configuration, model and modes disagree on the ion count"));
    }
    let modes: Vec<usize> = match filter {
        Some(f) => f.to_vec(),
        None => (0..d).collect(),
    };
    if let Some(&bad) = modes.iter().find(|&&j| j >= d) {
        return Err(Error::invalid(format!("mode index {bad} out of range")));
    }
    let m = modes.len();
    let cols = displacement_columns(pseudo, model.masses(), &modes);
    let length = crate::crystal::estimated_spacing(model);
    let x = &config.positions;
    let slabs: Vec<DMatrix<f64>> = par::map_indexed(m, |a| {
        let dir: Vec<Vec3> = (0..n).map(|i| Vec3::new(cols[(3 * i, a)], cols[(3 * i + 1, a)], cols[(3 * i + 2, a)])).collect();
        let k = hessian_derivative(model, x, &dir, length);
        cols.transpose() * k * &cols
    });
    let raw = |a: usize, b: usize, c: usize| slabs[a][(b, c)];
    let mut values = vec![0.0; m * m * m];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                values[(a * m + b) * m + c] =
                    (raw(a, b, c) + raw(a, c, b) + raw(b, a, c) + raw(b, c, a) + raw(c, a, b) + raw(c, b, a)) / 6.0;
            }
        }
    }
    let frequencies = modes.iter().map(|&j| pseudo.spectrum.frequencies[j]).collect();
    Ok(CubicCouplingSet { modes, frequencies, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonantTriple {
    pub bus: usize,
    pub k: usize,
    pub l: usize,
    /// ω_bus − ω_k − ω_l.
    pub detuning: f64,
    /// Phonon-units coupling g.
    pub coupling: f64,
    /// |g|² / |detuning|.
    pub score: f64,
}

/// Down-conversion channels ω_bus ≈ ω_k + ω_l with |detuning| < `tolerance`,
/// best first.
pub fn resonance_scan(frequencies: &[f64], couplings: &CubicCouplingSet, bus: usize, tolerance: f64, hbar: f64) -> Vec<ResonantTriple> {
    let mut out = Vec::new();
    if couplings.slot(bus).is_none() {
        return out;
    }
    let wb = frequencies[bus];
    for (ai, &k) in couplings.modes.iter().enumerate() {
        for &l in &couplings.modes[ai..] {
            if k == bus || l == bus {
                continue;
            }
            let detuning = wb - frequencies[k] - frequencies[l];
            if !(detuning.abs() < tolerance) {
                continue;
            }
            let g = couplings.phonon_coupling(bus, k, l, hbar).unwrap_or(0.0);
            out.push(ResonantTriple { bus, k, l, detuning, coupling: g, score: g * g / detuning.abs() });
        }
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}
