//! Floquet-Lyapunov normal modes of the driven crystal and their
//! pseudopotential counterparts.
//!
//! A mode is stored through its time-periodic vector
//! `U(t) = Σ_n C_n e^{2int}`, related to the positive-frequency solution of
//! the linearized motion by `u(t) = e^{−iωt} U(t) / √(2ω)` (masses in units
//! of the reference species). Solutions are normalized so that
//! `i Σ μ (u* u̇ − u̇* u) = 1`.

mod analysis;
pub mod monodromy;

pub use analysis::{
    identify_localized_modes, norm_fraction, optimize_laser_direction, out_of_plane_fraction, LaserConstraints, LaserGeometry,
    LocalizeOptions, LocalizedModes, Violation,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::crystal::{CrystalConfiguration, PeriodicOrbit};
use crate::error::{Error, Result};
use crate::trap::{TrapModel, Vec3};

pub type CVec3 = [Complex64; 3];

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Floquet,
    Pseudopotential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    /// Dimensionless angular frequencies, descending.
    pub frequencies: Vec<f64>,
    pub source: SpectrumSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetMode {
    pub index: usize,
    pub quasi_frequency: f64,
    pub n_max: usize,
    /// `harmonics[n + n_max][i]` is C_n for ion i.
    pub harmonics: Vec<Vec<CVec3>>,
    /// Normalized solution at t = 0: positions then velocities.
    pub initial_state: Vec<Complex64>,
}

impl FloquetMode {
    pub fn n_ions(&self) -> usize {
        self.harmonics[0].len()
    }

    pub fn dc_vector(&self) -> &[CVec3] {
        &self.harmonics[self.n_max]
    }

    pub fn harmonic(&self, n: i64) -> Option<&[CVec3]> {
        let k = n + self.n_max as i64;
        (0..self.harmonics.len() as i64).contains(&k).then(|| self.harmonics[k as usize].as_slice())
    }

    /// U(t) for every ion.
    pub fn vector_at(&self, t: f64) -> Vec<CVec3> {
        let mut out = vec![[Complex64::new(0.0, 0.0); 3]; self.n_ions()];
        for (k, h) in self.harmonics.iter().enumerate() {
            let n = k as f64 - self.n_max as f64;
            let e = Complex64::from_polar(1.0, 2.0 * n * t);
            for (o, c) in out.iter_mut().zip(h) {
                for a in 0..3 {
                    o[a] += c[a] * e;
                }
            }
        }
        out
    }

    /// Fourier coefficients of λ_i(t) = Σ_α k̂_α U_{i,α}(t), harmonics −n_max..n_max.
    pub fn projection_harmonics(&self, i: usize, khat: &Vec3) -> Vec<Complex64> {
        self.harmonics.iter().map(|h| h[i][0] * khat.x + h[i][1] * khat.y + h[i][2] * khat.z).collect()
    }

    /// Real DC projection λ̃_i on the unit direction `khat`.
    pub fn dc_projection(&self, i: usize, khat: &Vec3) -> f64 {
        let c = self.dc_vector()[i];
        (c[0] * khat.x + c[1] * khat.y + c[2] * khat.z).re
    }

    /// Normalized complex solution (positions, velocities) at time t.
    pub fn solution(&self, t: f64) -> (Vec<CVec3>, Vec<CVec3>) {
        let w = self.quasi_frequency;
        let s = 1.0 / (2.0 * w.max(1e-300)).sqrt();
        let mut x = vec![[Complex64::new(0.0, 0.0); 3]; self.n_ions()];
        let mut v = x.clone();
        for (k, h) in self.harmonics.iter().enumerate() {
            let n = k as f64 - self.n_max as f64;
            let e = Complex64::from_polar(s, (2.0 * n - w) * t);
            let de = e * I * (2.0 * n - w);
            for i in 0..x.len() {
                for a in 0..3 {
                    x[i][a] += h[i][a] * e;
                    v[i][a] += h[i][a] * de;
                }
            }
        }
        (x, v)
    }

    /// Complex amplitude c of this mode in a real phase-space deviation
    /// (δx, δv) taken at time t: c = i Σ μ (u* δv − u̇* δx).
    pub fn amplitude(&self, t: f64, dx: &[Vec3], dv: &[Vec3], masses: &[f64]) -> Complex64 {
        let (x, v) = self.solution(t);
        let mut c = Complex64::new(0.0, 0.0);
        for i in 0..dx.len() {
            for a in 0..3 {
                c += masses[i] * (x[i][a].conj() * dv[i][a] - v[i][a].conj() * dx[i][a]);
            }
        }
        c * I
    }
}

/// Symplectic product i Σ μ (a_x* b_v − a_v* b_x) of two phase-space vectors.
pub fn symplectic_product(a: &[Complex64], b: &[Complex64], masses: &[f64]) -> Complex64 {
    let d = a.len() / 2;
    let mut s = Complex64::new(0.0, 0.0);
    for k in 0..d {
        s += masses[k / 3] * (a[k].conj() * b[d + k] - a[d + k].conj() * b[k]);
    }
    s * I
}

#[derive(Debug, Clone, Copy)]
pub struct FloquetOptions {
    pub steps_per_period: usize,
    /// Phases per period at which the flow is sampled for the Fourier expansion.
    pub n_samples: usize,
    /// Tolerance on ||λ| − 1| of the Floquet multipliers.
    pub multiplier_tol: f64,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        Self { steps_per_period: 1024, n_samples: 32, multiplier_tol: 1e-6 }
    }
}

/// Pseudopotential normal modes: eigendecomposition of the mass-weighted
/// Hessian. `eigenvectors` columns are orthonormal in mass-weighted
/// coordinates and ordered like the spectrum.
#[derive(Debug, Clone)]
pub struct PseudoModes {
    pub spectrum: ModeSpectrum,
    pub eigenvectors: DMatrix<f64>,
    pub modes: Vec<FloquetMode>,
}

/// Frequencies below this fraction of the largest are treated as zero modes.
pub const ZERO_MODE_FRACTION: f64 = 1e-5;

pub fn pseudopotential_modes(config: &CrystalConfiguration, model: &TrapModel) -> Result<PseudoModes> {
    let h = model.pseudo_hessian(&config.positions);
    pseudo_from_hessian(h, model.masses(), true)
}

fn pseudo_from_hessian(mut h: DMatrix<f64>, masses: &[f64], strict: bool) -> Result<PseudoModes> {
    let d = h.nrows();
    for r in 0..d {
        for c in 0..d {
            h[(r, c)] /= (masses[r / 3] * masses[c / 3]).sqrt();
        }
    }
    let eig = h.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1e-300);
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    if strict {
        let lmin = eig.eigenvalues[idx[d - 1]];
        if lmin < -1e-9 * scale {
            return Err(Error::Saddle { eigenvalue: lmin });
        }
    }
    let n = d / 3;
    let mut vectors = DMatrix::zeros(d, d);
    let mut freqs = Vec::with_capacity(d);
    let mut modes = Vec::with_capacity(d);
    for (j, &k) in idx.iter().enumerate() {
        let w = eig.eigenvalues[k].max(0.0).sqrt();
        let e = eig.eigenvectors.column(k);
        vectors.set_column(j, &e);
        freqs.push(w);
        let mut u = vec![[Complex64::new(0.0, 0.0); 3]; n];
        for i in 0..n {
            for a in 0..3 {
                u[i][a] = Complex64::new(e[3 * i + a] / masses[i].sqrt(), 0.0);
            }
        }
        let mut mode = FloquetMode { index: j, quasi_frequency: w, n_max: 0, harmonics: vec![u], initial_state: vec![] };
        fix_phase(&mut mode);
        let (x, v) = mode.solution(0.0);
        mode.initial_state = x.iter().chain(v.iter()).flat_map(|c| c.iter().copied()).collect();
        modes.push(mode);
    }
    Ok(PseudoModes { spectrum: ModeSpectrum { frequencies: freqs, source: SpectrumSource::Pseudopotential }, eigenvectors: vectors, modes })
}

/// Rotates the global phase so the largest DC component is real and positive.
fn fix_phase(mode: &mut FloquetMode) {
    let dc = mode.dc_vector();
    let mut best = Complex64::new(0.0, 0.0);
    for c in dc.iter().flat_map(|c| c.iter()) {
        if c.norm() > best.norm() * (1.0 + 1e-9) {
            best = *c;
        }
    }
    if best.norm() == 0.0 {
        return;
    }
    let rot = best.conj() / best.norm();
    for h in mode.harmonics.iter_mut() {
        for c in h.iter_mut() {
            for a in c.iter_mut() {
                *a *= rot;
            }
        }
    }
    for z in mode.initial_state.iter_mut() {
        *z *= rot;
    }
}

/// Eigenpairs of a general real matrix via the complex Schur form.
fn eigenpairs(m: &DMatrix<f64>) -> Vec<(Complex64, DVector<Complex64>)> {
    let n = m.nrows();
    let mc = m.map(|x| Complex64::new(x, 0.0));
    let (q, t) = nalgebra::linalg::Schur::new(mc).unpack();
    let small = 1e-14 * t.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let lam = t[(k, k)];
        let mut y = DVector::<Complex64>::zeros(n);
        y[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[j];
            }
            let mut den = t[(i, i)] - lam;
            if den.norm() < small {
                den = Complex64::new(small, 0.0);
            }
            y[i] = -s / den;
        }
        let v = &q * y;
        let nv = v.norm();
        out.push((lam, v / Complex64::new(nv, 0.0)));
    }
    out
}

/// Floquet modes of the linearized motion about `orbit`.
pub fn floquet_modes(orbit: &PeriodicOrbit, opts: &FloquetOptions) -> Result<(ModeSpectrum, Vec<FloquetMode>)> {
    let model = orbit.model()?;
    let n = model.n_ions();
    let d = 3 * n;
    let masses = model.masses().to_vec();
    let n_samples = opts.n_samples.max(2 * orbit.n_max + 2);
    let steps = opts.steps_per_period.div_ceil(n_samples) * n_samples;
    let mono = monodromy::monodromy(orbit, &model, steps, n_samples)?;

    // pseudopotential reference spectrum for the branch choice
    let pseudo = pseudo_from_hessian(model.pseudo_hessian(&orbit.mean_positions()), &masses, false)?;
    let reference = &pseudo.spectrum.frequencies;

    let pairs = eigenpairs(&mono.matrix);
    let mut modes = Vec::with_capacity(d);
    for (lam, v) in pairs {
        if (lam.norm() - 1.0).abs() > opts.multiplier_tol {
            return Err(Error::Instability {
                multiplier: lam.norm(),
                context: format!("Floquet multiplier {lam:.6} (mode {})", modes.len()),
            });
        }
        let z: Vec<Complex64> = v.iter().copied().collect();
        let krein = symplectic_product(&z, &z, &masses).re;
        if krein <= 0.0 {
            continue;
        }
        let z: Vec<Complex64> = z.iter().map(|c| c / krein.sqrt()).collect();
        let b0 = (-lam.arg() / std::f64::consts::PI).rem_euclid(2.0);
        let dist = |b: f64| reference.iter().map(|w| (w - b).abs()).fold(f64::INFINITY, f64::min);
        let beta = if dist(b0 - 2.0) < dist(b0) { b0 - 2.0 } else { b0 };
        modes.push((beta, z));
    }
    if modes.len() != d {
        return Err(Error::Unsupported(format!(
            "found {} positive-norm Floquet solutions for {d} degrees of freedom (zero or degenerate modes)",
            modes.len()
        )));
    }
    modes.sort_by(|a, b| b.0.total_cmp(&a.0));

    let nh = orbit.n_max;
    let zmat = DMatrix::from_fn(2 * d, d, |r, c| modes[c].1[r]);
    let zre = zmat.map(|c| c.re);
    let zim = zmat.map(|c| c.im);
    // u_j(t_m) = Φ_x(t_m) z_j
    let sampled: Vec<(DMatrix<f64>, DMatrix<f64>)> = mono.samples.iter().map(|phi| (phi * &zre, phi * &zim)).collect();

    let mut out = Vec::with_capacity(d);
    for (j, (beta, z)) in modes.into_iter().enumerate() {
        if beta <= 0.0 {
            return Err(Error::Instability { multiplier: 1.0, context: format!("mode {j} has non-positive quasi-frequency") });
        }
        let norm = (2.0 * beta).sqrt();
        let mut harmonics = vec![vec![[Complex64::new(0.0, 0.0); 3]; n]; 2 * nh + 1];
        for (m, (re, im)) in sampled.iter().enumerate() {
            let t = std::f64::consts::PI * m as f64 / n_samples as f64;
            let p = Complex64::from_polar(norm, beta * t);
            for (k, h) in harmonics.iter_mut().enumerate() {
                let nn = k as f64 - nh as f64;
                let w = p * Complex64::from_polar(1.0 / n_samples as f64, -2.0 * nn * t);
                for i in 0..n {
                    for a in 0..3 {
                        h[i][a] += w * Complex64::new(re[(3 * i + a, j)], im[(3 * i + a, j)]);
                    }
                }
            }
        }
        let mut mode = FloquetMode { index: j, quasi_frequency: beta, n_max: nh, harmonics, initial_state: z };
        fix_phase(&mut mode);
        out.push(mode);
    }
    let spectrum = ModeSpectrum { frequencies: out.iter().map(|m| m.quasi_frequency).collect(), source: SpectrumSource::Floquet };
    Ok((spectrum, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{find_equilibrium, find_periodic_orbit, EquilibriumOptions, OrbitOptions};
    use crate::trap::{Geometry, IonSpecies, Ions, TrapParameters};

    fn model(q: f64, a: [f64; 3], n: usize) -> TrapModel {
        let p = TrapParameters { geometry: Geometry::LinearPaul, rf_angular_frequency: 1.0, mathieu_q: q, static_curvature: a };
        TrapModel::new(p, Ions::uniform(IonSpecies::calcium40(), n)).unwrap()
    }

    fn orbit_of(m: &TrapModel) -> PeriodicOrbit {
        let eq = find_equilibrium(m, 0, 1, None, &EquilibriumOptions::default()).unwrap();
        find_periodic_orbit(m, &eq, 2, &OrbitOptions::default()).unwrap()
    }

    #[test]
    fn static_single_ion() {
        let m = model(0.0, [0.02, 0.03, 0.05], 1);
        let (s, modes) = floquet_modes(&orbit_of(&m), &FloquetOptions::default()).unwrap();
        let expect = [0.05f64.sqrt(), 0.03f64.sqrt(), 0.02f64.sqrt()];
        for (w, e) in s.frequencies.iter().zip(expect) {
            assert!((w - e).abs() < 1e-9, "{w} vs {e}");
        }
        for mode in &modes {
            for n in [-2i64, -1, 1, 2] {
                assert!(mode.harmonic(n).unwrap()[0].iter().all(|c| c.norm() < 1e-9));
            }
        }
    }

    #[test]
    fn two_ion_axial_modes() {
        let m = model(0.0, [1.0, 100.0, 100.0], 2);
        let eq = find_equilibrium(&m, 0, 1, None, &EquilibriumOptions::default()).unwrap();
        let p = pseudopotential_modes(&eq, &m).unwrap();
        let w = &p.spectrum.frequencies;
        assert!((w[w.len() - 1] - 1.0).abs() < 1e-8);
        assert!((w[w.len() - 2] - 3f64.sqrt()).abs() < 1e-8);
        let g = p.eigenvectors.transpose() * &p.eigenvectors;
        assert!((g - DMatrix::identity(6, 6)).amax() < 1e-10);
    }

    #[test]
    fn driven_modes_are_symplectic_and_normalized() {
        let m = model(0.22, [0.002, -0.006, 0.004], 3);
        let o = orbit_of(&m);
        let mono = monodromy::monodromy(&o, &m, 1024, 0).unwrap();
        assert!(monodromy::symplectic_defect(&mono.matrix, m.masses()) < 1e-8);
        let (_, modes) = floquet_modes(&o, &FloquetOptions::default()).unwrap();
        for a in &modes {
            for b in &modes {
                let s = symplectic_product(&a.initial_state, &b.initial_state, m.masses());
                let e = if a.index == b.index { 1.0 } else { 0.0 };
                assert!((s - e).norm() < 1e-8, "{} {} {s}", a.index, b.index);
            }
        }
    }
}
