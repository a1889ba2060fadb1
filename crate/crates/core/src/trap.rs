//! Trap potentials, ion species and analytic forces.
//!
//! The potential energy of an ion with charge ratio ζ at dimensionless time
//! `t` is `ζ [S(x) + g(t) R(x)]` where `S` is the static part, `R` the rf
//! shape and `g(t) = 2q cos 2t`. With this phase convention an ion displaced
//! along y oscillates as `y(t) ≈ B₀ (1 + (q/2) cos 2t)`. The time-averaged (pseudopotential)
//! energy replaces the rf part by `ζ² q² |∇R|² / (4μ)`; for the linear
//! Paul trap the exact per-axis Mathieu secular frequency is used instead.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::coulomb;
use crate::error::{Error, Result};
use crate::mathieu;
use crate::units::UnitSystem;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeciesRole {
    Qubit,
    Coolant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    pub label: String,
    /// Mass in atomic mass units.
    pub mass: f64,
    /// Charge in elementary charges.
    pub charge: f64,
    pub role: SpeciesRole,
}

impl IonSpecies {
    pub fn new(label: impl Into<String>, mass: f64, charge: f64, role: SpeciesRole) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::invalid(format!("species mass must be > 0, got {mass}")));
        }
        if !(charge > 0.0) {
            return Err(Error::invalid(format!("species charge must be > 0, got {charge}")));
        }
        Ok(Self { label: label.into(), mass, charge, role })
    }

    pub fn calcium40() -> Self {
        Self::new("40Ca+", 39.962_59, 1.0, SpeciesRole::Qubit).unwrap()
    }
}

/// The ions of a crystal: a species table plus the species of every ion.
///
/// Masses and charges are exposed as ratios to the reference species, which
/// is the lightest one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ions {
    pub species: Vec<IonSpecies>,
    pub assignment: Vec<usize>,
}

impl Ions {
    pub fn uniform(species: IonSpecies, n: usize) -> Self {
        Self { species: vec![species], assignment: vec![0; n] }
    }

    pub fn new(species: Vec<IonSpecies>, assignment: Vec<usize>) -> Result<Self> {
        if species.is_empty() {
            return Err(Error::invalid("no species defined"));
        }
        if let Some(&bad) = assignment.iter().find(|&&s| s >= species.len()) {
            return Err(Error::invalid(format!("species index {bad} out of range")));
        }
        Ok(Self { species, assignment })
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn reference(&self) -> &IonSpecies {
        self.species.iter().min_by(|a, b| a.mass.total_cmp(&b.mass)).expect("non-empty species table")
    }

    pub fn mass_ratio(&self, i: usize) -> f64 {
        self.species[self.assignment[i]].mass / self.reference().mass
    }

    pub fn charge_ratio(&self, i: usize) -> f64 {
        self.species[self.assignment[i]].charge / self.reference().charge
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.mass_ratio(i)).collect()
    }

    pub fn charges(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.charge_ratio(i)).collect()
    }

    pub fn role(&self, i: usize) -> SpeciesRole {
        self.species[self.assignment[i]].role
    }

    pub fn units(&self, rf_angular_frequency: f64) -> Result<UnitSystem> {
        let r = self.reference();
        UnitSystem::new(rf_angular_frequency, r.mass, r.charge)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// rf quadrupole in the y–z plane, axis along x.
    LinearPaul,
    /// Quadrupole rf null on a circle of the given radius in the x–y plane.
    RingQuadrupole { radius: f64 },
    /// Linear 2k-pole trap with axis along z; `order` is k.
    LinearMultipole { order: u32, radius_scale: f64 },
}

/// Trap definition in dimensionless units of the reference species.
///
/// `static_curvature` holds (a_x, a_y, a_z) for the linear geometries and
/// (a_radial, 0, a_z) for the ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParameters {
    pub geometry: Geometry,
    /// Ω_rf in rad/s (physical).
    pub rf_angular_frequency: f64,
    /// Mathieu q (q_y for the linear Paul trap, q_z = −q_y).
    pub mathieu_q: f64,
    pub static_curvature: [f64; 3],
}

/// Tolerance on the Laplace residual a_x + a_y + a_z when it is enforced.
pub const LAPLACE_TOL: f64 = 1e-12;

impl TrapParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.rf_angular_frequency > 0.0) {
            return Err(Error::invalid("rf frequency must be positive"));
        }
        if self.mathieu_q.abs() >= 0.9 {
            return Err(Error::invalid(format!("|q| = {} outside the stability bound 0.9", self.mathieu_q.abs())));
        }
        match self.geometry {
            Geometry::RingQuadrupole { radius } if !(radius > 0.0) => return Err(Error::invalid("ring radius must be positive")),
            Geometry::LinearMultipole { order, radius_scale } if order < 2 || !(radius_scale > 0.0) => {
                return Err(Error::invalid("multipole order must be ≥ 2 with positive radius scale"))
            }
            _ => {}
        }
        if self.static_curvature.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("non-finite static curvature"));
        }
        Ok(())
    }

    /// Sum of the static curvatures; zero for a Laplace-consistent DC field.
    pub fn laplace_residual(&self) -> f64 {
        match self.geometry {
            Geometry::RingQuadrupole { .. } => self.static_curvature[0] + self.static_curvature[2],
            _ => self.static_curvature.iter().sum(),
        }
    }

    /// Validation that additionally requires a Laplace-consistent DC field.
    pub fn validate_strict(&self) -> Result<()> {
        self.validate()?;
        let r = self.laplace_residual();
        if r.abs() > LAPLACE_TOL {
            return Err(Error::invalid(format!("static curvatures violate Laplace: sum = {r:.3e}")));
        }
        Ok(())
    }

    /// Per-axis Mathieu (a, q) for the linear Paul trap.
    fn paul_axes(&self) -> [(f64, f64); 3] {
        let a = self.static_curvature;
        let q = self.mathieu_q;
        [(a[0], 0.0), (a[1], q), (a[2], -q)]
    }

    /// Linear Paul trap with the x static curvature set by `omega_x` and
    /// a_y, a_z fitted so the exact secular frequencies equal `omega_y`,
    /// `omega_z` (all physical angular frequencies).
    pub fn linear_paul_from_secular(rf_angular_frequency: f64, mathieu_q: f64, omega: [f64; 3]) -> Result<Self> {
        let half = 0.5 * rf_angular_frequency;
        let beta: Vec<f64> = omega.iter().map(|w| w / half).collect();
        let a_x = beta[0] * beta[0];
        let a_y = mathieu::fit_static_curvature(beta[1], mathieu_q)?;
        let a_z = mathieu::fit_static_curvature(beta[2], -mathieu_q)?;
        let t = Self { geometry: Geometry::LinearPaul, rf_angular_frequency, mathieu_q, static_curvature: [a_x, a_y, a_z] };
        t.validate()?;
        Ok(t)
    }

    /// Exact per-axis secular frequencies (physical rad/s) of a single ion of
    /// the given mass/charge ratio, linear Paul trap only.
    pub fn secular_frequencies(&self, mass_ratio: f64, charge_ratio: f64) -> Result<[f64; 3]> {
        let b = self.secular_exponents(mass_ratio, charge_ratio)?;
        let half = 0.5 * self.rf_angular_frequency;
        Ok([b[0] * half, b[1] * half, b[2] * half])
    }

    /// Dimensionless secular exponents β per axis (exact, from the monodromy).
    pub fn secular_exponents(&self, mass_ratio: f64, charge_ratio: f64) -> Result<[f64; 3]> {
        match self.geometry {
            Geometry::LinearPaul => {
                let s = charge_ratio / mass_ratio;
                let axes = self.paul_axes();
                let mut out = [0.0; 3];
                for (k, (a, q)) in axes.iter().enumerate() {
                    out[k] = mathieu::characteristic_exponent(a * s, q * s)?;
                }
                Ok(out)
            }
            Geometry::RingQuadrupole { .. } => {
                let s = charge_ratio / mass_ratio;
                let a = self.static_curvature;
                let r = mathieu::characteristic_exponent(a[0] * s, self.mathieu_q * s)?;
                let z = mathieu::characteristic_exponent(a[2] * s, -self.mathieu_q * s)?;
                Ok([r, 0.0, z])
            }
            Geometry::LinearMultipole { .. } => {
                Err(Error::Unsupported("secular frequencies of a higher-order multipole are amplitude dependent".into()))
            }
        }
    }

    /// Lowest-order pseudopotential estimate √(a + q²/2) per axis (physical rad/s).
    pub fn pseudopotential_frequencies(&self, mass_ratio: f64, charge_ratio: f64) -> Result<[f64; 3]> {
        let s = charge_ratio / mass_ratio;
        let half = 0.5 * self.rf_angular_frequency;
        match self.geometry {
            Geometry::LinearPaul => {
                let axes = self.paul_axes();
                let mut out = [0.0; 3];
                for (k, (a, q)) in axes.iter().enumerate() {
                    out[k] = mathieu::pseudopotential_exponent(a * s, q * s)? * half;
                }
                Ok(out)
            }
            Geometry::RingQuadrupole { .. } => {
                let a = self.static_curvature;
                let q = self.mathieu_q * s;
                Ok([mathieu::pseudopotential_exponent(a[0] * s, q)? * half, 0.0, mathieu::pseudopotential_exponent(a[2] * s, q)? * half])
            }
            Geometry::LinearMultipole { .. } => Err(Error::Unsupported("multipole pseudopotential is not harmonic".into())),
        }
    }
}

/// A trap together with the ions it holds. Precomputes the per-species
/// effective (pseudopotential) stiffness.
#[derive(Debug, Clone)]
pub struct TrapModel {
    pub params: TrapParameters,
    pub ions: Ions,
    mass: Vec<f64>,
    charge: Vec<f64>,
    /// Linear Paul: exact per-axis μβ² for each ion.
    paul_stiffness: Option<Vec<[f64; 3]>>,
}

impl TrapModel {
    pub fn new(params: TrapParameters, ions: Ions) -> Result<Self> {
        params.validate()?;
        if ions.is_empty() {
            return Err(Error::invalid("at least one ion is required"));
        }
        let mass = ions.masses();
        let charge = ions.charges();
        let paul_stiffness = if params.geometry == Geometry::LinearPaul {
            let mut per_species = Vec::new();
            for sp in 0..ions.species.len() {
                let m = ions.species[sp].mass / ions.reference().mass;
                let z = ions.species[sp].charge / ions.reference().charge;
                let b = params.secular_exponents(m, z)?;
                per_species.push([m * b[0] * b[0], m * b[1] * b[1], m * b[2] * b[2]]);
            }
            Some(ions.assignment.iter().map(|&s| per_species[s]).collect())
        } else {
            // every species must at least be confined at lowest order
            for sp in &ions.species {
                let m = sp.mass / ions.reference().mass;
                let z = sp.charge / ions.reference().charge;
                if let Geometry::RingQuadrupole { .. } = params.geometry {
                    params.pseudopotential_frequencies(m, z)?;
                }
            }
            None
        };
        Ok(Self { params, ions, mass, charge, paul_stiffness })
    }

    pub fn n_ions(&self) -> usize {
        self.ions.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn charges(&self) -> &[f64] {
        &self.charge
    }

    pub fn units(&self) -> Result<UnitSystem> {
        self.ions.units(self.params.rf_angular_frequency)
    }

    /// Same ions in a trap with different parameters.
    pub fn with_params(&self, params: TrapParameters) -> Result<Self> {
        Self::new(params, self.ions.clone())
    }

    fn rf_drive(&self, t: f64) -> f64 {
        2.0 * self.params.mathieu_q * (2.0 * t).cos()
    }

    // --- single-ion static part S(x) ---

    fn static_terms(&self, x: &Vec3) -> (f64, Vec3, Matrix3<f64>) {
        let a = self.params.static_curvature;
        match self.params.geometry {
            Geometry::RingQuadrupole { radius } => {
                let (s, grad_s, hess_s) = ring_offset(x, radius);
                let e = 0.5 * a[0] * s * s + 0.5 * a[2] * x.z * x.z;
                let mut g = a[0] * s * grad_s;
                g.z += a[2] * x.z;
                let mut h = a[0] * (grad_s * grad_s.transpose() + s * hess_s);
                h[(2, 2)] += a[2];
                (e, g, h)
            }
            _ => {
                let e = 0.5 * (a[0] * x.x * x.x + a[1] * x.y * x.y + a[2] * x.z * x.z);
                let g = Vec3::new(a[0] * x.x, a[1] * x.y, a[2] * x.z);
                let h = Matrix3::from_diagonal(&Vec3::new(a[0], a[1], a[2]));
                (e, g, h)
            }
        }
    }

    // --- single-ion rf shape R(x) ---

    fn rf_terms(&self, x: &Vec3) -> (f64, Vec3, Matrix3<f64>) {
        match self.params.geometry {
            Geometry::LinearPaul => {
                let e = 0.5 * (x.y * x.y - x.z * x.z);
                (e, Vec3::new(0.0, x.y, -x.z), Matrix3::from_diagonal(&Vec3::new(0.0, 1.0, -1.0)))
            }
            Geometry::RingQuadrupole { radius } => {
                let (s, grad_s, hess_s) = ring_offset(x, radius);
                let e = 0.5 * (s * s - x.z * x.z);
                let mut g = s * grad_s;
                g.z -= x.z;
                let mut h = grad_s * grad_s.transpose() + s * hess_s;
                h[(2, 2)] -= 1.0;
                (e, g, h)
            }
            Geometry::LinearMultipole { order, radius_scale } => {
                let k = order as i32;
                let scale = 1.0 / (k as f64 * radius_scale.powi(k - 2));
                let w = num_complex::Complex64::new(x.x, x.y);
                let wk = w.powi(k);
                let wk1 = w.powi(k - 1) * k as f64;
                let wk2 = w.powi(k - 2) * (k * (k - 1)) as f64;
                let e = scale * wk.re;
                let g = Vec3::new(scale * wk1.re, -scale * wk1.im, 0.0);
                let mut h = Matrix3::zeros();
                h[(0, 0)] = scale * wk2.re;
                h[(1, 1)] = -scale * wk2.re;
                h[(0, 1)] = -scale * wk2.im;
                h[(1, 0)] = h[(0, 1)];
                (e, g, h)
            }
        }
    }

    // --- time-averaged rf energy per ion ---

    fn pseudo_rf_terms(&self, i: usize, x: &Vec3) -> (f64, Vec3, Matrix3<f64>) {
        let m = self.mass[i];
        let z = self.charge[i];
        if let Some(st) = &self.paul_stiffness {
            // exact secular stiffness replaces static + rf
            let k = st[i];
            let e = 0.5 * (k[0] * x.x * x.x + k[1] * x.y * x.y + k[2] * x.z * x.z);
            let g = Vec3::new(k[0] * x.x, k[1] * x.y, k[2] * x.z);
            return (e, g, Matrix3::from_diagonal(&Vec3::new(k[0], k[1], k[2])));
        }
        let c = z * z * self.params.mathieu_q.powi(2) / (4.0 * m);
        match self.params.geometry {
            Geometry::RingQuadrupole { radius } => {
                let (s, grad_s, hess_s) = ring_offset(x, radius);
                let e = c * (s * s + x.z * x.z);
                let mut g = 2.0 * c * s * grad_s;
                g.z += 2.0 * c * x.z;
                let mut h = 2.0 * c * (grad_s * grad_s.transpose() + s * hess_s);
                h[(2, 2)] += 2.0 * c;
                (e, g, h)
            }
            Geometry::LinearMultipole { order, radius_scale } => {
                // |∇R|² = r^{2k−2} / r0^{2k−4}
                let k = order as i32;
                let p = 2 * k - 2;
                let cc = c / radius_scale.powi(2 * k - 4);
                let r2 = x.x * x.x + x.y * x.y;
                let rp = r2.powf(p as f64 / 2.0);
                let e = cc * rp;
                let d = if r2 > 0.0 {
                    cc * p as f64 * rp / r2
                } else if p == 2 {
                    cc * 2.0
                } else {
                    0.0
                };
                let g = Vec3::new(d * x.x, d * x.y, 0.0);
                let mut h = Matrix3::zeros();
                h[(0, 0)] = d;
                h[(1, 1)] = d;
                if r2 > 0.0 && p > 2 {
                    let dd = cc * p as f64 * (p - 2) as f64 * rp / (r2 * r2);
                    h[(0, 0)] += dd * x.x * x.x;
                    h[(1, 1)] += dd * x.y * x.y;
                    h[(0, 1)] = dd * x.x * x.y;
                    h[(1, 0)] = h[(0, 1)];
                }
                (e, g, h)
            }
            Geometry::LinearPaul => unreachable!("handled by exact stiffness"),
        }
    }

    /// Trap energy, gradient and Hessian block of ion `i` at time `t`.
    pub fn ion_trap_terms(&self, i: usize, x: &Vec3, t: f64) -> (f64, Vec3, Matrix3<f64>) {
        let z = self.charge[i];
        let (es, gs, hs) = self.static_terms(x);
        let drive = self.rf_drive(t);
        let (er, gr, hr) = self.rf_terms(x);
        (z * (es + drive * er), z * (gs + drive * gr), z * (hs + drive * hr))
    }

    /// Time-averaged trap terms of ion `i`.
    pub fn ion_pseudo_terms(&self, i: usize, x: &Vec3) -> (f64, Vec3, Matrix3<f64>) {
        if self.paul_stiffness.is_some() {
            return self.pseudo_rf_terms(i, x);
        }
        let z = self.charge[i];
        let (es, gs, hs) = self.static_terms(x);
        let (ep, gp, hp) = self.pseudo_rf_terms(i, x);
        (z * es + ep, z * gs + gp, z * hs + hp)
    }

    /// Total driven energy and forces at time `t`.
    pub fn energy_forces(&self, positions: &[Vec3], t: f64) -> Result<(f64, Vec<Vec3>)> {
        self.check_len(positions)?;
        let (mut e, mut f) = coulomb::energy_forces(positions, &self.charge)?;
        for (i, x) in positions.iter().enumerate() {
            let (et, gt, _) = self.ion_trap_terms(i, x, t);
            e += et;
            f[i] -= gt;
        }
        Ok((e, f))
    }

    /// Total pseudopotential energy and forces.
    pub fn pseudo_energy_forces(&self, positions: &[Vec3]) -> Result<(f64, Vec<Vec3>)> {
        self.check_len(positions)?;
        let (mut e, mut f) = coulomb::energy_forces(positions, &self.charge)?;
        for (i, x) in positions.iter().enumerate() {
            let (et, gt, _) = self.ion_pseudo_terms(i, x);
            e += et;
            f[i] -= gt;
        }
        Ok((e, f))
    }

    /// Driven-potential Hessian (3N × 3N) at time `t`.
    pub fn hessian(&self, positions: &[Vec3], t: f64) -> nalgebra::DMatrix<f64> {
        let mut h = coulomb::hessian(positions, &self.charge);
        for (i, x) in positions.iter().enumerate() {
            let (_, _, b) = self.ion_trap_terms(i, x, t);
            add_block(&mut h, i, &b);
        }
        h
    }

    /// Pseudopotential Hessian (3N × 3N).
    pub fn pseudo_hessian(&self, positions: &[Vec3]) -> nalgebra::DMatrix<f64> {
        let mut h = coulomb::hessian(positions, &self.charge);
        for (i, x) in positions.iter().enumerate() {
            let (_, _, b) = self.ion_pseudo_terms(i, x);
            add_block(&mut h, i, &b);
        }
        h
    }

    fn check_len(&self, positions: &[Vec3]) -> Result<()> {
        if positions.len() != self.n_ions() {
            return Err(Error::invalid(format!("{} positions for {} ions", positions.len(), self.n_ions())));
        }
        if positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("non-finite position"));
        }
        Ok(())
    }

    /// Radial distance used for escape detection and ring diagnostics.
    pub fn radial_coordinate(&self, x: &Vec3) -> f64 {
        match self.params.geometry {
            Geometry::LinearPaul => (x.y * x.y + x.z * x.z).sqrt(),
            _ => (x.x * x.x + x.y * x.y).sqrt(),
        }
    }

    pub fn is_circular(&self) -> bool {
        !matches!(self.params.geometry, Geometry::LinearPaul)
    }
}

fn add_block(h: &mut nalgebra::DMatrix<f64>, i: usize, b: &Matrix3<f64>) {
    for r in 0..3 {
        for c in 0..3 {
            h[(3 * i + r, 3 * i + c)] += b[(r, c)];
        }
    }
}

/// Signed distance from the ring circle in the x–y plane, with its
/// gradient and Hessian.
fn ring_offset(x: &Vec3, radius: f64) -> (f64, Vec3, Matrix3<f64>) {
    let rho = (x.x * x.x + x.y * x.y).sqrt().max(1e-300);
    let n = Vec3::new(x.x / rho, x.y / rho, 0.0);
    let mut h = Matrix3::zeros();
    h[(0, 0)] = (1.0 - n.x * n.x) / rho;
    h[(1, 1)] = (1.0 - n.y * n.y) / rho;
    h[(0, 1)] = -n.x * n.y / rho;
    h[(1, 0)] = h[(0, 1)];
    (rho - radius, n, h)
}

/// Energy and forces of a configuration: the public entry point combining
/// the trap (driven at time `t`) and all Coulomb pairs.
pub fn potential_and_force(positions: &[Vec3], model: &TrapModel, t: f64) -> Result<(f64, Vec<Vec3>)> {
    if !t.is_finite() {
        return Err(Error::invalid("non-finite time"));
    }
    model.energy_forces(positions, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn static_1d(n: usize) -> TrapModel {
        let p = TrapParameters {
            geometry: Geometry::LinearPaul,
            rf_angular_frequency: 1.0,
            mathieu_q: 0.0,
            static_curvature: [1.0, 100.0, 100.0],
        };
        TrapModel::new(p, Ions::uniform(IonSpecies::calcium40(), n)).unwrap()
    }

    #[test]
    fn two_ion_equilibrium_force_vanishes() {
        let m = static_1d(2);
        let u = 0.25f64.cbrt();
        let pos = [Vec3::new(-u, 0.0, 0.0), Vec3::new(u, 0.0, 0.0)];
        let (_, f) = potential_and_force(&pos, &m, 0.3).unwrap();
        assert!(f[0].norm() < 1e-14 && f[1].norm() < 1e-14);
    }

    #[test]
    fn single_ion_at_origin_feels_no_force() {
        let traps = [
            TrapParameters {
                geometry: Geometry::LinearPaul,
                rf_angular_frequency: 1.0,
                mathieu_q: 0.3,
                static_curvature: [0.01, -0.02, 0.01],
            },
            TrapParameters {
                geometry: Geometry::LinearMultipole { order: 4, radius_scale: 3.0 },
                rf_angular_frequency: 1.0,
                mathieu_q: 0.3,
                static_curvature: [-0.005, -0.005, 0.01],
            },
        ];
        for p in traps {
            let m = TrapModel::new(p, Ions::uniform(IonSpecies::calcium40(), 1)).unwrap();
            for &t in &[0.0, 0.4, 2.0] {
                let (_, f) = potential_and_force(&[Vec3::zeros()], &m, t).unwrap();
                assert!(f[0].norm() < 1e-15);
            }
        }
    }

    #[test]
    fn overlapping_ions_rejected() {
        let m = static_1d(2);
        let pos = [Vec3::new(0.1, 0.0, 0.0), Vec3::new(0.1 + 1e-12, 0.0, 0.0)];
        assert!(matches!(potential_and_force(&pos, &m, 0.0), Err(Error::DegenerateConfiguration { .. })));
    }

    #[test]
    fn energy_is_pi_periodic() {
        let p = TrapParameters {
            geometry: Geometry::LinearPaul,
            rf_angular_frequency: 1.0,
            mathieu_q: 0.22,
            static_curvature: [3e-4, -3e-3, 4e-3],
        };
        let m = TrapModel::new(p, Ions::uniform(IonSpecies::calcium40(), 3)).unwrap();
        let pos = [Vec3::new(-2.0, 0.3, 0.1), Vec3::new(0.1, -0.2, 0.0), Vec3::new(2.2, 0.5, -0.1)];
        for &t in &[0.0, 0.37, 1.1] {
            let (e0, _) = m.energy_forces(&pos, t).unwrap();
            let (e1, _) = m.energy_forces(&pos, t + PI).unwrap();
            assert!((e0 - e1).abs() <= 1e-12 * e0.abs());
        }
    }

    #[test]
    fn laplace_check() {
        let mut p = TrapParameters {
            geometry: Geometry::LinearPaul,
            rf_angular_frequency: 1.0,
            mathieu_q: 0.22,
            static_curvature: [0.01, -0.004, -0.006],
        };
        assert!(p.validate_strict().is_ok());
        p.static_curvature[2] = 0.0;
        assert!(p.validate_strict().is_err());
        p.mathieu_q = 0.95;
        assert!(p.validate().is_err());
    }

    #[test]
    fn secular_harmonic_limit() {
        let p = TrapParameters {
            geometry: Geometry::LinearPaul,
            rf_angular_frequency: 2.0,
            mathieu_q: 0.0,
            static_curvature: [0.02, 0.02, 0.02],
        };
        let w = p.secular_frequencies(1.0, 1.0).unwrap();
        // Ω_rf / 2 = 1
        assert!((w[0] - 0.02f64.sqrt()).abs() < 1e-14);
    }
}
