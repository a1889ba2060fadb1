//! π-periodic driven orbit by harmonic balance.
//!
//! Each coordinate is expanded as `x(t) = Σ_{|n|≤N} B_{2n} e^{2int}` and the
//! Galerkin-projected equations of motion are solved by Newton's method on the
//! real cosine/sine coefficients.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CrystalConfiguration;
use crate::error::{Error, Result};
use crate::trap::{Ions, TrapModel, TrapParameters, Vec3};

pub type CVec3 = [Complex64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub n_max: usize,
    /// `coefficients[n][i]` is B_{2n,i} for n = 0..=n_max; negative harmonics
    /// are the complex conjugates.
    pub coefficients: Vec<Vec<CVec3>>,
    /// Max-norm of the equations-of-motion residual over one period.
    pub residual: f64,
    pub params: TrapParameters,
    pub ions: Ions,
}

#[derive(Debug, Clone, Copy)]
pub struct OrbitOptions {
    /// Target max-norm EOM residual; n_max is raised until it is met.
    pub residual_tol: f64,
    pub max_harmonics: usize,
    pub max_newton: usize,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self { residual_tol: 1e-8, max_harmonics: 10, max_newton: 30 }
    }
}

impl PeriodicOrbit {
    pub fn n_ions(&self) -> usize {
        self.coefficients[0].len()
    }

    /// B_{2n,i} for any integer n.
    pub fn coefficient(&self, n: i64, i: usize) -> CVec3 {
        let k = n.unsigned_abs() as usize;
        if k > self.n_max {
            return [Complex64::new(0.0, 0.0); 3];
        }
        let b = self.coefficients[k][i];
        if n < 0 {
            b.map(|c| c.conj())
        } else {
            b
        }
    }

    pub fn model(&self) -> Result<TrapModel> {
        TrapModel::new(self.params, self.ions.clone())
    }

    /// d-th time derivative of the orbit of ion `i` at time `t`.
    pub fn derivative(&self, i: usize, t: f64, d: u32) -> Vec3 {
        let mut out = Vec3::zeros();
        if d == 0 {
            for a in 0..3 {
                out[a] = self.coefficients[0][i][a].re;
            }
        }
        for n in 1..=self.n_max {
            let w = 2.0 * n as f64;
            let e = Complex64::from_polar(1.0, w * t) * Complex64::new(0.0, w).powu(d);
            for a in 0..3 {
                out[a] += 2.0 * (self.coefficients[n][i][a] * e).re;
            }
        }
        out
    }

    pub fn positions(&self, t: f64) -> Vec<Vec3> {
        (0..self.n_ions()).map(|i| self.derivative(i, t, 0)).collect()
    }

    pub fn velocities(&self, t: f64) -> Vec<Vec3> {
        (0..self.n_ions()).map(|i| self.derivative(i, t, 1)).collect()
    }

    /// Time-averaged positions B₀.
    pub fn mean_positions(&self) -> Vec<Vec3> {
        self.positions_dc()
    }

    fn positions_dc(&self) -> Vec<Vec3> {
        self.coefficients[0].iter().map(|b| Vec3::new(b[0].re, b[1].re, b[2].re)).collect()
    }

    /// Max-norm of μẍ + ∇V over `samples` times in one period.
    pub fn eom_residual(&self, model: &TrapModel, samples: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for m in 0..samples {
            let t = std::f64::consts::PI * (m as f64 + 0.37) / samples as f64;
            let x = self.positions(t);
            let (_, f) = model.energy_forces(&x, t)?;
            for (i, fi) in f.iter().enumerate() {
                let r = self.derivative(i, t, 2) * model.masses()[i] - fi;
                worst = worst.max(r.amax());
            }
        }
        Ok(worst)
    }
}

/// Number of real basis functions for cutoff `n_max`.
fn n_basis(n_max: usize) -> usize {
    2 * n_max + 1
}

/// Basis function b at time t: 1, cos 2t, sin 2t, cos 4t, ...
fn basis(b: usize, t: f64) -> f64 {
    if b == 0 {
        return 1.0;
    }
    let n = b.div_ceil(2) as f64;
    if b % 2 == 1 {
        (2.0 * n * t).cos()
    } else {
        (2.0 * n * t).sin()
    }
}

fn basis_freq2(b: usize) -> f64 {
    let n = b.div_ceil(2) as f64;
    4.0 * n * n
}

struct Balance<'a> {
    model: &'a TrapModel,
    n_max: usize,
    dim: usize,
    times: Vec<f64>,
    /// phi[m][b]
    phi: Vec<Vec<f64>>,
}

impl<'a> Balance<'a> {
    fn new(model: &'a TrapModel, n_max: usize) -> Self {
        let m = 8 * (n_max + 1);
        let times: Vec<f64> = (0..m).map(|k| std::f64::consts::PI * k as f64 / m as f64).collect();
        let phi = times.iter().map(|&t| (0..n_basis(n_max)).map(|b| basis(b, t)).collect()).collect();
        Self { model, n_max, dim: 3 * model.n_ions(), times, phi }
    }

    fn weight(&self, b: usize) -> f64 {
        let m = self.times.len() as f64;
        if b == 0 {
            1.0 / m
        } else {
            2.0 / m
        }
    }

    fn positions_at(&self, c: &DVector<f64>, m: usize) -> Vec<Vec3> {
        let nb = n_basis(self.n_max);
        let mut x = vec![Vec3::zeros(); self.model.n_ions()];
        for b in 0..nb {
            let w = self.phi[m][b];
            for (i, xi) in x.iter_mut().enumerate() {
                for a in 0..3 {
                    xi[a] += w * c[b * self.dim + 3 * i + a];
                }
            }
        }
        x
    }

    /// Galerkin residual and, optionally, its Jacobian.
    fn evaluate(&self, c: &DVector<f64>, jac: bool) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        let nb = n_basis(self.n_max);
        let d = self.dim;
        let mass = self.model.masses();
        let mut r = DVector::zeros(nb * d);
        let mut j = jac.then(|| DMatrix::zeros(nb * d, nb * d));
        for (m, &t) in self.times.iter().enumerate() {
            let x = self.positions_at(c, m);
            let (_, f) = self.model.energy_forces(&x, t)?;
            for b in 0..nb {
                let w = self.weight(b) * self.phi[m][b];
                for (i, fi) in f.iter().enumerate() {
                    for a in 0..3 {
                        r[b * d + 3 * i + a] -= w * fi[a];
                    }
                }
            }
            if let Some(j) = j.as_mut() {
                let k = self.model.hessian(&x, t);
                for b in 0..nb {
                    let wb = self.weight(b) * self.phi[m][b];
                    for bp in 0..nb {
                        let w = wb * self.phi[m][bp];
                        if w == 0.0 {
                            continue;
                        }
                        let mut blk = j.view_mut((b * d, bp * d), (d, d));
                        blk.iter_mut().zip(k.iter()).for_each(|(x, y)| *x += w * y);
                    }
                }
            }
        }
        // inertial term: μ ẍ projects to −(2n)² μ c_b
        for b in 0..nb {
            let w2 = basis_freq2(b);
            for k in 0..d {
                let mu = mass[k / 3];
                r[b * d + k] -= w2 * mu * c[b * d + k];
                if let Some(j) = j.as_mut() {
                    j[(b * d + k, b * d + k)] -= w2 * mu;
                }
            }
        }
        Ok((r, j))
    }

    fn solve(&self, mut c: DVector<f64>, max_newton: usize) -> Result<DVector<f64>> {
        let mut history = Vec::new();
        let (mut r, _) = self.evaluate(&c, false)?;
        for _ in 0..max_newton {
            let rn = r.amax();
            history.push(rn);
            if rn < 1e-13 {
                return Ok(c);
            }
            let (_, j) = self.evaluate(&c, true)?;
            let Some(dx) = j.expect("requested").lu().solve(&r) else {
                return Err(Error::NewtonDivergence { history });
            };
            let mut step = 1.0;
            loop {
                let cn = &c - &dx * step;
                match self.evaluate(&cn, false) {
                    Ok((rn_vec, _)) if rn_vec.amax() < rn || step < 1e-3 => {
                        c = cn;
                        r = rn_vec;
                        break;
                    }
                    _ if step < 1e-3 => return Err(Error::NewtonDivergence { history }),
                    _ => step *= 0.5,
                }
            }
            if history.len() > 3 && r.amax() >= history[history.len() - 1] && r.amax() > 1e-10 {
                history.push(r.amax());
                return Err(Error::NewtonDivergence { history });
            }
        }
        history.push(r.amax());
        if r.amax() < 1e-10 {
            Ok(c)
        } else {
            Err(Error::NewtonDivergence { history })
        }
    }
}

fn to_orbit(c: &DVector<f64>, n_max: usize, model: &TrapModel) -> PeriodicOrbit {
    let n = model.n_ions();
    let d = 3 * n;
    let mut coefficients = vec![vec![[Complex64::new(0.0, 0.0); 3]; n]; n_max + 1];
    for i in 0..n {
        for a in 0..3 {
            coefficients[0][i][a] = Complex64::new(c[3 * i + a], 0.0);
            for h in 1..=n_max {
                let cc = c[(2 * h - 1) * d + 3 * i + a];
                let ss = c[2 * h * d + 3 * i + a];
                coefficients[h][i][a] = Complex64::new(0.5 * cc, -0.5 * ss);
            }
        }
    }
    PeriodicOrbit { n_max, coefficients, residual: f64::NAN, params: model.params, ions: model.ions.clone() }
}

fn from_orbit(o: &PeriodicOrbit, n_max: usize) -> DVector<f64> {
    let n = o.n_ions();
    let d = 3 * n;
    let mut c = DVector::zeros(n_basis(n_max) * d);
    for i in 0..n {
        for a in 0..3 {
            c[3 * i + a] = o.coefficients[0][i][a].re;
            for h in 1..=n_max.min(o.n_max) {
                let b = o.coefficients[h][i][a];
                c[(2 * h - 1) * d + 3 * i + a] = 2.0 * b.re;
                c[2 * h * d + 3 * i + a] = -2.0 * b.im;
            }
        }
    }
    c
}

/// Solves for the π-periodic driven orbit around `equilibrium`, starting at
/// `n_max` harmonics and adding harmonics until the residual target is met.
pub fn find_periodic_orbit(
    model: &TrapModel,
    equilibrium: &CrystalConfiguration,
    n_max: usize,
    opts: &OrbitOptions,
) -> Result<PeriodicOrbit> {
    if n_max < 1 {
        return Err(Error::invalid("n_max must be ≥ 1"));
    }
    if equilibrium.n_ions() != model.n_ions() {
        return Err(Error::invalid("equilibrium does not match the trap model"));
    }
    equilibrium.verify(model)?;

    // lowest-order micromotion guess c₁ = ζ q ∇R / (2μ)
    let n = model.n_ions();
    let d = 3 * n;
    let mut c = DVector::zeros(n_basis(n_max) * d);
    for (i, x) in equilibrium.positions.iter().enumerate() {
        let (_, g0, _) = model.ion_trap_terms(i, x, std::f64::consts::FRAC_PI_4);
        let (_, g1, _) = model.ion_trap_terms(i, x, 0.0);
        // at t = π/4 the rf term vanishes, so g1 − g0 = ζ·2q·∇R
        let grad_r_term = g1 - g0;
        for a in 0..3 {
            c[3 * i + a] = x[a];
            c[d + 3 * i + a] = grad_r_term[a] / (4.0 * model.masses()[i]);
        }
    }

    let mut nm = n_max;
    loop {
        let bal = Balance::new(model, nm);
        let sol = bal.solve(c, opts.max_newton)?;
        let mut orbit = to_orbit(&sol, nm, model);
        orbit.residual = orbit.eom_residual(model, 64)?;
        if orbit.residual < opts.residual_tol {
            return Ok(orbit);
        }
        if nm >= opts.max_harmonics {
            return Err(Error::NewtonDivergence { history: vec![orbit.residual] });
        }
        log::debug!("orbit residual {:.2e} at n_max = {nm}, adding a harmonic", orbit.residual);
        nm += 1;
        c = from_orbit(&orbit, nm);
    }
}
