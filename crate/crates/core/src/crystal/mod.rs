//! Equilibrium crystals, driven periodic orbits and kink detection.

mod kink;
pub mod minimize;
mod orbit;

pub use kink::{detect_kink, zigzag_amplitudes, KinkDescriptor, KinkKind, KinkTracker};
pub use orbit::{find_periodic_orbit, OrbitOptions, PeriodicOrbit};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::trap::{Geometry, Ions, TrapModel, Vec3};
use minimize::{lbfgs, newton_polish, MinimizeOptions};

/// Gradient max-norm a stored configuration must satisfy.
pub const GRADIENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalConfiguration {
    pub positions: Vec<Vec3>,
    pub ions: Ions,
    /// Pseudopotential energy.
    pub energy: f64,
    pub gradient_norm: f64,
}

impl CrystalConfiguration {
    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }

    pub fn min_pair_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..self.positions.len() {
            for j in i + 1..self.positions.len() {
                d = d.min((self.positions[i] - self.positions[j]).norm());
            }
        }
        d
    }

    /// Re-evaluates energy and gradient in `model` and checks the invariants.
    pub fn verify(&self, model: &TrapModel) -> Result<()> {
        let (_, f) = model.pseudo_energy_forces(&self.positions)?;
        let g = f.iter().flat_map(|v| v.iter().copied()).fold(0.0f64, |m, c| m.max(c.abs()));
        if g >= GRADIENT_TOL {
            return Err(Error::OptimizationFailure { best_residual: g });
        }
        Ok(())
    }
}

/// Structural starting points for the minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ansatz {
    /// Uniformly random positions in a box of the expected crystal size.
    Random,
    /// Planar zigzag (linear trap) or alternating radii (ring), optionally
    /// with a domain wall at `kink_site`.
    Zigzag { kink_site: Option<usize> },
}

#[derive(Debug, Clone, Copy)]
pub struct EquilibriumOptions {
    pub ansatz: Ansatz,
    /// Width of the Gaussian perturbation applied on restarts ≥ 1, in units of
    /// the estimated lattice spacing.
    pub perturbation: f64,
    pub minimize: MinimizeOptions,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self { ansatz: Ansatz::Zigzag { kink_site: None }, perturbation: 0.05, minimize: MinimizeOptions::default() }
    }
}

pub(crate) fn flatten(p: &[Vec3]) -> DVector<f64> {
    DVector::from_iterator(3 * p.len(), p.iter().flat_map(|v| v.iter().copied()))
}

pub(crate) fn unflatten(x: &DVector<f64>) -> Vec<Vec3> {
    x.as_slice().chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

/// Finds a local minimum of the pseudopotential energy. Restart 0 starts
/// from the seed configuration (or the ansatz); further restarts perturb it.
/// The lowest-energy converged result wins, ties going to the lower restart.
pub fn find_equilibrium(
    model: &TrapModel,
    seed: u64,
    n_restarts: usize,
    seed_configuration: Option<&[Vec3]>,
    opts: &EquilibriumOptions,
) -> Result<CrystalConfiguration> {
    let n = model.n_ions();
    if n == 0 {
        return Err(Error::invalid("n_ions must be ≥ 1"));
    }
    let spacing = estimated_spacing(model);
    let base = match seed_configuration {
        Some(p) if p.len() != n => return Err(Error::invalid(format!("seed configuration has {} ions, expected {n}", p.len()))),
        Some(p) => p.to_vec(),
        None => ansatz_positions(model, opts.ansatz, seed),
    };
    let runs = par::map_indexed(n_restarts.max(1), |r| {
        let mut start = base.clone();
        if r > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(r as u64)));
            let normal = Normal::new(0.0, opts.perturbation * spacing).expect("finite width");
            for p in start.iter_mut() {
                for c in p.iter_mut() {
                    *c += normal.sample(&mut rng);
                }
            }
        }
        relax(model, &start, &opts.minimize, spacing)
    });
    let mut best: Option<CrystalConfiguration> = None;
    let mut best_residual = f64::INFINITY;
    let mut last_err = None;
    for run in runs {
        match run {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| c.energy < b.energy) {
                    best = Some(c);
                }
            }
            Err(Error::OptimizationFailure { best_residual: r }) => best_residual = best_residual.min(r),
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) if best_residual.is_infinite() => Err(e),
        _ => Err(Error::OptimizationFailure { best_residual }),
    }
}

fn relax(model: &TrapModel, start: &[Vec3], opts: &MinimizeOptions, spacing: f64) -> Result<CrystalConfiguration> {
    let eval = |x: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
        let (e, f) = model.pseudo_energy_forces(&unflatten(x))?;
        Ok((e, -flatten(&f)))
    };
    let hess = |x: &DVector<f64>| model.pseudo_hessian(&unflatten(x));
    let mut x = flatten(start);
    for _attempt in 0..6 {
        let m = lbfgs(eval, x, opts)?;
        x = m.x;
        let scale = hess(&x).diagonal().amax().max(1e-30);
        let (lmin, vmin) = newton_polish(eval, hess, &mut x, GRADIENT_TOL, 1e-9 * scale)?;
        if lmin < -1e-9 * scale {
            // saddle: leave along the unstable direction and descend again
            x += vmin * (0.2 * spacing);
            continue;
        }
        let (e, g) = eval(&x)?;
        let gn = g.amax();
        if gn >= GRADIENT_TOL {
            return Err(Error::OptimizationFailure { best_residual: gn });
        }
        return Ok(CrystalConfiguration { positions: unflatten(&x), ions: model.ions.clone(), energy: e, gradient_norm: gn });
    }
    let gn = eval(&x).map(|(_, g)| g.amax()).unwrap_or(f64::INFINITY);
    Err(Error::OptimizationFailure { best_residual: gn })
}

/// Rough nearest-neighbour distance of the crystal, used to size seeds and
/// perturbations.
pub fn estimated_spacing(model: &TrapModel) -> f64 {
    let n = model.n_ions() as f64;
    match model.params.geometry {
        Geometry::RingQuadrupole { radius } => 2.0 * std::f64::consts::PI * radius / n.max(1.0),
        _ => {
            let k = axial_stiffness(model);
            let half = (3.0 * n * n.max(2.0).ln() / (4.0 * k)).cbrt();
            2.0 * half / n.max(2.0)
        }
    }
}

fn axial_stiffness(model: &TrapModel) -> f64 {
    let probe = |v: Vec3| {
        let (_, _, h) = model.ion_pseudo_terms(0, &(v * 1e-3));
        h
    };
    let h = probe(Vec3::zeros());
    match model.params.geometry {
        Geometry::LinearPaul => h[(0, 0)].max(1e-12),
        _ => h[(2, 2)].max(1e-12),
    }
}

/// Index of the soft transverse axis for the linear Paul zigzag.
fn soft_transverse_axis(model: &TrapModel) -> usize {
    let (_, _, h) = model.ion_pseudo_terms(0, &Vec3::zeros());
    if h[(1, 1)] <= h[(2, 2)] {
        1
    } else {
        2
    }
}

fn zigzag_sign(n: usize, kink_site: Option<usize>) -> f64 {
    let s = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    match kink_site {
        Some(c) if n == c => 0.0,
        Some(c) if n > c => -s,
        _ => s,
    }
}

/// Starting positions for the given ansatz.
pub fn ansatz_positions(model: &TrapModel, ansatz: Ansatz, seed: u64) -> Vec<Vec3> {
    let n = model.n_ions();
    let spacing = estimated_spacing(model);
    match ansatz {
        Ansatz::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = rand_distr::Uniform::new(-0.5, 0.5).expect("valid range");
            let extent = spacing * n as f64;
            (0..n)
                .map(|_| match model.params.geometry {
                    Geometry::LinearPaul => {
                        Vec3::new(extent * u.sample(&mut rng), spacing * u.sample(&mut rng), 0.1 * spacing * u.sample(&mut rng))
                    }
                    Geometry::RingQuadrupole { radius } => {
                        let phi = 2.0 * std::f64::consts::PI * (u.sample(&mut rng) + 0.5);
                        let r = radius + spacing * u.sample(&mut rng);
                        Vec3::new(r * phi.cos(), r * phi.sin(), 0.1 * spacing * u.sample(&mut rng))
                    }
                    Geometry::LinearMultipole { .. } => {
                        Vec3::new(spacing * u.sample(&mut rng), spacing * u.sample(&mut rng), extent * u.sample(&mut rng))
                    }
                })
                .collect()
        }
        Ansatz::Zigzag { kink_site } => match model.params.geometry {
            Geometry::LinearPaul => {
                let axis = soft_transverse_axis(model);
                let half = 0.5 * spacing * (n as f64 - 1.0);
                (0..n)
                    .map(|k| {
                        let mut p = Vec3::zeros();
                        p.x = if n > 1 { -half + spacing * k as f64 } else { 0.0 };
                        p[axis] = 0.5 * spacing * zigzag_sign(k, kink_site);
                        p
                    })
                    .collect()
            }
            Geometry::RingQuadrupole { radius } => {
                let masses = model.masses();
                let two_species = masses.iter().any(|&m| (m - masses[0]).abs() > 1e-12);
                (0..n)
                    .map(|k| {
                        let phi = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                        let s = if two_species {
                            if masses[k] > 1.0 + 1e-12 {
                                1.0
                            } else {
                                -1.0
                            }
                        } else {
                            zigzag_sign(k, kink_site)
                        };
                        let r = radius + 0.4 * spacing * s;
                        Vec3::new(r * phi.cos(), r * phi.sin(), 0.0)
                    })
                    .collect()
            }
            Geometry::LinearMultipole { .. } => {
                // two interleaved rings of ions along the axis
                let half = 0.5 * spacing * (n as f64 - 1.0);
                (0..n)
                    .map(|k| {
                        let phi = std::f64::consts::PI * (k % 4) as f64 / 2.0;
                        let r = 0.5 * spacing;
                        Vec3::new(r * phi.cos(), r * phi.sin(), -half + spacing * k as f64)
                    })
                    .collect()
            }
        },
    }
}

/// Mean radius per species (index order of the species table); `None` for
/// species without ions.
pub fn mean_radius_by_species(config: &CrystalConfiguration, model: &TrapModel) -> Vec<Option<f64>> {
    let ns = config.ions.species.len();
    let mut sum = vec![0.0; ns];
    let mut cnt = vec![0usize; ns];
    for (p, &s) in config.positions.iter().zip(&config.ions.assignment) {
        sum[s] += model.radial_coordinate(p);
        cnt[s] += 1;
    }
    sum.iter().zip(&cnt).map(|(s, &c)| (c > 0).then(|| s / c as f64)).collect()
}

/// Whether lighter species sit at smaller mean radius than heavier ones.
pub fn lighter_species_inside(config: &CrystalConfiguration, model: &TrapModel) -> bool {
    let radii = mean_radius_by_species(config, model);
    let sp = &config.ions.species;
    for a in 0..sp.len() {
        for b in 0..sp.len() {
            if let (Some(ra), Some(rb)) = (radii[a], radii[b]) {
                if sp[a].mass < sp[b].mass && ra >= rb {
                    return false;
                }
            }
        }
    }
    true
}
