//! Linearized flow about a periodic orbit.

use nalgebra::DMatrix;

use crate::crystal::PeriodicOrbit;
use crate::error::Result;
use crate::par;
use crate::trap::TrapModel;

/// One-period map of `μ δẍ = −K(t) δx` in phase-space coordinates
/// `(δx, δv)`, plus the position rows of the flow at equally spaced phases.
#[derive(Debug, Clone)]
pub struct Monodromy {
    pub matrix: DMatrix<f64>,
    /// `samples[m]` holds the position rows of Φ(πm/n_samples), m < n_samples.
    pub samples: Vec<DMatrix<f64>>,
}

/// `−M⁻¹ K(t)` along the orbit.
pub fn linear_operator(orbit: &PeriodicOrbit, model: &TrapModel, t: f64) -> DMatrix<f64> {
    let mut k = model.hessian(&orbit.positions(t), t);
    let m = model.masses();
    for r in 0..k.nrows() {
        let s = -1.0 / m[r / 3];
        k.row_mut(r).scale_mut(s);
    }
    k
}

/// RK4 propagation of the column block (x, v) over `periods` rf periods.
/// Position rows are recorded every `steps / n_samples` steps when
/// `n_samples > 0`.
pub fn propagate(
    orbit: &PeriodicOrbit,
    model: &TrapModel,
    mut x: DMatrix<f64>,
    mut v: DMatrix<f64>,
    steps_per_period: usize,
    periods: usize,
    n_samples: usize,
) -> (DMatrix<f64>, DMatrix<f64>, Vec<DMatrix<f64>>) {
    let h = std::f64::consts::PI / steps_per_period as f64;
    let stride = steps_per_period.checked_div(n_samples).unwrap_or(usize::MAX);
    let (d, c) = x.shape();
    let mut samples = Vec::new();
    let mut k = [DMatrix::zeros(d, c), DMatrix::zeros(d, c), DMatrix::zeros(d, c), DMatrix::zeros(d, c)];
    let mut tmp_x = DMatrix::zeros(d, c);
    let mut tmp_v = DMatrix::zeros(d, c);
    let mut a_start = linear_operator(orbit, model, 0.0);
    for step in 0..steps_per_period * periods {
        if n_samples > 0 && step < steps_per_period && step % stride == 0 {
            samples.push(x.clone());
        }
        let t = step as f64 * h;
        let a_mid = linear_operator(orbit, model, t + 0.5 * h);
        let a_end = linear_operator(orbit, model, t + h);
        // stage 1
        k[0].gemm(1.0, &a_start, &x, 0.0);
        let k1x = v.clone();
        tmp_x.copy_from(&x);
        axpy(&mut tmp_x, 0.5 * h, &k1x);
        tmp_v.copy_from(&v);
        axpy(&mut tmp_v, 0.5 * h, &k[0]);
        // stage 2
        k[1].gemm(1.0, &a_mid, &tmp_x, 0.0);
        let k2x = tmp_v.clone();
        tmp_x.copy_from(&x);
        axpy(&mut tmp_x, 0.5 * h, &k2x);
        tmp_v.copy_from(&v);
        axpy(&mut tmp_v, 0.5 * h, &k[1]);
        // stage 3
        k[2].gemm(1.0, &a_mid, &tmp_x, 0.0);
        let k3x = tmp_v.clone();
        tmp_x.copy_from(&x);
        axpy(&mut tmp_x, h, &k3x);
        tmp_v.copy_from(&v);
        axpy(&mut tmp_v, h, &k[2]);
        // stage 4
        k[3].gemm(1.0, &a_end, &tmp_x, 0.0);
        let k4x = &tmp_v;
        axpy(&mut x, h / 6.0, &k1x);
        axpy(&mut x, h / 3.0, &k2x);
        axpy(&mut x, h / 3.0, &k3x);
        axpy(&mut x, h / 6.0, k4x);
        axpy(&mut v, h / 6.0, &k[0]);
        axpy(&mut v, h / 3.0, &k[1]);
        axpy(&mut v, h / 3.0, &k[2]);
        axpy(&mut v, h / 6.0, &k[3]);
        a_start = a_end;
    }
    (x, v, samples)
}

fn axpy(y: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>) {
    y.zip_apply(x, |yi, xi| *yi += a * xi);
}

/// Monodromy matrix, with columns split into chunks propagated in parallel.
pub fn monodromy(orbit: &PeriodicOrbit, model: &TrapModel, steps_per_period: usize, n_samples: usize) -> Result<Monodromy> {
    let d = 3 * model.n_ions();
    let n = 2 * d;
    let chunks = par::workers().clamp(1, n);
    let bounds: Vec<(usize, usize)> = (0..chunks).map(|c| (c * n / chunks, (c + 1) * n / chunks)).collect();
    let blocks = par::map_slice(&bounds, |&(lo, hi)| {
        let w = hi - lo;
        let mut x = DMatrix::zeros(d, w);
        let mut v = DMatrix::zeros(d, w);
        for (c, col) in (lo..hi).enumerate() {
            if col < d {
                x[(col, c)] = 1.0;
            } else {
                v[(col - d, c)] = 1.0;
            }
        }
        propagate(orbit, model, x, v, steps_per_period, 1, n_samples)
    });
    let mut matrix = DMatrix::zeros(n, n);
    let mut samples = vec![DMatrix::zeros(d, n); n_samples];
    for ((lo, hi), (x, v, s)) in bounds.iter().zip(blocks) {
        let w = hi - lo;
        matrix.view_mut((0, *lo), (d, w)).copy_from(&x);
        matrix.view_mut((d, *lo), (d, w)).copy_from(&v);
        for (m, sm) in s.into_iter().enumerate() {
            samples[m].view_mut((0, *lo), (d, w)).copy_from(&sm);
        }
    }
    Ok(Monodromy { matrix, samples })
}

/// Max-norm deviation of ΦᵀJΦ from J with J = [[0, M], [−M, 0]].
pub fn symplectic_defect(phi: &DMatrix<f64>, masses: &[f64]) -> f64 {
    let n = phi.nrows();
    let d = n / 2;
    let mut j = DMatrix::zeros(n, n);
    for k in 0..d {
        let m = masses[k / 3];
        j[(k, d + k)] = m;
        j[(d + k, k)] = -m;
    }
    let lhs = phi.transpose() * &j * phi;
    (lhs - j).amax()
}
