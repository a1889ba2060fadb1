//! Pairwise Coulomb interaction `ζ_i ζ_j / r` in dimensionless units.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};

type Vec3 = Vector3<f64>;

/// Minimum allowed pair separation (dimensionless length).
pub const MIN_SEPARATION: f64 = 1e-9;

pub fn energy_forces(positions: &[Vec3], charge: &[f64]) -> Result<(f64, Vec<Vec3>)> {
    let n = positions.len();
    let mut e = 0.0;
    let mut f = vec![Vec3::zeros(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = positions[i] - positions[j];
            let r2 = d.norm_squared();
            let r = r2.sqrt();
            if r < MIN_SEPARATION {
                return Err(Error::DegenerateConfiguration { i, j, distance: r });
            }
            let qq = charge[i] * charge[j];
            e += qq / r;
            let fij = d * (qq / (r2 * r));
            f[i] += fij;
            f[j] -= fij;
        }
    }
    Ok((e, f))
}

/// Forces only, without the overlap check (hot loop of the integrators).
pub fn forces_into(positions: &[Vec3], charge: &[f64], out: &mut [Vec3]) {
    let n = positions.len();
    for o in out.iter_mut() {
        *o = Vec3::zeros();
    }
    for i in 0..n {
        let pi = positions[i];
        let qi = charge[i];
        let mut acc = Vec3::zeros();
        for j in (i + 1)..n {
            let d = pi - positions[j];
            let r2 = d.norm_squared();
            let inv = 1.0 / (r2 * r2.sqrt());
            let fij = d * (qi * charge[j] * inv);
            acc += fij;
            out[j] -= fij;
        }
        out[i] += acc;
    }
}

/// Hessian block of the pair energy with respect to r_i (and r_i, r_i):
/// `ζζ (3 d dᵀ / r⁵ − I / r³)`.
pub fn pair_block(d: &Vec3, qq: f64) -> Matrix3<f64> {
    let r2 = d.norm_squared();
    let r = r2.sqrt();
    let inv3 = 1.0 / (r2 * r);
    let inv5 = inv3 / r2;
    qq * (3.0 * inv5 * d * d.transpose() - inv3 * Matrix3::identity())
}

pub fn hessian(positions: &[Vec3], charge: &[f64]) -> DMatrix<f64> {
    let n = positions.len();
    let mut h = DMatrix::zeros(3 * n, 3 * n);
    hessian_into(positions, charge, &mut h);
    h
}

/// Write the Coulomb Hessian into `h` (overwrites).
pub fn hessian_into(positions: &[Vec3], charge: &[f64], h: &mut DMatrix<f64>) {
    let n = positions.len();
    h.fill(0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = positions[i] - positions[j];
            let b = pair_block(&d, charge[i] * charge[j]);
            for r in 0..3 {
                for c in 0..3 {
                    let v = b[(r, c)];
                    h[(3 * i + r, 3 * i + c)] += v;
                    h[(3 * j + r, 3 * j + c)] += v;
                    h[(3 * i + r, 3 * j + c)] -= v;
                    h[(3 * j + r, 3 * i + c)] -= v;
                }
            }
        }
    }
}

/// Third directional derivative of the pair energy `qq / |d|` along
/// relative displacements `u, v, w`:
/// `qq [−15 (d·u)(d·v)(d·w)/r⁷ + 3((u·v)(d·w) + (u·w)(d·v) + (v·w)(d·u))/r⁵]`.
pub fn pair_third(d: &Vec3, qq: f64, u: &Vec3, v: &Vec3, w: &Vec3) -> f64 {
    let r2 = d.norm_squared();
    let r = r2.sqrt();
    let inv5 = 1.0 / (r2 * r2 * r);
    let inv7 = inv5 / r2;
    let du = d.dot(u);
    let dv = d.dot(v);
    let dw = d.dot(w);
    qq * (-15.0 * du * dv * dw * inv7 + 3.0 * (u.dot(v) * dw + u.dot(w) * dv + v.dot(w) * du) * inv5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (Vec<Vec3>, Vec<f64>) {
        let p = vec![Vec3::new(0.0, 0.1, -0.2), Vec3::new(1.3, -0.4, 0.1), Vec3::new(-0.9, 0.8, 0.3), Vec3::new(0.2, -1.1, 0.7)];
        (p, vec![1.0, 1.0, 2.0, 1.0])
    }

    #[test]
    fn hessian_matches_force_differences() {
        let (p, q) = sample();
        let h = hessian(&p, &q);
        let eps = 1e-6;
        for k in 0..3 * p.len() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[k / 3][k % 3] += eps;
            minus[k / 3][k % 3] -= eps;
            let (_, fp) = energy_forces(&plus, &q).unwrap();
            let (_, fm) = energy_forces(&minus, &q).unwrap();
            for m in 0..3 * p.len() {
                let fd = -(fp[m / 3][m % 3] - fm[m / 3][m % 3]) / (2.0 * eps);
                assert!((fd - h[(m, k)]).abs() < 1e-6 * (1.0 + h[(m, k)].abs()));
            }
        }
    }

    #[test]
    fn fast_forces_agree() {
        let (p, q) = sample();
        let (_, f) = energy_forces(&p, &q).unwrap();
        let mut g = vec![Vec3::zeros(); p.len()];
        forces_into(&p, &q, &mut g);
        for (a, b) in f.iter().zip(&g) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn third_derivative_matches_block_difference() {
        let d = Vec3::new(0.7, -0.3, 0.4);
        let (u, v, w) = (Vec3::new(1.0, 0.2, -0.1), Vec3::new(0.0, 1.0, 0.5), Vec3::new(-0.3, 0.4, 1.0));
        let eps = 1e-5;
        let fd = ((pair_block(&(d + eps * w), 2.0) - pair_block(&(d - eps * w), 2.0)) / (2.0 * eps) * v).dot(&u);
        let exact = pair_third(&d, 2.0, &u, &v, &w);
        assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0), "{fd} {exact}");
    }
}
