//! Bessel functions and displacement-operator matrix elements.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Bessel function of the first kind J_n(x) for integer n.
///
/// Power series for moderate arguments, trapezoidal rule on the periodic
/// integral representation otherwise.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    if n < 0 {
        let s = if n % 2 == 0 { 1.0 } else { -1.0 };
        return s * bessel_j(-n, x);
    }
    if x.abs() <= 8.0 {
        series(n as u32, x)
    } else {
        integral(n, x)
    }
}

fn series(n: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= h / k as f64;
    }
    let h2 = h * h;
    let mut sum = term;
    for k in 1..200u32 {
        term *= -h2 / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn integral(n: i32, x: f64) -> f64 {
    let m = 2 * (x.abs() as usize + n.unsigned_abs() as usize + 40);
    let h = std::f64::consts::TAU / m as f64;
    (0..m).map(|k| (n as f64 * k as f64 * h - x * (k as f64 * h).sin()).cos()).sum::<f64>() / m as f64
}

/// J₀(2 k B₂): phase-modulation factor of an ion whose wavefront phase
/// oscillates as 2 k B₂ cos(Ω_rf t).
pub fn bessel_micromotion_factor(k: f64, b2: f64) -> f64 {
    bessel_j(0, 2.0 * k * b2)
}

/// Generalized Laguerre polynomial L_n^{(a)}(x).
pub fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    match n {
        0 => 1.0,
        _ => {
            let (mut l0, mut l1) = (1.0, 1.0 + a - x);
            for k in 1..n {
                let kf = k as f64;
                let l2 = ((2.0 * kf + 1.0 + a - x) * l1 - (kf + a) * l0) / (kf + 1.0);
                l0 = l1;
                l1 = l2;
            }
            l1
        }
    }
}

/// ⟨m|D(β)|n⟩ of the untruncated displacement operator exp(β a† − β* a),
/// restricted to Fock levels below `dim`.
pub fn displacement(beta: Complex64, dim: usize) -> DMatrix<Complex64> {
    let x = beta.norm_sqr();
    let g = (-0.5 * x).exp();
    // ln n! table
    let mut lf = vec![0.0; dim + 1];
    for k in 1..=dim {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    DMatrix::from_fn(dim, dim, |m, n| {
        let (hi, lo) = if m >= n { (m, n) } else { (n, m) };
        let d = hi - lo;
        let pref = (0.5 * (lf[lo] - lf[hi])).exp() * g * laguerre(lo, d as f64, x);
        let p = if m >= n { beta.powu(d as u32) } else { (-beta.conj()).powu(d as u32) };
        p * pref
    })
}
