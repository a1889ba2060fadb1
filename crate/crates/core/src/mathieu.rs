//! Single-ion Mathieu dynamics `ẍ + (a − 2q cos 2t) x = 0`.
//!
//! The characteristic exponent β (secular frequency in units of Ω_rf/2) is
//! read from the trace of the one-period monodromy matrix,
//! `tr M = 2 cos(πβ)`.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Steps per rf period used for the 2×2 monodromy integration.
const MONODROMY_STEPS: usize = 4000;

/// One-period (t: 0 → π) monodromy matrix of the Mathieu equation, row-major.
pub fn monodromy(a: f64, q: f64) -> [[f64; 2]; 2] {
    let h = PI / MONODROMY_STEPS as f64;
    let rhs = |t: f64, s: [f64; 4]| -> [f64; 4] {
        let k = a - 2.0 * q * (2.0 * t).cos();
        // columns: (x1, v1, x2, v2)
        [s[1], -k * s[0], s[3], -k * s[2]]
    };
    let mut s = [1.0, 0.0, 0.0, 1.0];
    let mut t = 0.0;
    for _ in 0..MONODROMY_STEPS {
        let k1 = rhs(t, s);
        let k2 = rhs(t + 0.5 * h, add(s, k1, 0.5 * h));
        let k3 = rhs(t + 0.5 * h, add(s, k2, 0.5 * h));
        let k4 = rhs(t + h, add(s, k3, h));
        for i in 0..4 {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    [[s[0], s[2]], [s[1], s[3]]]
}

fn add(s: [f64; 4], k: [f64; 4], h: f64) -> [f64; 4] {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2], s[3] + h * k[3]]
}

/// Characteristic exponent β ∈ [0, 1] for (a, q) in the first stability zone.
pub fn characteristic_exponent(a: f64, q: f64) -> Result<f64> {
    if q == 0.0 {
        if a < 0.0 {
            return Err(Error::Instability { multiplier: (PI * (-a).sqrt()).exp(), context: format!("static anti-confinement a = {a}") });
        }
        return Ok(a.sqrt());
    }
    let m = monodromy(a, q);
    let half_trace = 0.5 * (m[0][0] + m[1][1]);
    if half_trace.abs() > 1.0 {
        let mult = half_trace.abs() + (half_trace * half_trace - 1.0).sqrt();
        return Err(Error::Instability { multiplier: mult, context: format!("Mathieu parameters a = {a}, q = {q}") });
    }
    Ok(half_trace.acos() / PI)
}

/// Lowest-order pseudopotential estimate `√(a + q²/2)`.
pub fn pseudopotential_exponent(a: f64, q: f64) -> Result<f64> {
    let b2 = a + 0.5 * q * q;
    if b2 < 0.0 {
        return Err(Error::Instability { multiplier: f64::NAN, context: format!("a + q²/2 = {b2} < 0") });
    }
    Ok(b2.sqrt())
}

/// Find the static curvature `a` such that the exact exponent equals `beta`.
pub fn fit_static_curvature(beta: f64, q: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("target exponent {beta} outside (0, 1)")));
    }
    let f = |a: f64| characteristic_exponent(a, q).map(|b| b - beta);
    // β grows monotonically with a inside the first zone
    let guess = beta * beta - 0.5 * q * q;
    let mut lo = guess - 0.05 - 0.1 * q * q;
    let mut hi = guess + 0.05;
    let mut tries = 0;
    while f(lo).map(|v| v > 0.0).unwrap_or(false) {
        lo -= 0.1;
        tries += 1;
        if tries > 50 {
            return Err(Error::invalid("could not bracket static curvature"));
        }
    }
    while f(hi).map(|v| v < 0.0).unwrap_or(true) {
        hi = 0.5 * (hi + guess);
        tries += 1;
        if tries > 100 {
            return Err(Error::invalid("could not bracket static curvature"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        // unstable below the zone counts as "too low"
        match f(mid) {
            Ok(v) if v > 0.0 => hi = mid,
            _ => lo = mid,
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
