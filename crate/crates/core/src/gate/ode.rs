//! Adaptive Dormand–Prince 5(4) for complex matrix-valued ODEs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-11, max_step: f64::INFINITY, min_step: 1e-10, max_steps: 5_000_000 }
    }
}

impl OdeOptions {
    pub fn tight() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const CN: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
/// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Integrates `y' = f(t, y)` from `t0` through each time in `outputs`
/// (ascending), calling `observe` at every output. Returns the final state.
pub fn integrate<F, O>(f: F, t0: f64, y0: DMatrix<C>, outputs: &[f64], opts: &OdeOptions, mut observe: O) -> Result<(DMatrix<C>, StepStats)>
where
    F: Fn(f64, &DMatrix<C>, &mut DMatrix<C>),
    O: FnMut(f64, &DMatrix<C>) -> Result<()>,
{
    let (r, c) = y0.shape();
    let mut y = y0;
    let mut t = t0;
    let mut k: Vec<DMatrix<C>> = (0..7).map(|_| DMatrix::zeros(r, c)).collect();
    let mut tmp = DMatrix::zeros(r, c);
    let mut y_new = DMatrix::zeros(r, c);
    let mut stats = StepStats::default();
    f(t, &y, &mut k[0]);
    let mut h = opts.max_step.min(1.0);
    for &t_out in outputs {
        if t_out < t - 1e-12 {
            return Err(Error::invalid("output times must be ascending and after t0"));
        }
        while t < t_out - 1e-12 * t_out.abs().max(1.0) {
            if stats.accepted + stats.rejected > opts.max_steps {
                return Err(Error::Integration {
                    time: t,
                    reason: format!("step budget exhausted ({} accepted, {} rejected)", stats.accepted, stats.rejected),
                });
            }
            let last = t + h >= t_out;
            let step = if last { t_out - t } else { h };
            for s in 1..7 {
                tmp.copy_from(&y);
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s - 1][j];
                    if a != 0.0 {
                        tmp.zip_apply(kj, |x, d| *x += d * (step * a));
                    }
                }
                f(t + CN[s] * step, &tmp, &mut k[s]);
                if s == 6 {
                    y_new.copy_from(&tmp);
                }
            }
            // error estimate
            let mut err = 0.0;
            for idx in 0..y.len() {
                let mut e = C::new(0.0, 0.0);
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        e += kj[idx] * E[j];
                    }
                }
                let sc = opts.atol + opts.rtol * y[idx].norm().max(y_new[idx].norm());
                let q = (e * step).norm() / sc;
                err += q * q;
            }
            let err = (err / y.len() as f64).sqrt();
            if err <= 1.0 {
                t = if last { t_out } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                stats.accepted += 1;
            } else {
                stats.rejected += 1;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !(last && err <= 1.0) || fac < 1.0 {
                h = (step * fac).min(opts.max_step);
            }
            if h < opts.min_step {
                return Err(Error::Integration {
                    time: t,
                    reason: format!("step size {h:.3e} below minimum ({} accepted, {} rejected)", stats.accepted, stats.rejected),
                });
            }
        }
        observe(t, &y)?;
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotating_phase_is_exact() {
        let y0 = DMatrix::from_element(1, 1, C::new(1.0, 0.0));
        let w = 1.3;
        let outs: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let mut seen = 0;
        let (y, stats) = integrate(
            |_, y, dy| dy.copy_from(&(y * C::new(0.0, -w))),
            0.0,
            y0,
            &outs,
            &OdeOptions::default(),
            |t, y| {
                seen += 1;
                assert!((y[(0, 0)] - C::from_polar(1.0, -w * t)).norm() < 1e-8);
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen, 20);
        assert!((y[(0, 0)].norm() - 1.0).abs() < 1e-8);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn step_failure_reports_statistics() {
        let y0 = DMatrix::from_element(1, 1, C::new(1.0, 0.0));
        let opts = OdeOptions { min_step: 1e-3, ..Default::default() };
        let res = integrate(|t, _, dy| dy[(0, 0)] = C::new(1.0 / (1.0 - t).powi(3), 0.0), 0.0, y0, &[2.0], &opts, |_, _| Ok(()));
        match res {
            Err(Error::Integration { reason, .. }) => assert!(reason.contains("rejected")),
            other => panic!("{other:?}"),
        }
    }
}
