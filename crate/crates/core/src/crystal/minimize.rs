//! L-BFGS descent with a backtracking line search and a Newton polish.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    /// Convergence threshold on the max-norm of the gradient.
    pub gradient_tol: f64,
    pub max_iter: usize,
    pub history: usize,
    /// Largest allowed change of any coordinate in one step.
    pub max_step: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { gradient_tol: 1e-9, max_iter: 20_000, history: 12, max_step: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Minimizes `f`, which returns the value and gradient. Evaluation errors
/// inside the line search (e.g. overlapping ions) shrink the step.
pub fn lbfgs<F>(mut f: F, x0: DVector<f64>, opts: &MinimizeOptions) -> Result<Minimum>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    let mut hist: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::new();
    let mut iter = 0;
    while iter < opts.max_iter {
        if max_norm(&g) < opts.gradient_tol {
            return Ok(Minimum { gradient_norm: max_norm(&g), x, value: fx, iterations: iter, converged: true });
        }
        iter += 1;

        // two-loop recursion
        let mut d = -g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * s.dot(&d);
            d -= y * a;
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            d *= s.dot(y) / y.dot(y);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
            let b = rho * y.dot(&d);
            d += s * (a - b);
        }
        let mut slope = g.dot(&d);
        if slope >= 0.0 {
            hist.clear();
            d = -g.clone();
            slope = g.dot(&d);
        }
        let dmax = max_norm(&d);
        let mut step = if dmax > opts.max_step { opts.max_step / dmax } else { 1.0 };

        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + &d * step;
            match f(&xn) {
                Ok((fn_, gn)) if fn_.is_finite() && fn_ <= fx + 1e-4 * step * slope => {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
                Ok(_) | Err(Error::DegenerateConfiguration { .. }) => step *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((xn, fn_, gn)) = accepted else {
            // no descent possible at floating-point resolution
            let gn = max_norm(&g);
            return Ok(Minimum { x, value: fx, gradient_norm: gn, iterations: iter, converged: gn < opts.gradient_tol });
        };
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            if hist.len() == opts.history {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    let gn = max_norm(&g);
    Ok(Minimum { x, value: fx, gradient_norm: gn, iterations: iter, converged: gn < opts.gradient_tol })
}

/// Newton iterations with an eigenvalue pseudo-inverse of the Hessian
/// (eigenvalues below `zero_tol` in magnitude, i.e. symmetry zero modes,
/// are skipped). Returns the lowest Hessian eigenvalue with its vector.
pub fn newton_polish<F, H>(mut f: F, mut hess: H, x: &mut DVector<f64>, gradient_tol: f64, zero_tol: f64) -> Result<(f64, DVector<f64>)>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
    H: FnMut(&DVector<f64>) -> DMatrix<f64>,
{
    let (mut fx, mut g) = f(x)?;
    let mut lowest = (f64::INFINITY, DVector::zeros(x.len()));
    for _ in 0..8 {
        let eig = hess(x).symmetric_eigen();
        let (imin, &lmin) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty Hessian");
        lowest = (lmin, eig.eigenvectors.column(imin).into_owned());
        if max_norm(&g) < gradient_tol * 1e-3 || lmin < -zero_tol {
            break;
        }
        let mut dx = DVector::zeros(x.len());
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l.abs() > zero_tol {
                let v = eig.eigenvectors.column(k);
                dx -= v * (v.dot(&g) / l);
            }
        }
        let xn = &*x + &dx;
        let Ok((fn_, gn)) = f(&xn) else { break };
        if max_norm(&gn) >= max_norm(&g) && fn_ > fx {
            break;
        }
        *x = xn;
        fx = fn_;
        g = gn;
    }
    let _ = fx;
    Ok(lowest)
}
