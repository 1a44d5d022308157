use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::linalg::cholesky_solve;
use super::{check_binary, check_width, LearnerError, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// L2-regularized logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Array1<f64>,
    pub intercept: f64,
    pub c: f64,
    pub converged: bool,
    pub final_gradient_norm: f64,
    pub iterations: usize,
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(t)) without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn signed(y: &[bool]) -> Array1<f64> {
    y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect()
}

fn margins(x: ArrayView2<f64>, w: ArrayView1<f64>, b: f64) -> Array1<f64> {
    x.dot(&w) + b
}

/// `J(w, b) = ½‖w‖² + C·Σ log(1 + exp(−ỹ(w·x + b)))` with `ỹ ∈ {−1, +1}`.
pub fn objective(x: ArrayView2<f64>, y: &[bool], c: f64, w: ArrayView1<f64>, b: f64) -> f64 {
    let m = margins(x, w, b);
    let loss: f64 = m.iter().zip(y).map(|(&m, &yi)| softplus(if yi { -m } else { m })).sum();
    0.5 * w.dot(&w) + c * loss
}

/// Gradient of [`objective`]; the last entry is ∂J/∂b.
pub fn gradient(x: ArrayView2<f64>, y: &[bool], c: f64, w: ArrayView1<f64>, b: f64) -> Array1<f64> {
    let ys = signed(y);
    let m = margins(x, w, b);
    // dℓ/dm = −ỹ·sigmoid(−ỹ·m)
    let r: Array1<f64> = m
        .iter()
        .zip(ys.iter())
        .map(|(&m, &yi)| -yi * sigmoid(-yi * m) * c)
        .collect();
    let mut g = Array1::zeros(w.len() + 1);
    g.slice_mut(ndarray::s![..w.len()]).assign(&(&w + &x.t().dot(&r)));
    g[w.len()] = r.sum();
    g
}

/// Newton's method with Armijo backtracking from `w = 0, b = 0`.
///
/// Stops when the gradient norm is at most `tol`. Hitting `max_iter` or a
/// stalled line search returns the current iterate with `converged = false`.
pub fn fit_logreg(x: ArrayView2<f64>, y: &[bool], c: f64, tol: f64, max_iter: usize) -> Result<LogRegModel> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(LearnerError::InvalidHyperparameter(format!("C must be positive, got {c}")));
    }
    if x.nrows() != y.len() {
        return Err(LearnerError::LengthMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    check_binary(y)?;
    let d = x.ncols();
    let mut w = Array1::<f64>::zeros(d);
    let mut b = 0.0;
    let mut f = objective(x, y, c, w.view(), b);
    let mut grad = gradient(x, y, c, w.view(), b);
    let mut gnorm = grad.dot(&grad).sqrt();
    let mut iterations = 0;
    let mut converged = gnorm <= tol;

    while !converged && iterations < max_iter {
        iterations += 1;
        let m = margins(x, w.view(), b);
        let dw: Array1<f64> = m
            .iter()
            .map(|&m| {
                let p = sigmoid(m);
                c * p * (1.0 - p)
            })
            .collect();

        // Hessian of (w, b): [I + XᵀDX, XᵀD1; 1ᵀDX, 1ᵀD1].
        let xd = &x * &dw.view().insert_axis(Axis(1));
        let mut h = Array2::<f64>::zeros((d + 1, d + 1));
        h.slice_mut(ndarray::s![..d, ..d]).assign(&x.t().dot(&xd));
        let col = xd.sum_axis(Axis(0));
        h.slice_mut(ndarray::s![..d, d]).assign(&col);
        h.slice_mut(ndarray::s![d, ..d]).assign(&col);
        h[[d, d]] = dw.sum();
        for j in 0..d {
            h[[j, j]] += 1.0;
        }

        let neg = -&grad;
        let step = cholesky_solve(&h, &neg).or_else(|| {
            // Flat curvature in the intercept direction; nudge the diagonal.
            let mut hj = h.clone();
            let jitter = 1e-10 * (1.0 + h.diag().iter().fold(0.0f64, |a, &v| a.max(v.abs())));
            for j in 0..=d {
                hj[[j, j]] += jitter;
            }
            cholesky_solve(&hj, &neg)
        });
        let Some(step) = step else { break };

        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let w_new = &w + &(t * &step.slice(ndarray::s![..d]));
            let b_new = b + t * step[d];
            let f_new = objective(x, y, c, w_new.view(), b_new);
            // Strict decrease: tiny steps that leave J unchanged in floating
            // point would otherwise pass and stall the iteration.
            if f_new < f && f_new <= f + 1e-4 * t * slope {
                w = w_new;
                b = b_new;
                f = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Near the optimum J can stop resolving the Armijo decrease; take
            // the full step if it still shrinks the gradient.
            let w_new = &w + &step.slice(ndarray::s![..d]);
            let b_new = b + step[d];
            let g_new = gradient(x, y, c, w_new.view(), b_new);
            if g_new.dot(&g_new).sqrt() >= gnorm {
                break;
            }
            w = w_new;
            b = b_new;
            f = objective(x, y, c, w.view(), b);
        }
        grad = gradient(x, y, c, w.view(), b);
        gnorm = grad.dot(&grad).sqrt();
        converged = gnorm <= tol;
    }
    Ok(LogRegModel {
        weights: w,
        intercept: b,
        c,
        converged,
        final_gradient_norm: gnorm,
        iterations,
    })
}

impl LogRegModel {
    pub fn width(&self) -> usize {
        self.weights.len()
    }

    pub fn decision_function(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_width(self.width(), x.ncols())?;
        Ok(margins(x, self.weights.view(), self.intercept))
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.decision_function(x)?.mapv(sigmoid))
    }

    pub fn objective(&self, x: ArrayView2<f64>, y: &[bool]) -> f64 {
        objective(x, y, self.c, self.weights.view(), self.intercept)
    }
}
