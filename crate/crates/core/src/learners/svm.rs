use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::cv::make_cv_plan;
use super::platt::PlattScaling;
use super::{check_binary, check_width, LearnerError, Result};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 100_000;
const PLATT_FOLDS: usize = 3;
const PLATT_SEED: u64 = 0x0050_4c41_5454;
const TAU: f64 = 1e-12;

/// Soft-margin RBF support vector classifier with Platt-calibrated output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Array2<f64>,
    /// Training-row index of each support vector.
    pub support_indices: Vec<usize>,
    /// `α_i·y_i` per support vector.
    pub dual_coeffs: Array1<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub platt: PlattScaling,
    pub converged: bool,
    pub iterations: usize,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum()
}

pub fn rbf(a: ArrayView1<f64>, b: ArrayView1<f64>, gamma: f64) -> f64 {
    (-gamma * sq_dist(a, b)).exp()
}

pub fn rbf_kernel_matrix(a: ArrayView2<f64>, b: ArrayView2<f64>, gamma: f64) -> Array2<f64> {
    let mut k = Array2::zeros((a.nrows(), b.nrows()));
    for (i, ra) in a.rows().into_iter().enumerate() {
        for (j, rb) in b.rows().into_iter().enumerate() {
            k[[i, j]] = rbf(ra, rb, gamma);
        }
    }
    k
}

/// Result of the dual solver: `decision(x) = Σ α_i y_i K(x_i, x) − rho`.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Array1<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sign(y: bool) -> f64 {
    if y {
        1.0
    } else {
        -1.0
    }
}

/// SMO over a precomputed kernel with second-order working-set selection.
///
/// Minimises `½ αᵀQα − eᵀα` with `Q_ij = y_i y_j K_ij`, `0 ≤ α ≤ C`,
/// `yᵀα = 0`. Stops when the maximal violating pair gap is below `tol`, which
/// bounds every per-point KKT residual by `tol`.
pub fn solve_smo(k: &Array2<f64>, y: &[bool], c: f64, tol: f64, max_iter: usize) -> SmoSolution {
    let n = y.len();
    let ys: Vec<f64> = y.iter().map(|&v| sign(v)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        // First index: maximal violation among I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = if ys[t] > 0.0 {
                (alpha[t] < c).then(|| -grad[t])
            } else {
                (alpha[t] > 0.0).then(|| grad[t])
            };
            if let Some(v) = v {
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };

        let mut gmax2 = f64::NEG_INFINITY;
        let mut obj_min = f64::INFINITY;
        let mut j_sel = None;
        for t in 0..n {
            let quad = |t: usize| {
                let q = k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]];
                if q > 0.0 {
                    q
                } else {
                    TAU
                }
            };
            if ys[t] > 0.0 {
                if alpha[t] > 0.0 {
                    let diff = gmax + grad[t];
                    gmax2 = gmax2.max(grad[t]);
                    if diff > 0.0 {
                        let obj = -diff * diff / quad(t);
                        if obj <= obj_min {
                            obj_min = obj;
                            j_sel = Some(t);
                        }
                    }
                }
            } else if alpha[t] < c {
                let diff = gmax - grad[t];
                gmax2 = gmax2.max(-grad[t]);
                if diff > 0.0 {
                    let obj = -diff * diff / quad(t);
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let j = match j_sel {
            Some(j) if gmax + gmax2 >= tol => j,
            _ => {
                converged = true;
                break;
            }
        };
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = k[[i, j]];
        if ys[i] != ys[j] {
            let mut quad = k[[i, i]] + k[[j, j]] - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = k[[i, i]] + k[[j, j]] - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = (alpha[i] - old_i) * ys[i];
        let dj = (alpha[j] - old_j) * ys[j];
        for t in 0..n {
            grad[t] += ys[t] * (k[[i, t]] * di + k[[j, t]] * dj);
        }
    }

    // rho: mean of y·G over free vectors, else the midpoint of the feasible
    // interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum += yg;
        }
    }
    let rho = if n_free > 0 { sum / n_free as f64 } else { 0.5 * (ub + lb) };
    SmoSolution {
        alpha: Array1::from(alpha),
        rho,
        iterations,
        converged,
    }
}

/// Dual objective `Σα − ½ ΣΣ α_i α_j y_i y_j K_ij` (to be maximised).
pub fn dual_objective(k: &Array2<f64>, y: &[bool], alpha: &Array1<f64>) -> f64 {
    let ay: Array1<f64> = alpha.iter().zip(y).map(|(&a, &v)| a * sign(v)).collect();
    alpha.sum() - 0.5 * ay.dot(&k.dot(&ay))
}

/// Per-point KKT residual with `u_i = y_i·f(x_i) − 1`: points below the box
/// ceiling need `u ≥ 0`, points above the floor need `u ≤ 0`.
pub fn kkt_residuals(k: &Array2<f64>, y: &[bool], alpha: &Array1<f64>, bias: f64, c: f64) -> Vec<f64> {
    let ay: Array1<f64> = alpha.iter().zip(y).map(|(&a, &v)| a * sign(v)).collect();
    let f = k.dot(&ay) + bias;
    (0..y.len())
        .map(|i| {
            let u = sign(y[i]) * f[i] - 1.0;
            let mut r: f64 = 0.0;
            if alpha[i] < c {
                r = r.max(-u);
            }
            if alpha[i] > 0.0 {
                r = r.max(u);
            }
            r
        })
        .collect()
}

struct RawSvm {
    support_vectors: Array2<f64>,
    support_indices: Vec<usize>,
    dual_coeffs: Array1<f64>,
    bias: f64,
    converged: bool,
    iterations: usize,
}

impl RawSvm {
    fn decision(&self, x: ArrayView2<f64>, gamma: f64) -> Array1<f64> {
        rbf_kernel_matrix(x, self.support_vectors.view(), gamma).dot(&self.dual_coeffs) + self.bias
    }
}

fn fit_raw(x: ArrayView2<f64>, y: &[bool], c: f64, gamma: f64, tol: f64, max_iter: usize) -> Result<RawSvm> {
    check_binary(y)?;
    let k = rbf_kernel_matrix(x, x, gamma);
    let sol = solve_smo(&k, y, c, tol, max_iter);
    let support_indices: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
    Ok(RawSvm {
        support_vectors: x.select(ndarray::Axis(0), &support_indices),
        dual_coeffs: support_indices.iter().map(|&i| sol.alpha[i] * sign(y[i])).collect(),
        support_indices,
        bias: -sol.rho,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}

/// Fits the SVM on all rows, then calibrates it on out-of-fold decision
/// values from a stratified 3-fold split. A fold whose training part holds a
/// single class contributes in-sample decision values instead.
pub fn fit_svm_rbf(x: ArrayView2<f64>, y: &[bool], c: f64, gamma: f64, tol: f64, max_iter: usize) -> Result<SvmModel> {
    for (name, v) in [("C", c), ("gamma", gamma)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(LearnerError::InvalidHyperparameter(format!("{name} must be positive, got {v}")));
        }
    }
    if x.nrows() != y.len() {
        return Err(LearnerError::LengthMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let full = fit_raw(x, y, c, gamma, tol, max_iter)?;
    let in_sample = full.decision(x, gamma);

    let mut oof = in_sample.clone();
    if y.len() >= PLATT_FOLDS {
        let plan = make_cv_plan(y.len(), PLATT_FOLDS, Some(y), PLATT_SEED, true)?;
        for fold in 0..PLATT_FOLDS {
            let (train, test) = plan.split(fold);
            let y_train: Vec<bool> = train.iter().map(|&i| y[i]).collect();
            let x_train = x.select(ndarray::Axis(0), &train);
            match fit_raw(x_train.view(), &y_train, c, gamma, tol, max_iter) {
                Ok(inner) => {
                    let dec = inner.decision(x.select(ndarray::Axis(0), &test).view(), gamma);
                    for (&i, &d) in test.iter().zip(dec.iter()) {
                        oof[i] = d;
                    }
                }
                Err(LearnerError::SingleClass) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let platt = PlattScaling::fit(oof.as_slice().expect("contiguous"), y);

    Ok(SvmModel {
        support_vectors: full.support_vectors,
        support_indices: full.support_indices,
        dual_coeffs: full.dual_coeffs,
        bias: full.bias,
        gamma,
        c,
        platt,
        converged: full.converged,
        iterations: full.iterations,
    })
}

impl SvmModel {
    pub fn width(&self) -> usize {
        self.support_vectors.ncols()
    }

    pub fn decision_function(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_width(self.width(), x.ncols())?;
        Ok(rbf_kernel_matrix(x, self.support_vectors.view(), self.gamma).dot(&self.dual_coeffs) + self.bias)
    }

    pub fn decision_one(&self, x: ArrayView1<f64>) -> f64 {
        self.support_vectors
            .rows()
            .into_iter()
            .zip(self.dual_coeffs.iter())
            .map(|(sv, &a)| a * rbf(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.decision_function(x)?.mapv(|d| self.platt.probability(d)))
    }

    /// Full-length `α` over the training rows.
    pub fn alpha(&self, n_train: usize) -> Array1<f64> {
        let mut alpha = Array1::zeros(n_train);
        for (&i, &ay) in self.support_indices.iter().zip(self.dual_coeffs.iter()) {
            alpha[i] = ay.abs();
        }
        alpha
    }

    /// KKT residuals on the training data the model was fitted on.
    pub fn kkt_residuals(&self, x_train: ArrayView2<f64>, y: &[bool]) -> Vec<f64> {
        let k = rbf_kernel_matrix(x_train, x_train, self.gamma);
        kkt_residuals(&k, y, &self.alpha(y.len()), self.bias, self.c)
    }

    /// `Σ α_i y_i`, zero for an exact dual solution.
    pub fn equality_residual(&self) -> f64 {
        self.dual_coeffs.sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn xor_is_separated() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let y = [true, true, false, false];
        let m = fit_svm_rbf(x.view(), &y, 10.0, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let d = m.decision_function(x.view()).unwrap();
        for (v, &l) in d.iter().zip(&y) {
            assert_eq!(*v > 0.0, l);
        }
        assert!(m.converged);
    }

    #[test]
    fn two_points_satisfy_dual_constraints() {
        let x = array![[-1.0], [1.0]];
        let y = [false, true];
        let m = fit_svm_rbf(x.view(), &y, 1000.0, 0.5, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let d = m.decision_function(x.view()).unwrap();
        assert!(d[0] < 0.0 && d[1] > 0.0);
        assert!(m.equality_residual().abs() <= 1e-6);
        let r = m.kkt_residuals(x.view(), &y);
        assert!(r.iter().all(|&v| v <= DEFAULT_TOL));
    }

    #[test]
    fn single_class_rejected() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(
            fit_svm_rbf(x.view(), &[false, false], 1.0, 1.0, 1e-3, 100),
            Err(LearnerError::SingleClass)
        ));
    }
}
