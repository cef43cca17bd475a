//! Soft-margin SVM on a precomputed kernel, solved with SMO using the
//! maximal-violating-pair working set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{GramMatrix, KernelKind};

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-5;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// `α_i y_i` for every training sample (zero off the support set).
    pub dual_coef: Vec<f64>,
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub support: Vec<usize>,
    pub c: f64,
    pub kernel: KernelKind,
    /// Maximal KKT violation `m(α) − M(α)` at exit.
    pub kkt_gap: f64,
    pub iterations: usize,
}

fn check_labels(labels: &[i8], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if let Some(bad) = labels.iter().find(|&&v| v != 1 && v != -1) {
        return Err(Error::InvalidParameter(format!("labels must be ±1, found {bad}")));
    }
    if !(labels.contains(&1) && labels.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

pub fn svm_fit(gram: &GramMatrix, labels: &[i8], c: f64) -> Result<SvmModel> {
    svm_fit_with_tol(gram, labels, c, DEFAULT_TOL)
}

/// Dual problem `min ½αᵀQα − Σα` with `Q_ij = y_i y_j K_ij`,
/// `0 ≤ α ≤ C`, `yᵀα = 0`.
pub fn svm_fit_with_tol(gram: &GramMatrix, labels: &[i8], c: f64, tol: f64) -> Result<SvmModel> {
    let n = gram.size();
    check_labels(labels, n)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let k = gram.entries();
    let y: Vec<f64> = labels.iter().map(|&v| v as f64).collect();
    let q = |i: usize, j: usize| y[i] * y[j] * k[(i, j)];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = 10_000_000usize.max(100 * n);
    let mut iterations = 0;
    let mut gap;

    loop {
        let (mut i, mut big_m) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut small_m) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let score = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up && score > big_m {
                big_m = score;
                i = t;
            }
            if in_low && score < small_m {
                small_m = score;
                j = t;
            }
        }
        gap = big_m - small_m;
        if gap < tol || i == usize::MAX || j == usize::MAX {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::DegenerateData(format!(
                "SMO did not converge in {max_iter} iterations (gap {gap:.3e})"
            )));
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
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
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
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
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    let bias = -rho(&alpha, &grad, &y, c);
    let dual_coef: Vec<f64> = alpha.iter().zip(&y).map(|(a, yv)| a * yv).collect();
    let support = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(SvmModel {
        dual_coef,
        alpha,
        bias,
        support,
        c,
        kernel: gram.kind(),
        kkt_gap: gap.max(0.0),
        iterations,
    })
}

/// Offset from free support vectors, or the midpoint of the feasible
/// interval when none are free.
fn rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum) = (0usize, 0.0);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

impl SvmModel {
    /// `Σα − ½ Σ_ij α_i α_j y_i y_j K_ij` (to be maximized).
    pub fn dual_objective(&self, gram: &GramMatrix) -> f64 {
        dual_objective(&self.dual_coef, &self.alpha, gram)
    }

    pub fn decision(&self, kernel_row: &[f64]) -> Result<f64> {
        if kernel_row.len() != self.dual_coef.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dual_coef.len(),
                found: kernel_row.len(),
            });
        }
        Ok(self.bias + self.support.iter().map(|&i| self.dual_coef[i] * kernel_row[i]).sum::<f64>())
    }
}

pub(crate) fn dual_objective(dual_coef: &[f64], alpha: &[f64], gram: &GramMatrix) -> f64 {
    let k = gram.entries();
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += dual_coef[i] * dual_coef[j] * k[(i, j)];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Label (`+1` when the decision value is ≥ 0) and decision value.
pub fn svm_predict(model: &SvmModel, kernel_row: &[f64]) -> Result<(i8, f64)> {
    let f = model.decision(kernel_row)?;
    Ok((if f >= 0.0 { 1 } else { -1 }, f))
}

/// Predictions for each row of a test × train kernel matrix.
pub fn svm_predict_rows(model: &SvmModel, rows: &nalgebra::DMatrix<f64>) -> Result<Vec<i8>> {
    (0..rows.nrows())
        .map(|r| {
            let row: Vec<f64> = rows.row(r).iter().copied().collect();
            svm_predict(model, &row).map(|(l, _)| l)
        })
        .collect()
}
