//! Linear readout trained by ridge regression on harvested states.
//!
//! `W_out = Y Xᵀ (X Xᵀ + λI)⁻¹`, solved through the symmetric system
//! `(X Xᵀ + λI) W_outᵀ = X Yᵀ`. [`NormalEquations`] keeps `X Xᵀ` and `X Yᵀ`
//! around so that a sweep over λ pays for the Gram matrix only once.

use serde::{Deserialize, Serialize};

use crate::dynamics::StateMatrix;
use crate::error::{Error, Result};
use crate::numerics::{gram_of_columns, solve_regularized, DenseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutWeights {
    /// `N_Y × N_R`.
    pub w_out: DenseMatrix,
    pub lambda_used: f64,
}

impl ReadoutWeights {
    pub fn n_y(&self) -> usize {
        self.w_out.rows()
    }

    pub fn n_r(&self) -> usize {
        self.w_out.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub nmse: f64,
    pub mse: f64,
    pub sample_count: usize,
}

/// Accumulated `X Xᵀ` and `X Yᵀ` for one design matrix.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    gram: DenseMatrix,
    cross: DenseMatrix,
    samples: usize,
}

impl NormalEquations {
    /// `targets` holds one row per output, each as long as `x` has columns.
    pub fn new(x: &StateMatrix, targets: &[&[f64]]) -> Result<Self> {
        let n = x.n_r();
        let t = x.len();
        if t == 0 || n == 0 {
            return Err(Error::param("ridge regression needs at least one state column"));
        }
        if targets.is_empty() {
            return Err(Error::param("ridge regression needs at least one target row"));
        }
        if let Some(bad) = targets.iter().find(|row| row.len() != t) {
            return Err(Error::dim("train_ridge (target columns)", t, bad.len()));
        }
        let gram = gram_of_columns(x.columns(), n);
        let n_y = targets.len();
        let mut cross = DenseMatrix::zeros(n, n_y);
        for (j, col) in x.columns().enumerate() {
            for (k, row) in targets.iter().enumerate() {
                let y = row[j];
                if y == 0.0 {
                    continue;
                }
                for (i, &xi) in col.iter().enumerate() {
                    cross[(i, k)] += xi * y;
                }
            }
        }
        Ok(Self {
            gram,
            cross,
            samples: t,
        })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn solve(&self, lambda: f64) -> Result<ReadoutWeights> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::param(format!("lambda must be >= 0, got {lambda}")));
        }
        let mut a = self.gram.clone();
        for i in 0..a.rows() {
            a[(i, i)] += lambda;
        }
        let z = solve_regularized(&a, &self.cross).map_err(|e| match e {
            Error::Singular { .. } if lambda == 0.0 => Error::Singular {
                hint: "; X Xᵀ is not invertible, use lambda > 0",
            },
            other => other,
        })?;
        Ok(ReadoutWeights {
            w_out: z.transpose(),
            lambda_used: lambda,
        })
    }
}

/// Trains `W_out` on states `x` (N_R × T) against `y_true` (N_Y × T).
pub fn train_ridge(x: &StateMatrix, y_true: &DenseMatrix, lambda: f64) -> Result<ReadoutWeights> {
    if y_true.cols() != x.len() {
        return Err(Error::dim("train_ridge", x.len(), y_true.cols()));
    }
    let rows: Vec<&[f64]> = (0..y_true.rows()).map(|r| y_true.row(r)).collect();
    NormalEquations::new(x, &rows)?.solve(lambda)
}

pub fn predict(w: &ReadoutWeights, x: &[f64]) -> Result<Vec<f64>> {
    crate::numerics::mat_vec(&w.w_out, x)
}

/// Columnwise prediction; returns one row per output.
pub fn predict_states(w: &ReadoutWeights, states: &StateMatrix) -> Result<Vec<Vec<f64>>> {
    if states.n_r() != w.n_r() {
        return Err(Error::dim("predict", w.n_r(), states.n_r()));
    }
    let mut out = vec![Vec::with_capacity(states.len()); w.n_y()];
    for col in states.columns() {
        for (k, row) in out.iter_mut().enumerate() {
            row.push(w.w_out.row(k).iter().zip(col).map(|(a, b)| a * b).sum());
        }
    }
    Ok(out)
}

fn check_pair(predicted: &[f64], target: &[f64]) -> Result<()> {
    if predicted.len() != target.len() {
        return Err(Error::dim("error metric", target.len(), predicted.len()));
    }
    if target.is_empty() {
        return Err(Error::param("error metric on empty series"));
    }
    Ok(())
}

pub fn mse(predicted: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(predicted, target)?;
    let n = target.len() as f64;
    Ok(predicted
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / n)
}

/// Population variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Mean squared error over the (population) variance of the target.
pub fn nmse(predicted: &[f64], target: &[f64]) -> Result<f64> {
    Ok(error_report(predicted, target)?.nmse)
}

pub fn error_report(predicted: &[f64], target: &[f64]) -> Result<ErrorReport> {
    check_pair(predicted, target)?;
    if target.len() < 2 {
        return Err(Error::param("NMSE needs at least two samples"));
    }
    let var = variance(target);
    if var == 0.0 {
        return Err(Error::param("NMSE undefined for a constant target"));
    }
    let mse = mse(predicted, target)?;
    Ok(ErrorReport {
        nmse: mse / var,
        mse,
        sample_count: target.len(),
    })
}
