use crate::error::{contract, Result};

use super::Matrix;

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = libm::exp(*x - max);
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    out
}

/// Row-wise `log softmax`, computed as `z - max - ln Σ exp(z - max)`.
pub fn log_softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + libm::log(row.iter().map(|&z| libm::exp(z - max)).sum::<f64>());
        for x in row.iter_mut() {
            *x -= lse;
        }
    }
    out
}

/// `ln Σ exp(v_i)` with the log-sum-exp trick.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(contract!("log_sum_exp of an empty slice"));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(max);
    }
    let sum: f64 = values.iter().map(|&v| libm::exp(v - max)).sum();
    Ok(max + libm::log(sum))
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `K[i, j] = exp(-gamma * |x_i - y_j|²)`.
pub fn gaussian_kernel_matrix(x: &Matrix, y: &Matrix, gamma: f64) -> Result<Matrix> {
    if x.cols() != y.cols() {
        return Err(contract!(
            "kernel width mismatch: {} vs {}",
            x.cols(),
            y.cols()
        ));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(contract!("kernel bandwidth must be positive, got {gamma}"));
    }
    let mut k = Matrix::zeros(x.rows(), y.rows());
    for i in 0..x.rows() {
        for j in 0..y.rows() {
            k[(i, j)] = libm::exp(-gamma * squared_distance(x.row(i), y.row(j)));
        }
    }
    Ok(k)
}
