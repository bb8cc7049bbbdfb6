//! Training objectives. Every loss takes softmax probabilities (or encoder
//! embeddings for MMD) and returns its value together with the gradient that
//! the backward pass consumes.
//!
//! All reductions are sums over the batch. Every `ln` sees its argument
//! floored at [`LOG_FLOOR`], and batch class masses are floored the same way.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::numerics::{gaussian_kernel_matrix, log_sum_exp, squared_distance, Matrix};

pub const LOG_FLOOR: f64 = 1e-12;

#[inline]
fn safe_ln(x: f64) -> f64 {
    libm::log(x.max(LOG_FLOOR))
}

/// Target class prior `p(y_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorVector(Vec<f64>);

impl PriorVector {
    /// Accepts a probability vector: non-negative entries summing to 1 within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(contract!("prior must have at least one class"));
        }
        if probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(contract!("prior entries must be finite and non-negative: {probs:?}"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(contract!("prior sums to {sum}, not 1"));
        }
        Ok(Self(probs))
    }

    /// Normalizes non-negative weights to sum to one.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) || weights.iter().any(|&w| w < 0.0) {
            return Err(contract!("prior weights must be non-negative with a positive sum"));
        }
        Ok(Self(weights.iter().map(|w| w / sum).collect()))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }
}

/// Pseudo-labels chosen for one batch, with the scores they were chosen from.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabels {
    pub labels: Vec<usize>,
    pub scores: Matrix,
}

/// The three parts of the contradistinguish objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContradistTerms {
    /// `Σ_j ln p(ŷ_j | x_j)`
    pub term1: f64,
    /// `Σ_j ln p(ŷ_j)`, constant in θ
    pub term2: f64,
    /// `Σ_j ln Σ_ℓ p(ŷ_j | x_ℓ)`
    pub term3: f64,
}

/// A loss value and the gradient of the minimized quantity with respect to
/// the loss input (logits, or fake embeddings for MMD).
///
/// For the contradistinguish loss `value` is the maximized objective
/// `ln q_θ`, and `grad` is the gradient of `-value`. For every other loss
/// `value` is minimized directly.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub name: &'static str,
    pub value: f64,
    pub grad: Matrix,
    pub terms: Option<ContradistTerms>,
}

impl LossReport {
    /// The quantity gradient descent lowers.
    pub fn minimized(&self) -> f64 {
        if self.terms.is_some() {
            -self.value
        } else {
            self.value
        }
    }
}

/// Cross-entropy `-Σ_i ln p(y_i | x_i)`; gradient `p - onehot(y)` per row.
pub fn source_ce(probs: &Matrix, labels: &[usize]) -> Result<LossReport> {
    let k = probs.cols();
    if labels.len() != probs.rows() {
        return Err(contract!(
            "{} labels for {} rows",
            labels.len(),
            probs.rows()
        ));
    }
    let mut grad = probs.clone();
    let mut value = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(contract!("label {y} out of range for {k} classes"));
        }
        value -= safe_ln(probs[(i, y)]);
        grad[(i, y)] -= 1.0;
    }
    Ok(LossReport {
        name: "ss",
        value,
        grad,
        terms: None,
    })
}

/// `Σ_ℓ p(k | x_ℓ)` for every class `k` over the batch.
pub fn class_mass(probs: &Matrix) -> Vec<f64> {
    probs.sum_rows().into_vec()
}

fn check_prior(probs: &Matrix, prior: &PriorVector) -> Result<()> {
    if prior.num_classes() != probs.cols() {
        return Err(contract!(
            "prior has {} classes but probabilities have {}",
            prior.num_classes(),
            probs.cols()
        ));
    }
    Ok(())
}

/// Picks `ŷ_j = argmax_k p(k | x_j) · p(k) / Σ_ℓ p(k | x_ℓ)`, ties to the
/// lowest class index.
pub fn pseudo_label_select(probs: &Matrix, prior: &PriorVector) -> Result<PseudoLabels> {
    check_prior(probs, prior)?;
    let mass = class_mass(probs);
    let mut scores = probs.clone();
    for j in 0..scores.rows() {
        for (k, s) in scores.row_mut(j).iter_mut().enumerate() {
            *s = *s * prior.as_slice()[k] / mass[k].max(LOG_FLOOR);
        }
    }
    let labels = scores.argmax_rows();
    Ok(PseudoLabels { labels, scores })
}

/// Contradistinguish objective for fixed pseudo-labels:
/// `Σ_j ln p(ŷ_j|x_j) + Σ_j ln p(ŷ_j) - Σ_j ln Σ_ℓ p(ŷ_j|x_ℓ)`.
///
/// The inner batch sum of the third term is evaluated as a log-sum-exp over
/// log-probabilities. The pseudo-labels are constants; `grad` is `∂(-value)/∂logits`.
pub fn contradist_loss(probs: &Matrix, pseudo: &PseudoLabels, prior: &PriorVector) -> Result<LossReport> {
    check_prior(probs, prior)?;
    let b = probs.rows();
    let k = probs.cols();
    if pseudo.labels.len() != b {
        return Err(contract!("{} pseudo-labels for {b} rows", pseudo.labels.len()));
    }
    if let Some(&bad) = pseudo.labels.iter().find(|&&y| y >= k) {
        return Err(contract!("pseudo-label {bad} out of range for {k} classes"));
    }

    let mut counts = vec![0usize; k];
    for &y in &pseudo.labels {
        counts[y] += 1;
    }
    let mut log_mass = vec![0.0; k];
    let mut column = Vec::with_capacity(b);
    for c in 0..k {
        if counts[c] == 0 {
            continue;
        }
        column.clear();
        column.extend((0..b).map(|l| safe_ln(probs[(l, c)])));
        log_mass[c] = log_sum_exp(&column)?.max(libm::log(LOG_FLOOR));
    }

    let mut term1 = 0.0;
    let mut term2 = 0.0;
    let mut term3 = 0.0;
    for (j, &y) in pseudo.labels.iter().enumerate() {
        term1 += safe_ln(probs[(j, y)]);
        term2 += safe_ln(prior.as_slice()[y]);
        term3 += log_mass[y];
    }
    let value = (term1 - term3) + term2;

    // d(-value)/dz[l,c] = (p[l,c] - 1[c = ŷ_l]) + p[l,c]·n_c/M_c - p[l,c]·Σ_k p[l,k]·n_k/M_k
    let mass: Vec<f64> = class_mass(probs).into_iter().map(|m| m.max(LOG_FLOOR)).collect();
    let mut grad = Matrix::zeros(b, k);
    for l in 0..b {
        let p = probs.row(l);
        let weighted: Vec<f64> = (0..k).map(|c| (p[c] * counts[c] as f64) / mass[c]).collect();
        let s: f64 = weighted.iter().sum();
        let row = grad.row_mut(l);
        for c in 0..k {
            let own = if c == pseudo.labels[l] { 1.0 } else { 0.0 };
            row[c] = (p[c] - own) + (weighted[c] - p[c] * s);
        }
    }
    Ok(LossReport {
        name: "tu",
        value,
        grad,
        terms: Some(ContradistTerms { term1, term2, term3 }),
    })
}

/// Uniform multi-label objective on fake samples: `-Σ_j Σ_k ln p(k | x̂_j)`,
/// gradient `K·p - 1` per entry.
pub fn adv_bce(probs_fake: &Matrix) -> LossReport {
    let k = probs_fake.cols() as f64;
    let value = -probs_fake.as_slice().iter().map(|&p| safe_ln(p)).sum::<f64>();
    let grad = probs_fake.map(|p| k * p - 1.0);
    LossReport {
        name: "ta",
        value,
        grad,
        terms: None,
    }
}

/// Biased squared kernel MMD between fake and real embeddings with a
/// Gaussian kernel; gradient w.r.t. the fake embeddings only.
pub fn mmd_loss(emb_fake: &Matrix, emb_real: &Matrix, gamma: f64) -> Result<LossReport> {
    if emb_fake.cols() != emb_real.cols() {
        return Err(contract!(
            "embedding width mismatch: {} vs {}",
            emb_fake.cols(),
            emb_real.cols()
        ));
    }
    if emb_fake.rows() == 0 || emb_real.rows() == 0 {
        return Err(contract!("MMD needs non-empty sample sets"));
    }
    let nf = emb_fake.rows() as f64;
    let nt = emb_real.rows() as f64;
    let k_ff = gaussian_kernel_matrix(emb_fake, emb_fake, gamma)?;
    let k_rr = gaussian_kernel_matrix(emb_real, emb_real, gamma)?;
    let k_fr = gaussian_kernel_matrix(emb_fake, emb_real, gamma)?;
    let sum = |m: &Matrix| m.as_slice().iter().sum::<f64>();
    let value = sum(&k_ff) / (nf * nf) + sum(&k_rr) / (nt * nt) - 2.0 * sum(&k_fr) / (nt * nf);

    // ∂k(x, y)/∂x = -2γ (x - y) k(x, y)
    let d = emb_fake.cols();
    let mut grad = Matrix::zeros(emb_fake.rows(), d);
    for i in 0..emb_fake.rows() {
        let fi = emb_fake.row(i);
        let g = grad.row_mut(i);
        for b in 0..emb_fake.rows() {
            let coeff = -2.0 * gamma * k_ff[(i, b)] * 2.0 / (nf * nf);
            for (gd, (x, y)) in g.iter_mut().zip(fi.iter().zip(emb_fake.row(b))) {
                *gd += coeff * (x - y);
            }
        }
        for j in 0..emb_real.rows() {
            let coeff = 2.0 * gamma * k_fr[(i, j)] * 2.0 / (nt * nf);
            for (gd, (x, y)) in g.iter_mut().zip(fi.iter().zip(emb_real.row(j))) {
                *gd += coeff * (x - y);
            }
        }
    }
    Ok(LossReport {
        name: "gen",
        value,
        grad,
        terms: None,
    })
}

/// `1 / (2 · median pairwise squared distance)` over the rows of `real`;
/// falls back to 1 when the median is zero or there are fewer than two rows.
pub fn median_heuristic_gamma(real: &Matrix) -> f64 {
    let n = real.rows();
    let mut dists = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            dists.push(squared_distance(real.row(i), real.row(j)));
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_unstable_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if median > 0.0 && median.is_finite() {
        1.0 / (2.0 * median)
    } else {
        1.0
    }
}
