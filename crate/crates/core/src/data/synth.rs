//! Synthetic domain pairs with controlled shift.

use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{proportional_counts, Dataset, DomainPair, TargetTrain};
use crate::error::{contract, Result};
use crate::numerics::{Matrix, Rng, Stream};

/// Two interleaving half circles centered on the origin. The target domain
/// is the same generator rotated about the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMoonsConfig {
    /// Source sample count (classes balanced).
    pub n_source: usize,
    pub n_target: usize,
    pub n_test: usize,
    pub rotation_degrees: f64,
    pub noise_std: f64,
    /// Target class proportions; balanced when `None`.
    pub label_skew: Option<Vec<f64>>,
    pub seed: u64,
}

impl TwoMoonsConfig {
    pub fn new(n: usize, rotation_degrees: f64, seed: u64) -> Self {
        Self {
            n_source: n,
            n_target: n,
            n_test: n,
            rotation_degrees,
            noise_std: 0.1,
            label_skew: None,
            seed,
        }
    }
}

fn check_skew(skew: Option<&[f64]>, k: usize) -> Result<Vec<f64>> {
    match skew {
        None => Ok(alloc::vec![1.0; k]),
        Some(s) => {
            let sum: f64 = s.iter().sum();
            if s.len() != k || s.iter().any(|&p| p.is_nan() || p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(contract!(
                    "label skew must be {k} non-negative proportions summing to 1, got {s:?}"
                ));
            }
            Ok(s.to_vec())
        }
    }
}

/// Shuffles rows so that classes are interleaved.
fn assemble(name: &str, rows: Vec<[f64; 2]>, labels: Vec<usize>, k: usize, rng: &mut Rng) -> Result<Dataset> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    rng.shuffle(&mut order);
    let features = Matrix::from_rows(&order.iter().map(|&i| rows[i]).collect::<Vec<_>>())?;
    let features = if rows.is_empty() { Matrix::zeros(0, 2) } else { features };
    let labels = order.iter().map(|&i| labels[i]).collect();
    Dataset::new(name, features, Some(labels), k)
}

fn moons(name: &str, counts: &[usize], rotation: f64, noise: f64, rng: &mut Rng) -> Result<Dataset> {
    let (sin_r, cos_r) = (libm::sin(rotation), libm::cos(rotation));
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (class, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let t = rng.uniform(0.0, PI);
            let (x, y) = if class == 0 {
                (libm::cos(t), libm::sin(t))
            } else {
                (1.0 - libm::cos(t), 0.5 - libm::sin(t))
            };
            // center the pair of moons on the origin
            let x = x - 0.5 + rng.normal(0.0, noise);
            let y = y - 0.25 + rng.normal(0.0, noise);
            rows.push([cos_r * x - sin_r * y, sin_r * x + cos_r * y]);
            labels.push(class);
        }
    }
    assemble(name, rows, labels, 2, rng)
}

pub fn synth_two_moons(cfg: &TwoMoonsConfig) -> Result<DomainPair> {
    if cfg.noise_std.is_nan() || cfg.noise_std < 0.0 || !cfg.rotation_degrees.is_finite() {
        return Err(contract!(
            "invalid two-moons parameters: rotation {}, noise {}",
            cfg.rotation_degrees,
            cfg.noise_std
        ));
    }
    let skew = check_skew(cfg.label_skew.as_deref(), 2)?;
    let rotation = cfg.rotation_degrees.to_radians();
    let source = moons(
        "two_moons.source",
        &proportional_counts(cfg.n_source, &[1.0, 1.0]),
        0.0,
        cfg.noise_std,
        &mut Rng::for_stream(cfg.seed, Stream::Data, 0),
    )?;
    let target = moons(
        "two_moons.target_train",
        &proportional_counts(cfg.n_target, &skew),
        rotation,
        cfg.noise_std,
        &mut Rng::for_stream(cfg.seed, Stream::Data, 1),
    )?;
    let test = moons(
        "two_moons.target_test",
        &proportional_counts(cfg.n_test, &skew),
        rotation,
        cfg.noise_std,
        &mut Rng::for_stream(cfg.seed, Stream::Data, 2),
    )?;
    DomainPair::new(source, TargetTrain::seal(target), test)
}

/// `K` isotropic Gaussian blobs. Target blobs are translated by `mean_shift`
/// along every coordinate and have their covariance scaled by `cov_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussShiftConfig {
    pub num_classes: usize,
    pub dim: usize,
    pub mean_shift: f64,
    pub cov_scale: f64,
    pub label_skew: Option<Vec<f64>>,
    /// Samples per split.
    pub n: usize,
    pub seed: u64,
}

pub fn synth_gauss_shift(cfg: &GaussShiftConfig) -> Result<DomainPair> {
    let k = cfg.num_classes;
    if k < 2 || cfg.dim < 2 {
        return Err(contract!("gauss shift needs K >= 2 and dim >= 2, got K={k}, dim={}", cfg.dim));
    }
    if cfg.cov_scale.is_nan() || cfg.cov_scale <= 0.0 || !cfg.mean_shift.is_finite() {
        return Err(contract!(
            "invalid gauss shift parameters: mean_shift {}, cov_scale {}",
            cfg.mean_shift,
            cfg.cov_scale
        ));
    }
    let skew = check_skew(cfg.label_skew.as_deref(), k)?;
    let mut mean_rng = Rng::for_stream(cfg.seed, Stream::Data, 3);
    let means: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..cfg.dim).map(|_| mean_rng.uniform(-3.0, 3.0)).collect())
        .collect();

    let blobs = |name: &str, counts: &[usize], shift: f64, std: f64, rng: &mut Rng| -> Result<Dataset> {
        let n: usize = counts.iter().sum();
        let mut rows: Vec<(Vec<f64>, usize)> = Vec::with_capacity(n);
        for (class, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                let row = means[class].iter().map(|&m| m + shift + std * rng.standard_normal()).collect();
                rows.push((row, class));
            }
        }
        rng.shuffle(&mut rows);
        let mut features = Matrix::zeros(n, cfg.dim);
        let mut labels = Vec::with_capacity(n);
        for (i, (row, y)) in rows.into_iter().enumerate() {
            features.row_mut(i).copy_from_slice(&row);
            labels.push(y);
        }
        Dataset::new(name, features, Some(labels), k)
    };

    let target_std = libm::sqrt(cfg.cov_scale);
    let source = blobs(
        "gauss_shift.source",
        &proportional_counts(cfg.n, &alloc::vec![1.0; k]),
        0.0,
        1.0,
        &mut Rng::for_stream(cfg.seed, Stream::Data, 0),
    )?;
    let counts = proportional_counts(cfg.n, &skew);
    let target = blobs(
        "gauss_shift.target_train",
        &counts,
        cfg.mean_shift,
        target_std,
        &mut Rng::for_stream(cfg.seed, Stream::Data, 1),
    )?;
    let test = blobs(
        "gauss_shift.target_test",
        &counts,
        cfg.mean_shift,
        target_std,
        &mut Rng::for_stream(cfg.seed, Stream::Data, 2),
    )?;
    DomainPair::new(source, TargetTrain::seal(target), test)
}
