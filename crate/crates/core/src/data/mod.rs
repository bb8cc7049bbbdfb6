//! Datasets and domain pairs, class priors, standardization, deterministic
//! batching and the synthetic domain-shift generators.

mod batcher;
mod image;
mod synth;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::losses::PriorVector;
use crate::numerics::Matrix;

pub use batcher::{BatchStream, Batcher};
pub use image::resize_bilinear;
pub use synth::{synth_gauss_shift, synth_two_moons, GaussShiftConfig, TwoMoonsConfig};

/// Feature rows with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    pub labels: Option<Vec<usize>>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        labels: Option<Vec<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != features.rows() {
                return Err(contract!(
                    "{} labels for {} feature rows",
                    labels.len(),
                    features.rows()
                ));
            }
            if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
                return Err(contract!("label {bad} out of range for {num_classes} classes"));
            }
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn width(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| contract!("dataset `{}` has no labels", self.name))
    }

    /// Rows at `indices`, labels included.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.select_rows(indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            num_classes: self.num_classes,
        }
    }

    /// Per-class row counts. Requires labels.
    pub fn class_counts(&self) -> Result<Vec<usize>> {
        let mut counts = vec![0; self.num_classes];
        for &y in self.labels()? {
            counts[y] += 1;
        }
        Ok(counts)
    }
}

/// Grants access to target-training labels. Only oracle baselines (BL1) and
/// evaluation code construct one.
#[derive(Debug, Clone, Copy)]
pub struct OracleAccess(());

impl OracleAccess {
    pub fn grant() -> Self {
        Self(())
    }
}

/// Unlabeled target training data. Labels, when known, stay sealed behind
/// [`OracleAccess`].
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTrain {
    name: String,
    features: Matrix,
    num_classes: usize,
    sealed_labels: Option<Vec<usize>>,
}

impl TargetTrain {
    /// Seals the labels of `dataset`, if it has any.
    pub fn seal(dataset: Dataset) -> Self {
        Self {
            name: dataset.name,
            features: dataset.features,
            num_classes: dataset.num_classes,
            sealed_labels: dataset.labels,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    /// The labeled dataset, for oracle use only.
    pub fn unseal(&self, _access: OracleAccess) -> Result<Dataset> {
        let labels = self
            .sealed_labels
            .clone()
            .ok_or_else(|| contract!("target training set `{}` carries no labels", self.name))?;
        Dataset::new(self.name.clone(), self.features.clone(), Some(labels), self.num_classes)
    }

    fn try_map_features(&self, f: impl FnOnce(&Matrix) -> Result<Matrix>) -> Result<Self> {
        Ok(Self {
            name: self.name.clone(),
            features: f(&self.features)?,
            num_classes: self.num_classes,
            sealed_labels: self.sealed_labels.clone(),
        })
    }
}

/// Labeled source, unlabeled target training split and labeled target test split.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPair {
    pub source: Dataset,
    pub target_train: TargetTrain,
    pub target_test: Dataset,
}

impl DomainPair {
    pub fn new(source: Dataset, target_train: TargetTrain, target_test: Dataset) -> Result<Self> {
        source.labels()?;
        target_test.labels()?;
        let width = source.width();
        let k = source.num_classes;
        if target_train.features().cols() != width || target_test.width() != width {
            return Err(contract!(
                "feature widths differ: source {width}, target train {}, target test {}",
                target_train.features().cols(),
                target_test.width()
            ));
        }
        if target_train.num_classes() != k || target_test.num_classes != k {
            return Err(contract!(
                "class counts differ: source {k}, target train {}, target test {}",
                target_train.num_classes(),
                target_test.num_classes
            ));
        }
        Ok(Self {
            source,
            target_train,
            target_test,
        })
    }

    pub fn width(&self) -> usize {
        self.source.width()
    }

    pub fn num_classes(&self) -> usize {
        self.source.num_classes
    }
}

/// Class frequencies of a labeled dataset.
pub fn empirical_prior(dataset: &Dataset) -> Result<PriorVector> {
    let counts = dataset.class_counts()?;
    if dataset.is_empty() {
        return Err(contract!("empirical prior of empty dataset `{}`", dataset.name));
    }
    let n = dataset.len() as f64;
    PriorVector::from_weights(&counts.iter().map(|&c| c as f64 / n).collect::<Vec<_>>())
}

/// Per-feature affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Standard deviations at or below this are treated as constant features.
pub const STD_FLOOR: f64 = 1e-12;

impl Standardizer {
    /// Population statistics over the rows of all given matrices.
    pub fn fit(parts: &[&Matrix]) -> Result<Self> {
        let d = parts.first().map_or(0, |m| m.cols());
        if parts.iter().any(|m| m.cols() != d) {
            return Err(contract!("standardization inputs have different widths"));
        }
        let n: usize = parts.iter().map(|m| m.rows()).sum();
        if n == 0 {
            return Err(contract!("cannot standardize with no rows"));
        }
        let mut mean = vec![0.0; d];
        for m in parts {
            for r in m.row_iter() {
                for (a, &x) in mean.iter_mut().zip(r) {
                    *a += x;
                }
            }
        }
        mean.iter_mut().for_each(|a| *a /= n as f64);
        let mut var = vec![0.0; d];
        for m in parts {
            for r in m.row_iter() {
                for ((v, &x), &mu) in var.iter_mut().zip(r).zip(&mean) {
                    *v += (x - mu) * (x - mu);
                }
            }
        }
        let std = var.into_iter().map(|v| libm::sqrt(v / n as f64)).collect();
        Ok(Self { mean, std })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    /// `(x - mean) / std`; constant features map to 0.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.width() {
            return Err(contract!(
                "standardizer width {} does not match input width {}",
                self.width(),
                x.cols()
            ));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, &mu), &sd) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = if sd <= STD_FLOOR { 0.0 } else { (*v - mu) / sd };
            }
        }
        Ok(out)
    }
}

/// Standardizes all three splits with statistics of source ∪ target-train.
pub fn standardize(pair: &DomainPair) -> Result<(DomainPair, Standardizer)> {
    let s = Standardizer::fit(&[&pair.source.features, pair.target_train.features()])?;
    let out = apply_standardizer(pair, &s)?;
    Ok((out, s))
}

pub fn apply_standardizer(pair: &DomainPair, s: &Standardizer) -> Result<DomainPair> {
    let mut source = pair.source.clone();
    source.features = s.apply(&source.features)?;
    let mut target_test = pair.target_test.clone();
    target_test.features = s.apply(&target_test.features)?;
    let target_train = pair.target_train.try_map_features(|m| s.apply(m))?;
    DomainPair::new(source, target_train, target_test)
}

/// Largest-remainder split of `n` into counts proportional to `weights`.
pub(crate) fn proportional_counts(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|&x| libm::floor(x + 1e-9) as usize).collect();
    let mut assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut i = 0;
    while assigned < n {
        counts[order[i % order.len()]] += 1;
        assigned += 1;
        i += 1;
    }
    while assigned > n {
        let k = (0..counts.len()).rev().find(|&k| counts[k] > 0).unwrap();
        counts[k] -= 1;
        assigned -= 1;
    }
    counts
}

#[cfg(test)]
mod tests;
