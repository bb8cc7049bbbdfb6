//! Inference, accuracy metrics, baseline runs and embedding export rows.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Dataset, DomainPair, OracleAccess};
use crate::error::{contract, Error, Result};
use crate::model::{forward, Model};
use crate::numerics::Matrix;
use crate::train::{fit, fit_oracle, LossCombo, TrainConfig};

/// `argmax_y p(y | x)` per row; ties go to the lowest class index.
pub fn predict(model: &Model, features: &Matrix) -> Result<Vec<usize>> {
    if features.cols() != model.input_dim() {
        return Err(contract!(
            "features have width {} but the model expects {}",
            features.cols(),
            model.input_dim()
        ));
    }
    Ok(forward(model, features)?.probs.argmax_rows())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Recall per true class; 0 for classes absent from the test set.
    pub per_class_accuracy: Vec<f64>,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub n_test: usize,
}

impl EvalReport {
    pub fn from_predictions(labels: &[usize], predictions: &[usize], num_classes: usize) -> Result<Self> {
        if labels.len() != predictions.len() {
            return Err(contract!(
                "{} labels but {} predictions",
                labels.len(),
                predictions.len()
            ));
        }
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        for (&y, &p) in labels.iter().zip(predictions) {
            if y >= num_classes || p >= num_classes {
                return Err(contract!("class index out of range for {num_classes} classes"));
            }
            confusion[y][p] += 1;
        }
        let n_test = labels.len();
        let correct: usize = (0..num_classes).map(|k| confusion[k][k]).sum();
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let n: usize = row.iter().sum();
                if n == 0 {
                    0.0
                } else {
                    row[k] as f64 / n as f64
                }
            })
            .collect();
        Ok(Self {
            accuracy: if n_test == 0 { 0.0 } else { correct as f64 / n_test as f64 },
            per_class_accuracy,
            confusion,
            n_test,
        })
    }
}

pub fn evaluate(model: &Model, test: &Dataset) -> Result<EvalReport> {
    let labels = test.labels()?;
    if test.num_classes != model.num_classes() {
        return Err(contract!(
            "test set has {} classes but the model predicts {}",
            test.num_classes,
            model.num_classes()
        ));
    }
    let predictions = predict(model, &test.features)?;
    EvalReport::from_predictions(labels, &predictions, test.num_classes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReports {
    /// Target supervised.
    pub bl1: EvalReport,
    /// Source supervised.
    pub bl2: EvalReport,
}

/// Runs BL1 (`ts`) and BL2 (`ss`) with the config's seed and architecture.
///
/// # Errors
/// [`Error::OracleRequired`] without oracle access, since BL1 reads target-train labels.
pub fn run_baselines(pair: &DomainPair, config: &TrainConfig, access: Option<OracleAccess>) -> Result<BaselineReports> {
    let access = access.ok_or_else(|| {
        Error::OracleRequired("BL1 trains on target-train labels; oracle mode must be enabled".into())
    })?;
    let bl2_config = TrainConfig {
        combo: LossCombo::SOURCE_ONLY,
        ..config.clone()
    };
    let bl1_config = TrainConfig {
        combo: LossCombo::TARGET_ORACLE,
        ..config.clone()
    };
    let bl2 = fit(&bl2_config, pair, |_, _| {})?;
    let bl1 = fit_oracle(&bl1_config, pair, access, |_, _| {})?;
    Ok(BaselineReports {
        bl1: evaluate(&bl1.model, &pair.target_test)?,
        bl2: evaluate(&bl2.model, &pair.target_test)?,
    })
}

/// One exported sample: pre-softmax logits and encoder embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub true_label: Option<usize>,
    pub logits: Vec<f64>,
    pub embedding: Vec<f64>,
}

pub fn embedding_rows(model: &Model, features: &Matrix, labels: Option<&[usize]>) -> Result<Vec<EmbeddingRow>> {
    if features.cols() != model.input_dim() {
        return Err(contract!(
            "features have width {} but the model expects {}",
            features.cols(),
            model.input_dim()
        ));
    }
    if let Some(l) = labels {
        if l.len() != features.rows() {
            return Err(contract!("{} labels for {} rows", l.len(), features.rows()));
        }
    }
    let cache = forward(model, features)?;
    Ok((0..features.rows())
        .map(|i| EmbeddingRow {
            true_label: labels.map(|l| l[i]),
            logits: cache.logits.row(i).to_vec(),
            embedding: cache.embeddings.row(i).to_vec(),
        })
        .collect())
}
