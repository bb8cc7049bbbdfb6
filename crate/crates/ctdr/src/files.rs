//! On-disk artifacts: checkpoints, standardization transforms, metrics,
//! evaluation reports, embedding and summary tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ctdr_core::data::Standardizer;
use ctdr_core::eval::{EmbeddingRow, EvalReport};
use ctdr_core::model::{decode_checkpoint, encode_checkpoint, Model};
use ctdr_core::train::EpochMetrics;

use crate::{CliError, CliResult};

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn save_checkpoint(path: &Path, model: &Model) -> CliResult<()> {
    write_bytes(path, &encode_checkpoint(model))
}

pub fn load_checkpoint(path: &Path) -> CliResult<Model> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(decode_checkpoint(&bytes)?)
}

#[derive(Serialize, Deserialize)]
struct StandardizerFile {
    mean: Vec<f64>,
    std: Vec<f64>,
}

pub fn save_standardizer(path: &Path, s: &Standardizer) -> CliResult<()> {
    let file = StandardizerFile {
        mean: s.mean.clone(),
        std: s.std.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("plain numbers serialize");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn load_standardizer(path: &Path) -> CliResult<Standardizer> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let f: StandardizerFile = serde_json::from_str(&text).map_err(|e| CliError::format(path, e))?;
    if f.mean.len() != f.std.len() {
        return Err(CliError::format(path, "mean and std lengths differ"));
    }
    Ok(Standardizer { mean: f.mean, std: f.std })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub ss: Option<f64>,
    pub tu: Option<f64>,
    pub su: Option<f64>,
    pub ta: Option<f64>,
    pub sa: Option<f64>,
    pub gen: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub source_train: f64,
    pub target_test: f64,
}

/// One line of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss: LossRecord,
    pub acc: AccuracyRecord,
    pub seconds: Option<f64>,
}

impl MetricsRecord {
    pub fn new(m: &EpochMetrics, seconds: Option<f64>) -> Self {
        Self {
            epoch: m.epoch,
            lr: m.lr,
            loss: LossRecord {
                ss: m.loss.ss,
                tu: m.loss.tu,
                su: m.loss.su,
                ta: m.loss.ta,
                sa: m.loss.sa,
                gen: m.loss.gen,
            },
            acc: AccuracyRecord {
                source_train: m.source_train_accuracy,
                target_test: m.target_test_accuracy,
            },
            seconds,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}

/// Last line of a metrics stream when training aborted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortRecord {
    pub abort: String,
    pub term: String,
    pub epoch: usize,
    pub step: usize,
}

pub fn read_metrics(path: &Path) -> CliResult<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::format(path, e)))
        .collect()
}

/// Appends lines to a file, flushing after each so partial runs stay readable.
pub struct LineWriter {
    path: std::path::PathBuf,
    file: fs::File,
}

impl LineWriter {
    pub fn create(path: &Path) -> CliResult<Self> {
        write_bytes(path, b"")?;
        let file = fs::OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn line(&mut self, line: &str) -> CliResult<()> {
        writeln!(self.file, "{line}")
            .and_then(|()| self.file.flush())
            .map_err(|e| CliError::io(&self.path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub confusion: Vec<Vec<usize>>,
    pub n_test: usize,
}

impl From<&EvalReport> for ReportFile {
    fn from(r: &EvalReport) -> Self {
        Self {
            accuracy: r.accuracy,
            per_class_accuracy: r.per_class_accuracy.clone(),
            confusion: r.confusion.clone(),
            n_test: r.n_test,
        }
    }
}

pub fn report_json(r: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(&ReportFile::from(r)).expect("report serializes");
    s.push('\n');
    s
}

pub fn read_report(path: &Path) -> CliResult<ReportFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e))
}

/// CSV with columns `domain, true_label, logit_0.., emb_0..`; unknown labels are -1.
pub fn embeddings_csv(groups: &[(&str, Vec<EmbeddingRow>)]) -> String {
    let k = groups.iter().flat_map(|(_, r)| r.first()).next().map_or(0, |r| r.logits.len());
    let d = groups.iter().flat_map(|(_, r)| r.first()).next().map_or(0, |r| r.embedding.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["domain".to_string(), "true_label".to_string()];
    header.extend((0..k).map(|i| format!("logit_{i}")));
    header.extend((0..d).map(|i| format!("emb_{i}")));
    w.write_record(&header).expect("in-memory write");
    for (domain, rows) in groups {
        for r in rows {
            let mut rec = vec![domain.to_string(), r.true_label.map_or(-1, |y| y as i64).to_string()];
            rec.extend(r.logits.iter().chain(&r.embedding).map(|v| format!("{v:?}")));
            w.write_record(&rec).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
}

/// One row of the ablation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub combo: String,
    pub target_test_accuracy: f64,
    pub source_train_accuracy: f64,
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
}

pub fn read_summary(path: &Path) -> CliResult<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::format(path, e))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::format(path, e))
}
