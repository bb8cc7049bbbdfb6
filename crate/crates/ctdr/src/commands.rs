//! The `train`, `eval`, `ablate` and `synth` commands.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ctdr_core::data::{apply_standardizer, standardize, DomainPair, OracleAccess, Standardizer};
use ctdr_core::eval::{embedding_rows, evaluate, EvalReport};
use ctdr_core::train::{fit, fit_oracle, FitResult, LossCombo, TrainConfig};
use ctdr_core::Error as CoreError;

use crate::config::{DataKind, ExperimentConfig};
use crate::datasets::load_pair;
use crate::files::{
    embeddings_csv, load_checkpoint, load_standardizer, report_json, save_checkpoint, save_standardizer,
    summary_csv, write_bytes, AbortRecord, LineWriter, MetricsRecord, SummaryRow,
};
use crate::sparse::write_sparse;
use crate::{CliError, CliResult};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "model.ctdr";
pub const REPORT_FILE: &str = "report.json";
pub const STANDARDIZER_FILE: &str = "standardizer.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// The combos run by `ablate`, followed by the target-supervised baseline.
pub const ABLATION_LADDER: [&str; 7] = [
    "ss",
    "ss+tu",
    "ss+tu+su",
    "ss+tu+su+ta",
    "ss+tu+su+sa",
    "ss+tu+su+ta+sa",
    "ts",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

/// Prints the resolved configuration, then validates it.
fn announce(config: &ExperimentConfig, out: &mut dyn Write) -> CliResult<()> {
    out.write_all(config.render().as_bytes())
        .and_then(|()| out.flush())
        .map_err(io_err(Path::new("<stdout>")))?;
    config.validate()
}

/// Loads the configured pair and standardizes it when enabled.
pub fn prepare(config: &ExperimentConfig) -> CliResult<(DomainPair, Option<Standardizer>)> {
    let pair = load_pair(&config.data)?;
    if config.data.standardize {
        let (pair, s) = standardize(&pair)?;
        Ok((pair, Some(s)))
    } else {
        Ok((pair, None))
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub fit: FitResult,
    pub report: EvalReport,
}

/// Trains, streaming metrics, and writes the checkpoint, report, transform and
/// optional embeddings into `out.dir`.
pub fn cmd_train(config: &ExperimentConfig, out: &mut dyn Write, log: &mut dyn Write) -> CliResult<TrainOutcome> {
    announce(config, out)?;
    let dir = &config.out.dir;
    let (pair, standardizer) = prepare(config)?;
    if let Some(s) = &standardizer {
        save_standardizer(&dir.join(STANDARDIZER_FILE), s)?;
    }
    let train = config.resolved_train();
    let metrics_path = dir.join(METRICS_FILE);
    let mut metrics = LineWriter::create(&metrics_path)?;
    let start = Instant::now();
    let mut write_error = None;
    let mut on_epoch = |m: &ctdr_core::train::EpochMetrics, model: &ctdr_core::model::Model| {
        if write_error.is_some() {
            return;
        }
        let seconds = config.out.log_wall_clock.then(|| start.elapsed().as_secs_f64());
        let every = config.out.checkpoint_every;
        let r = metrics.line(&MetricsRecord::new(m, seconds).to_line()).and_then(|()| {
            if every > 0 && (m.epoch + 1).is_multiple_of(every) {
                save_checkpoint(&dir.join(format!("epoch_{}.ctdr", m.epoch + 1)), model)
            } else {
                Ok(())
            }
        });
        let _ = writeln!(
            log,
            "epoch {:>4}  lr {:.3e}  source {:.4}  target {:.4}  {:.1}s",
            m.epoch,
            m.lr,
            m.source_train_accuracy,
            m.target_test_accuracy,
            start.elapsed().as_secs_f64()
        );
        write_error = r.err();
    };
    let result = if train.combo.ts {
        if !config.oracle {
            return Err(CoreError::OracleRequired("the ts combo needs `oracle = true`".into()).into());
        }
        fit_oracle(&train, &pair, OracleAccess::grant(), &mut on_epoch)
    } else {
        fit(&train, &pair, &mut on_epoch)
    };
    if let Some(e) = write_error {
        return Err(e);
    }
    let fit = match result {
        Ok(f) => f,
        Err(CoreError::NonFiniteLoss { term, epoch, step, value }) => {
            let record = AbortRecord {
                abort: "non_finite_loss".into(),
                term: term.into(),
                epoch,
                step,
            };
            metrics.line(&serde_json::to_string(&record).expect("abort record serializes"))?;
            return Err(CoreError::NonFiniteLoss { term, epoch, step, value }.into());
        }
        Err(e) => return Err(e.into()),
    };
    for w in &fit.warnings {
        let _ = writeln!(log, "warning: {w}");
    }
    save_checkpoint(&dir.join(CHECKPOINT_FILE), &fit.model)?;
    let report = evaluate(&fit.model, &pair.target_test)?;
    write_bytes(&dir.join(REPORT_FILE), report_json(&report).as_bytes())?;
    if config.out.embeddings {
        let groups = [
            ("source", embedding_rows(&fit.model, &pair.source.features, Some(pair.source.labels()?))?),
            ("target_train", embedding_rows(&fit.model, pair.target_train.features(), None)?),
            (
                "target_test",
                embedding_rows(&fit.model, &pair.target_test.features, Some(pair.target_test.labels()?))?,
            ),
        ];
        write_bytes(&dir.join(EMBEDDINGS_FILE), embeddings_csv(&groups).as_bytes())?;
    }
    Ok(TrainOutcome { fit, report })
}

/// Evaluates a checkpoint on the configured target-test split. The transform
/// is taken from `standardizer`, else from `standardizer.json` beside the
/// checkpoint, else refit from the data.
pub fn cmd_eval(
    config: &ExperimentConfig,
    checkpoint: &Path,
    standardizer: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<EvalReport> {
    announce(config, out)?;
    let model = load_checkpoint(checkpoint)?;
    let pair = load_pair(&config.data)?;
    let pair = if config.data.standardize {
        let beside: Option<PathBuf> = checkpoint.parent().map(|d| d.join(STANDARDIZER_FILE));
        let stored = standardizer.map(Path::to_path_buf).or(beside.filter(|p| p.is_file()));
        match stored {
            Some(p) => apply_standardizer(&pair, &load_standardizer(&p)?)?,
            None => standardize(&pair)?.0,
        }
    } else {
        pair
    };
    Ok(evaluate(&model, &pair.target_test)?)
}

/// Runs [`ABLATION_LADDER`] with shared seed and architecture and writes the
/// summary table.
pub fn cmd_ablate(config: &ExperimentConfig, out: &mut dyn Write, log: &mut dyn Write) -> CliResult<Vec<SummaryRow>> {
    announce(config, out)?;
    if !config.oracle {
        return Err(CoreError::OracleRequired(
            "the ablation ladder ends with the target-supervised baseline; set `oracle = true`".into(),
        )
        .into());
    }
    let (pair, _) = prepare(config)?;
    let mut rows = Vec::with_capacity(ABLATION_LADDER.len());
    for combo in ABLATION_LADDER {
        let train = TrainConfig {
            combo: LossCombo::parse(combo)?,
            ..config.resolved_train()
        };
        let fit = if train.combo.ts {
            fit_oracle(&train, &pair, OracleAccess::grant(), |_, _| {})?
        } else {
            fit(&train, &pair, |_, _| {})?
        };
        let report = evaluate(&fit.model, &pair.target_test)?;
        let source_train_accuracy = fit.metrics.last().map_or(0.0, |m| m.source_train_accuracy);
        let _ = writeln!(log, "{combo:<16} target {:.4}", report.accuracy);
        rows.push(SummaryRow {
            combo: combo.to_string(),
            target_test_accuracy: report.accuracy,
            source_train_accuracy,
        });
    }
    write_bytes(&config.out.dir.join(SUMMARY_FILE), summary_csv(&rows).as_bytes())?;
    Ok(rows)
}

pub const SYNTH_FILES: [&str; 3] = ["source.txt", "target_train.txt", "target_test.txt"];

/// Writes the configured synthetic pair as three sparse text files. These are
/// raw generator output; the target-train file includes its ground truth.
pub fn cmd_synth(config: &ExperimentConfig, out: &mut dyn Write) -> CliResult<Vec<PathBuf>> {
    announce(config, out)?;
    if !matches!(config.data.kind, DataKind::TwoMoons | DataKind::GaussShift) {
        return Err(CliError::Config("synth needs data.kind = two_moons or gauss_shift".into()));
    }
    let pair = load_pair(&config.data)?;
    let target = pair.target_train.unseal(OracleAccess::grant())?;
    let k = pair.num_classes();
    let mut paths = Vec::new();
    for (name, ds) in SYNTH_FILES.iter().zip([&pair.source, &target, &pair.target_test]) {
        let path = config.out.dir.join(name);
        write_bytes(&path, write_sparse(ds.labels()?, &ds.features, k).as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}
