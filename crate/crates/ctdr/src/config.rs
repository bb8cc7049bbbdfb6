//! Experiment configuration: flat `key = value` lines, `#` comments, lists as
//! comma-separated values. Every key has a default and unknown keys are
//! rejected. [`ExperimentConfig::render`] prints a complete file that parses
//! back to the same configuration.

use std::collections::HashSet;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use ctdr_core::fake::{Bandwidth, FakeMode};
use ctdr_core::losses::PriorVector;
use ctdr_core::train::{LossCombo, PriorMode, TrainConfig};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    TwoMoons,
    GaussShift,
    Sparse,
    Digits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    MnistToUsps,
    UspsToMnist,
}

/// `auto` picks the generator for digit images and Gaussian fakes otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FakeModeSetting {
    Auto,
    Fixed(FakeMode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub kind: DataKind,
    pub seed: u64,
    pub standardize: bool,
    pub n_source: usize,
    pub n_target: usize,
    pub n_test: usize,
    pub rotation: f64,
    pub noise: f64,
    pub label_skew: Option<Vec<f64>>,
    pub classes: usize,
    pub dim: usize,
    pub mean_shift: f64,
    pub cov_scale: f64,
    pub source_path: Option<PathBuf>,
    pub target_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub digits_dir: PathBuf,
    pub direction: Direction,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            kind: DataKind::TwoMoons,
            seed: 0,
            standardize: true,
            n_source: 500,
            n_target: 500,
            n_test: 500,
            rotation: 35.0,
            noise: 0.1,
            label_skew: None,
            classes: 3,
            dim: 10,
            mean_shift: 1.0,
            cov_scale: 1.0,
            source_path: None,
            target_path: None,
            test_path: None,
            digits_dir: PathBuf::from("data/digits"),
            direction: Direction::MnistToUsps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub embeddings: bool,
    /// Write `epoch_<n>.ctdr` every this many epochs; 0 writes only the final model.
    pub checkpoint_every: usize,
    /// Record elapsed seconds in metrics. Off keeps metrics byte-reproducible.
    pub log_wall_clock: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/ctdr"),
            embeddings: false,
            checkpoint_every: 0,
            log_wall_clock: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub fake_mode: FakeModeSetting,
    pub data: DataConfig,
    pub out: OutputConfig,
    /// Unlocks target-train labels for the target-supervised baseline.
    pub oracle: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            fake_mode: FakeModeSetting::Auto,
            data: DataConfig::default(),
            out: OutputConfig::default(),
            oracle: false,
        }
    }
}

fn bad(key: &str, value: &str) -> CliError {
    CliError::Config(format!("invalid value `{value}` for `{key}`"))
}

fn num<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn list<T: FromStr>(key: &str, value: &str) -> CliResult<Vec<T>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn flag(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn float(v: f64) -> String {
    format!("{v:?}")
}

fn floats(items: &[f64]) -> String {
    items.iter().map(|&v| float(v)).collect::<Vec<_>>().join(",")
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(String::new, |p| p.display().to_string())
}

impl ExperimentConfig {
    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut config = Self::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(CliError::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
            config.set(key, value.trim()).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(config)
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> CliResult<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{spec}` is not `key=value`")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let t = &mut self.train;
        let d = &mut self.data;
        match key {
            "combo" => t.combo = LossCombo::parse(value).map_err(|e| CliError::Config(e.to_string()))?,
            "batch_size" => t.batch_size = num(key, value)?,
            "epochs" => t.epochs = num(key, value)?,
            "lr" => t.lr = num(key, value)?,
            "lr_decay" => t.lr_decay = num(key, value)?,
            "lr_decay_every" => t.lr_decay_every = num(key, value)?,
            "seed" => t.seed = num(key, value)?,
            "prior" => {
                t.prior_mode = if value == "assume_source" {
                    PriorMode::AssumeSource
                } else {
                    let p = PriorVector::new(list(key, value)?).map_err(|e| CliError::Config(format!("prior: {e}")))?;
                    PriorMode::Known(p)
                }
            }
            "hidden" => t.hidden = list(key, value)?,
            "weight.ss" => t.weights.ss = num(key, value)?,
            "weight.tu" => t.weights.tu = num(key, value)?,
            "weight.su" => t.weights.su = num(key, value)?,
            "weight.ta" => t.weights.ta = num(key, value)?,
            "weight.sa" => t.weights.sa = num(key, value)?,
            "adam.beta1" => t.adam.beta1 = num(key, value)?,
            "adam.beta2" => t.adam.beta2 = num(key, value)?,
            "adam.eps" => t.adam.eps = num(key, value)?,
            "fake.mode" => {
                self.fake_mode = match value {
                    "auto" => FakeModeSetting::Auto,
                    "gaussian" => FakeModeSetting::Fixed(FakeMode::Gaussian),
                    "generator" => FakeModeSetting::Fixed(FakeMode::Generator),
                    _ => return Err(bad(key, value)),
                }
            }
            "fake.n_f" => t.fake.n_f = if value == "batch" { None } else { Some(num(key, value)?) },
            "fake.noise_dim" => t.fake.noise_dim = num(key, value)?,
            "fake.gamma" => {
                t.fake.gamma = if value == "median" {
                    Bandwidth::Median
                } else {
                    let g: f64 = num(key, value)?;
                    if !(g > 0.0 && g.is_finite()) {
                        return Err(bad(key, value));
                    }
                    Bandwidth::Fixed(g)
                }
            }
            "fake.hidden" => t.fake.hidden = list(key, value)?,
            "data.kind" => {
                d.kind = match value {
                    "two_moons" => DataKind::TwoMoons,
                    "gauss_shift" => DataKind::GaussShift,
                    "sparse" => DataKind::Sparse,
                    "digits" => DataKind::Digits,
                    _ => return Err(bad(key, value)),
                }
            }
            "data.seed" => d.seed = num(key, value)?,
            "data.standardize" => d.standardize = flag(key, value)?,
            "data.n_source" => d.n_source = num(key, value)?,
            "data.n_target" => d.n_target = num(key, value)?,
            "data.n_test" => d.n_test = num(key, value)?,
            "data.rotation" => d.rotation = num(key, value)?,
            "data.noise" => d.noise = num(key, value)?,
            "data.label_skew" => d.label_skew = if value == "none" { None } else { Some(list(key, value)?) },
            "data.classes" => d.classes = num(key, value)?,
            "data.dim" => d.dim = num(key, value)?,
            "data.mean_shift" => d.mean_shift = num(key, value)?,
            "data.cov_scale" => d.cov_scale = num(key, value)?,
            "data.source_path" => d.source_path = path(value),
            "data.target_path" => d.target_path = path(value),
            "data.test_path" => d.test_path = path(value),
            "data.digits_dir" => d.digits_dir = PathBuf::from(value),
            "data.direction" => {
                d.direction = match value {
                    "mnist_to_usps" => Direction::MnistToUsps,
                    "usps_to_mnist" => Direction::UspsToMnist,
                    _ => return Err(bad(key, value)),
                }
            }
            "out.dir" => self.out.dir = PathBuf::from(value),
            "out.embeddings" => self.out.embeddings = flag(key, value)?,
            "out.checkpoint_every" => self.out.checkpoint_every = num(key, value)?,
            "out.log_wall_clock" => self.out.log_wall_clock = flag(key, value)?,
            "oracle" => self.oracle = flag(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let d = &self.data;
        vec![
            ("combo", t.combo.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("epochs", t.epochs.to_string()),
            ("lr", float(t.lr)),
            ("lr_decay", float(t.lr_decay)),
            ("lr_decay_every", t.lr_decay_every.to_string()),
            ("seed", t.seed.to_string()),
            (
                "prior",
                match &t.prior_mode {
                    PriorMode::AssumeSource => "assume_source".to_string(),
                    PriorMode::Known(p) => floats(p.as_slice()),
                },
            ),
            ("hidden", join(&t.hidden)),
            ("weight.ss", float(t.weights.ss)),
            ("weight.tu", float(t.weights.tu)),
            ("weight.su", float(t.weights.su)),
            ("weight.ta", float(t.weights.ta)),
            ("weight.sa", float(t.weights.sa)),
            ("adam.beta1", float(t.adam.beta1)),
            ("adam.beta2", float(t.adam.beta2)),
            ("adam.eps", float(t.adam.eps)),
            (
                "fake.mode",
                match self.fake_mode {
                    FakeModeSetting::Auto => "auto",
                    FakeModeSetting::Fixed(FakeMode::Gaussian) => "gaussian",
                    FakeModeSetting::Fixed(FakeMode::Generator) => "generator",
                }
                .to_string(),
            ),
            ("fake.n_f", t.fake.n_f.map_or_else(|| "batch".to_string(), |n| n.to_string())),
            ("fake.noise_dim", t.fake.noise_dim.to_string()),
            (
                "fake.gamma",
                match t.fake.gamma {
                    Bandwidth::Median => "median".to_string(),
                    Bandwidth::Fixed(g) => float(g),
                },
            ),
            ("fake.hidden", join(&t.fake.hidden)),
            (
                "data.kind",
                match d.kind {
                    DataKind::TwoMoons => "two_moons",
                    DataKind::GaussShift => "gauss_shift",
                    DataKind::Sparse => "sparse",
                    DataKind::Digits => "digits",
                }
                .to_string(),
            ),
            ("data.seed", d.seed.to_string()),
            ("data.standardize", d.standardize.to_string()),
            ("data.n_source", d.n_source.to_string()),
            ("data.n_target", d.n_target.to_string()),
            ("data.n_test", d.n_test.to_string()),
            ("data.rotation", float(d.rotation)),
            ("data.noise", float(d.noise)),
            ("data.label_skew", d.label_skew.as_ref().map_or_else(|| "none".to_string(), |s| floats(s))),
            ("data.classes", d.classes.to_string()),
            ("data.dim", d.dim.to_string()),
            ("data.mean_shift", float(d.mean_shift)),
            ("data.cov_scale", float(d.cov_scale)),
            ("data.source_path", show_path(&d.source_path)),
            ("data.target_path", show_path(&d.target_path)),
            ("data.test_path", show_path(&d.test_path)),
            ("data.digits_dir", d.digits_dir.display().to_string()),
            (
                "data.direction",
                match d.direction {
                    Direction::MnistToUsps => "mnist_to_usps",
                    Direction::UspsToMnist => "usps_to_mnist",
                }
                .to_string(),
            ),
            ("out.dir", self.out.dir.display().to_string()),
            ("out.embeddings", self.out.embeddings.to_string()),
            ("out.checkpoint_every", self.out.checkpoint_every.to_string()),
            ("out.log_wall_clock", self.out.log_wall_clock.to_string()),
            ("oracle", self.oracle.to_string()),
        ]
    }

    pub fn render(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| if v.is_empty() { format!("{k} =\n") } else { format!("{k} = {v}\n") })
            .collect()
    }

    /// The training config with the fake mode resolved for the data kind.
    pub fn resolved_train(&self) -> TrainConfig {
        let mut t = self.train.clone();
        t.fake.mode = match self.fake_mode {
            FakeModeSetting::Fixed(m) => m,
            FakeModeSetting::Auto if self.data.kind == DataKind::Digits => FakeMode::Generator,
            FakeModeSetting::Auto => FakeMode::Gaussian,
        };
        t
    }

    pub fn validate(&self) -> CliResult<()> {
        self.resolved_train()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.data.kind == DataKind::Sparse {
            for (key, p) in [
                ("data.source_path", &self.data.source_path),
                ("data.target_path", &self.data.target_path),
                ("data.test_path", &self.data.test_path),
            ] {
                if p.is_none() {
                    return Err(CliError::Config(format!("`{key}` is required for sparse data")));
                }
            }
        }
        Ok(())
    }
}
