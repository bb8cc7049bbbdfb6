//! Builds the domain pair a config describes.

use std::path::Path;

use ctdr_core::data::{
    resize_bilinear, synth_gauss_shift, synth_two_moons, Dataset, DomainPair, GaussShiftConfig, TargetTrain,
    TwoMoonsConfig,
};
use ctdr_core::numerics::{Rng, Stream};
use ctdr_core::Matrix;

use crate::config::{DataConfig, DataKind, Direction};
use crate::idx::load_idx;
use crate::sparse::load_sparse;
use crate::{CliError, CliResult};

pub const DIGIT_SIDE: usize = 28;

pub const MNIST_TRAIN: (&str, &str) = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte");
pub const MNIST_TEST: (&str, &str) = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");
pub const USPS_TRAIN: (&str, &str) = ("usps-train-images-idx3-ubyte", "usps-train-labels-idx1-ubyte");
pub const USPS_TEST: (&str, &str) = ("usps-test-images-idx3-ubyte", "usps-test-labels-idx1-ubyte");

pub fn load_pair(cfg: &DataConfig) -> CliResult<DomainPair> {
    match cfg.kind {
        DataKind::TwoMoons => Ok(synth_two_moons(&TwoMoonsConfig {
            n_source: cfg.n_source,
            n_target: cfg.n_target,
            n_test: cfg.n_test,
            rotation_degrees: cfg.rotation,
            noise_std: cfg.noise,
            label_skew: cfg.label_skew.clone(),
            seed: cfg.seed,
        })?),
        DataKind::GaussShift => {
            if cfg.n_source != cfg.n_target || cfg.n_source != cfg.n_test {
                return Err(CliError::Config(
                    "gauss_shift draws equal split sizes; set data.n_source, data.n_target and data.n_test alike".into(),
                ));
            }
            Ok(synth_gauss_shift(&GaussShiftConfig {
                num_classes: cfg.classes,
                dim: cfg.dim,
                mean_shift: cfg.mean_shift,
                cov_scale: cfg.cov_scale,
                label_skew: cfg.label_skew.clone(),
                n: cfg.n_source,
                seed: cfg.seed,
            })?)
        }
        DataKind::Sparse => {
            let need = |p: &Option<std::path::PathBuf>, key: &str| {
                p.clone()
                    .ok_or_else(|| CliError::Config(format!("`{key}` is required for sparse data")))
            };
            let source = load_sparse(&need(&cfg.source_path, "data.source_path")?)?;
            let target = load_sparse(&need(&cfg.target_path, "data.target_path")?)?;
            let test = load_sparse(&need(&cfg.test_path, "data.test_path")?)?;
            Ok(DomainPair::new(source, TargetTrain::seal(target), test)?)
        }
        DataKind::Digits => load_digits(&cfg.digits_dir, cfg.direction, cfg),
    }
}

fn load_split(dir: &Path, files: (&str, &str)) -> CliResult<Dataset> {
    let (ds, (rows, cols)) = load_idx(&dir.join(files.0), &dir.join(files.1), 10)?;
    if (rows, cols) == (DIGIT_SIDE, DIGIT_SIDE) {
        return Ok(ds);
    }
    let mut data = Vec::with_capacity(ds.len() * DIGIT_SIDE * DIGIT_SIDE);
    for r in ds.features.row_iter() {
        data.extend(resize_bilinear(r, cols, rows, DIGIT_SIDE, DIGIT_SIDE));
    }
    let features = Matrix::from_vec(ds.len(), DIGIT_SIDE * DIGIT_SIDE, data)?;
    Ok(Dataset::new(ds.name, features, ds.labels, 10)?)
}

fn subsample(ds: &Dataset, n: usize, seed: u64, index: u32) -> Dataset {
    if n >= ds.len() {
        return ds.clone();
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    Rng::for_stream(seed, Stream::Data, index).shuffle(&mut idx);
    idx.truncate(n);
    idx.sort_unstable();
    ds.subset(&idx)
}

/// MNIST and USPS from IDX files in `dir`. Images that are not 28×28 (USPS is
/// 16×16) are resized bilinearly. Each split is subsampled without
/// replacement to the configured size.
pub fn load_digits(dir: &Path, direction: Direction, cfg: &DataConfig) -> CliResult<DomainPair> {
    let (s_train, t_train, t_test) = match direction {
        Direction::MnistToUsps => (MNIST_TRAIN, USPS_TRAIN, USPS_TEST),
        Direction::UspsToMnist => (USPS_TRAIN, MNIST_TRAIN, MNIST_TEST),
    };
    let source = subsample(&load_split(dir, s_train)?, cfg.n_source, cfg.seed, 100);
    let target = subsample(&load_split(dir, t_train)?, cfg.n_target, cfg.seed, 101);
    let test = subsample(&load_split(dir, t_test)?, cfg.n_test, cfg.seed, 102);
    Ok(DomainPair::new(source, TargetTrain::seal(target), test)?)
}

/// True when the MNIST and USPS train and test files are all present in `dir`.
pub fn digits_available(dir: &Path) -> bool {
    [MNIST_TRAIN, MNIST_TEST, USPS_TRAIN, USPS_TEST]
        .iter()
        .all(|(i, l)| dir.join(i).is_file() && dir.join(l).is_file())
}
