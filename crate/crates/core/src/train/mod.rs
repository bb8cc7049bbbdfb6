//! The joint training loop: supervised source cross-entropy, the target
//! contradistinguish loss and optional adversarial regularization, summed
//! with per-term weights and optimized with Adam under a step-decay schedule.

mod adam;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::data::{empirical_prior, BatchStream, Batcher, Dataset, DomainPair, OracleAccess};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::fake::{gaussian_fakes, generator_fakes, generator_step, FakeMode, FakeSourceConfig, FeatureStats};
use crate::losses::{adv_bce, contradist_loss, pseudo_label_select, source_ce, LossReport, PriorVector};
use crate::model::{backward, forward, Architecture, Model, ParamSet};
use crate::numerics::{Matrix, Rng, Stream};

pub use adam::{adam_update, AdamConfig, AdamState};

/// Which loss terms a run optimizes.
///
/// `ts` (target supervised) is the oracle baseline and cannot be combined
/// with anything else.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LossCombo {
    /// Source supervised cross-entropy.
    pub ss: bool,
    /// Contradistinguish loss on target batches.
    pub tu: bool,
    /// Contradistinguish loss on source batches, labels ignored, source prior.
    pub su: bool,
    /// Adversarial regularization on target-space fakes.
    pub ta: bool,
    /// Adversarial regularization on source-space fakes.
    pub sa: bool,
    /// Target supervised (oracle baseline).
    pub ts: bool,
}

impl LossCombo {
    pub const SOURCE_ONLY: LossCombo = LossCombo {
        ss: true,
        tu: false,
        su: false,
        ta: false,
        sa: false,
        ts: false,
    };
    pub const TARGET_ORACLE: LossCombo = LossCombo {
        ss: false,
        tu: false,
        su: false,
        ta: false,
        sa: false,
        ts: true,
    };

    /// Parses flags separated by `,` or `+`, e.g. `ss,tu` or `ss+tu+ta`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut combo = LossCombo::default();
        for flag in s.split([',', '+']).map(str::trim).filter(|f| !f.is_empty()) {
            let slot = match flag {
                "ss" => &mut combo.ss,
                "tu" => &mut combo.tu,
                "su" => &mut combo.su,
                "ta" => &mut combo.ta,
                "sa" => &mut combo.sa,
                "ts" => &mut combo.ts,
                other => return Err(Error::Config(format!("unknown loss flag `{other}`"))),
            };
            *slot = true;
        }
        combo.validate()?;
        Ok(combo)
    }

    pub fn validate(&self) -> Result<()> {
        let others = self.ss || self.tu || self.su || self.ta || self.sa;
        if !others && !self.ts {
            return Err(Error::Config("loss combo enables no terms".into()));
        }
        if self.ts && others {
            return Err(Error::Config("`ts` is the oracle baseline and excludes all other terms".into()));
        }
        Ok(())
    }

    pub fn adversarial(&self) -> bool {
        self.ta || self.sa
    }

    pub fn needs_prior(&self) -> bool {
        self.tu || self.su
    }
}

impl fmt::Display for LossCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flags = [
            ("ss", self.ss),
            ("tu", self.tu),
            ("su", self.su),
            ("ta", self.ta),
            ("sa", self.sa),
            ("ts", self.ts),
        ];
        let mut first = true;
        for (name, on) in flags {
            if on {
                if !first {
                    f.write_str("+")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorMode {
    Known(PriorVector),
    /// Use the empirical source label distribution as the target prior.
    AssumeSource,
}

/// Multipliers on each term's gradient. A zero weight disables the term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermWeights {
    pub ss: f64,
    pub tu: f64,
    pub su: f64,
    pub ta: f64,
    pub sa: f64,
}

impl Default for TermWeights {
    fn default() -> Self {
        Self {
            ss: 1.0,
            tu: 1.0,
            su: 1.0,
            ta: 1.0,
            sa: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub combo: LossCombo,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub seed: u64,
    pub prior_mode: PriorMode,
    pub fake: FakeSourceConfig,
    /// Encoder hidden widths; the classifier head is one affine layer.
    pub hidden: Vec<usize>,
    pub weights: TermWeights,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            combo: LossCombo {
                ss: true,
                tu: true,
                ..LossCombo::default()
            },
            batch_size: 128,
            epochs: 100,
            lr: 1e-3,
            lr_decay: 0.6,
            lr_decay_every: 30,
            seed: 0,
            prior_mode: PriorMode::AssumeSource,
            fake: FakeSourceConfig::default(),
            hidden: alloc::vec![128, 128],
            weights: TermWeights::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.combo.validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!("lr_decay must be in (0, 1], got {}", self.lr_decay)));
        }
        if self.lr_decay_every == 0 {
            return Err(Error::Config("lr_decay_every must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.fake.n_f == Some(0) {
            return Err(Error::Config("fake batch size must be at least 1".into()));
        }
        if self.fake.mode == FakeMode::Generator && self.fake.noise_dim == 0 {
            return Err(Error::Config("generator noise_dim must be at least 1".into()));
        }
        Ok(())
    }

    /// `lr · lr_decay^⌊epoch / lr_decay_every⌋` (epochs counted from 0).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * libm::pow(self.lr_decay, (epoch / self.lr_decay_every) as f64)
    }

    pub fn fake_batch(&self) -> usize {
        self.fake.n_f.unwrap_or(self.batch_size)
    }

    fn uses_generator(&self) -> bool {
        self.combo.adversarial() && self.fake.mode == FakeMode::Generator
    }

    /// Network (and generator, when adversarial terms use one) for the data.
    pub fn architecture(&self, input_dim: usize, num_classes: usize) -> Architecture {
        let arch = Architecture::mlp(input_dim, &self.hidden, num_classes);
        if self.uses_generator() {
            arch.with_generator(self.fake.noise_dim, &self.fake.hidden)
        } else {
            arch
        }
    }

    /// Seeded initial model.
    pub fn init_model(&self, input_dim: usize, num_classes: usize) -> Result<Model> {
        Model::init(
            self.architecture(input_dim, num_classes),
            &mut Rng::for_stream(self.seed, Stream::Init, 0),
            &mut Rng::for_stream(self.seed, Stream::GeneratorInit, 0),
        )
    }
}

/// The prior used by the contradistinguish loss.
pub fn resolve_prior(config: &TrainConfig, source: &Dataset) -> Result<PriorVector> {
    match &config.prior_mode {
        PriorMode::Known(p) => {
            if p.num_classes() != source.num_classes {
                return Err(Error::Config(format!(
                    "known prior has {} classes but the data has {}",
                    p.num_classes(),
                    source.num_classes
                )));
            }
            Ok(p.clone())
        }
        PriorMode::AssumeSource => empirical_prior(source),
    }
}

/// Loss values of one step, keyed by term. Only computed terms are `Some`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TermValues {
    pub ss: Option<f64>,
    pub tu: Option<f64>,
    pub su: Option<f64>,
    pub ta: Option<f64>,
    pub sa: Option<f64>,
    pub gen: Option<f64>,
}

impl TermValues {
    fn slot(&mut self, name: &str) -> &mut Option<f64> {
        match name {
            "ss" | "ts" => &mut self.ss,
            "tu" => &mut self.tu,
            "su" => &mut self.su,
            "ta" => &mut self.ta,
            "sa" => &mut self.sa,
            _ => &mut self.gen,
        }
    }

    /// Value of a term by metrics name (`ss`, `tu`, `su`, `ta`, `sa`, `gen`).
    pub fn get(&self, name: &str) -> Option<f64> {
        *self.clone().slot(name)
    }

    fn accumulate(&mut self, other: &TermValues) {
        for name in TERM_NAMES {
            if let Some(v) = other.get(name) {
                let s = self.slot(name);
                *s = Some(s.unwrap_or(0.0) + v);
            }
        }
    }
}

/// Optimizer state for θ and, when a generator is trained, φ.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub theta: AdamState,
    pub phi: Option<AdamState>,
}

impl OptimizerState {
    pub fn new(model: &Model, config: AdamConfig) -> Self {
        Self {
            theta: AdamState::with_config(&model.theta, config),
            phi: model.phi.as_ref().map(|p| AdamState::with_config(p, config)),
        }
    }
}

/// Fixed inputs shared by every step of a run.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub prior: Option<PriorVector>,
    pub source_prior: Option<PriorVector>,
    pub target_stats: Option<FeatureStats>,
    pub source_stats: Option<FeatureStats>,
}

/// Independent random streams consumed during training steps.
#[derive(Debug, Clone)]
pub struct StepRngs {
    pub target_fakes: Rng,
    pub source_fakes: Rng,
    pub generator_noise: Rng,
}

impl StepRngs {
    pub fn new(seed: u64) -> Self {
        Self {
            target_fakes: Rng::for_stream(seed, Stream::TargetFakes, 0),
            source_fakes: Rng::for_stream(seed, Stream::SourceFakes, 0),
            generator_noise: Rng::for_stream(seed, Stream::GeneratorNoise, 0),
        }
    }
}

fn add_term(
    total: &mut Option<ParamSet>,
    model: &Model,
    report: &LossReport,
    cache: &crate::model::ForwardCache,
    weight: f64,
) -> Result<()> {
    let grad = if weight == 1.0 {
        report.grad.clone()
    } else {
        report.grad.map(|g| g * weight)
    };
    let g = backward(model, cache, &grad)?;
    match total {
        None => *total = Some(g),
        Some(t) => t.axpy(1.0, &g)?,
    }
    Ok(())
}

fn check(report: &LossReport, term: &'static str, bad: &mut Option<(&'static str, f64)>) {
    if bad.is_none() {
        if !report.value.is_finite() {
            *bad = Some((term, report.value));
        } else if !report.grad.is_finite() {
            *bad = Some((term, f64::NAN));
        }
    }
}

/// Batch inputs of one step. Target batches never carry labels.
#[derive(Debug, Clone, Copy)]
pub struct StepBatch<'a> {
    pub source: &'a Matrix,
    pub source_labels: &'a [usize],
    pub target: &'a Matrix,
}

/// Outcome of [`train_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reports: Vec<LossReport>,
    pub values: TermValues,
}

/// One optimization step over exactly the enabled terms, followed by one Adam
/// update of θ and, in generator mode with adversarial terms, one of φ.
///
/// # Errors
/// [`Error::NonFiniteLoss`] (with `epoch`/`step` left at 0 for the caller to
/// fill in) if any term is NaN or infinite; no parameters change in that case.
pub fn train_step(
    model: &mut Model,
    opt: &mut OptimizerState,
    batch: StepBatch<'_>,
    config: &TrainConfig,
    ctx: &StepContext,
    rngs: &mut StepRngs,
    lr: f64,
) -> Result<StepOutcome> {
    let combo = config.combo;
    let w = config.weights;
    let mut reports: Vec<LossReport> = Vec::new();
    let mut total: Option<ParamSet> = None;
    let mut bad: Option<(&'static str, f64)> = None;

    let supervised = combo.ss || combo.ts;
    let need_source_forward = (supervised && w.ss != 0.0) || (combo.su && w.su != 0.0);
    let source_fwd = if need_source_forward && batch.source.rows() > 0 {
        Some(forward(model, batch.source)?)
    } else {
        None
    };

    if let (true, Some(cache)) = (supervised && w.ss != 0.0, &source_fwd) {
        let mut r = source_ce(&cache.probs, batch.source_labels)?;
        if combo.ts {
            r.name = "ts";
        }
        check(&r, "ss", &mut bad);
        add_term(&mut total, model, &r, cache, w.ss)?;
        reports.push(r);
    }

    if combo.tu && w.tu != 0.0 && batch.target.rows() > 0 {
        let prior = ctx.prior.as_ref().ok_or_else(|| Error::Config("tu needs a target prior".into()))?;
        let cache = forward(model, batch.target)?;
        let pseudo = pseudo_label_select(&cache.probs, prior)?;
        let r = contradist_loss(&cache.probs, &pseudo, prior)?;
        check(&r, "tu", &mut bad);
        add_term(&mut total, model, &r, &cache, w.tu)?;
        reports.push(r);
    }

    if let (true, Some(cache)) = (combo.su && w.su != 0.0, &source_fwd) {
        let prior = ctx
            .source_prior
            .as_ref()
            .ok_or_else(|| Error::Config("su needs a source prior".into()))?;
        let pseudo = pseudo_label_select(&cache.probs, prior)?;
        let mut r = contradist_loss(&cache.probs, &pseudo, prior)?;
        r.name = "su";
        check(&r, "su", &mut bad);
        add_term(&mut total, model, &r, cache, w.su)?;
        reports.push(r);
    }

    let n_f = config.fake_batch();
    let ta = combo.ta && w.ta != 0.0;
    let sa = combo.sa && w.sa != 0.0;
    let mut new_phi = None;
    if ta || sa {
        let (target_fakes, source_fakes) = match config.fake.mode {
            FakeMode::Gaussian => {
                let tf = if ta {
                    let stats = ctx.target_stats.as_ref().ok_or_else(|| Error::Config("ta needs target statistics".into()))?;
                    Some(gaussian_fakes(stats, n_f, &mut rngs.target_fakes))
                } else {
                    None
                };
                let sf = if sa {
                    let stats = ctx.source_stats.as_ref().ok_or_else(|| Error::Config("sa needs source statistics".into()))?;
                    Some(gaussian_fakes(stats, n_f, &mut rngs.source_fakes))
                } else {
                    None
                };
                (tf, sf)
            }
            FakeMode::Generator => {
                let phi_state = opt
                    .phi
                    .as_mut()
                    .ok_or_else(|| Error::Config("generator mode without generator parameters".into()))?;
                let step = generator_step(
                    model,
                    phi_state,
                    batch.target,
                    n_f,
                    config.fake.gamma,
                    lr,
                    &mut rngs.generator_noise,
                )?;
                let sf = if sa {
                    Some(generator_fakes(model, n_f, &mut rngs.source_fakes)?)
                } else {
                    None
                };
                check(&step.report, "gen", &mut bad);
                reports.push(step.report);
                new_phi = Some(step.phi);
                (ta.then_some(step.fakes), sf)
            }
        };
        for (fakes, name, weight) in [(target_fakes, "ta", w.ta), (source_fakes, "sa", w.sa)] {
            if let Some(fakes) = fakes {
                let cache = forward(model, &fakes)?;
                let mut r = adv_bce(&cache.probs);
                r.name = name;
                check(&r, name, &mut bad);
                add_term(&mut total, model, &r, &cache, weight)?;
                reports.push(r);
            }
        }
    }

    if let Some((term, value)) = bad {
        return Err(Error::NonFiniteLoss {
            term,
            epoch: 0,
            step: 0,
            value,
        });
    }
    if let Some(grads) = total {
        adam_update(&mut model.theta, &grads, &mut opt.theta, lr)?;
    }
    if let Some(phi) = new_phi {
        model.phi = Some(phi);
    }
    let mut values = TermValues::default();
    for r in &reports {
        *values.slot(r.name) = Some(r.value);
    }
    Ok(StepOutcome { reports, values })
}

/// One record per epoch. Loss values are per-sample means over the epoch's
/// steps; a term that never ran is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub loss: TermValues,
    pub source_train_accuracy: f64,
    pub target_test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: Model,
    pub metrics: Vec<EpochMetrics>,
    pub warnings: Vec<String>,
}

fn rows_for(name: &str, batch: &StepBatch<'_>, n_f: usize) -> usize {
    match name {
        "ss" | "ts" | "su" => batch.source.rows(),
        "tu" => batch.target.rows(),
        _ => n_f,
    }
}

fn check_prior(prior: &PriorVector, what: &str, warnings: &mut Vec<String>) {
    let empty = prior.as_slice().iter().filter(|&&p| p == 0.0).count();
    if empty > 0 {
        warnings.push(format!("{what} assigns zero mass to {empty} of {} classes", prior.num_classes()));
    }
}

fn run(
    config: &TrainConfig,
    supervised: &Dataset,
    target: &Matrix,
    test: &Dataset,
    on_epoch: &mut dyn FnMut(&EpochMetrics, &Model),
) -> Result<FitResult> {
    config.validate()?;
    let mut warnings = Vec::new();
    let combo = config.combo;
    let labels = supervised.labels()?;
    if supervised.is_empty() {
        return Err(Error::Config("supervised set is empty".into()));
    }
    if config.batch_size > supervised.len() {
        warnings.push(format!(
            "batch size {} exceeds the {} supervised rows",
            config.batch_size,
            supervised.len()
        ));
    }
    let prior = if combo.tu {
        let p = resolve_prior(config, supervised)?;
        check_prior(&p, "target prior", &mut warnings);
        Some(p)
    } else {
        None
    };
    let source_prior = if combo.su {
        let p = empirical_prior(supervised)?;
        check_prior(&p, "source prior", &mut warnings);
        Some(p)
    } else {
        None
    };
    let gaussian = config.fake.mode == FakeMode::Gaussian;
    let ctx = StepContext {
        prior,
        source_prior,
        target_stats: (combo.ta && gaussian).then(|| FeatureStats::from_features(target)).transpose()?,
        source_stats: (combo.sa && gaussian)
            .then(|| FeatureStats::from_features(&supervised.features))
            .transpose()?,
    };

    let mut model = config.init_model(supervised.width(), supervised.num_classes)?;
    let mut opt = OptimizerState::new(&model, config.adam);
    let mut rngs = StepRngs::new(config.seed);
    let source_batcher = Batcher::new(supervised.len(), config.batch_size, config.seed, Stream::SourceShuffle);
    let mut target_stream = BatchStream::new(Batcher::new(
        target.rows(),
        config.batch_size,
        config.seed,
        Stream::TargetShuffle,
    ));
    let uses_target = combo.tu || (combo.ta || combo.sa) && !gaussian;
    let n_f = config.fake_batch();
    let empty = Matrix::zeros(0, target.cols());
    let mut metrics = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        let mut sums = TermValues::default();
        let mut counts = [0usize; 6];
        for (step, idx) in source_batcher.epoch(epoch).into_iter().enumerate() {
            let xs = supervised.features.select_rows(&idx);
            let ys: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let xt = if uses_target {
                target.select_rows(&target_stream.next_batch())
            } else {
                empty.clone()
            };
            let batch = StepBatch {
                source: &xs,
                source_labels: &ys,
                target: &xt,
            };
            let outcome = match train_step(&mut model, &mut opt, batch, config, &ctx, &mut rngs, lr) {
                Ok(o) => o,
                Err(Error::NonFiniteLoss { term, value, .. }) => {
                    return Err(Error::NonFiniteLoss {
                        term,
                        epoch,
                        step,
                        value,
                    })
                }
                Err(e) => return Err(e),
            };
            for r in &outcome.reports {
                let slot = TERM_NAMES.iter().position(|n| *n == canonical(r.name)).unwrap_or(5);
                counts[slot] += rows_for(r.name, &batch, n_f);
            }
            sums.accumulate(&outcome.values);
        }
        let mut loss = TermValues::default();
        for (i, name) in TERM_NAMES.iter().enumerate() {
            if let Some(v) = *sums.slot(name) {
                *loss.slot(name) = Some(v / counts[i].max(1) as f64);
            }
        }
        let record = EpochMetrics {
            epoch,
            lr,
            loss,
            source_train_accuracy: evaluate(&model, supervised)?.accuracy,
            target_test_accuracy: evaluate(&model, test)?.accuracy,
        };
        on_epoch(&record, &model);
        metrics.push(record);
    }
    Ok(FitResult {
        model,
        metrics,
        warnings,
    })
}

const TERM_NAMES: [&str; 6] = ["ss", "tu", "su", "ta", "sa", "gen"];

fn canonical(name: &str) -> &str {
    if name == "ts" {
        "ss"
    } else {
        name
    }
}

/// Trains on the source labels and unlabeled target-train features. `on_epoch`
/// receives each epoch's metrics and the model after that epoch.
///
/// # Errors
/// [`Error::OracleRequired`] for the `ts` combo (use [`fit_oracle`]);
/// [`Error::NonFiniteLoss`] naming the term, epoch and step on divergence.
pub fn fit(config: &TrainConfig, pair: &DomainPair, mut on_epoch: impl FnMut(&EpochMetrics, &Model)) -> Result<FitResult> {
    if config.combo.ts {
        return Err(Error::OracleRequired(
            "the ts combo trains on target-train labels and needs oracle access".into(),
        ));
    }
    run(
        config,
        &pair.source,
        pair.target_train.features(),
        &pair.target_test,
        &mut on_epoch,
    )
}

/// Target-supervised oracle run: the `ts` combo on unsealed target-train labels.
/// `source_train_accuracy` in the metrics then refers to the target-train set.
pub fn fit_oracle(
    config: &TrainConfig,
    pair: &DomainPair,
    access: OracleAccess,
    mut on_epoch: impl FnMut(&EpochMetrics, &Model),
) -> Result<FitResult> {
    if !config.combo.ts {
        return Err(Error::Config("fit_oracle runs only the ts combo".into()));
    }
    let labeled = pair.target_train.unseal(access)?;
    run(config, &labeled, &labeled.features, &pair.target_test, &mut on_epoch)
}
