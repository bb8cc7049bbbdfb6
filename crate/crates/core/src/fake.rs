//! Fake negative samples for adversarial regularization: Gaussian draws in
//! input space, or a generator network trained with kernel MMD against real
//! encoder embeddings.

use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::losses::{median_heuristic_gamma, mmd_loss, LossReport};
use crate::model::{encode, encoder_input_grad, generator_backward, generator_forward, Model, ParamSet};
use crate::numerics::{Matrix, Rng};
use crate::train::{adam_update, AdamState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FakeMode {
    Gaussian,
    Generator,
}

/// Kernel bandwidth for the generator's MMD loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// `1 / (2 · median pairwise squared distance)` of the real batch embeddings.
    Median,
    Fixed(f64),
}

impl Bandwidth {
    pub fn resolve(&self, real_embeddings: &Matrix) -> f64 {
        match *self {
            Bandwidth::Median => median_heuristic_gamma(real_embeddings),
            Bandwidth::Fixed(g) => g,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FakeSourceConfig {
    pub mode: FakeMode,
    /// Fakes per step; `None` uses the training batch size.
    pub n_f: Option<usize>,
    pub noise_dim: usize,
    pub gamma: Bandwidth,
    /// Generator hidden widths.
    pub hidden: Vec<usize>,
}

impl Default for FakeSourceConfig {
    fn default() -> Self {
        Self {
            mode: FakeMode::Gaussian,
            n_f: None,
            noise_dim: 32,
            gamma: Bandwidth::Median,
            hidden: alloc::vec![128, 128],
        }
    }
}

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn from_features(x: &Matrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(contract!("feature statistics of an empty matrix"));
        }
        let s = crate::data::Standardizer::fit(&[x])?;
        Ok(Self {
            mean: s.mean,
            std: s.std,
        })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }
}

/// `n_f` rows with entry `d` drawn from `Normal(mean_d, std_d)`, row-major.
pub fn gaussian_fakes(stats: &FeatureStats, n_f: usize, rng: &mut Rng) -> Matrix {
    let d = stats.width();
    let mut out = Matrix::zeros(n_f, d);
    for i in 0..n_f {
        for (c, x) in out.row_mut(i).iter_mut().enumerate() {
            *x = rng.normal(stats.mean[c], stats.std[c]);
        }
    }
    out
}

fn noise(n_f: usize, noise_dim: usize, rng: &mut Rng) -> Matrix {
    let mut eta = Matrix::zeros(n_f, noise_dim);
    for x in eta.as_mut_slice() {
        *x = rng.standard_normal();
    }
    eta
}

/// `G_φ(η)` for `n_f` standard-normal noise rows.
pub fn generator_fakes(model: &Model, n_f: usize, rng: &mut Rng) -> Result<Matrix> {
    let noise_dim = model
        .arch
        .noise_dim()
        .ok_or_else(|| crate::Error::Config("generator parameters are not configured".into()))?;
    let eta = noise(n_f, noise_dim, rng);
    Ok(generator_forward(model, &eta)?.output().clone())
}

/// Outcome of one generator update.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorStep {
    /// Fakes produced by φ before the update.
    pub fakes: Matrix,
    /// Updated generator parameters.
    pub phi: ParamSet,
    /// MMD value before the update.
    pub report: LossReport,
}

/// One Adam step on `L_gen(φ)`, the MMD between `ρ(G_φ(η))` and `ρ(real)`.
/// θ is read-only here; gradients reach φ through the frozen encoder.
pub fn generator_step(
    model: &Model,
    state: &mut AdamState,
    real_batch: &Matrix,
    n_f: usize,
    gamma: Bandwidth,
    lr: f64,
    rng: &mut Rng,
) -> Result<GeneratorStep> {
    let noise_dim = model
        .arch
        .noise_dim()
        .ok_or_else(|| crate::Error::Config("generator parameters are not configured".into()))?;
    let eta = noise(n_f, noise_dim, rng);
    let gen_cache = generator_forward(model, &eta)?;
    let fakes = gen_cache.output().clone();
    let fake_enc = encode(model, &fakes)?;
    let real_emb = encode(model, real_batch)?.output().clone();
    let g = gamma.resolve(&real_emb);
    let report = mmd_loss(fake_enc.output(), &real_emb, g)?;
    let grad_fakes = encoder_input_grad(model, &fake_enc, &report.grad)?;
    let grads = generator_backward(model, &gen_cache, &grad_fakes)?;
    let mut phi = model.phi.clone().expect("generator_forward succeeded");
    adam_update(&mut phi, &grads, state, lr)?;
    Ok(GeneratorStep { fakes, phi, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;
    use crate::numerics::{finite_diff_grad, relative_error, Stream};

    fn model_with_generator(seed: u64) -> Model {
        Model::init(
            Architecture::mlp(3, &[6], 2).with_generator(4, &[8]),
            &mut Rng::for_stream(seed, Stream::Init, 0),
            &mut Rng::for_stream(seed, Stream::GeneratorInit, 0),
        )
        .unwrap()
    }

    #[test]
    fn zero_std_fakes_equal_mean() {
        let stats = FeatureStats {
            mean: alloc::vec![1.0, -2.0],
            std: alloc::vec![0.0, 0.0],
        };
        let f = gaussian_fakes(&stats, 5, &mut Rng::new(1));
        assert!(f.row_iter().all(|r| r == [1.0, -2.0]));
    }

    #[test]
    fn gaussian_fakes_golden_first_row() {
        let stats = FeatureStats {
            mean: alloc::vec![0.0, 10.0, -1.0],
            std: alloc::vec![1.0, 2.0, 0.5],
        };
        let f = gaussian_fakes(&stats, 2, &mut Rng::new(42));
        assert_eq!(f.cols(), 3);
        assert_eq!(f.row(0), GOLDEN_FAKE_ROW);
    }

    const GOLDEN_FAKE_ROW: &[f64] = &[-0.4605762415349221, 9.469663279579837, -1.3204635351257503];

    #[test]
    fn gaussian_fakes_follow_the_law_of_large_numbers() {
        let stats = FeatureStats {
            mean: alloc::vec![0.5, -3.0],
            std: alloc::vec![1.5, 0.2],
        };
        let n = 100_000;
        let f = gaussian_fakes(&stats, n, &mut Rng::new(8));
        for c in 0..2 {
            let mean = f.row_iter().map(|r| r[c]).sum::<f64>() / n as f64;
            let tol = 3.0 * stats.std[c] / libm::sqrt(n as f64);
            assert!((mean - stats.mean[c]).abs() < tol, "feature {c}: {mean}");
        }
    }

    #[test]
    fn generator_fakes_need_a_generator() {
        let model = Model::init(Architecture::mlp(3, &[4], 2), &mut Rng::new(1), &mut Rng::new(2)).unwrap();
        assert!(generator_fakes(&model, 3, &mut Rng::new(0)).is_err());
        let model = model_with_generator(3);
        assert_eq!(generator_fakes(&model, 3, &mut Rng::new(0)).unwrap().shape(), (3, 3));
    }

    #[test]
    fn generator_step_leaves_theta_alone_and_zero_lr_leaves_phi() {
        let model = model_with_generator(5);
        let real = gaussian_fakes(
            &FeatureStats { mean: alloc::vec![0.0; 3], std: alloc::vec![1.0; 3] },
            16,
            &mut Rng::new(6),
        );
        let mut state = AdamState::new(model.phi.as_ref().unwrap());
        let before = model.clone();
        let step = generator_step(&model, &mut state, &real, 8, Bandwidth::Median, 0.0, &mut Rng::new(7)).unwrap();
        assert_eq!(model, before);
        assert_eq!(&step.phi, model.phi.as_ref().unwrap());
        assert!(step.report.value >= -1e-9);
    }

    #[test]
    fn generator_gradient_matches_finite_differences() {
        let model = model_with_generator(9);
        let mut rng = Rng::new(10);
        let real = gaussian_fakes(
            &FeatureStats { mean: alloc::vec![0.0; 3], std: alloc::vec![1.0; 3] },
            6,
            &mut rng,
        );
        let eta = noise(5, 4, &mut rng);
        let gamma = 0.3;
        let loss = |m: &Model| -> (f64, Option<ParamSet>) {
            let gen = generator_forward(m, &eta).unwrap();
            let fe = encode(m, gen.output()).unwrap();
            let re = encode(m, &real).unwrap();
            let r = mmd_loss(fe.output(), re.output(), gamma).unwrap();
            let gf = encoder_input_grad(m, &fe, &r.grad).unwrap();
            (r.value, Some(generator_backward(m, &gen, &gf).unwrap()))
        };
        let analytic = loss(&model).1.unwrap().flatten();
        let mut probe = model.clone();
        let fd = finite_diff_grad(
            |flat| {
                probe.phi.as_mut().unwrap().assign_flat(flat).unwrap();
                loss(&probe).0
            },
            &model.phi.as_ref().unwrap().flatten(),
            1e-5,
        );
        assert!(relative_error(&analytic, &fd.estimate) <= 1e-4);
    }

    #[test]
    fn mmd_decreases_over_generator_training() {
        let mut model = model_with_generator(11);
        let real = gaussian_fakes(
            &FeatureStats { mean: alloc::vec![2.0, -1.0, 0.5], std: alloc::vec![0.5; 3] },
            32,
            &mut Rng::new(12),
        );
        let mut state = AdamState::new(model.phi.as_ref().unwrap());
        let mut rng = Rng::new(13);
        let mut values = Vec::new();
        for _ in 0..50 {
            let step = generator_step(&model, &mut state, &real, 32, Bandwidth::Median, 1e-2, &mut rng).unwrap();
            values.push(step.report.value);
            model.phi = Some(step.phi);
        }
        let avg = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let windows: Vec<f64> = values.windows(10).map(avg).collect();
        assert!(windows[windows.len() - 1] < windows[0], "{values:?}");
    }
}
