//! The contradistinguisher network (encoder + classifier head) and the
//! optional fake-sample generator, with exact reverse-mode gradients.
//!
//! Layers compute `x · W + b` with `W` stored `in_dim × out_dim` and `b` as a
//! `1 × out_dim` row. Parameters are named `encoder.{i}.weight`,
//! `encoder.{i}.bias`, `classifier.weight`, `classifier.bias`, and
//! `generator.{i}.weight` / `generator.{i}.bias`.

mod checkpoint;
mod params;

use alloc::format;
use alloc::vec::Vec;

use crate::error::{contract, Error, Result};
use crate::numerics::{softmax_rows, Matrix, Rng};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use params::{Param, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }

    /// Weight + bias scalar count.
    pub fn num_params(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

/// Layer stacks of the encoder, the classifier head and the optional generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub encoder: Vec<LayerSpec>,
    pub classifier: LayerSpec,
    pub generator: Option<Vec<LayerSpec>>,
}

impl Architecture {
    /// ReLU encoder with the given hidden widths and an affine classifier head.
    pub fn mlp(input_dim: usize, hidden: &[usize], num_classes: usize) -> Self {
        let mut encoder = Vec::with_capacity(hidden.len());
        let mut width = input_dim;
        for &h in hidden {
            encoder.push(LayerSpec::new(width, h, Activation::Relu));
            width = h;
        }
        Self {
            encoder,
            classifier: LayerSpec::new(width, num_classes, Activation::None),
            generator: None,
        }
    }

    /// Adds a generator `noise_dim → hidden (ReLU) → input_dim (affine)`.
    pub fn with_generator(mut self, noise_dim: usize, hidden: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = noise_dim;
        for &h in hidden {
            layers.push(LayerSpec::new(width, h, Activation::Relu));
            width = h;
        }
        layers.push(LayerSpec::new(width, self.input_dim(), Activation::None));
        self.generator = Some(layers);
        self
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.first().map_or(self.classifier.in_dim, |l| l.in_dim)
    }

    pub fn embedding_dim(&self) -> usize {
        self.classifier.in_dim
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.out_dim
    }

    pub fn noise_dim(&self) -> Option<usize> {
        self.generator.as_ref().and_then(|g| g.first()).map(|l| l.in_dim)
    }

    /// Encoder layers followed by the classifier head.
    pub fn network_layers(&self) -> Vec<LayerSpec> {
        let mut layers = self.encoder.clone();
        layers.push(self.classifier);
        layers
    }

    pub fn validate(&self) -> Result<()> {
        let check_chain = |layers: &[LayerSpec], what: &str| -> Result<()> {
            for (i, l) in layers.iter().enumerate() {
                if l.in_dim == 0 || l.out_dim == 0 {
                    return Err(Error::Config(format!("{what} layer {i} has a zero dimension")));
                }
                if i > 0 && layers[i - 1].out_dim != l.in_dim {
                    return Err(Error::Config(format!(
                        "{what} layer {i} expects width {} but previous layer outputs {}",
                        l.in_dim,
                        layers[i - 1].out_dim
                    )));
                }
            }
            Ok(())
        };
        check_chain(&self.network_layers(), "network")?;
        if self.classifier.activation != Activation::None {
            return Err(Error::Config("classifier head must be affine".into()));
        }
        if self.num_classes() < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if let Some(g) = &self.generator {
            if g.is_empty() {
                return Err(Error::Config("generator has no layers".into()));
            }
            check_chain(g, "generator")?;
            let out = g[g.len() - 1].out_dim;
            if out != self.input_dim() {
                return Err(Error::Config(format!(
                    "generator outputs width {out} but the input width is {}",
                    self.input_dim()
                )));
            }
        }
        Ok(())
    }
}

/// Architecture plus the classifier parameters θ and optional generator
/// parameters φ.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: Architecture,
    pub theta: ParamSet,
    pub phi: Option<ParamSet>,
}

impl Model {
    /// Weights uniform in `±1/√fan_in`, biases zero. θ draws from `theta_rng`,
    /// φ (when the architecture has a generator) from `phi_rng`.
    pub fn init(arch: Architecture, theta_rng: &mut Rng, phi_rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let theta = init_stack(&arch.network_layers(), &network_names(&arch), theta_rng);
        let phi = arch
            .generator
            .as_ref()
            .map(|g| init_stack(g, &generator_names(g.len()), phi_rng));
        Ok(Self { arch, theta, phi })
    }

    /// Builds a model from existing parameters after checking their shapes.
    pub fn from_parts(arch: Architecture, theta: ParamSet, phi: Option<ParamSet>) -> Result<Self> {
        arch.validate()?;
        let model = Self { arch, theta, phi };
        model.check_shapes()?;
        Ok(model)
    }

    pub(crate) fn check_shapes(&self) -> Result<()> {
        check_stack_shapes(&self.arch.network_layers(), &network_names(&self.arch), &self.theta)?;
        match (&self.arch.generator, &self.phi) {
            (Some(g), Some(phi)) => check_stack_shapes(g, &generator_names(g.len()), phi),
            (None, None) => Ok(()),
            (Some(_), None) => Err(Error::ShapeMismatch("generator parameters missing".into())),
            (None, Some(_)) => Err(Error::ShapeMismatch(
                "generator parameters present without a generator spec".into(),
            )),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes()
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim()
    }
}

fn network_names(arch: &Architecture) -> Vec<(alloc::string::String, alloc::string::String)> {
    let mut names: Vec<_> = (0..arch.encoder.len())
        .map(|i| (format!("encoder.{i}.weight"), format!("encoder.{i}.bias")))
        .collect();
    names.push(("classifier.weight".into(), "classifier.bias".into()));
    names
}

fn generator_names(n: usize) -> Vec<(alloc::string::String, alloc::string::String)> {
    (0..n)
        .map(|i| (format!("generator.{i}.weight"), format!("generator.{i}.bias")))
        .collect()
}

fn init_stack(
    layers: &[LayerSpec],
    names: &[(alloc::string::String, alloc::string::String)],
    rng: &mut Rng,
) -> ParamSet {
    let mut params = ParamSet::default();
    for (l, (wn, bn)) in layers.iter().zip(names) {
        let bound = 1.0 / libm::sqrt(l.in_dim as f64);
        let mut w = Matrix::zeros(l.in_dim, l.out_dim);
        for x in w.as_mut_slice() {
            *x = rng.uniform(-bound, bound);
        }
        params.push(wn.clone(), w);
        params.push(bn.clone(), Matrix::zeros(1, l.out_dim));
    }
    params
}

fn check_stack_shapes(
    layers: &[LayerSpec],
    names: &[(alloc::string::String, alloc::string::String)],
    params: &ParamSet,
) -> Result<()> {
    if params.len() != 2 * layers.len() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} tensors, found {}",
            2 * layers.len(),
            params.len()
        )));
    }
    for (i, (l, (wn, bn))) in layers.iter().zip(names).enumerate() {
        let w = &params.entries()[2 * i];
        let b = &params.entries()[2 * i + 1];
        if &w.name != wn || &b.name != bn {
            return Err(Error::ShapeMismatch(format!(
                "expected tensors {wn}/{bn}, found {}/{}",
                w.name, b.name
            )));
        }
        if w.value.shape() != (l.in_dim, l.out_dim) || b.value.shape() != (1, l.out_dim) {
            return Err(Error::ShapeMismatch(format!(
                "{wn} is {:?} and {bn} is {:?}, layer spec needs {}x{}",
                w.value.shape(),
                b.value.shape(),
                l.in_dim,
                l.out_dim
            )));
        }
    }
    Ok(())
}

/// Activations of a layer stack. `activations[0]` is the input and
/// `activations[i + 1]` the output of layer `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackCache {
    pub pre_activations: Vec<Matrix>,
    pub activations: Vec<Matrix>,
}

impl StackCache {
    pub fn output(&self) -> &Matrix {
        &self.activations[self.activations.len() - 1]
    }
}

fn stack_forward(layers: &[LayerSpec], params: &[Param], x: &Matrix) -> Result<StackCache> {
    let first = layers.first().map_or(0, |l| l.in_dim);
    if x.cols() != first {
        return Err(contract!(
            "input width {} does not match layer input width {first}",
            x.cols()
        ));
    }
    let mut pre_activations = Vec::with_capacity(layers.len());
    let mut activations = Vec::with_capacity(layers.len() + 1);
    activations.push(x.clone());
    for (i, l) in layers.iter().enumerate() {
        let input = &activations[i];
        let mut z = input.matmul(&params[2 * i].value)?;
        z.add_row_broadcast(&params[2 * i + 1].value)?;
        let a = match l.activation {
            Activation::Relu => z.map(|v| if v > 0.0 { v } else { 0.0 }),
            Activation::None => z.clone(),
        };
        pre_activations.push(z);
        activations.push(a);
    }
    Ok(StackCache {
        pre_activations,
        activations,
    })
}

/// Backpropagates `grad_out` (gradient of a scalar w.r.t. the stack output).
/// Returns per-tensor gradients when `param_grads` is set, and the gradient
/// w.r.t. the stack input when `input_grad` is set.
fn stack_backward(
    layers: &[LayerSpec],
    params: &[Param],
    cache: &StackCache,
    grad_out: &Matrix,
    param_grads: bool,
    input_grad: bool,
) -> Result<(Vec<Matrix>, Option<Matrix>)> {
    if grad_out.shape() != cache.output().shape() {
        return Err(contract!(
            "gradient shape {:?} does not match output shape {:?}",
            grad_out.shape(),
            cache.output().shape()
        ));
    }
    let mut grads: Vec<Matrix> = Vec::new();
    if param_grads {
        grads.resize(2 * layers.len(), Matrix::zeros(0, 0));
    }
    let mut upstream = grad_out.clone();
    for i in (0..layers.len()).rev() {
        // upstream: d/d(activation i+1) → d/d(pre-activation i)
        if layers[i].activation == Activation::Relu {
            let pre = &cache.pre_activations[i];
            for (g, &z) in upstream.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        if param_grads {
            grads[2 * i] = cache.activations[i].t_matmul(&upstream)?;
            grads[2 * i + 1] = upstream.sum_rows();
        }
        if i > 0 || input_grad {
            upstream = upstream.matmul_t(&params[2 * i].value)?;
        }
    }
    Ok((grads, input_grad.then_some(upstream)))
}

/// Everything the backward pass and the losses need from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub stack: StackCache,
    /// Encoder output ρ(x), the classifier input.
    pub embeddings: Matrix,
    pub logits: Matrix,
    pub probs: Matrix,
}

pub fn forward(model: &Model, x: &Matrix) -> Result<ForwardCache> {
    let layers = model.arch.network_layers();
    let stack = stack_forward(&layers, model.theta.entries(), x)?;
    let embeddings = stack.activations[model.arch.encoder.len()].clone();
    let logits = stack.output().clone();
    let probs = softmax_rows(&logits);
    Ok(ForwardCache {
        stack,
        embeddings,
        logits,
        probs,
    })
}

/// Gradients of `Σ grad_logits ⊙ logits` w.r.t. every θ tensor.
pub fn backward(model: &Model, cache: &ForwardCache, grad_logits: &Matrix) -> Result<ParamSet> {
    let layers = model.arch.network_layers();
    let (grads, _) = stack_backward(
        &layers,
        model.theta.entries(),
        &cache.stack,
        grad_logits,
        true,
        false,
    )?;
    Ok(model.theta.with_values(grads))
}

/// Encoder-only forward pass, returning ρ(x) and the cache needed to
/// backpropagate into the input.
pub fn encode(model: &Model, x: &Matrix) -> Result<StackCache> {
    let n = model.arch.encoder.len();
    if x.cols() != model.input_dim() {
        return Err(contract!(
            "input width {} does not match model input width {}",
            x.cols(),
            model.input_dim()
        ));
    }
    stack_forward(&model.arch.encoder, &model.theta.entries()[..2 * n], x)
}

/// Gradient w.r.t. the encoder input given the gradient w.r.t. ρ(x).
/// No θ gradient is produced.
pub fn encoder_input_grad(model: &Model, cache: &StackCache, grad_embeddings: &Matrix) -> Result<Matrix> {
    let n = model.arch.encoder.len();
    let (_, g) = stack_backward(
        &model.arch.encoder,
        &model.theta.entries()[..2 * n],
        cache,
        grad_embeddings,
        false,
        true,
    )?;
    Ok(g.expect("input gradient requested"))
}

fn generator_parts(model: &Model) -> Result<(&[LayerSpec], &ParamSet)> {
    match (&model.arch.generator, &model.phi) {
        (Some(g), Some(phi)) => Ok((g, phi)),
        _ => Err(Error::Config("generator parameters are not configured".into())),
    }
}

/// Fake samples `G_φ(noise)` in the input feature space.
pub fn generator_forward(model: &Model, noise: &Matrix) -> Result<StackCache> {
    let (layers, phi) = generator_parts(model)?;
    stack_forward(layers, phi.entries(), noise)
}

/// Gradients w.r.t. φ given the gradient w.r.t. the generator output.
pub fn generator_backward(model: &Model, cache: &StackCache, grad_output: &Matrix) -> Result<ParamSet> {
    let (layers, phi) = generator_parts(model)?;
    let (grads, _) = stack_backward(layers, phi.entries(), cache, grad_output, true, false)?;
    Ok(phi.with_values(grads))
}
