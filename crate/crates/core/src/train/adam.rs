use crate::error::{contract, Result};
use crate::model::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates shaped like the parameters they track.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: ParamSet,
    pub second: ParamSet,
    pub step: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        Self::with_config(params, AdamConfig::default())
    }

    pub fn with_config(params: &ParamSet, config: AdamConfig) -> Self {
        Self {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
            config,
        }
    }
}

/// Bias-corrected Adam step:
/// `m ← β1 m + (1-β1) g`, `v ← β2 v + (1-β2) g²`,
/// `p ← p - lr · m̂ / (√v̂ + ε)` with `m̂ = m / (1-β1^t)`, `v̂ = v / (1-β2^t)`.
pub fn adam_update(params: &mut ParamSet, grads: &ParamSet, state: &mut AdamState, lr: f64) -> Result<()> {
    if !params.same_layout(grads) || !params.same_layout(&state.first) {
        return Err(contract!("Adam: parameter, gradient and moment layouts differ"));
    }
    state.step += 1;
    let AdamConfig { beta1, beta2, eps } = state.config;
    let t = state.step as f64;
    let c1 = 1.0 - libm::pow(beta1, t);
    let c2 = 1.0 - libm::pow(beta2, t);
    let tensors = params
        .entries_mut()
        .iter_mut()
        .zip(grads.entries())
        .zip(state.first.entries_mut().iter_mut().zip(state.second.entries_mut()));
    for ((p, g), (m, v)) in tensors {
        let values = p.value.as_mut_slice().iter_mut();
        let g = g.value.as_slice();
        let m = m.value.as_mut_slice();
        let v = v.value.as_mut_slice();
        for (((x, &gi), mi), vi) in values.zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *x -= lr * m_hat / (libm::sqrt(v_hat) + eps);
        }
    }
    Ok(())
}
