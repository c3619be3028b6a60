use serde::{Deserialize, Serialize};

use super::{Mlp, NnError, ParamGrads};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
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

/// Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub m: ParamGrads<F>,
    pub v: ParamGrads<F>,
    pub step: u64,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(params: &Mlp<F>, cfg: AdamConfig) -> Self {
        Self {
            m: ParamGrads::zeros_like(params),
            v: ParamGrads::zeros_like(params),
            step: 0,
            beta1: F::lit(cfg.beta1),
            beta2: F::lit(cfg.beta2),
            eps: F::lit(cfg.eps),
        }
    }

    pub fn shape_matches(&self, params: &Mlp<F>) -> bool {
        self.m.shape_matches(params) && self.v.shape_matches(params)
    }
}

/// One bias-corrected Adam descent step: `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
///
/// Gradients are checked for finiteness before anything is touched, so a
/// failed step leaves both `params` and `state` unchanged.
pub fn adam_step<F: Scalar>(
    params: &mut Mlp<F>,
    grads: &ParamGrads<F>,
    state: &mut AdamState<F>,
    lr: F,
) -> Result<(), NnError> {
    if lr.is_nan() || lr <= F::zero() {
        return Err(NnError::Config(format!("learning rate must be positive, got {lr}")));
    }
    if !grads.shape_matches(params) || !state.shape_matches(params) {
        return Err(NnError::Shape("gradient or optimizer state does not match parameters".into()));
    }
    if let Some(layer) = grads.first_non_finite_layer() {
        return Err(NnError::NonFinite { layer });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let one = F::one();
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let update = |p: &mut F, g: F, m: &mut F, v: &mut F| {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    };
    for (k, layer) in params.layers_mut().iter_mut().enumerate() {
        let g = &grads.layers[k];
        let m = &mut state.m.layers[k];
        let v = &mut state.v.layers[k];
        for (((p, g), m), v) in layer
            .weights_mut()
            .iter_mut()
            .zip(&g.weights)
            .zip(m.weights.iter_mut())
            .zip(v.weights.iter_mut())
        {
            update(p, *g, m, v);
        }
        for (((p, g), m), v) in layer
            .bias_mut()
            .iter_mut()
            .zip(&g.bias)
            .zip(m.bias.iter_mut())
            .zip(v.bias.iter_mut())
        {
            update(p, *g, m, v);
        }
    }
    Ok(())
}
