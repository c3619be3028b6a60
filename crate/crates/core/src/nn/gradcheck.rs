//! Central finite-difference verification of [`Mlp::backward`].

use super::{Mlp, NnError};
use crate::Scalar;

/// Worst discrepancies between analytic and numeric gradients of
/// `L(x) = <c, f(x)>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_param_rel_error: f64,
    pub max_input_rel_error: f64,
    pub checked: usize,
}

impl GradCheck {
    pub fn max_rel_error(&self) -> f64 {
        self.max_param_rel_error.max(self.max_input_rel_error)
    }
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps exact zeros from
/// dividing by zero.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Smallest `|pre-activation|` over hidden units, i.e. the distance to the
/// nearest ReLU kink. Finite differences are only meaningful well away from it.
pub fn kink_margin(mlp: &Mlp<f64>, input: &[f64]) -> Result<f64, NnError> {
    let (_, trace) = mlp.forward(input)?;
    Ok((0..trace.len().saturating_sub(1))
        .flat_map(|l| trace.pre_activation(l).iter().map(|z| z.abs()))
        .fold(f64::INFINITY, f64::min))
}

/// Compares every parameter and input derivative of `<cotangent, f(input)>`
/// against central differences with the given step.
pub fn check_gradients(
    mlp: &Mlp<f64>,
    input: &[f64],
    cotangent: &[f64],
    step: f64,
    floor: f64,
) -> Result<GradCheck, NnError> {
    let loss = |m: &Mlp<f64>, x: &[f64]| -> Result<f64, NnError> {
        Ok(f64::dot(&m.predict(x)?, cotangent))
    };
    let (_, trace) = mlp.forward(input)?;
    let grads = mlp.backward(&trace, cotangent)?;
    let mut out = GradCheck {
        max_param_rel_error: 0.0,
        max_input_rel_error: 0.0,
        checked: 0,
    };
    let mut probe = mlp.clone();
    for l in 0..mlp.layers().len() {
        let n_w = mlp.layers()[l].weights().len();
        let n_b = mlp.layers()[l].bias().len();
        for j in 0..n_w + n_b {
            let analytic = if j < n_w { grads.params.layers[l].weights[j] } else { grads.params.layers[l].bias[j - n_w] };
            let mut eval = |delta: f64| -> Result<f64, NnError> {
                let layer = &mut probe.layers_mut()[l];
                let slot = if j < n_w { &mut layer.weights_mut()[j] } else { &mut layer.bias_mut()[j - n_w] };
                let orig = *slot;
                *slot = orig + delta;
                let v = loss(&probe, input);
                let layer = &mut probe.layers_mut()[l];
                let slot = if j < n_w { &mut layer.weights_mut()[j] } else { &mut layer.bias_mut()[j - n_w] };
                *slot = orig;
                v
            };
            let numeric = (eval(step)? - eval(-step)?) / (2.0 * step);
            out.max_param_rel_error = out.max_param_rel_error.max(relative_error(analytic, numeric, floor));
            out.checked += 1;
        }
    }
    let mut x = input.to_vec();
    for j in 0..x.len() {
        let orig = x[j];
        x[j] = orig + step;
        let up = loss(mlp, &x)?;
        x[j] = orig - step;
        let down = loss(mlp, &x)?;
        x[j] = orig;
        let numeric = (up - down) / (2.0 * step);
        out.max_input_rel_error = out.max_input_rel_error.max(relative_error(grads.input[j], numeric, floor));
        out.checked += 1;
    }
    Ok(out)
}
