//! Dense multilayer perceptron with ReLU hidden layers and a linear output.
//!
//! Weights are stored row-major with shape `(out_dim, in_dim)`. The backward
//! pass always has access to the input gradient; callers that only need the
//! gradient with respect to the input (the bias engine does this constantly)
//! can skip parameter accumulation.

use rand::Rng;

use super::NnError;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<F>,
    bias: Vec<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<F>, bias: Vec<F>) -> Result<Self, NnError> {
        if in_dim == 0 || out_dim == 0 {
            return Err(NnError::Config(format!(
                "layer dims must be positive, got {in_dim}x{out_dim}"
            )));
        }
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(NnError::Shape(format!(
                "layer {out_dim}x{in_dim} given {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Result<Self, NnError> {
        Self::new(
            in_dim,
            out_dim,
            vec![F::zero(); in_dim * out_dim],
            vec![F::zero(); out_dim],
        )
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Row-major `(out_dim, in_dim)`.
    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn bias(&self) -> &[F] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [F] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [F] {
        &mut self.bias
    }

    fn row(&self, o: usize) -> &[F] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }
}

/// Network parameters. Hidden layers use ReLU, the last layer is identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    layers: Vec<Dense<F>>,
}

/// Activations retained by one forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardTrace<F> {
    input: Vec<F>,
    pre: Vec<Vec<F>>,
    post: Vec<Vec<F>>,
}

impl<F: Scalar> ForwardTrace<F> {
    pub fn len(&self) -> usize {
        self.pre.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pre.is_empty()
    }

    pub fn input(&self) -> &[F] {
        &self.input
    }

    pub fn pre_activation(&self, layer: usize) -> &[F] {
        &self.pre[layer]
    }

    pub fn post_activation(&self, layer: usize) -> &[F] {
        &self.post[layer]
    }

    /// Output of the traced pass (post-activation of the last layer).
    pub fn output(&self) -> &[F] {
        self.post.last().map(Vec::as_slice).unwrap_or(&[])
    }

    fn matches(&self, mlp: &Mlp<F>) -> bool {
        self.pre.len() == mlp.layers.len()
            && self.input.len() == mlp.input_dim()
            && self
                .pre
                .iter()
                .zip(&mlp.layers)
                .all(|(p, l)| p.len() == l.out_dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<F> {
    pub weights: Vec<F>,
    pub bias: Vec<F>,
}

/// Tensors shaped exactly like an [`Mlp`]'s parameters. Used for gradients
/// and for the optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads<F> {
    pub layers: Vec<LayerGrad<F>>,
}

impl<F: Scalar> ParamGrads<F> {
    pub fn zeros_like(mlp: &Mlp<F>) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![F::zero(); l.weights.len()],
                    bias: vec![F::zero(); l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = F::zero());
            l.bias.iter_mut().for_each(|b| *b = F::zero());
        }
    }

    pub fn scale(&mut self, s: F) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = *w * s);
            l.bias.iter_mut().for_each(|b| *b = *b * s);
        }
    }

    pub fn shape_matches(&self, mlp: &Mlp<F>) -> bool {
        self.layers.len() == mlp.layers.len()
            && self
                .layers
                .iter()
                .zip(&mlp.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len())
    }

    /// Euclidean norm over every entry.
    pub fn norm(&self) -> F {
        self.layers
            .iter()
            .map(|l| F::dot(&l.weights, &l.weights) + F::dot(&l.bias, &l.bias))
            .sum::<F>()
            .sqrt()
    }

    /// Index of the first layer holding a non-finite entry.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| l.weights.iter().chain(&l.bias).any(|x| !x.is_finite()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &F> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }
}

/// Parameter gradients together with the gradient of the input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle<F> {
    pub params: ParamGrads<F>,
    pub input: Vec<F>,
}

impl<F: Scalar> Mlp<F> {
    /// Builds a network from explicit layers, checking that dimensions chain
    /// and every entry is finite.
    pub fn from_layers(layers: Vec<Dense<F>>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Config("network needs at least one layer".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(NnError::Config(format!(
                    "layer {k} outputs {} but layer {} expects {}",
                    pair[0].out_dim,
                    k + 1,
                    pair[1].in_dim
                )));
            }
        }
        if let Some(k) = layers
            .iter()
            .position(|l| l.weights.iter().chain(&l.bias).any(|x| !x.is_finite()))
        {
            return Err(NnError::NonFinite { layer: k });
        }
        Ok(Self { layers })
    }

    fn check_dims(dims: &[usize]) -> Result<(), NnError> {
        if dims.len() < 2 {
            return Err(NnError::Config(format!(
                "need at least input and output dims, got {dims:?}"
            )));
        }
        if dims.contains(&0) {
            return Err(NnError::Config(format!("dims must be positive, got {dims:?}")));
        }
        Ok(())
    }

    pub fn zeros(dims: &[usize]) -> Result<Self, NnError> {
        Self::check_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| Dense::zeros(w[0], w[1]))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_layers(layers)
    }

    /// Xavier/Glorot uniform weights in `[-b, b]`, `b = sqrt(6 / (fan_in + fan_out))`,
    /// zero biases.
    pub fn xavier_uniform<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self, NnError> {
        Self::check_dims(dims)?;
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| F::lit(rng.random_range(-bound..=bound)))
                .collect();
            layers.push(Dense::new(fan_in, fan_out, weights, vec![F::zero(); fan_out])?);
        }
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Dense<F>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<F>] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Layer widths including input and output.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|x| x.is_finite()))
    }

    pub fn new_trace(&self) -> ForwardTrace<F> {
        ForwardTrace {
            input: vec![F::zero(); self.input_dim()],
            pre: self.layers.iter().map(|l| vec![F::zero(); l.out_dim]).collect(),
            post: self.layers.iter().map(|l| vec![F::zero(); l.out_dim]).collect(),
        }
    }

    /// Forward pass reusing the buffers of `trace`. Returns the output slice.
    pub fn forward_into<'t>(&self, input: &[F], trace: &'t mut ForwardTrace<F>) -> Result<&'t [F], NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::Shape(format!(
                "input has length {} but network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        if !trace.matches(self) {
            *trace = self.new_trace();
        }
        trace.input.copy_from_slice(input);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (prev_post, rest_post) = trace.post.split_at_mut(k);
            let x: &[F] = if k == 0 { &trace.input } else { &prev_post[k - 1] };
            let pre = &mut trace.pre[k];
            for (o, z) in pre.iter_mut().enumerate() {
                *z = F::dot(layer.row(o), x) + layer.bias[o];
            }
            let post = &mut rest_post[0];
            if k == last {
                post.copy_from_slice(pre);
            } else {
                for (y, z) in post.iter_mut().zip(pre.iter()) {
                    *y = if *z > F::zero() { *z } else { F::zero() };
                }
            }
        }
        Ok(&trace.post[last])
    }

    pub fn forward(&self, input: &[F]) -> Result<(Vec<F>, ForwardTrace<F>), NnError> {
        let mut trace = self.new_trace();
        let out = self.forward_into(input, &mut trace)?.to_vec();
        Ok((out, trace))
    }

    /// Output only; convenience for evaluation.
    pub fn predict(&self, input: &[F]) -> Result<Vec<F>, NnError> {
        self.forward(input).map(|(out, _)| out)
    }

    /// Reverse-mode pass. Parameter gradients are *added* into `param_grads`
    /// when given; the input gradient is *written* into `input_grad` when given.
    /// `scratch` holds the two delta buffers and is resized as needed.
    pub fn backward_accumulate(
        &self,
        trace: &ForwardTrace<F>,
        output_grad: &[F],
        mut param_grads: Option<&mut ParamGrads<F>>,
        input_grad: Option<&mut [F]>,
        scratch: &mut BackwardScratch<F>,
    ) -> Result<(), NnError> {
        if !trace.matches(self) {
            return Err(NnError::Shape("forward trace does not match this network".into()));
        }
        if output_grad.len() != self.output_dim() {
            return Err(NnError::Shape(format!(
                "output gradient has length {} but network outputs {}",
                output_grad.len(),
                self.output_dim()
            )));
        }
        if let Some(g) = param_grads.as_deref() {
            if !g.shape_matches(self) {
                return Err(NnError::Shape("gradient buffer does not match this network".into()));
            }
        }
        if let Some(g) = input_grad.as_deref() {
            if g.len() != self.input_dim() {
                return Err(NnError::Shape(format!(
                    "input gradient buffer has length {} but network expects {}",
                    g.len(),
                    self.input_dim()
                )));
            }
        }
        let want_input = input_grad.is_some();
        let last = self.layers.len() - 1;
        let delta = &mut scratch.delta;
        let next = &mut scratch.next;
        delta.clear();
        delta.extend_from_slice(output_grad);
        for k in (0..=last).rev() {
            let layer = &self.layers[k];
            if k != last {
                for (d, z) in delta.iter_mut().zip(&trace.pre[k]) {
                    if *z <= F::zero() {
                        *d = F::zero();
                    }
                }
            }
            let x: &[F] = if k == 0 { &trace.input } else { &trace.post[k - 1] };
            if let Some(g) = param_grads.as_deref_mut() {
                let lg = &mut g.layers[k];
                for (o, d) in delta.iter().enumerate() {
                    if *d != F::zero() {
                        F::axpy(*d, x, &mut lg.weights[o * layer.in_dim..(o + 1) * layer.in_dim]);
                    }
                    lg.bias[o] = lg.bias[o] + *d;
                }
            }
            if k > 0 || want_input {
                next.clear();
                next.resize(layer.in_dim, F::zero());
                for (o, d) in delta.iter().enumerate() {
                    if *d != F::zero() {
                        F::axpy(*d, layer.row(o), next);
                    }
                }
                std::mem::swap(delta, next);
            }
        }
        if let Some(g) = input_grad {
            g.copy_from_slice(delta);
        }
        Ok(())
    }

    /// Full gradient (parameters and input) for one traced sample.
    pub fn backward(&self, trace: &ForwardTrace<F>, output_grad: &[F]) -> Result<GradientBundle<F>, NnError> {
        let mut params = ParamGrads::zeros_like(self);
        let mut input = vec![F::zero(); self.input_dim()];
        let mut scratch = BackwardScratch::default();
        self.backward_accumulate(trace, output_grad, Some(&mut params), Some(&mut input), &mut scratch)?;
        if let Some(layer) = params.first_non_finite_layer() {
            return Err(NnError::NonFinite { layer });
        }
        Ok(GradientBundle { params, input })
    }

    /// `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update(&mut self, online: &Mlp<F>, tau: F) -> Result<(), NnError> {
        if !(tau >= F::zero() && tau <= F::one()) {
            return Err(NnError::Config(format!("tau must lie in [0, 1], got {tau}")));
        }
        if self.dims() != online.dims() {
            return Err(NnError::Shape(format!(
                "target dims {:?} differ from online dims {:?}",
                self.dims(),
                online.dims()
            )));
        }
        let keep = F::one() - tau;
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            for (tw, ow) in t.weights.iter_mut().zip(&o.weights) {
                *tw = tau * *ow + keep * *tw;
            }
            for (tb, ob) in t.bias.iter_mut().zip(&o.bias) {
                *tb = tau * *ob + keep * *tb;
            }
        }
        Ok(())
    }

    /// Largest absolute entry-wise difference to another network of the same shape.
    pub fn max_abs_diff(&self, other: &Mlp<F>) -> F {
        self.layers
            .iter()
            .zip(&other.layers)
            .flat_map(|(a, b)| {
                a.weights
                    .iter()
                    .zip(&b.weights)
                    .chain(a.bias.iter().zip(&b.bias))
                    .map(|(x, y)| (*x - *y).abs())
            })
            .fold(F::zero(), F::max)
    }
}

/// Reusable delta buffers for [`Mlp::backward_accumulate`].
#[derive(Debug, Clone, Default)]
pub struct BackwardScratch<F> {
    delta: Vec<F>,
    next: Vec<F>,
}
