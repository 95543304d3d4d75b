//! Dense feed-forward regressor: ReLU hidden layers, identity output, manual
//! backpropagation and the Adam optimiser.

use num_traits::Float;
use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::losses::{loss_grad, LossSpec, Residual};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    #[serde(default = "one")]
    pub output_dim: usize,
}

fn one() -> usize {
    1
}

impl NetworkConfig {
    pub fn new(input_dim: usize, hidden_layers: Vec<usize>) -> Self {
        NetworkConfig {
            input_dim,
            hidden_layers,
            output_dim: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.is_empty() {
            return Err(Error::usage("network needs at least one hidden layer"));
        }
        if self.input_dim == 0 || self.hidden_layers.contains(&0) {
            return Err(Error::usage("layer widths must be positive"));
        }
        if self.output_dim != 1 {
            return Err(Error::usage("only single-output regression networks are supported"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for each layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden_layers);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// One affine layer. `weights` is `fan_out × fan_in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer<T> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Float> Layer<T> {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer {
            fan_in,
            fan_out,
            weights: vec![T::zero(); fan_in * fan_out],
            bias: vec![T::zero(); fan_out],
        }
    }

    pub fn weight(&self, out: usize, inp: usize) -> T {
        self.weights[out * self.fan_in + inp]
    }

    fn affine(&self, input: &[T], out: &mut [T]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.fan_in).zip(&self.bias))
        {
            *o = row.iter().zip(input).fold(*b, |acc, (&w, &x)| acc + w * x);
        }
    }
}

/// Weights and biases of every layer. Gradients share this shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Float> Parameters<T> {
    pub fn zeros(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Parameters {
            layers: cfg
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| Layer::zeros(i, o))
                .collect(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Parameters {
            layers: self.layers.iter().map(|l| Layer::zeros(l.fan_in, l.fan_out)).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.fan_in == b.fan_in && a.fan_out == b.fan_out)
    }

    /// All entries, layer by layer, weights before biases.
    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    fn fill_zero(&mut self) {
        self.values_mut().for_each(|v| *v = T::zero());
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_shape<T: Float>(a: &Parameters<T>, b: &Parameters<T>) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::usage("parameter shapes do not match"))
    }
}

/// Weights uniform on `[−1/√fan_in, 1/√fan_in]`, biases zero.
pub fn init_params<T: Float>(cfg: &NetworkConfig, seed: u64) -> Result<Parameters<T>> {
    let mut p = Parameters::zeros(cfg)?;
    let mut rng = seed::rng(seed);
    for layer in &mut p.layers {
        let scale = 1.0 / (layer.fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-scale, scale).expect("finite scale");
        for w in &mut layer.weights {
            *w = T::from(dist.sample(&mut rng)).unwrap();
        }
    }
    Ok(p)
}

/// Pre- and post-activation values of every layer for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache<T> {
    pub input: Vec<T>,
    pub pre: Vec<Vec<T>>,
    pub post: Vec<Vec<T>>,
}

impl<T: Float> ForwardCache<T> {
    fn for_params(p: &Parameters<T>) -> Self {
        ForwardCache {
            input: vec![T::zero(); p.input_dim()],
            pre: p.layers.iter().map(|l| vec![T::zero(); l.fan_out]).collect(),
            post: p.layers.iter().map(|l| vec![T::zero(); l.fan_out]).collect(),
        }
    }

    pub fn prediction(&self) -> T {
        self.post.last().unwrap()[0]
    }

    fn matches(&self, p: &Parameters<T>) -> bool {
        self.input.len() == p.input_dim()
            && self.pre.len() == p.layers.len()
            && self.pre.iter().zip(&p.layers).all(|(z, l)| z.len() == l.fan_out)
    }
}

fn forward_into<T: Float>(p: &Parameters<T>, x: &[T], cache: &mut ForwardCache<T>) {
    cache.input.copy_from_slice(x);
    let last = p.layers.len() - 1;
    for (l, layer) in p.layers.iter().enumerate() {
        let (before, after) = cache.post.split_at_mut(l);
        let input: &[T] = if l == 0 { &cache.input } else { &before[l - 1] };
        layer.affine(input, &mut cache.pre[l]);
        let out = &mut after[0];
        if l == last {
            out.copy_from_slice(&cache.pre[l]);
        } else {
            for (a, &z) in out.iter_mut().zip(&cache.pre[l]) {
                *a = z.max(T::zero());
            }
        }
    }
}

pub fn forward<T: Float>(p: &Parameters<T>, x: &[T]) -> Result<(T, ForwardCache<T>)> {
    if x.len() != p.input_dim() {
        return Err(Error::usage(format!(
            "input has {} features, network expects {}",
            x.len(),
            p.input_dim()
        )));
    }
    let mut cache = ForwardCache::for_params(p);
    forward_into(p, x, &mut cache);
    Ok((cache.prediction(), cache))
}

/// Adds `∂loss/∂θ`, with `∂loss/∂ŷ = dloss_dpred`, into `grad`. `delta` and
/// `next` are scratch buffers.
fn accumulate_backward<T: Float>(
    p: &Parameters<T>,
    cache: &ForwardCache<T>,
    dloss_dpred: T,
    grad: &mut Parameters<T>,
    delta: &mut Vec<T>,
    next: &mut Vec<T>,
) {
    delta.clear();
    delta.push(dloss_dpred);
    for l in (0..p.layers.len()).rev() {
        let layer = &p.layers[l];
        let input: &[T] = if l == 0 { &cache.input } else { &cache.post[l - 1] };
        let g = &mut grad.layers[l];
        for (o, &d) in delta.iter().enumerate() {
            if d == T::zero() {
                continue;
            }
            g.bias[o] = g.bias[o] + d;
            let row = &mut g.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
            for (gw, &a) in row.iter_mut().zip(input) {
                *gw = *gw + d * a;
            }
        }
        if l == 0 {
            break;
        }
        next.clear();
        next.resize(layer.fan_in, T::zero());
        for (o, &d) in delta.iter().enumerate() {
            if d == T::zero() {
                continue;
            }
            let row = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
            for (n, &w) in next.iter_mut().zip(row) {
                *n = *n + w * d;
            }
        }
        // ReLU derivative, zero at the kink
        for (n, &z) in next.iter_mut().zip(&cache.pre[l - 1]) {
            if z <= T::zero() {
                *n = T::zero();
            }
        }
        std::mem::swap(delta, next);
    }
}

/// Gradient of the loss with respect to every parameter, given the loss
/// derivative with respect to the prediction.
pub fn backward<T: Float>(p: &Parameters<T>, cache: &ForwardCache<T>, dloss_dpred: T) -> Result<Parameters<T>> {
    if !cache.matches(p) {
        return Err(Error::usage("forward cache does not match the parameters"));
    }
    let mut grad = p.zeros_like();
    accumulate_backward(p, cache, dloss_dpred, &mut grad, &mut Vec::new(), &mut Vec::new());
    Ok(grad)
}

/// Training hyperparameters. Defaults: Adam with lr 1e-3, β = (0.9, 0.999),
/// ε = 1e-8; 100 epochs of batch size 32.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 100,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::usage("learning rate must be positive"));
        }
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::usage("Adam betas must lie in (0, 1)"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::usage("Adam epsilon must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::usage("batch size must be positive"));
        }
        Ok(())
    }

    /// Seed used by [`train`] for the initial weights.
    pub fn init_seed(&self) -> u64 {
        seed::child_seed(self.seed, "init")
    }
}

/// First and second moment estimates of the Adam optimiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub m: Parameters<T>,
    pub v: Parameters<T>,
    pub t: u64,
}

impl<T: Float> AdamState<T> {
    pub fn new(params: &Parameters<T>) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut Parameters<T>, grad: &Parameters<T>, tc: &TrainConfig) -> Result<()> {
        check_shape(params, grad)?;
        check_shape(params, &self.m)?;
        self.t += 1;
        let k = |v: f64| T::from(v).unwrap();
        let (b1, b2) = (k(tc.beta1), k(tc.beta2));
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        let (lr, eps) = (k(tc.learning_rate), k(tc.epsilon));
        let entries = params
            .values_mut()
            .zip(grad.values())
            .zip(self.m.values_mut().zip(self.v.values_mut()));
        for ((theta, &g), (m, v)) in entries {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Value-semantics form of [`AdamState::step`].
pub fn adam_step<T: Float>(
    params: &Parameters<T>,
    grad: &Parameters<T>,
    state: &AdamState<T>,
    tc: &TrainConfig,
) -> Result<(Parameters<T>, AdamState<T>)> {
    let mut p = params.clone();
    let mut s = state.clone();
    s.step(&mut p, grad, tc)?;
    Ok((p, s))
}

/// Final parameters and the mean per-sample training loss of every epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: Parameters<T>,
    pub epoch_loss: Vec<T>,
}

/// Trains from `init_params(net, tc.init_seed())` with seeded mini-batch
/// shuffling.
pub fn train<T: Float>(data: &Dataset<T>, net: &NetworkConfig, loss: &LossSpec<T>, tc: &TrainConfig) -> Result<Parameters<T>> {
    let init = init_params(net, tc.init_seed())?;
    Ok(train_from(init, data, loss, tc)?.params)
}

/// Trains from the given parameters; each epoch visits the rows in an order
/// drawn from a generator seeded with `tc.seed`.
pub fn train_from<T: Float>(
    init: Parameters<T>,
    data: &Dataset<T>,
    loss: &LossSpec<T>,
    tc: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    let mut rng = seed::rng(tc.seed);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    train_with_order(init, data, loss, tc, |_| {
        order.shuffle(&mut rng);
        order.clone()
    })
}

/// Trains with an explicit per-epoch row order; `order(epoch)` must return a
/// permutation of `0..data.len()`.
pub fn train_with_order<T: Float>(
    init: Parameters<T>,
    data: &Dataset<T>,
    loss: &LossSpec<T>,
    tc: &TrainConfig,
    mut order: impl FnMut(usize) -> Vec<usize>,
) -> Result<TrainOutcome<T>> {
    tc.validate()?;
    loss.validate()?;
    if data.is_empty() {
        return Err(Error::usage("cannot train on an empty dataset"));
    }
    if data.dim() != init.input_dim() {
        return Err(Error::usage(format!(
            "dataset has {} features, network expects {}",
            data.dim(),
            init.input_dim()
        )));
    }
    let mut params = init;
    let mut adam = AdamState::new(&params);
    let mut grad = params.zeros_like();
    let mut cache = ForwardCache::for_params(&params);
    let (mut delta, mut next) = (Vec::new(), Vec::new());
    let mut history = Vec::with_capacity(tc.epochs);
    let n = data.len();

    for epoch in 0..tc.epochs {
        let rows = order(epoch);
        if rows.len() != n {
            return Err(Error::usage("epoch order must cover every row"));
        }
        let mut total = T::zero();
        for batch in rows.chunks(tc.batch_size) {
            grad.fill_zero();
            let inv = T::one() / T::from(batch.len()).unwrap();
            for &i in batch {
                forward_into(&params, data.x.row(i), &mut cache);
                let r = Residual::new(data.y[i], cache.prediction());
                let l = loss.loss(r).map_err(|_| Error::Diverged { epoch })?;
                let g = loss_grad(r, loss).map_err(|_| Error::Diverged { epoch })?;
                total = total + l;
                accumulate_backward(&params, &cache, g * inv, &mut grad, &mut delta, &mut next);
            }
            adam.step(&mut params, &grad, tc)?;
        }
        let mean = total / T::from(n).unwrap();
        if !mean.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(mean);
    }
    Ok(TrainOutcome {
        params,
        epoch_loss: history,
    })
}

/// Per-feature affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Float> Standardizer<T> {
    /// Statistics of the columns of `x`. Constant columns get scale 1.
    pub fn fit(x: &Matrix<T>) -> Self {
        let n = T::from(x.rows().max(1)).unwrap();
        let mut mean = vec![T::zero(); x.cols()];
        for row in x.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); x.cols()];
        for row in x.iter_rows() {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > T::zero() && sd.is_finite() {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform_row(&self, row: &[T], out: &mut [T]) {
        for (((o, &v), &m), &s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.scale) {
            *o = (v - m) / s;
        }
    }

    pub fn transform(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut out = x.clone();
        for i in 0..x.rows() {
            self.transform_row(x.row(i), out.row_mut(i));
        }
        out
    }
}

/// Parameters plus the input standardisation fitted on the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel<T> {
    pub standardizer: Standardizer<T>,
    pub params: Parameters<T>,
}

impl<T: Float> TrainedModel<T> {
    /// Standardises features with training statistics, then trains from
    /// `init`. Targets are left on their original scale.
    pub fn fit(init: Parameters<T>, data: &Dataset<T>, loss: &LossSpec<T>, tc: &TrainConfig) -> Result<Self> {
        let standardizer = Standardizer::fit(&data.x);
        let mut scaled = data.clone();
        scaled.x = standardizer.transform(&data.x);
        let outcome = train_from(init, &scaled, loss, tc)?;
        Ok(TrainedModel {
            standardizer,
            params: outcome.params,
        })
    }

    pub fn predict(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        if x.cols() != self.params.input_dim() {
            return Err(Error::usage("feature count does not match the model"));
        }
        let mut cache = ForwardCache::for_params(&self.params);
        let mut row = vec![T::zero(); x.cols()];
        Ok(x.iter_rows()
            .map(|r| {
                self.standardizer.transform_row(r, &mut row);
                forward_into(&self.params, &row, &mut cache);
                cache.prediction()
            })
            .collect())
    }
}
