//! Feed-forward propensity network trained with binary cross-entropy and Adam.
//!
//! The network is `input -> [affine -> ReLU]* -> affine -> sigmoid` with a
//! single output unit. Backpropagation is written out by hand; there is no
//! autodiff. Weights are stored row-major with shape `(fan_out, fan_in)`.
//!
//! All randomness comes from [`rand_chacha::ChaCha8Rng`] seeded with
//! `seed_from_u64`: stream 0 draws the initial weights, stream 1 drives the
//! per-epoch shuffle. Results are bit-reproducible for a given build.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` inside the loss.
pub const BCE_CLAMP: f64 = 1e-7;

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
}

impl ArchitectureSpec {
    pub fn new(input_dim: usize, hidden_sizes: Vec<usize>) -> Result<Self> {
        let arch = Self {
            input_dim,
            hidden_sizes,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be >= 1".into()));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidConfig("hidden sizes must be >= 1".into()));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for every layer, output layer last.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_sizes.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in self.hidden_sizes.iter().chain(std::iter::once(&1)) {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Row-major `(fan_out, fan_in)`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_in * fan_out],
            bias: vec![0.0; fan_out],
        }
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.fan_in + inp]
    }

    /// `out = W x + b`.
    fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (o, (w_row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.fan_in).zip(&self.bias))
        {
            *o = b + w_row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

/// Weights and biases of every layer. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

/// Glorot-uniform weights, zero biases.
pub fn init_params(arch: &ArchitectureSpec, seed: u64) -> Result<ModelParams> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    let layers = arch
        .layer_dims()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut layer = Layer::zeros(fan_in, fan_out);
            for w in &mut layer.weights {
                *w = rng.gen_range(-limit..=limit);
            }
            layer
        })
        .collect();
    Ok(ModelParams { layers })
}

impl ModelParams {
    pub fn zeros(arch: &ArchitectureSpec) -> Self {
        Self {
            layers: arch
                .layer_dims()
                .into_iter()
                .map(|(i, o)| Layer::zeros(i, o))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.fan_in, l.fan_out))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.fan_in)
    }

    pub fn architecture(&self) -> ArchitectureSpec {
        ArchitectureSpec {
            input_dim: self.input_dim(),
            hidden_sizes: self.layers[..self.layers.len() - 1]
                .iter()
                .map(|l| l.fan_out)
                .collect(),
        }
    }

    /// Checks the layer chain and that every entry is finite.
    pub fn validate(&self) -> Result<()> {
        let last = self
            .layers
            .last()
            .ok_or_else(|| Error::InvalidConfig("model has no layers".into()))?;
        if last.fan_out != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: last.fan_out,
            });
        }
        for pair in self.layers.windows(2) {
            if pair[0].fan_out != pair[1].fan_in {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].fan_out,
                    actual: pair[1].fan_in,
                });
            }
        }
        for l in &self.layers {
            if l.weights.len() != l.fan_in * l.fan_out || l.bias.len() != l.fan_out {
                return Err(Error::DimensionMismatch {
                    expected: l.fan_in * l.fan_out,
                    actual: l.weights.len(),
                });
            }
        }
        if !self.iter().all(f64::is_finite) {
            return Err(Error::NumericFailure("model parameters"));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Every scalar, layer by layer, weights before biases.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.fan_in == b.fan_in && a.fan_out == b.fan_out)
    }

    pub fn l2_norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Pre-sigmoid output.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let mut scratch = Scratch::new(self);
        Ok(scratch.forward(self, x))
    }

    /// Propensity score in the open interval `(0, 1)`.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.logit(x).map(sigmoid)
    }

    /// Scores every row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.cols(),
            });
        }
        let mut scratch = Scratch::new(self);
        Ok(x.iter_rows()
            .map(|row| sigmoid(scratch.forward(self, row)))
            .collect())
    }
}

/// Logistic function kept strictly inside `(0, 1)`.
///
/// Split on the sign of `z` so `exp` never overflows; the result is then
/// held off the endpoints because `exp(-z)` underflows near `|z| = 745`
/// and `1 + exp(-z)` rounds to 1 far earlier.
pub fn sigmoid(z: f64) -> f64 {
    const LO: f64 = f64::MIN_POSITIVE;
    const HI: f64 = 1.0 - f64::EPSILON / 2.0;
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(LO, HI)
}

/// `-[y ln p + (1-y) ln(1-p)]` with `p` clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(p: f64, y: u8) -> Result<f64> {
    let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    match y {
        1 => Ok(-p.ln()),
        0 => Ok(-(1.0 - p).ln()),
        other => Err(Error::InvalidLabel(other)),
    }
}

/// Mean BCE of the model over `(x, y)`.
pub fn mean_bce(params: &ModelParams, x: &Matrix, y: &[u8]) -> Result<f64> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let scores = params.predict(x)?;
    let mut total = 0.0;
    for (&p, &t) in scores.iter().zip(y) {
        total += bce_loss(p, t)?;
    }
    Ok(total / y.len() as f64)
}

/// Reusable per-layer buffers for one forward/backward pass.
struct Scratch {
    /// Pre-activations per layer.
    pre: Vec<Vec<f64>>,
    /// Post-activations per hidden layer.
    act: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Scratch {
    fn new(params: &ModelParams) -> Self {
        let pre: Vec<Vec<f64>> = params.layers.iter().map(|l| vec![0.0; l.fan_out]).collect();
        Self {
            act: pre.clone(),
            delta: pre.clone(),
            pre,
        }
    }

    fn forward(&mut self, params: &ModelParams, x: &[f64]) -> f64 {
        let last = params.layers.len() - 1;
        for (k, layer) in params.layers.iter().enumerate() {
            let (done, rest) = self.act.split_at_mut(k);
            let input = if k == 0 { x } else { &done[k - 1][..] };
            layer.affine(input, &mut self.pre[k]);
            if k < last {
                for (a, &z) in rest[0].iter_mut().zip(&self.pre[k]) {
                    *a = z.max(0.0);
                }
            }
        }
        self.pre[last][0]
    }

    /// Adds `scale * dL/dtheta` for one example to `grads`, where
    /// `dL/dlogit = p - y`. Must follow `forward` on the same input.
    fn backward(&mut self, params: &ModelParams, x: &[f64], dlogit: f64, grads: &mut Gradients) {
        let last = params.layers.len() - 1;
        self.delta[last][0] = dlogit;
        for k in (0..=last).rev() {
            let layer = &params.layers[k];
            let input = if k == 0 { x } else { &self.act[k - 1][..] };
            let g = &mut grads.layers[k];
            for o in 0..layer.fan_out {
                let d = self.delta[k][o];
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                for (gw, &v) in g.weights[o * layer.fan_in..(o + 1) * layer.fan_in]
                    .iter_mut()
                    .zip(input)
                {
                    *gw += d * v;
                }
            }
            if k > 0 {
                let (lower, upper) = self.delta.split_at_mut(k);
                let below = &mut lower[k - 1];
                for (i, b) in below.iter_mut().enumerate() {
                    // ReLU subgradient at 0 is 0.
                    if self.pre[k - 1][i] > 0.0 {
                        *b = (0..layer.fan_out)
                            .map(|o| upper[0][o] * layer.weight(o, i))
                            .sum();
                    } else {
                        *b = 0.0;
                    }
                }
            }
        }
    }
}

fn accumulate<'a>(
    params: &ModelParams,
    batch: impl ExactSizeIterator<Item = (&'a [f64], u8)>,
    scratch: &mut Scratch,
    grads: &mut Gradients,
) -> Result<()> {
    let m = batch.len();
    if m == 0 {
        return Err(Error::Empty("batch"));
    }
    let inv_m = 1.0 / m as f64;
    for (x, y) in batch {
        if y > 1 {
            return Err(Error::InvalidLabel(y));
        }
        let p = sigmoid(scratch.forward(params, x));
        scratch.backward(params, x, (p - y as f64) * inv_m, grads);
    }
    Ok(())
}

/// Analytic gradient of the mean BCE over the batch.
pub fn gradients(params: &ModelParams, batch_x: &Matrix, batch_y: &[u8]) -> Result<Gradients> {
    if batch_x.cols() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            actual: batch_x.cols(),
        });
    }
    if batch_x.rows() != batch_y.len() {
        return Err(Error::DimensionMismatch {
            expected: batch_x.rows(),
            actual: batch_y.len(),
        });
    }
    let mut grads = params.zeros_like();
    let mut scratch = Scratch::new(params);
    accumulate(
        params,
        (0..batch_x.rows()).map(|i| (batch_x.row(i), batch_y[i])),
        &mut scratch,
        &mut grads,
    )?;
    Ok(grads)
}

fn default_hidden() -> Vec<usize> {
    vec![16, 8]
}

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
    pub hidden_sizes: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 200,
            batch_size: 32,
            seed: 42,
            hidden_sizes: default_hidden(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) || !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("beta1 and beta2 must lie in (0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be > 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.hidden_sizes.contains(&0) {
            return bad("hidden sizes must be >= 1");
        }
        Ok(())
    }
}

/// First and second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam step, applied in place.
///
/// Leaves `params` and `state` untouched on error.
pub fn adam_update(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) || !params.same_shape(&state.v) {
        return Err(Error::DimensionMismatch {
            expected: params.num_params(),
            actual: grads.num_params(),
        });
    }
    if !grads.iter().all(f64::is_finite) {
        return Err(Error::NonFiniteGradient);
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let lr = cfg.learning_rate;
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads.iter())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Full-data mean BCE after each epoch.
    pub loss_history: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Mini-batch Adam from a fresh seeded initialization.
pub fn train(x: &Matrix, y: &[u8], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&t| t > 1) {
        return Err(Error::InvalidLabel(bad));
    }
    if y.len() < 2 || y.iter().all(|&t| t == y[0]) {
        return Err(Error::SingleClass);
    }

    let arch = ArchitectureSpec::new(x.cols(), cfg.hidden_sizes.clone())?;
    let mut params = init_params(&arch, cfg.seed)?;
    let mut state = AdamState::new(&params);
    let mut grads = params.zeros_like();
    let mut scratch = Scratch::new(&params);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            accumulate(
                &params,
                chunk.iter().map(|&i| (x.row(i), y[i])),
                &mut scratch,
                &mut grads,
            )?;
            adam_update(&mut params, &grads, &mut state, cfg)?;
        }
        let loss = mean_bce(&params, x, y)?;
        if !loss.is_finite() {
            return Err(Error::NumericFailure("training loss"));
        }
        loss_history.push(loss);
    }
    Ok(TrainOutcome {
        params,
        loss_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(weight: f64, bias: f64) -> ModelParams {
        ModelParams {
            layers: vec![Layer {
                fan_in: 1,
                fan_out: 1,
                weights: vec![weight],
                bias: vec![bias],
            }],
        }
    }

    #[test]
    fn init_shapes_and_determinism() {
        let arch = ArchitectureSpec::new(8, vec![16, 8]).unwrap();
        let a = init_params(&arch, 7).unwrap();
        let b = init_params(&arch, 7).unwrap();
        assert_eq!(a, b);
        let shapes: Vec<_> = a.layers.iter().map(|l| (l.fan_out, l.fan_in)).collect();
        assert_eq!(shapes, vec![(16, 8), (8, 16), (1, 8)]);
        let biases: Vec<_> = a.layers.iter().map(|l| l.bias.len()).collect();
        assert_eq!(biases, vec![16, 8, 1]);
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        for l in &a.layers {
            let limit = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= limit));
        }
        assert_ne!(a, init_params(&arch, 8).unwrap());
        assert_eq!(a.architecture(), arch);
    }

    #[test]
    fn invalid_architecture() {
        assert!(ArchitectureSpec::new(0, vec![]).is_err());
        assert!(ArchitectureSpec::new(3, vec![4, 0]).is_err());
    }

    #[test]
    fn forward_examples() {
        let arch = ArchitectureSpec::new(3, vec![4]).unwrap();
        let zero = ModelParams::zeros(&arch);
        assert_eq!(zero.forward(&[1.0, -2.0, 3.0]).unwrap(), 0.5);

        // sigmoid(3)
        let p = single(2.0, 1.0).forward(&[1.0]).unwrap();
        assert!((p - 0.952_574_126_822_433_4).abs() < 1e-15);

        let p = single(1.0, 0.0).forward(&[-1000.0]).unwrap();
        assert!(p > 0.0 && p < 1.0);
        let p = single(1.0, 0.0).forward(&[1000.0]).unwrap();
        assert!(p > 0.0 && p < 1.0);

        assert!(matches!(
            zero.forward(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sigmoid_open_interval_for_large_logits() {
        for z in [-1e4, -800.0, -40.0, 0.0, 40.0, 800.0, 1e4] {
            let p = sigmoid(z);
            assert!(p > 0.0 && p < 1.0, "z={z}");
            assert!(p.is_finite());
        }
    }

    #[test]
    fn bce_examples() {
        assert!((bce_loss(0.5, 1).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let near = bce_loss(1.0 - 1e-7, 1).unwrap();
        assert!((near - 1e-7).abs() < 1e-12);
        assert!((bce_loss(0.9, 0).unwrap() - std::f64::consts::LN_10).abs() < 1e-12);
        // clamp keeps the loss finite
        assert!(bce_loss(0.0, 1).unwrap().is_finite());
        assert!(matches!(bce_loss(0.5, 2), Err(Error::InvalidLabel(2))));
    }

    #[test]
    fn gradient_vanishes_at_saturated_correct_predictions() {
        // large weight drives predictions to the clamp on the correct side
        let params = single(1e3, 0.0);
        let x = Matrix::from_vec(4, 1, vec![-1.0, -2.0, 1.0, 2.0]).unwrap();
        let g = gradients(&params, &x, &[0, 0, 1, 1]).unwrap();
        assert!(g.l2_norm() <= 1e-6);
    }

    #[test]
    fn duplicated_batch_gives_same_gradient() {
        let arch = ArchitectureSpec::new(2, vec![3]).unwrap();
        let params = init_params(&arch, 3).unwrap();
        let rows = [[0.5, -1.0], [1.5, 0.2], [-0.3, 0.9]];
        let y = [1, 0, 1];
        let x = Matrix::from_rows(2, &rows).unwrap();
        let doubled: Vec<_> = rows.iter().chain(rows.iter()).collect();
        let x2 = Matrix::from_rows(2, &doubled.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
            .unwrap();
        let y2: Vec<u8> = y.iter().chain(y.iter()).copied().collect();
        let a = gradients(&params, &x, &y).unwrap();
        let b = gradients(&params, &x2, &y2).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            assert!((u - v).abs() <= 1e-15 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn gradient_shape_errors() {
        let arch = ArchitectureSpec::new(2, vec![3]).unwrap();
        let params = init_params(&arch, 3).unwrap();
        let x = Matrix::zeros(2, 3);
        assert!(gradients(&params, &x, &[0, 1]).is_err());
        let x = Matrix::zeros(2, 2);
        assert!(gradients(&params, &x, &[0]).is_err());
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let cfg = TrainConfig {
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let mut p = single(0.0, 0.0);
        let mut state = AdamState::new(&p);
        let mut g = p.zeros_like();
        g.layers[0].weights[0] = 0.3;
        adam_update(&mut p, &g, &mut state, &cfg).unwrap();
        assert!((p.layers[0].weights[0] + 0.01).abs() < 1e-9);
        // zero gradient coordinate does not move
        assert_eq!(p.layers[0].bias[0], 0.0);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let cfg = TrainConfig::default();
        let mut p = single(0.7, -0.2);
        let before = p.clone();
        let mut state = AdamState::new(&p);
        let zero = p.zeros_like();
        adam_update(&mut p, &zero, &mut state, &cfg).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn adam_two_steps_match_scalar_oracle() {
        let cfg = TrainConfig {
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let mut p = single(0.0, 0.0);
        let mut state = AdamState::new(&p);
        let mut g = p.zeros_like();
        g.layers[0].weights[0] = 1.0;

        // hand-rolled scalar Adam
        let (mut m, mut v, mut theta) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            m = 0.9 * m + 0.1;
            v = 0.999 * v + 0.001;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            let prev = theta;
            theta -= 0.1 * mh / (vh.sqrt() + 1e-8);
            let before = p.layers[0].weights[0];
            adam_update(&mut p, &g, &mut state, &cfg).unwrap();
            let delta = p.layers[0].weights[0] - before;
            assert!((delta - (theta - prev)).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let cfg = TrainConfig::default();
        let mut p = single(0.0, 0.0);
        let mut state = AdamState::new(&p);
        let mut g = p.zeros_like();
        g.layers[0].bias[0] = f64::NAN;
        assert!(matches!(
            adam_update(&mut p, &g, &mut state, &cfg),
            Err(Error::NonFiniteGradient)
        ));
        assert_eq!(state.t, 0);
    }

    fn separable() -> (Matrix, Vec<u8>) {
        let xs: Vec<f64> = (0..50).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / 50.0).collect();
        let y = xs.iter().map(|&v| u8::from(v > 0.0)).collect();
        (Matrix::from_vec(50, 1, xs).unwrap(), y)
    }

    #[test]
    fn trains_separable_toy_data() {
        let (x, y) = separable();
        let out = train(&x, &y, &TrainConfig::default()).unwrap();
        assert_eq!(out.loss_history.len(), 200);
        assert!(out.final_loss() < 0.1, "final loss {}", out.final_loss());
        assert!(out.final_loss() < out.loss_history[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = separable();
        let cfg = TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        };
        let a = train(&x, &y, &cfg).unwrap();
        let b = train(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_validation() {
        let (x, _) = separable();
        let err = train(&x, &[1u8; 50], &TrainConfig::default()).unwrap_err();
        assert_eq!(err.to_string(), "single-class data");
        let (x, y) = separable();
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&x, &y, &cfg), Err(Error::InvalidConfig(_))));
    }
}
