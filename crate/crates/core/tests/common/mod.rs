//! Test-only oracles, written independently of the library's code paths.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unlearn_core::model::ModelParams;
use unlearn_core::{Dataset, Matrix};

pub const LALONDE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/lalonde.csv");

/// Plain nested-loop forward pass returning the probability.
pub fn oracle_forward(params: &ModelParams, x: &[f64]) -> f64 {
    let mut a: Vec<f64> = x.to_vec();
    let n_layers = params.layers.len();
    for (k, layer) in params.layers.iter().enumerate() {
        let mut z = vec![0.0; layer.fan_out];
        for o in 0..layer.fan_out {
            let mut acc = layer.bias[o];
            for i in 0..layer.fan_in {
                acc += layer.weights[o * layer.fan_in + i] * a[i];
            }
            z[o] = acc;
        }
        a = if k + 1 < n_layers {
            z.into_iter().map(|v| if v > 0.0 { v } else { 0.0 }).collect()
        } else {
            vec![1.0 / (1.0 + (-z[0]).exp())]
        };
    }
    a[0]
}

/// Smallest |pre-activation| over all hidden units and rows. Central
/// differences straddle the ReLU kink when this is below the step size.
pub fn min_hidden_margin(params: &ModelParams, x: &Matrix) -> f64 {
    let mut margin = f64::INFINITY;
    for r in 0..x.rows() {
        let mut a: Vec<f64> = x.row(r).to_vec();
        for layer in &params.layers[..params.layers.len() - 1] {
            let mut next = vec![0.0; layer.fan_out];
            for o in 0..layer.fan_out {
                let mut z = layer.bias[o];
                for i in 0..layer.fan_in {
                    z += layer.weights[o * layer.fan_in + i] * a[i];
                }
                margin = margin.min(z.abs());
                next[o] = z.max(0.0);
            }
            a = next;
        }
    }
    margin
}

/// Mean clamped BCE using [`oracle_forward`].
pub fn oracle_loss(params: &ModelParams, x: &Matrix, y: &[u8]) -> f64 {
    let mut total = 0.0;
    for i in 0..x.rows() {
        let p = oracle_forward(params, x.row(i)).clamp(1e-7, 1.0 - 1e-7);
        let yi = y[i] as f64;
        total -= yi * p.ln() + (1.0 - yi) * (1.0 - p).ln();
    }
    total / x.rows() as f64
}

/// Central finite-difference gradient, flattened in `ModelParams::iter` order.
pub fn finite_difference(params: &ModelParams, x: &Matrix, y: &[u8], h: f64) -> Vec<f64> {
    let n = params.num_params();
    let mut out = Vec::with_capacity(n);
    for idx in 0..n {
        let mut plus = params.clone();
        let mut minus = params.clone();
        *plus.iter_mut().nth(idx).unwrap() += h;
        *minus.iter_mut().nth(idx).unwrap() -= h;
        out.push((oracle_loss(&plus, x, y) - oracle_loss(&minus, x, y)) / (2.0 * h));
    }
    out
}

/// Scalar Adam written from the textbook update rule.
pub struct ScalarAdam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: f64,
    v: f64,
    t: i32,
}

impl ScalarAdam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            m: 0.0,
            v: 0.0,
            t: 0,
        }
    }

    pub fn step(&mut self, theta: f64, g: f64) -> f64 {
        self.t += 1;
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g;
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g;
        let mh = self.m / (1.0 - self.beta1.powi(self.t));
        let vh = self.v / (1.0 - self.beta2.powi(self.t));
        theta - self.lr * mh / (vh.sqrt() + self.eps)
    }
}

/// Greedy matching by exhaustive search: at each step list every
/// (current treated, unmatched control) candidate and take the first in
/// (distance, control id) order.
pub fn brute_force_pairs(scores: &[f64], treatment: &[u8], k: usize) -> Vec<(usize, usize, f64)> {
    let mut taken = std::collections::HashSet::new();
    let mut pairs = Vec::new();
    let treated: Vec<usize> = (0..scores.len()).filter(|&i| treatment[i] == 1).collect();
    for &t in treated.iter().take(k) {
        let mut candidates: Vec<(f64, usize)> = (0..scores.len())
            .filter(|&c| treatment[c] == 0 && !taken.contains(&c))
            .map(|c| ((scores[t] - scores[c]).abs(), c))
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (d, c) = candidates[0];
        taken.insert(c);
        pairs.push((t, c, d));
    }
    pairs
}

/// Random dataset with `n` rows, `d` covariates and both groups present.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    assert!(n >= 2);
    let mut treatment: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.4))).collect();
    treatment[0] = 1;
    treatment[1] = 0;
    let x: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let outcome = (0..n).map(|_| rng.gen_range(0.0..10_000.0)).collect();
    Dataset::new(
        (0..d).map(|j| format!("x{j}")).collect(),
        Matrix::from_vec(n, d, x).unwrap(),
        treatment,
        outcome,
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
