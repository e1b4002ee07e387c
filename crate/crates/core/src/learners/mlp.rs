//! Multilayer perceptron: ReLU hidden layers, a single logistic output
//! unit, and mean cross-entropy loss with an optional L2 penalty on the
//! weights. Trained by full-batch gradient descent with momentum 0.9 and a
//! step-halving safeguard: an epoch that would increase the training loss
//! is rolled back and retried at half the step, which makes the recorded
//! loss history literally non-increasing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from;

const MOMENTUM: f64 = 0.9;
const MAX_EPOCHS: usize = 500;
const MIN_STEP: f64 = 1e-12;
/// Stop after this many consecutive epochs with negligible improvement.
const PLATEAU_PATIENCE: usize = 5;
const PLATEAU_TOL: f64 = 1e-7;
/// Stop once the mean cross-entropy alone is this small: every training
/// point is classified with near-certainty and further epochs cannot move
/// a 0.5-threshold decision.
const DATA_LOSS_FLOOR: f64 = 1e-3;
const MLP_STREAM: u64 = 0x4d4c_5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major (out_dim x in_dim).
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Gradient with the same shape as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    pub l2: f64,
    /// Training loss after each accepted epoch (index 0 = initial loss).
    pub loss_history: Vec<f64>,
}

impl MlpModel {
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(forward_logit(&self.params, row))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl MlpParams {
    /// Seeded uniform init scaled by 1/sqrt(fan_in); biases start at zero.
    pub fn init(input_dim: usize, hidden: &[usize], seed: u64) -> MlpParams {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for l in 0..sizes.len() - 1 {
            let (in_dim, out_dim) = (sizes[l], sizes[l + 1]);
            let mut rng = rng_from(seed, &[MLP_STREAM, l as u64]);
            let bound = 1.0 / (in_dim as f64).sqrt();
            let weights = (0..in_dim * out_dim)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            layers.push(Layer { in_dim, out_dim, weights, biases: vec![0.0; out_dim] });
        }
        MlpParams { layers }
    }

    pub fn zeros_like(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    /// Flat view of all parameters (weights then biases per layer), used
    /// by finite-difference checks.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn from_flat(&self, flat: &[f64]) -> MlpParams {
        let mut params = self.clone();
        let mut pos = 0;
        for l in &mut params.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[pos..pos + nw]);
            pos += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[pos..pos + nb]);
            pos += nb;
        }
        params
    }
}

impl MlpGrads {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }
}

/// Forward pass returning all layer activations (ReLU on hidden layers,
/// raw logit at the output).
fn forward_all(params: &MlpParams, row: &[f64]) -> Vec<Vec<f64>> {
    let n_layers = params.layers.len();
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    let mut current = row;
    for (l, layer) in params.layers.iter().enumerate() {
        let mut out = Vec::with_capacity(layer.out_dim);
        for j in 0..layer.out_dim {
            let w = &layer.weights[j * layer.in_dim..(j + 1) * layer.in_dim];
            let z = layer.biases[j] + w.iter().zip(current).map(|(w, x)| w * x).sum::<f64>();
            out.push(if l + 1 == n_layers { z } else { z.max(0.0) });
        }
        acts.push(out);
        current = acts.last().expect("just pushed");
    }
    acts
}

fn forward_logit(params: &MlpParams, row: &[f64]) -> f64 {
    forward_all(params, row).last().expect("output layer")[0]
}

/// (data term, penalty term) of the training objective.
fn loss_parts(
    params: &MlpParams,
    x: &[Vec<f64>],
    y: &[bool],
    sample_weights: &[f64],
    l2: f64,
) -> (f64, f64) {
    let mut data_loss = 0.0;
    for ((row, &label), &wt) in x.iter().zip(y).zip(sample_weights) {
        let z = forward_logit(params, row);
        data_loss += wt * (softplus(z) - if label { z } else { 0.0 });
    }
    if !x.is_empty() {
        data_loss /= x.len() as f64;
    }
    let penalty: f64 = params
        .layers
        .iter()
        .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
        .sum();
    (data_loss, 0.5 * l2 * penalty)
}

/// Mean weighted cross-entropy plus (l2/2)*||W||^2 over weight matrices.
/// An empty batch contributes only the penalty term.
pub fn mlp_loss(
    params: &MlpParams,
    x: &[Vec<f64>],
    y: &[bool],
    sample_weights: &[f64],
    l2: f64,
) -> f64 {
    let (data, penalty) = loss_parts(params, x, y, sample_weights, l2);
    data + penalty
}

/// Analytic gradient of `mlp_loss`. Exposed so finite-difference checks
/// can exercise it directly.
pub fn mlp_gradient(
    params: &MlpParams,
    x: &[Vec<f64>],
    y: &[bool],
    sample_weights: &[f64],
    l2: f64,
) -> MlpGrads {
    let mut grads = params.zeros_like();
    let n_layers = params.layers.len();
    let n = x.len() as f64;
    for ((row, &label), &wt) in x.iter().zip(y).zip(sample_weights) {
        let acts = forward_all(params, row);
        let z = acts[n_layers - 1][0];
        let p = sigmoid(z);
        // delta at the output, already carrying the 1/n batch mean.
        let mut delta = vec![wt * (p - if label { 1.0 } else { 0.0 }) / n];
        for l in (0..n_layers).rev() {
            let layer = &params.layers[l];
            let input: &[f64] = if l == 0 { row } else { &acts[l - 1] };
            let grad_layer = &mut grads.layers[l];
            for (j, &dj) in delta.iter().enumerate() {
                grad_layer.biases[j] += dj;
                let wrow = &mut grad_layer.weights[j * layer.in_dim..(j + 1) * layer.in_dim];
                for (g, &xin) in wrow.iter_mut().zip(input) {
                    *g += dj * xin;
                }
            }
            if l > 0 {
                let mut prev_delta = vec![0.0; layer.in_dim];
                for (j, &dj) in delta.iter().enumerate() {
                    let wrow = &layer.weights[j * layer.in_dim..(j + 1) * layer.in_dim];
                    for (pd, &w) in prev_delta.iter_mut().zip(wrow) {
                        *pd += dj * w;
                    }
                }
                // ReLU gate: gradient flows only through active units.
                for (pd, &a) in prev_delta.iter_mut().zip(&acts[l - 1]) {
                    if a <= 0.0 {
                        *pd = 0.0;
                    }
                }
                delta = prev_delta;
            }
        }
    }
    for (grad_layer, layer) in grads.layers.iter_mut().zip(&params.layers) {
        for (g, &w) in grad_layer.weights.iter_mut().zip(&layer.weights) {
            *g += l2 * w;
        }
    }
    grads
}

pub(crate) fn fit_mlp(
    x: &[Vec<f64>],
    y: &[bool],
    sample_weights: &[f64],
    hidden: &[usize],
    learning_rate: f64,
    l2: f64,
    seed: u64,
) -> MlpModel {
    let mut params = MlpParams::init(x[0].len(), hidden, seed);
    let mut velocity = params.zeros_like();
    let mut eta = learning_rate;
    let mut loss = mlp_loss(&params, x, y, sample_weights, l2);
    let mut history = vec![loss];
    let mut plateau = 0usize;

    'epochs: for _ in 0..MAX_EPOCHS {
        loop {
            let grads = mlp_gradient(&params, x, y, sample_weights, l2);
            let mut trial = params.clone();
            let mut trial_velocity = velocity.clone();
            for ((tl, vl), gl) in trial
                .layers
                .iter_mut()
                .zip(trial_velocity.layers.iter_mut())
                .zip(&grads.layers)
            {
                for ((w, v), g) in tl.weights.iter_mut().zip(vl.weights.iter_mut()).zip(&gl.weights)
                {
                    *v = MOMENTUM * *v - eta * g;
                    *w += *v;
                }
                for ((b, v), g) in tl.biases.iter_mut().zip(vl.biases.iter_mut()).zip(&gl.biases) {
                    *v = MOMENTUM * *v - eta * g;
                    *b += *v;
                }
            }
            let (data_loss, penalty) = loss_parts(&trial, x, y, sample_weights, l2);
            let new_loss = data_loss + penalty;
            if new_loss <= loss {
                params = trial;
                velocity = trial_velocity;
                let improvement = loss - new_loss;
                loss = new_loss;
                history.push(loss);
                if data_loss < DATA_LOSS_FLOOR {
                    break 'epochs;
                }
                if improvement < PLATEAU_TOL * loss.abs().max(1.0) {
                    plateau += 1;
                    if plateau >= PLATEAU_PATIENCE {
                        break 'epochs;
                    }
                } else {
                    plateau = 0;
                }
                break;
            }
            eta *= 0.5;
            if eta < MIN_STEP {
                break 'epochs;
            }
        }
    }
    MlpModel { params, l2, loss_history: history }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relative_error(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
    }

    fn central_difference_grad(
        params: &MlpParams,
        x: &[Vec<f64>],
        y: &[bool],
        w: &[f64],
        l2: f64,
        h: f64,
    ) -> Vec<f64> {
        let flat = params.to_flat();
        let mut grad = Vec::with_capacity(flat.len());
        for k in 0..flat.len() {
            let mut plus = flat.clone();
            plus[k] += h;
            let mut minus = flat.clone();
            minus[k] -= h;
            let lp = mlp_loss(&params.from_flat(&plus), x, y, w, l2);
            let lm = mlp_loss(&params.from_flat(&minus), x, y, w, l2);
            grad.push((lp - lm) / (2.0 * h));
        }
        grad
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        // Random 5-sample batch, d=4, hidden=8, with an L2 term.
        let params = MlpParams::init(4, &[8], 123);
        let mut rng = crate::rng::rng_from(9, &[]);
        use rand::Rng;
        let x: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let y = vec![true, false, true, true, false];
        let w = vec![1.0; 5];
        let analytic = mlp_gradient(&params, &x, &y, &w, 1e-3).to_flat();
        let numeric = central_difference_grad(&params, &x, &y, &w, 1e-3, 1e-5);
        let max_err = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| relative_error(*a, *n))
            .fold(0.0, f64::max);
        assert!(max_err < 1e-4, "max relative error {max_err}");
    }

    #[test]
    fn gradient_check_holds_for_two_hidden_layers() {
        let params = MlpParams::init(3, &[6, 4], 321);
        let x = vec![vec![0.3, -0.8, 1.1], vec![-1.0, 0.2, 0.5], vec![0.0, 0.9, -0.4]];
        let y = vec![false, true, false];
        let w = vec![1.0; 3];
        let analytic = mlp_gradient(&params, &x, &y, &w, 0.0).to_flat();
        let numeric = central_difference_grad(&params, &x, &y, &w, 0.0, 1e-5);
        let max_err = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| relative_error(*a, *n))
            .fold(0.0, f64::max);
        assert!(max_err < 1e-4, "max relative error {max_err}");
    }

    #[test]
    fn zero_weight_network_balanced_batch_has_zero_output_bias_gradient() {
        let mut params = MlpParams::init(2, &[4], 1);
        for l in &mut params.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.biases.iter_mut().for_each(|b| *b = 0.0);
        }
        let x = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.3, 0.3], vec![2.0, -2.0]];
        let y = vec![true, false, true, false]; // balanced
        let w = vec![1.0; 4];
        let grads = mlp_gradient(&params, &x, &y, &w, 0.0);
        let out_bias_grad = grads.layers.last().unwrap().biases[0];
        assert_eq!(out_bias_grad, 0.0);
    }

    #[test]
    fn empty_batch_gradient_is_the_l2_term() {
        let params = MlpParams::init(3, &[5], 7);
        let lambda = 0.01;
        let grads = mlp_gradient(&params, &[], &[], &[], lambda);
        for (gl, pl) in grads.layers.iter().zip(&params.layers) {
            for (g, w) in gl.weights.iter().zip(&pl.weights) {
                assert!((g - lambda * w).abs() < 1e-15);
            }
            assert!(gl.biases.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn training_loss_history_is_non_increasing() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()])
            .collect();
        let y: Vec<bool> = (0..30).map(|i| i % 2 == 0).collect();
        let w = vec![1.0; 30];
        let model = fit_mlp(&x, &y, &w, &[64], 1e-2, 1e-4, 55);
        assert!(model.loss_history.len() >= 2);
        for pair in model.loss_history.windows(2) {
            assert!(pair[1] <= pair[0], "loss increased: {} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn init_is_seeded_and_scaled_by_fan_in() {
        let a = MlpParams::init(16, &[8], 42);
        let b = MlpParams::init(16, &[8], 42);
        assert_eq!(a, b);
        let c = MlpParams::init(16, &[8], 43);
        assert_ne!(a, c);
        let bound = 1.0 / 4.0; // 1/sqrt(16)
        assert!(a.layers[0].weights.iter().all(|w| w.abs() < bound));
        assert!(a.layers[0].biases.iter().all(|&b| b == 0.0));
    }
}
