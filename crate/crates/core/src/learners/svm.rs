//! Linear SVM: L2-regularized hinge loss trained by full-batch
//! deterministic subgradient descent, with logistic (Platt-style)
//! calibration of margins to probabilities.

use serde::{Deserialize, Serialize};

const ITERATIONS: usize = 2000;
const ETA0: f64 = 1.0;
const CALIBRATION_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Probability calibration: p = sigmoid(alpha * margin + beta).
    pub alpha: f64,
    pub beta: f64,
}

impl SvmModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.alpha * self.margin(row) + self.beta)
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

pub(crate) fn fit_svm(x: &[Vec<f64>], y: &[bool], sample_weights: &[f64], lambda: f64) -> SvmModel {
    let n = x.len();
    let dim = x[0].len();
    let signs: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for t in 1..=ITERATIONS {
        let eta = ETA0 / (1.0 + lambda * t as f64);
        let mut grad_w = vec![0.0; dim];
        let mut grad_b = 0.0;
        for i in 0..n {
            let margin = w.iter().zip(&x[i]).map(|(w, v)| w * v).sum::<f64>() + b;
            if signs[i] * margin < 1.0 {
                let c = sample_weights[i] * signs[i] / n as f64;
                for (g, v) in grad_w.iter_mut().zip(&x[i]) {
                    *g += c * v;
                }
                grad_b += c;
            }
        }
        for (wj, gj) in w.iter_mut().zip(&grad_w) {
            *wj = (1.0 - eta * lambda) * *wj + eta * gj;
        }
        b += eta * grad_b; // bias unregularized
    }

    let margins: Vec<f64> = x
        .iter()
        .map(|row| w.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + b)
        .collect();
    let (alpha, beta) = calibrate(&margins, y, sample_weights);
    SvmModel { weights: w, bias: b, alpha, beta }
}

/// Weighted logistic loss of p = sigmoid(a*m + b) over the margins.
fn calibration_loss(margins: &[f64], y: &[bool], weights: &[f64], a: f64, b: f64, ridge: f64) -> f64 {
    let n = margins.len() as f64;
    let mut loss = 0.0;
    for ((&m, &label), &wt) in margins.iter().zip(y).zip(weights) {
        let z = a * m + b;
        // log(1 + e^z) - y*z, computed stably.
        let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        loss += wt * (softplus - if label { z } else { 0.0 });
    }
    loss / n + 0.5 * ridge * (a * a + b * b)
}

/// 1-d logistic regression of labels on margins by damped Newton steps.
/// A tiny ridge keeps the Newton system nonsingular when margins are
/// perfectly separable.
fn calibrate(margins: &[f64], y: &[bool], weights: &[f64]) -> (f64, f64) {
    let n = margins.len() as f64;
    let ridge = 1e-9;
    let mut a = 0.0;
    let mut b = 0.0;
    let mut loss = calibration_loss(margins, y, weights, a, b, ridge);
    for _ in 0..CALIBRATION_STEPS {
        let mut g_a = ridge * a;
        let mut g_b = ridge * b;
        let mut h_aa = ridge;
        let mut h_ab = 0.0;
        let mut h_bb = ridge;
        for ((&m, &label), &wt) in margins.iter().zip(y).zip(weights) {
            let p = sigmoid(a * m + b);
            let r = wt * (p - if label { 1.0 } else { 0.0 }) / n;
            g_a += r * m;
            g_b += r;
            let h = wt * p * (1.0 - p) / n;
            h_aa += h * m * m;
            h_ab += h * m;
            h_bb += h;
        }
        let det = h_aa * h_bb - h_ab * h_ab;
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = (h_bb * g_a - h_ab * g_b) / det;
        let step_b = (h_aa * g_b - h_ab * g_a) / det;

        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let na = a - scale * step_a;
            let nb = b - scale * step_b;
            let new_loss = calibration_loss(margins, y, weights, na, nb, ridge);
            if new_loss <= loss {
                a = na;
                b = nb;
                loss = new_loss;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_on_symmetric_margins_centers_at_half() {
        // Balanced classes, mirror-image margins: sigmoid(beta) must sit
        // within 0.05 of 0.5.
        let margins = vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let y = vec![false, false, false, true, true, true];
        let w = vec![1.0; 6];
        let (_, beta) = calibrate(&margins, &y, &w);
        assert!((sigmoid(beta) - 0.5).abs() < 0.05);
    }

    #[test]
    fn calibrated_probabilities_are_monotone_in_margin() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 10.0 - 2.0]).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let w = vec![1.0; 40];
        let model = fit_svm(&x, &y, &w, 1e-2);
        let p_low = model.predict_proba(&[-2.0]);
        let p_high = model.predict_proba(&[2.0]);
        assert!(p_low < 0.5 && p_high > 0.5, "{p_low} {p_high}");
    }

    #[test]
    fn separable_data_is_fit_cleanly() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..30 {
            let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
            x.push(vec![sign * (2.0 + (i % 5) as f64 * 0.1), (i % 3) as f64 * 0.1]);
            y.push(sign > 0.0);
        }
        let w = vec![1.0; x.len()];
        let model = fit_svm(&x, &y, &w, 1e-3);
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(model.predict_proba(row) >= 0.5, label);
        }
    }
}
