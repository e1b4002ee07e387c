//! Per-feature standardization fit on training data only.

use serde::{Deserialize, Serialize};

/// Per-feature mean and scale. Features whose training variance is
/// (numerically) zero get scale 1 so constant columns pass through
/// unchanged instead of exploding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Standardizer {
        let n = x.len() as f64;
        let dim = x.first().map_or(0, |r| r.len());
        let mut means = vec![0.0; dim];
        for row in x {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut scales = vec![0.0; dim];
        for row in x {
            for ((s, v), m) in scales.iter_mut().zip(row).zip(&means) {
                let d = v - m;
                *s += d * d;
            }
        }
        for (s, m) in scales.iter_mut().zip(&means) {
            let std = (*s / n).sqrt();
            // Rounding noise on constant columns must not count as variance.
            *s = if std <= 1e-12 * (1.0 + m.abs()) { 1.0 } else { std };
        }
        Standardizer { means, scales }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|row| {
                row.iter()
                    .zip(&self.means)
                    .zip(&self.scales)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect()
            })
            .collect()
    }
}
