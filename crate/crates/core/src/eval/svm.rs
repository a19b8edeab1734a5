//! One-vs-rest linear classifier with squared hinge loss and L2 penalty,
//! fitted by full-batch gradient descent on the primal.

use super::EvalError;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub classes: usize,
    /// Per class: weights then bias.
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    /// Weight of `||w||^2 / 2` relative to the mean squared hinge.
    pub l2: f64,
    pub iterations: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { l2: 0.01, iterations: 2000 }
    }
}

/// Per-feature mean and scale, fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..d)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 1e-24 { var.sqrt() } else { 1.0 }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }
}

impl LinearSvm {
    pub fn fit(x: &[Vec<f64>], y: &[usize], cfg: &SvmConfig) -> Result<Self, EvalError> {
        if x.len() != y.len() {
            return Err(EvalError::LengthMismatch { predicted: x.len(), labels: y.len() });
        }
        let classes = y.iter().max().map_or(0, |m| m + 1);
        let distinct = y.iter().collect::<std::collections::BTreeSet<_>>().len();
        if distinct < 2 {
            return Err(EvalError::SingleClass);
        }
        let d = x[0].len();
        let n = x.len() as f64;
        // Step size from a bound on the curvature of the objective.
        let max_sq = x.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0).fold(0.0, f64::max);
        let lr = 1.0 / (2.0 * max_sq + cfg.l2);
        let weights = (0..classes)
            .map(|c| {
                let mut w = vec![0.0; d + 1];
                for _ in 0..cfg.iterations {
                    let mut g: Vec<f64> = w.iter().map(|v| cfg.l2 * v).collect();
                    g[d] = 0.0;
                    for (row, &label) in x.iter().zip(y) {
                        let t = if label == c { 1.0 } else { -1.0 };
                        let margin = 1.0 - t * (dot(&w[..d], row) + w[d]);
                        if margin > 0.0 {
                            let k = -2.0 * t * margin / n;
                            row.iter().zip(&mut g).for_each(|(v, gi)| *gi += k * v);
                            g[d] += k;
                        }
                    }
                    w.iter_mut().zip(&g).for_each(|(wi, gi)| *wi -= lr * gi);
                }
                w
            })
            .collect();
        Ok(Self { classes, weights })
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let d = row.len();
        let scores = self.weights.iter().map(|w| dot(&w[..d], row) + w[d]);
        scores.enumerate().fold((0, f64::NEG_INFINITY), |best, (c, s)| if s > best.1 { (c, s) } else { best }).0
    }

    pub fn accuracy(&self, x: &[Vec<f64>], y: &[usize]) -> f64 {
        let hits = x.iter().zip(y).filter(|(r, &l)| self.predict(r) == l).count();
        hits as f64 / y.len().max(1) as f64
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
