use std::collections::{HashMap, VecDeque};

use super::BranchPredictor;

/// Per-pc perceptron over a shared global history of `±1` outcomes.
#[derive(Debug, Clone)]
pub struct Perceptron {
    history_len: usize,
    theta: i64,
    l2: f64,
    weights: HashMap<usize, Vec<i64>>,
    /// Most recent outcome first.
    history: VecDeque<i64>,
}

impl Perceptron {
    pub const HISTORY: usize = 64;
    pub const L2: f64 = 1e-4;

    pub fn new() -> Self {
        Self::with_params(Self::HISTORY, Self::default_theta(Self::HISTORY), Self::L2)
    }

    /// `floor(1.93 h + 14)`.
    pub fn default_theta(h: usize) -> i64 {
        (1.93 * h as f64 + 14.0).floor() as i64
    }

    pub fn with_params(history_len: usize, theta: i64, l2: f64) -> Self {
        Self { history_len, theta, l2, weights: HashMap::new(), history: std::iter::repeat(-1).take(history_len).collect() }
    }

    pub fn theta(&self) -> i64 {
        self.theta
    }

    /// Bias first, then one weight per history position.
    pub fn weights(&self, pc: usize) -> Vec<i64> {
        self.weights.get(&pc).cloned().unwrap_or_else(|| vec![0; self.history_len + 1])
    }

    pub fn output(&self, pc: usize) -> i64 {
        match self.weights.get(&pc) {
            Some(w) => w[0] + w[1..].iter().zip(&self.history).map(|(w, x)| w * x).sum::<i64>(),
            None => 0,
        }
    }
}

impl Default for Perceptron {
    fn default() -> Self {
        Self::new()
    }
}

impl BranchPredictor for Perceptron {
    fn predict(&self, pc: usize) -> bool {
        self.output(pc) >= 0
    }

    fn update(&mut self, pc: usize, taken: bool) {
        let y = self.output(pc);
        let t = if taken { 1 } else { -1 };
        if (y >= 0) != taken || y.abs() <= self.theta {
            let l2 = self.l2;
            let w = self.weights.entry(pc).or_insert_with(|| vec![0; self.history_len + 1]);
            for wi in w.iter_mut() {
                // Integer shrink; only bites once |w| reaches 1/l2.
                *wi -= (*wi as f64 * l2).trunc() as i64;
            }
            w[0] += t;
            for (wi, x) in w[1..].iter_mut().zip(&self.history) {
                *wi += t * x;
            }
        }
        if self.history_len > 0 {
            self.history.pop_back();
            self.history.push_front(t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_for_64() {
        assert_eq!(Perceptron::default_theta(64), 137);
    }

    #[test]
    fn zero_weights_predict_taken_then_learn() {
        let mut p = Perceptron::new();
        assert!(p.step(3, false));
        assert_eq!(p.weights(3)[0], -1);
    }

    #[test]
    fn confident_correct_prediction_does_not_train() {
        let mut p = Perceptron::with_params(2, 0, 0.0);
        p.step(0, true);
        let before = p.weights(0);
        assert!(p.output(0) > 0);
        assert!(p.step(0, true));
        assert_eq!(p.weights(0), before);
    }
}
