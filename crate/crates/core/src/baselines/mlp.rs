//! Fully connected binary classifier: ReLU hidden layers, sigmoid output,
//! cross-entropy loss with L2, trained by Adam on shuffled minibatches.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("no training samples")]
    Empty,
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("loss became non-finite at epoch {0}")]
    Diverged(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    /// Capped at the sample count.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden: vec![100], lr: 1e-3, l2: 1e-4, epochs: 200, batch_size: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<S> {
    /// `(W: out × in, b)` per layer; the last layer has one output.
    pub layers: Vec<(Array2<S>, Array1<S>)>,
}

impl<S: Scalar> Mlp<S> {
    /// Glorot-uniform weights, zero biases.
    pub fn new(input: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let wm = Array2::from_shape_fn((w[1], w[0]), |_| S::of(rng.gen_range(-bound..bound)));
                (wm, Array1::zeros(w[1]))
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(input: usize, hidden: &[usize]) -> Self {
        let mut m = Self::new(input, hidden, &mut ChaCha8Rng::seed_from_u64(0));
        for (w, _) in &mut m.layers {
            w.fill(S::zero());
        }
        m
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].0.ncols()
    }

    /// Activations of every layer, input first; the last entry holds logits.
    fn activations(&self, x: ArrayView2<S>) -> Vec<Array2<S>> {
        let mut acts = vec![x.to_owned()];
        for (i, (w, b)) in self.layers.iter().enumerate() {
            let mut a = acts.last().expect("non-empty").dot(&w.t()) + b;
            if i + 1 < self.layers.len() {
                a.mapv_inplace(|v| v.max(S::zero()));
            }
            acts.push(a);
        }
        acts
    }

    /// Probability of the positive class, one per row.
    pub fn predict_proba(&self, x: ArrayView2<S>) -> Array1<S> {
        self.activations(x).pop().expect("output layer").column(0).mapv(Scalar::sigmoid)
    }

    pub fn predict(&self, x: ArrayView2<S>) -> Vec<bool> {
        self.predict_proba(x).iter().map(|&p| p >= S::of(0.5)).collect()
    }

    /// Mean cross-entropy plus `l2 / (2n) * ||W||^2`, and its gradient.
    fn loss_and_grads(&self, x: ArrayView2<S>, y: &Array1<S>, l2: S, n_total: usize) -> (S, Vec<(Array2<S>, Array1<S>)>) {
        let acts = self.activations(x);
        let n = S::of(x.nrows() as f64);
        let logits = acts.last().expect("output").column(0).to_owned();
        let mut loss = logits.iter().zip(y).map(|(&l, &t)| l.bce_with_logit(t)).sum::<S>() / n;
        let reg = l2 / S::of(n_total as f64);
        loss += reg * S::of(0.5) * self.layers.iter().map(|(w, _)| w.iter().map(|&v| v * v).sum::<S>()).sum::<S>();
        let mut delta = (logits.mapv(Scalar::sigmoid) - y).insert_axis(Axis(1)) / n;
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let (w, _) = &self.layers[i];
            let gw = delta.t().dot(&acts[i]) + &(w * reg);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(w);
                back.zip_mut_with(&acts[i], |d, &a| {
                    if a <= S::zero() {
                        *d = S::zero();
                    }
                });
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        (loss, grads)
    }

    /// Trains a fresh network; returns it with the mean loss of every epoch.
    pub fn train(x: ArrayView2<S>, labels: &[bool], cfg: &MlpConfig) -> Result<(Self, Vec<f64>), MlpError> {
        if x.nrows() != labels.len() {
            return Err(MlpError::LengthMismatch { features: x.nrows(), labels: labels.len() });
        }
        if labels.is_empty() {
            return Err(MlpError::Empty);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut net = Self::new(x.ncols(), &cfg.hidden, &mut rng);
        let y = Array1::from_iter(labels.iter().map(|&t| if t { S::one() } else { S::zero() }));
        let n = labels.len();
        let bs = cfg.batch_size.clamp(1, n);
        let (b1, b2, eps, lr) = (S::of(0.9), S::of(0.999), S::of(1e-8), S::of(cfg.lr));
        let mut m: Vec<(Array2<S>, Array1<S>)> =
            net.layers.iter().map(|(w, b)| (Array2::zeros(w.raw_dim()), Array1::zeros(b.len()))).collect();
        let mut v = m.clone();
        let mut t = 0i32;
        let mut order: Vec<usize> = (0..n).collect();
        let mut history = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for chunk in order.chunks(bs) {
                let xb = x.select(Axis(0), chunk);
                let yb = y.select(Axis(0), chunk);
                let (loss, grads) = net.loss_and_grads(xb.view(), &yb, S::of(cfg.l2), n);
                if !loss.is_finite() {
                    return Err(MlpError::Diverged(epoch));
                }
                total += loss.as_f64() * chunk.len() as f64;
                t += 1;
                let c1 = S::one() - b1.powi(t);
                let c2 = S::one() - b2.powi(t);
                for (((w, b), (gw, gb)), ((mw, mb), (vw, vb))) in
                    net.layers.iter_mut().zip(&grads).zip(m.iter_mut().zip(v.iter_mut()))
                {
                    let adam = |p: &mut S, g: S, m: &mut S, v: &mut S| {
                        *m = b1 * *m + (S::one() - b1) * g;
                        *v = b2 * *v + (S::one() - b2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    };
                    for (((p, &g), m), v) in w.iter_mut().zip(gw).zip(mw.iter_mut()).zip(vw.iter_mut()) {
                        adam(p, g, m, v);
                    }
                    for (((p, &g), m), v) in b.iter_mut().zip(gb).zip(mb.iter_mut()).zip(vb.iter_mut()) {
                        adam(p, g, m, v);
                    }
                }
            }
            history.push(total / n as f64);
        }
        Ok((net, history))
    }
}
