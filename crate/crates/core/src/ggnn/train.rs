use std::collections::BTreeMap;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Scalar;

use super::batch::{Sample, Target, Task, TaskBatch};
use super::model::loss_and_grads;
use super::params::GgnnParams;
use super::GgnnError;

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<S> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: GgnnParams<S>,
    v: GgnnParams<S>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(template: &GgnnParams<S>, lr: f64) -> Self {
        let z = GgnnParams::zeros(template.dim(), template.feature_width());
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: z.clone(), v: z }
    }

    pub fn step(&mut self, params: &mut GgnnParams<S>, grads: &GgnnParams<S>) {
        self.t += 1;
        let (b1, b2) = (S::of(self.beta1), S::of(self.beta2));
        let c1 = S::of(1.0 - self.beta1.powi(self.t));
        let c2 = S::of(1.0 - self.beta2.powi(self.t));
        let (lr, eps, one) = (S::of(self.lr), S::of(self.eps), S::one());
        let tensors = params.tensors_mut().into_iter().zip(grads.tensors()).zip(self.m.tensors_mut()).zip(self.v.tensors_mut());
        for ((((_, mut p), (_, g)), (_, mut m)), (_, mut v)) in tensors {
            for (((p, &g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
    }
}

/// Which heads receive supervision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSet {
    pub branch: bool,
    pub prefetch: bool,
}

impl TaskSet {
    pub const BOTH: TaskSet = TaskSet { branch: true, prefetch: true };
    pub const BRANCH: TaskSet = TaskSet { branch: true, prefetch: false };
    pub const PREFETCH: TaskSet = TaskSet { branch: false, prefetch: true };

    pub fn admits(&self, target: &Target) -> bool {
        match target {
            Target::Taken(_) => self.branch,
            Target::Address(_) => self.prefetch,
        }
    }
}

impl FromStr for TaskSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut t = TaskSet { branch: false, prefetch: false };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "branch" => t.branch = true,
                "prefetch" => t.prefetch = true,
                other => return Err(format!("unknown task `{other}`")),
            }
        }
        if !t.branch && !t.prefetch {
            return Err("no tasks selected".into());
        }
        Ok(t)
    }
}

impl std::fmt::Display for TaskSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.branch, self.prefetch) {
            (true, true) => f.write_str("branch,prefetch"),
            (true, false) => f.write_str("branch"),
            (false, true) => f.write_str("prefetch"),
            (false, false) => f.write_str(""),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub steps: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub tasks: TaskSet,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { dim: 64, steps: 5, lr: 0.001, epochs: 20, batch_size: 8, seed: 0, tasks: TaskSet::BOTH }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    /// Mean per-sample loss of every optimizer step.
    pub step_losses: Vec<f64>,
    /// Mean per-sample loss over each epoch.
    pub epoch_losses: Vec<f64>,
}

/// A fresh random partition into batches of at most `batch_size` samples,
/// each drawn from a single graph, in random order.
fn plan_batches(data: &[Sample<impl Scalar>], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in data.iter().enumerate() {
        groups.entry(s.input.id).or_default().push(i);
    }
    let mut batches = Vec::new();
    for mut g in groups.into_values() {
        g.shuffle(rng);
        batches.extend(g.chunks(batch_size.max(1)).map(<[usize]>::to_vec));
    }
    batches.shuffle(rng);
    batches
}

fn filtered<S: Scalar>(s: &Sample<S>, tasks: TaskSet) -> Sample<S> {
    let kept: Vec<Task<S>> = s.tasks.iter().filter(|t| tasks.admits(&t.target)).copied().collect();
    Sample { input: s.input.clone(), features: s.features.clone(), tasks: kept }
}

/// Trains fresh parameters seeded from `cfg.seed`.
pub fn train<S: Scalar>(data: &[Sample<S>], cfg: &TrainConfig) -> Result<(GgnnParams<S>, TrainLog), GgnnError> {
    let first = data.first().ok_or(GgnnError::EmptyDataset)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = GgnnParams::init(cfg.dim, first.features.ncols(), &mut rng);
    train_from(params, data, cfg, &mut rng)
}

/// Continues training from given parameters.
pub fn train_from<S: Scalar>(
    mut params: GgnnParams<S>,
    data: &[Sample<S>],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(GgnnParams<S>, TrainLog), GgnnError> {
    let data: Vec<Sample<S>> = data.iter().map(|s| filtered(s, cfg.tasks)).filter(|s| !s.tasks.is_empty()).collect();
    if data.is_empty() {
        return Err(GgnnError::EmptyDataset);
    }
    let mut adam = Adam::new(&params, cfg.lr);
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let batches = plan_batches(&data, cfg.batch_size, rng);
        let mut total = 0.0;
        for (step, idx) in batches.iter().enumerate() {
            let batch = TaskBatch::new(idx.iter().map(|&i| &data[i]));
            let (loss, mut grads) = loss_and_grads(&batch, &params, cfg.steps)?;
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(GgnnError::Diverged { epoch, step });
            }
            let n = idx.len() as f64;
            grads.add_scaled(&grads.clone(), S::of(1.0 / n - 1.0));
            adam.step(&mut params, &grads);
            log.step_losses.push(loss / n);
            total += loss;
        }
        log.epoch_losses.push(total / data.len() as f64);
    }
    Ok((params, log))
}
