//! Finite-difference verification of the analytic gradients and a random
//! small-graph generator to drive it.

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;

use crate::graph::{EdgeType, NodeKind};
use crate::Scalar;

use super::batch::{GraphInput, Sample, Target, Task, TaskBatch, Topology};
use super::model::loss_and_grads;
use super::params::GgnnParams;
use super::GgnnError;

/// Largest `|analytic - numeric| / max(1, |numeric|)` over one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorError {
    pub name: String,
    pub max_rel_error: f64,
}

/// Compares analytic gradients against central differences for every scalar
/// parameter. Run in `f64`.
pub fn check_gradients(
    batch: &TaskBatch<f64>,
    params: &GgnnParams<f64>,
    steps: usize,
    eps: f64,
) -> Result<Vec<TensorError>, GgnnError> {
    let (_, analytic) = loss_and_grads(batch, params, steps)?;
    let mut probe = params.clone();
    let mut out = Vec::new();
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    for (ti, name) in names.into_iter().enumerate() {
        let len = params.tensors()[ti].1.len();
        let grad: Vec<f64> = analytic.tensors()[ti].1.iter().copied().collect();
        let mut worst = 0.0f64;
        for j in 0..len {
            let orig = params.tensors()[ti].1.iter().nth(j).copied().expect("in range");
            let mut eval = |x: f64| -> Result<f64, GgnnError> {
                *probe.tensors_mut()[ti].1.iter_mut().nth(j).expect("in range") = x;
                Ok(loss_and_grads(batch, &probe, steps)?.0)
            };
            let numeric = (eval(orig + eps)? - eval(orig - eps)?) / (2.0 * eps);
            eval(orig)?;
            worst = worst.max((grad[j] - numeric).abs() / numeric.abs().max(1.0));
        }
        out.push(TensorError { name, max_rel_error: worst });
    }
    Ok(out)
}

/// A random graph with at most `max_nodes` nodes, random typed edges (each
/// with its reverse), random features and at least one task.
pub fn random_sample<S: Scalar>(rng: &mut impl Rng, max_nodes: usize, feature_width: usize) -> Sample<S> {
    let n = rng.gen_range(2..=max_nodes.max(2));
    let mut edges: [Vec<(usize, usize)>; EdgeType::COUNT] = Default::default();
    let m = rng.gen_range(1..=2 * n);
    for _ in 0..m {
        let k = rng.gen_range(0..EdgeType::COUNT / 2);
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        edges[k].push((u, v));
        edges[k + EdgeType::COUNT / 2].push((v, u));
    }
    let subtypes: Vec<Option<usize>> = (0..n)
        .map(|_| if rng.gen_bool(0.3) { None } else { Some(rng.gen_range(0..NodeKind::SUBTYPES)) })
        .collect();
    let mut features = Array2::<S>::zeros((n, feature_width));
    for (v, sub) in subtypes.iter().enumerate() {
        if sub.is_some() {
            features.row_mut(v).mapv_inplace(|_| S::of(if rng.gen_bool(0.5) { 1.0 } else { 0.0 }));
        }
    }
    let mut tasks = Vec::new();
    for v in 0..n {
        if tasks.is_empty() && v + 1 == n || rng.gen_bool(0.3) {
            let target = if rng.gen_bool(0.5) { Target::Taken(rng.gen()) } else { Target::Address(rng.gen()) };
            tasks.push(Task { node: v, mask: S::one(), target });
        }
    }
    let input = GraphInput { id: 0, topology: Topology::new(n, edges), subtypes };
    Sample { input: Arc::new(input), features, tasks }
}
