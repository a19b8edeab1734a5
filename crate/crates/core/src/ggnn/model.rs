use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::encode::embed_features;
use crate::graph::{EdgeType, FusedGraph, NodeId, NodeKind, PseudoSub};
use crate::Scalar;

use super::batch::{Target, TaskBatch, Topology};
use super::params::GgnnParams;
use super::{GgnnError, ADDRESS_BITS};

struct StepCache<S> {
    h: Array2<S>,
    m: Array2<S>,
    z: Array2<S>,
    r: Array2<S>,
    c: Array2<S>,
    rh: Array2<S>,
    /// Per edge type: row `v` holds the sum of source states over incoming edges.
    sums: Vec<Option<Array2<S>>>,
}

fn sigmoid<S: Scalar>(a: Array2<S>) -> Array2<S> {
    a.mapv_into(Scalar::sigmoid)
}

/// `dst[to] += src[from]` for every pair.
fn scatter_add<S: Scalar>(dst: &mut Array2<S>, src: &Array2<S>, pairs: impl Iterator<Item = (usize, usize)>) {
    let d = src.ncols();
    let src = src.as_slice().expect("row-major");
    let dst = dst.as_slice_mut().expect("row-major");
    for (from, to) in pairs {
        let (s, t) = (&src[from * d..(from + 1) * d], &mut dst[to * d..(to + 1) * d]);
        for (x, &y) in t.iter_mut().zip(s) {
            *x += y;
        }
    }
}

fn check_dims<S: Scalar>(topo: &Topology, x: &Array2<S>, p: &GgnnParams<S>, steps: usize) -> Result<(), GgnnError> {
    if steps == 0 {
        return Err(GgnnError::ZeroSteps);
    }
    if x.nrows() != topo.nodes {
        return Err(GgnnError::DimensionMismatch { what: "node count", expected: topo.nodes, got: x.nrows() });
    }
    if x.ncols() != p.dim() {
        return Err(GgnnError::DimensionMismatch { what: "embedding width", expected: p.dim(), got: x.ncols() });
    }
    Ok(())
}

fn step_forward<S: Scalar>(topo: &Topology, h: Array2<S>, p: &GgnnParams<S>) -> (Array2<S>, StepCache<S>) {
    let (n, d) = h.dim();
    let mut m = Array2::<S>::zeros((n, d));
    let mut sums = Vec::with_capacity(EdgeType::COUNT);
    for k in 0..EdgeType::COUNT {
        if topo.edges[k].is_empty() {
            sums.push(None);
            continue;
        }
        let mut s = Array2::<S>::zeros((n, d));
        scatter_add(&mut s, &h, topo.edges[k].iter().copied());
        m += &s.dot(&p.msg_w[k].t());
        for (v, &deg) in topo.in_degree[k].iter().enumerate() {
            if deg > 0 {
                m.row_mut(v).scaled_add(S::of(deg as f64), &p.msg_b[k]);
            }
        }
        sums.push(Some(s));
    }
    let g = &p.gru;
    let z = sigmoid(m.dot(&g.wz.t()) + h.dot(&g.uz.t()) + &g.bz);
    let r = sigmoid(m.dot(&g.wr.t()) + h.dot(&g.ur.t()) + &g.br);
    let rh = &r * &h;
    let c = (m.dot(&g.wh.t()) + rh.dot(&g.uh.t()) + &g.bh).mapv_into(|v| v.tanh());
    // h' = (1 - z) h + z c
    let next = &h + &(&z * &(&c - &h));
    (next, StepCache { h, m, z, r, c, rh, sums })
}

fn step_backward<S: Scalar>(
    topo: &Topology,
    cache: &StepCache<S>,
    p: &GgnnParams<S>,
    dnext: &Array2<S>,
    grads: &mut GgnnParams<S>,
) -> Array2<S> {
    let one = S::one();
    let StepCache { h, m, z, r, c, rh, sums } = cache;
    let g = &p.gru;
    let dz = dnext * &(c - h);
    let dc = dnext * z;
    let mut dh = dnext * &z.mapv(|v| one - v);

    let dac = &dc * &c.mapv(|v| one - v * v);
    grads.gru.wh += &dac.t().dot(m);
    grads.gru.uh += &dac.t().dot(rh);
    grads.gru.bh += &dac.sum_axis(Axis(0));
    let mut dm = dac.dot(&g.wh);
    let drh = dac.dot(&g.uh);
    let dr = &drh * h;
    dh += &(&drh * r);

    let daz = &dz * &z.mapv(|v| v * (one - v));
    grads.gru.wz += &daz.t().dot(m);
    grads.gru.uz += &daz.t().dot(h);
    grads.gru.bz += &daz.sum_axis(Axis(0));
    dm += &daz.dot(&g.wz);
    dh += &daz.dot(&g.uz);

    let dar = &dr * &r.mapv(|v| v * (one - v));
    grads.gru.wr += &dar.t().dot(m);
    grads.gru.ur += &dar.t().dot(h);
    grads.gru.br += &dar.sum_axis(Axis(0));
    dm += &dar.dot(&g.wr);
    dh += &dar.dot(&g.ur);

    for k in 0..EdgeType::COUNT {
        let Some(s) = &sums[k] else { continue };
        grads.msg_w[k] += &dm.t().dot(s);
        for (v, &deg) in topo.in_degree[k].iter().enumerate() {
            if deg > 0 {
                grads.msg_b[k].scaled_add(S::of(deg as f64), &dm.row(v));
            }
        }
        let ds = dm.dot(&p.msg_w[k]);
        // Reverse the scatter: sources receive the gradient of their targets.
        scatter_add(&mut dh, &ds, topo.edges[k].iter().map(|&(u, v)| (v, u)));
    }
    dh
}

fn run_steps<S: Scalar>(
    topo: &Topology,
    x: &Array2<S>,
    p: &GgnnParams<S>,
    steps: usize,
    keep: bool,
) -> (Array2<S>, Vec<StepCache<S>>) {
    let mut h = x.clone();
    let mut caches = Vec::new();
    for _ in 0..steps {
        let (next, cache) = step_forward(topo, h, p);
        if keep {
            caches.push(cache);
        }
        h = next;
    }
    (h, caches)
}

/// Final node states after `steps` GRU updates starting from `x`.
pub fn propagate_topology<S: Scalar>(
    topo: &Topology,
    x: &Array2<S>,
    p: &GgnnParams<S>,
    steps: usize,
) -> Result<Array2<S>, GgnnError> {
    check_dims(topo, x, p, steps)?;
    Ok(run_steps(topo, x, p, steps, false).0)
}

pub fn propagate<S: Scalar>(
    graph: &FusedGraph,
    x: &Array2<S>,
    p: &GgnnParams<S>,
    steps: usize,
) -> Result<Array2<S>, GgnnError> {
    propagate_topology(&Topology::from(graph), x, p, steps)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskOutput<S> {
    Branch { node: NodeId, prob: S },
    /// Per-bit probabilities, MSB first.
    Prefetch { node: NodeId, probs: Vec<S> },
}

impl<S: Scalar> TaskOutput<S> {
    pub fn taken(&self) -> Option<bool> {
        match self {
            TaskOutput::Branch { prob, .. } => Some(*prob >= S::of(0.5)),
            _ => None,
        }
    }

    pub fn address(&self) -> Option<u64> {
        match self {
            TaskOutput::Prefetch { probs, .. } => Some(address_from_probs(probs)),
            _ => None,
        }
    }
}

/// Bit `63 - i` is set iff `probs[i] >= 0.5`.
pub fn address_from_probs<S: Scalar>(probs: &[S]) -> u64 {
    let half = S::of(0.5);
    probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= half)
        .fold(0u64, |acc, (i, _)| acc | (1u64 << (ADDRESS_BITS - 1 - i)))
}

fn address_bits<S: Scalar>(addr: u64) -> impl Iterator<Item = S> {
    (0..ADDRESS_BITS).map(move |i| if (addr >> (ADDRESS_BITS - 1 - i)) & 1 == 1 { S::one() } else { S::zero() })
}

fn branch_logit<S: Scalar>(h: ArrayView1<S>, p: &GgnnParams<S>) -> S {
    p.branch_w.dot(&h) + p.branch_b[0]
}

fn prefetch_logits<S: Scalar>(h: ArrayView1<S>, p: &GgnnParams<S>) -> Array1<S> {
    p.prefetch_w.dot(&h) + &p.prefetch_b
}

/// `σ(w·h + b)` at a cond-branch instruction node.
pub fn predict_branch<S: Scalar>(graph: &FusedGraph, h: &Array2<S>, node: NodeId, p: &GgnnParams<S>) -> Result<S, GgnnError> {
    if !graph.branch_tasks.values().any(|&n| n == node) {
        return Err(GgnnError::WrongNodeKind { node, expected: "branch" });
    }
    Ok(branch_logit(h.row(node), p).sigmoid())
}

/// Per-bit probabilities at a mem-src pseudo node.
pub fn predict_prefetch<S: Scalar>(
    graph: &FusedGraph,
    h: &Array2<S>,
    node: NodeId,
    p: &GgnnParams<S>,
) -> Result<Vec<S>, GgnnError> {
    match graph.nodes.get(node).map(|n| n.kind) {
        Some(NodeKind::Pseudo(PseudoSub::MemSrc)) => {
            Ok(prefetch_logits(h.row(node), p).iter().map(|&l| l.sigmoid()).collect())
        }
        _ => Err(GgnnError::WrongNodeKind { node, expected: "prefetch" }),
    }
}

/// Result of a forward pass over a batch.
pub struct Forward<S> {
    pub x: Array2<S>,
    pub h: Array2<S>,
    /// One entry per batch task, in order.
    pub outputs: Vec<TaskOutput<S>>,
}

pub fn forward<S: Scalar>(batch: &TaskBatch<S>, p: &GgnnParams<S>, steps: usize) -> Result<Forward<S>, GgnnError> {
    let x = embed_features(&batch.features, &batch.subtypes, &p.embedder)?;
    check_dims(&batch.topology, &x, p, steps)?;
    let (h, _) = run_steps(&batch.topology, &x, p, steps, false);
    let outputs = batch
        .tasks
        .iter()
        .map(|t| match t.target {
            Target::Taken(_) => TaskOutput::Branch { node: t.node, prob: branch_logit(h.row(t.node), p).sigmoid() },
            Target::Address(_) => TaskOutput::Prefetch {
                node: t.node,
                probs: prefetch_logits(h.row(t.node), p).iter().map(|&l| l.sigmoid()).collect(),
            },
        })
        .collect();
    Ok(Forward { x, h, outputs })
}

/// Masked multitask loss and its exact gradient with respect to every
/// parameter, including the embedding layer.
pub fn loss_and_grads<S: Scalar>(
    batch: &TaskBatch<S>,
    p: &GgnnParams<S>,
    steps: usize,
) -> Result<(S, GgnnParams<S>), GgnnError> {
    backward(batch, p, steps).map(|(l, g, _)| (l, g))
}

/// Gradient of the loss with respect to the initial node embeddings.
pub fn input_gradient<S: Scalar>(batch: &TaskBatch<S>, p: &GgnnParams<S>, steps: usize) -> Result<Array2<S>, GgnnError> {
    backward(batch, p, steps).map(|(_, _, dx)| dx)
}

fn backward<S: Scalar>(
    batch: &TaskBatch<S>,
    p: &GgnnParams<S>,
    steps: usize,
) -> Result<(S, GgnnParams<S>, Array2<S>), GgnnError> {
    if batch.tasks.is_empty() {
        return Err(GgnnError::EmptyBatch);
    }
    let x = embed_features(&batch.features, &batch.subtypes, &p.embedder)?;
    check_dims(&batch.topology, &x, p, steps)?;
    let (h, caches) = run_steps(&batch.topology, &x, p, steps, true);

    let mut grads = GgnnParams::zeros(p.dim(), p.feature_width());
    let mut dh = Array2::<S>::zeros(h.raw_dim());
    let mut loss = S::zero();
    for t in &batch.tasks {
        let hv = h.row(t.node);
        match t.target {
            Target::Taken(taken) => {
                let y = if taken { S::one() } else { S::zero() };
                let l = branch_logit(hv, p);
                loss += t.mask * l.bce_with_logit(y);
                let dl = t.mask * (l.sigmoid() - y);
                grads.branch_w.scaled_add(dl, &hv);
                grads.branch_b[0] += dl;
                dh.row_mut(t.node).scaled_add(dl, &p.branch_w);
            }
            Target::Address(addr) => {
                let logits = prefetch_logits(hv, p);
                let mut dl = Array1::<S>::zeros(ADDRESS_BITS);
                for ((d, &l), y) in dl.iter_mut().zip(&logits).zip(address_bits::<S>(addr)) {
                    loss += t.mask * l.bce_with_logit(y);
                    *d = t.mask * (l.sigmoid() - y);
                }
                for (i, &d) in dl.iter().enumerate() {
                    grads.prefetch_w.row_mut(i).scaled_add(d, &hv);
                }
                grads.prefetch_b += &dl;
                let back = p.prefetch_w.t().dot(&dl);
                dh.row_mut(t.node).scaled_add(S::one(), &back);
            }
        }
    }

    for cache in caches.iter().rev() {
        dh = step_backward(&batch.topology, cache, p, &dh, &mut grads);
    }

    // x_v = P f_v + S[sub_v] on valued nodes; instruction rows are constant zero.
    let mut dx_valued = dh.clone();
    for (v, sub) in batch.subtypes.iter().enumerate() {
        match sub {
            Some(s) => grads.embedder.subtype.row_mut(*s).scaled_add(S::one(), &dh.row(v)),
            None => dx_valued.row_mut(v).fill(S::zero()),
        }
    }
    grads.embedder.projection += &dx_valued.t().dot(&batch.features);
    Ok((loss, grads, dh))
}
