use std::sync::Arc;

use ndarray::{concatenate, Array2, Axis};

use crate::encode::node_subtypes;
use crate::graph::{EdgeType, FusedGraph, NodeId};
use crate::Scalar;

/// Edge lists stripped to what propagation needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub nodes: usize,
    pub edges: [Vec<(NodeId, NodeId)>; EdgeType::COUNT],
    /// In-degree per edge type, used for message biases.
    pub in_degree: [Vec<u32>; EdgeType::COUNT],
}

impl Topology {
    pub fn new(nodes: usize, edges: [Vec<(NodeId, NodeId)>; EdgeType::COUNT]) -> Self {
        let in_degree = std::array::from_fn(|k| {
            let mut d = vec![0u32; nodes];
            for &(_, v) in &edges[k] {
                d[v] += 1;
            }
            d
        });
        Self { nodes, edges, in_degree }
    }

    /// Disjoint union, node ids shifted by the running offset.
    pub fn union<'a>(parts: impl IntoIterator<Item = &'a Topology>) -> Topology {
        let mut nodes = 0;
        let mut edges: [Vec<(NodeId, NodeId)>; EdgeType::COUNT] = Default::default();
        for t in parts {
            for k in 0..EdgeType::COUNT {
                edges[k].extend(t.edges[k].iter().map(|&(a, b)| (a + nodes, b + nodes)));
            }
            nodes += t.nodes;
        }
        Topology::new(nodes, edges)
    }
}

impl From<&FusedGraph> for Topology {
    fn from(g: &FusedGraph) -> Self {
        Topology::new(g.len(), g.edges.clone())
    }
}

/// Static part of a sample, shared by every event on the same (sub)graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphInput {
    /// Groups samples into batches; equal ids must mean equal graphs.
    pub id: usize,
    pub topology: Topology,
    pub subtypes: Vec<Option<usize>>,
}

impl GraphInput {
    pub fn new(id: usize, graph: &FusedGraph) -> Self {
        Self { id, topology: Topology::from(graph), subtypes: node_subtypes(graph) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Taken(bool),
    Address(u64),
}

/// A masked supervision point. Nodes without a task entry have mask 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task<S> {
    pub node: NodeId,
    pub mask: S,
    pub target: Target,
}

/// One event bound onto a graph.
#[derive(Debug, Clone)]
pub struct Sample<S> {
    pub input: Arc<GraphInput>,
    /// `N × F` encoded node values.
    pub features: Array2<S>,
    pub tasks: Vec<Task<S>>,
}

/// Several samples merged into one disjoint-union graph.
#[derive(Debug, Clone)]
pub struct TaskBatch<S> {
    pub topology: Topology,
    pub subtypes: Vec<Option<usize>>,
    pub features: Array2<S>,
    pub tasks: Vec<Task<S>>,
    /// Starting row of each sample.
    pub offsets: Vec<usize>,
}

impl<S: Scalar> TaskBatch<S> {
    pub fn new<'a>(samples: impl IntoIterator<Item = &'a Sample<S>>) -> Self {
        let samples: Vec<&Sample<S>> = samples.into_iter().collect();
        let topology = Topology::union(samples.iter().map(|s| &s.input.topology));
        let mut subtypes = Vec::with_capacity(topology.nodes);
        let mut tasks = Vec::new();
        let mut offsets = Vec::with_capacity(samples.len());
        let mut off = 0;
        for s in &samples {
            offsets.push(off);
            subtypes.extend_from_slice(&s.input.subtypes);
            tasks.extend(s.tasks.iter().map(|t| Task { node: t.node + off, ..*t }));
            off += s.input.topology.nodes;
        }
        let width = samples.first().map(|s| s.features.ncols()).unwrap_or(0);
        let features = if samples.is_empty() {
            Array2::zeros((0, width))
        } else {
            let views: Vec<_> = samples.iter().map(|s| s.features.view()).collect();
            concatenate(Axis(0), &views).expect("samples share a feature width")
        };
        TaskBatch { topology, subtypes, features, tasks, offsets }
    }

    pub fn single(sample: &Sample<S>) -> Self {
        Self::new(std::iter::once(sample))
    }
}
