use std::collections::{BTreeMap, VecDeque};

use super::{EdgeType, FusedGraph, GraphError, NodeId};

/// Induced subgraph with a map back to the parent graph's node ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    pub graph: FusedGraph,
    /// `origin[new_id] = old_id`, ascending.
    pub origin: Vec<NodeId>,
}

impl Subgraph {
    pub fn local_id(&self, original: NodeId) -> Option<NodeId> {
        self.origin.binary_search(&original).ok()
    }
}

/// Nodes within `radius` hops of `task` (edges traversed in either
/// direction) and every edge between them.
pub fn neighborhood(graph: &FusedGraph, task: NodeId, radius: usize) -> Result<Subgraph, GraphError> {
    neighborhood_of(graph, &[task], radius)
}

/// Multi-source variant of [`neighborhood`].
pub fn neighborhood_of(graph: &FusedGraph, seeds: &[NodeId], radius: usize) -> Result<Subgraph, GraphError> {
    let n = graph.len();
    if let Some(&bad) = seeds.iter().find(|&&s| s >= n) {
        return Err(GraphError::UnknownNode(bad));
    }
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for t in [EdgeType::ControlFlow, EdgeType::Parent, EdgeType::Usage] {
        for &(a, b) in graph.edges_of(t) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &s in seeds {
        dist[s] = 0;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        if dist[u] == radius {
            continue;
        }
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }

    let origin: Vec<NodeId> = (0..n).filter(|&v| dist[v] != usize::MAX).collect();
    let mut local = vec![usize::MAX; n];
    for (new, &old) in origin.iter().enumerate() {
        local[old] = new;
    }
    let keep = |m: &BTreeMap<usize, NodeId>| -> BTreeMap<usize, NodeId> {
        m.iter().filter(|(_, &v)| local[v] != usize::MAX).map(|(&k, &v)| (k, local[v])).collect()
    };
    let mut edges: [Vec<(NodeId, NodeId)>; EdgeType::COUNT] = Default::default();
    for t in EdgeType::ALL {
        edges[t.index()] = graph
            .edges_of(t)
            .iter()
            .filter(|(a, b)| local[*a] != usize::MAX && local[*b] != usize::MAX)
            .map(|&(a, b)| (local[a], local[b]))
            .collect();
    }
    let sub = FusedGraph {
        mode: graph.mode,
        nodes: origin.iter().map(|&v| graph.nodes[v].clone()).collect(),
        edges,
        instr_nodes: keep(&graph.instr_nodes),
        branch_tasks: keep(&graph.branch_tasks),
        prefetch_tasks: keep(&graph.prefetch_tasks),
    };
    Ok(Subgraph { graph: sub, origin })
}
