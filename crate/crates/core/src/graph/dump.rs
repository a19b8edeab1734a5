use std::collections::BTreeMap;

use serde::Serialize;

use super::{EdgeType, FusedGraph, NodeId};

#[derive(Debug, Clone, Serialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub major: &'static str,
    pub sub: Option<&'static str>,
    pub instr: usize,
}

/// JSON-serialisable view of a [`FusedGraph`].
#[derive(Debug, Clone, Serialize)]
pub struct GraphDump {
    pub mode: &'static str,
    pub nodes: Vec<NodeRecord>,
    pub edges: BTreeMap<&'static str, Vec<(NodeId, NodeId)>>,
    pub branch_tasks: Vec<NodeId>,
    pub prefetch_tasks: Vec<NodeId>,
}

impl From<&FusedGraph> for GraphDump {
    fn from(g: &FusedGraph) -> Self {
        GraphDump {
            mode: g.mode.name(),
            nodes: g
                .nodes
                .iter()
                .enumerate()
                .map(|(id, n)| NodeRecord { id, major: n.kind.major(), sub: n.kind.sub_name(), instr: n.instr })
                .collect(),
            edges: EdgeType::ALL.iter().map(|t| (t.name(), g.edges_of(*t).to_vec())).collect(),
            branch_tasks: g.branch_tasks.values().copied().collect(),
            prefetch_tasks: g.prefetch_tasks.values().copied().collect(),
        }
    }
}

impl FusedGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphDump::from(self)).expect("graph dump serialises")
    }
}
