//! Fused static graph over a program: instruction, variable and pseudo
//! nodes joined by control-flow, parent and usage edges (plus reverses),
//! and the per-event binding of dynamic values onto it.

mod dump;
mod neighborhood;
mod usage;
mod values;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::asm::{Cfg, InstrKind, Operand, OperandRole, Program, Register};

pub use dump::{GraphDump, NodeRecord};
pub use neighborhood::{neighborhood, neighborhood_of, Subgraph};
pub use values::{assign_dynamic_values, NodeValue, ValuedGraph};

pub type NodeId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarSub {
    Reg,
    Const,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PseudoSub {
    NonMemSrc,
    MemSrc,
    NonMemTgt,
    MemTgt,
    Base,
    IndBase,
    Offset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Instruction,
    Variable(VarSub),
    Pseudo(PseudoSub),
}

impl NodeKind {
    /// Number of distinct sub-types (variable and pseudo).
    pub const SUBTYPES: usize = 9;

    /// Dense sub-type index for embedding lookup; `None` for instructions.
    pub fn subtype_index(self) -> Option<usize> {
        match self {
            NodeKind::Instruction => None,
            NodeKind::Variable(VarSub::Reg) => Some(0),
            NodeKind::Variable(VarSub::Const) => Some(1),
            NodeKind::Pseudo(p) => Some(
                2 + match p {
                    PseudoSub::NonMemSrc => 0,
                    PseudoSub::MemSrc => 1,
                    PseudoSub::NonMemTgt => 2,
                    PseudoSub::MemTgt => 3,
                    PseudoSub::Base => 4,
                    PseudoSub::IndBase => 5,
                    PseudoSub::Offset => 6,
                },
            ),
        }
    }

    pub fn major(self) -> &'static str {
        match self {
            NodeKind::Instruction => "instruction",
            NodeKind::Variable(_) => "variable",
            NodeKind::Pseudo(_) => "pseudo",
        }
    }

    pub fn sub_name(self) -> Option<&'static str> {
        Some(match self {
            NodeKind::Instruction => return None,
            NodeKind::Variable(VarSub::Reg) => "reg",
            NodeKind::Variable(VarSub::Const) => "const",
            NodeKind::Pseudo(PseudoSub::NonMemSrc) => "non-mem-src",
            NodeKind::Pseudo(PseudoSub::MemSrc) => "mem-src",
            NodeKind::Pseudo(PseudoSub::NonMemTgt) => "non-mem-tgt",
            NodeKind::Pseudo(PseudoSub::MemTgt) => "mem-tgt",
            NodeKind::Pseudo(PseudoSub::Base) => "base",
            NodeKind::Pseudo(PseudoSub::IndBase) => "ind-base",
            NodeKind::Pseudo(PseudoSub::Offset) => "offset",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Binding {
    Reg(Register),
    Const(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    /// Owning instruction index.
    pub instr: usize,
    /// Operand this node was expanded from (pseudo and variable nodes).
    pub operand: Option<Operand>,
    pub binding: Option<Binding>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeType {
    ControlFlow,
    Parent,
    Usage,
    ControlFlowRev,
    ParentRev,
    UsageRev,
}

impl EdgeType {
    pub const COUNT: usize = 6;
    pub const ALL: [EdgeType; 6] = [
        EdgeType::ControlFlow,
        EdgeType::Parent,
        EdgeType::Usage,
        EdgeType::ControlFlowRev,
        EdgeType::ParentRev,
        EdgeType::UsageRev,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn reverse(self) -> EdgeType {
        EdgeType::ALL[(self.index() + 3) % 6]
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeType::ControlFlow => "control-flow",
            EdgeType::Parent => "parent",
            EdgeType::Usage => "usage",
            EdgeType::ControlFlowRev => "control-flow-rev",
            EdgeType::ParentRev => "parent-rev",
            EdgeType::UsageRev => "usage-rev",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphMode {
    /// Memory operands expand through offset/base/ind-base pseudo nodes.
    Full,
    /// Variable nodes hang directly off src/tgt pseudo nodes.
    #[serde(rename = "src-tgt")]
    SrcTgtOnly,
}

impl GraphMode {
    pub fn name(self) -> &'static str {
        match self {
            GraphMode::Full => "full",
            GraphMode::SrcTgtOnly => "src-tgt",
        }
    }
}

impl std::fmt::Display for GraphMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GraphMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(GraphMode::Full),
            "src-tgt" => Ok(GraphMode::SrcTgtOnly),
            other => Err(format!("unknown graph mode `{other}` (expected full or src-tgt)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusedGraph {
    pub mode: GraphMode,
    pub nodes: Vec<Node>,
    /// Directed `(from, to)` lists indexed by [`EdgeType::index`].
    pub edges: [Vec<(NodeId, NodeId)>; EdgeType::COUNT],
    /// Instruction index → instruction node.
    pub instr_nodes: BTreeMap<usize, NodeId>,
    /// Cond-branch instruction index → its instruction node.
    pub branch_tasks: BTreeMap<usize, NodeId>,
    /// Load instruction index → its mem-src pseudo node.
    pub prefetch_tasks: BTreeMap<usize, NodeId>,
}

impl FusedGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges_of(&self, t: EdgeType) -> &[(NodeId, NodeId)] {
        &self.edges[t.index()]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn branch_task(&self, pc: usize) -> Option<NodeId> {
        self.branch_tasks.get(&pc).copied()
    }

    pub fn prefetch_task(&self, pc: usize) -> Option<NodeId> {
        self.prefetch_tasks.get(&pc).copied()
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn link(&mut self, t: EdgeType, from: NodeId, to: NodeId) {
        self.edges[t.index()].push((from, to));
        self.edges[t.reverse().index()].push((to, from));
    }
}

/// Builds the fused graph for `program`; control-flow edges follow `cfg`
/// down to instruction granularity.
pub fn build_graph(program: &Program, cfg: &Cfg, mode: GraphMode) -> FusedGraph {
    let mut g = FusedGraph {
        mode,
        nodes: Vec::new(),
        edges: Default::default(),
        instr_nodes: BTreeMap::new(),
        branch_tasks: BTreeMap::new(),
        prefetch_tasks: BTreeMap::new(),
    };
    for ins in &program.instructions {
        let id = g.push(Node { kind: NodeKind::Instruction, instr: ins.index, operand: None, binding: None });
        g.instr_nodes.insert(ins.index, id);
        if ins.kind == InstrKind::CondBranch {
            g.branch_tasks.insert(ins.index, id);
        }
    }
    for block in &cfg.blocks {
        for i in block.start..block.end {
            g.link(EdgeType::ControlFlow, g.instr_nodes[&i], g.instr_nodes[&(i + 1)]);
        }
    }
    for e in &cfg.edges {
        let (from, to) = (cfg.blocks[e.from].end, cfg.blocks[e.to].start);
        g.link(EdgeType::ControlFlow, g.instr_nodes[&from], g.instr_nodes[&to]);
    }

    // Register occurrences per instruction, in textual order, for usage edges.
    let mut occurrences: Vec<Vec<(NodeId, Register)>> = vec![Vec::new(); program.len()];
    for ins in &program.instructions {
        let parent = g.instr_nodes[&ins.index];
        for (op, role) in ins.operands.iter().zip(ins.roles()) {
            let mut child = |g: &mut FusedGraph, parent: NodeId, kind: NodeKind, binding: Option<Binding>| {
                let id = g.push(Node { kind, instr: ins.index, operand: Some(*op), binding });
                g.link(EdgeType::Parent, id, parent);
                if let Some(Binding::Reg(r)) = binding {
                    occurrences[ins.index].push((id, r));
                }
                id
            };
            let reg = NodeKind::Variable(VarSub::Reg);
            let cst = NodeKind::Variable(VarSub::Const);
            match (op, role) {
                (Operand::Imm(v), _) => {
                    let p = child(&mut g, parent, NodeKind::Pseudo(PseudoSub::NonMemSrc), None);
                    child(&mut g, p, cst, Some(Binding::Const(*v)));
                }
                (Operand::Reg(r), role) => {
                    let sub = match role {
                        OperandRole::Source => PseudoSub::NonMemSrc,
                        OperandRole::Target => PseudoSub::NonMemTgt,
                    };
                    let p = child(&mut g, parent, NodeKind::Pseudo(sub), None);
                    child(&mut g, p, reg, Some(Binding::Reg(*r)));
                }
                (Operand::Mem(m), role) => {
                    let sub = match role {
                        OperandRole::Source => PseudoSub::MemSrc,
                        OperandRole::Target => PseudoSub::MemTgt,
                    };
                    let p = child(&mut g, parent, NodeKind::Pseudo(sub), None);
                    if ins.kind == InstrKind::MoveLoad && role == OperandRole::Source {
                        g.prefetch_tasks.insert(ins.index, p);
                    }
                    let offset = Binding::Const(m.offset as u64);
                    let scale = Binding::Const(m.scale.factor());
                    match mode {
                        GraphMode::Full => {
                            let o = child(&mut g, p, NodeKind::Pseudo(PseudoSub::Offset), None);
                            child(&mut g, o, cst, Some(offset));
                            if let Some(b) = m.base {
                                let bp = child(&mut g, p, NodeKind::Pseudo(PseudoSub::Base), None);
                                child(&mut g, bp, reg, Some(Binding::Reg(b)));
                            }
                            if let Some(i) = m.index {
                                let ip = child(&mut g, p, NodeKind::Pseudo(PseudoSub::IndBase), None);
                                child(&mut g, ip, reg, Some(Binding::Reg(i)));
                                child(&mut g, ip, cst, Some(scale));
                            }
                        }
                        GraphMode::SrcTgtOnly => {
                            child(&mut g, p, cst, Some(offset));
                            if let Some(b) = m.base {
                                child(&mut g, p, reg, Some(Binding::Reg(b)));
                            }
                            if let Some(i) = m.index {
                                child(&mut g, p, reg, Some(Binding::Reg(i)));
                                child(&mut g, p, cst, Some(scale));
                            }
                        }
                    }
                }
            }
        }
    }

    for (from, to) in usage::usage_edges(program, &occurrences) {
        g.link(EdgeType::Usage, from, to);
    }
    // A branch to the next instruction reaches it along both polarities.
    for list in g.edges.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    g
}
