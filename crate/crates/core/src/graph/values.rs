use crate::asm::Operand;
use crate::tracer::SnapshotEvent;

use super::{Binding, FusedGraph, NodeKind, PseudoSub};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeValue {
    /// Instruction nodes.
    Unvalued,
    Known(u64),
    /// Memory word not present in the snapshot window.
    Missing,
}

impl NodeValue {
    /// `(value, missing)` as fed to an encoder; `None` for instruction nodes.
    pub fn parts(self) -> Option<(u64, bool)> {
        match self {
            NodeValue::Unvalued => None,
            NodeValue::Known(v) => Some((v, false)),
            NodeValue::Missing => Some((0, true)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValuedGraph<'a> {
    pub graph: &'a FusedGraph,
    pub values: Vec<NodeValue>,
    pub event: &'a SnapshotEvent,
}

/// Binds the snapshot in `event` onto every variable and pseudo node.
///
/// Registers and constants bind directly; pseudo nodes evaluate their
/// addressing sub-operation (offset, base, index×scale). A mem-src node holds
/// the word loaded from its effective address when that address is in the
/// snapshot window, else it is `Missing`. A mem-tgt node holds the effective
/// address being written.
pub fn assign_dynamic_values<'a>(graph: &'a FusedGraph, event: &'a SnapshotEvent) -> ValuedGraph<'a> {
    let values = graph
        .nodes
        .iter()
        .map(|node| {
            match (node.kind, node.binding, node.operand.as_ref()) {
                (NodeKind::Instruction, ..) => NodeValue::Unvalued,
                (NodeKind::Variable(_), Some(Binding::Reg(r)), _) => NodeValue::Known(event.reg(r)),
                (NodeKind::Variable(_), Some(Binding::Const(c)), _) => NodeValue::Known(c),
                (NodeKind::Pseudo(sub), _, Some(op)) => pseudo_value(sub, op, event),
                (kind, binding, _) => unreachable!("malformed node {kind:?} {binding:?}"),
            }
        })
        .collect();
    ValuedGraph { graph, values, event }
}

fn pseudo_value(sub: PseudoSub, op: &Operand, event: &SnapshotEvent) -> NodeValue {
    let reg = |r| event.reg(r);
    match (sub, op) {
        (PseudoSub::NonMemSrc | PseudoSub::NonMemTgt, Operand::Imm(v)) => NodeValue::Known(*v),
        (PseudoSub::NonMemSrc | PseudoSub::NonMemTgt, Operand::Reg(r)) => NodeValue::Known(reg(*r)),
        (PseudoSub::MemSrc, Operand::Mem(m)) => match event.recent_value(m.address(reg)) {
            Some(v) => NodeValue::Known(v),
            None => NodeValue::Missing,
        },
        (PseudoSub::MemTgt, Operand::Mem(m)) => NodeValue::Known(m.address(reg)),
        (PseudoSub::Offset, Operand::Mem(m)) => NodeValue::Known(m.offset as u64),
        (PseudoSub::Base, Operand::Mem(m)) => NodeValue::Known(m.base.map(reg).unwrap_or(0)),
        (PseudoSub::IndBase, Operand::Mem(m)) => {
            NodeValue::Known(m.index.map(reg).unwrap_or(0).wrapping_mul(m.scale.factor()))
        }
        (sub, op) => unreachable!("pseudo {sub:?} cannot wrap operand {op:?}"),
    }
}
