use serde::Serialize;

use super::{InstrKind, Program};

/// Inclusive instruction range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BasicBlock {
    pub start: usize,
    pub end: usize,
}

/// Which way control leaves a block along an edge. Unconditional jumps
/// are recorded as `Taken`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Polarity {
    Taken,
    NotTaken,
    Fallthrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CfgEdge {
    pub from: usize,
    pub to: usize,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cfg {
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<CfgEdge>,
    /// Block id of every instruction.
    pub block_of: Vec<usize>,
}

impl Cfg {
    pub fn successors(&self, block: usize) -> impl Iterator<Item = &CfgEdge> {
        self.edges.iter().filter(move |e| e.from == block)
    }
}

/// `(fallthrough, target)` successors of instruction `i`, or `None` when
/// `i` is out of range.
pub fn branch_successors(program: &Program, i: usize) -> Option<(Option<usize>, Option<usize>)> {
    let ins = program.instructions.get(i)?;
    Some(match ins.kind {
        InstrKind::CondBranch => (Some(i + 1), ins.target),
        InstrKind::Jump => (None, ins.target),
        InstrKind::Halt => (None, None),
        _ => (Some(i + 1), None),
    })
}

pub fn build_cfg(program: &Program) -> Cfg {
    let n = program.len();
    let mut leader = vec![false; n];
    if n > 0 {
        leader[0] = true;
    }
    for ins in &program.instructions {
        if let Some(t) = ins.target {
            leader[t] = true;
        }
        let ends_block = matches!(ins.kind, InstrKind::CondBranch | InstrKind::Jump | InstrKind::Halt);
        if ends_block && ins.index + 1 < n {
            leader[ins.index + 1] = true;
        }
    }

    let mut blocks = Vec::new();
    let mut block_of = vec![0; n];
    for i in 0..n {
        if leader[i] {
            blocks.push(BasicBlock { start: i, end: i });
        }
        let b = blocks.len() - 1;
        blocks[b].end = i;
        block_of[i] = b;
    }

    let mut edges = Vec::new();
    for (b, block) in blocks.iter().enumerate() {
        let last = &program.instructions[block.end];
        let (fall, target) = branch_successors(program, block.end).expect("index in range");
        match last.kind {
            InstrKind::CondBranch => {
                edges.push(CfgEdge { from: b, to: block_of[target.unwrap()], polarity: Polarity::Taken });
                edges.push(CfgEdge { from: b, to: block_of[fall.unwrap()], polarity: Polarity::NotTaken });
            }
            InstrKind::Jump => {
                edges.push(CfgEdge { from: b, to: block_of[target.unwrap()], polarity: Polarity::Taken });
            }
            InstrKind::Halt => {}
            _ => {
                if let Some(f) = fall.filter(|&f| f < n) {
                    edges.push(CfgEdge { from: b, to: block_of[f], polarity: Polarity::Fallthrough });
                }
            }
        }
    }
    Cfg { blocks, edges, block_of }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_program;

    const LOOP: &str = "\
    mov $0, %rax
loop:
    cmp %rcx, %rax
    jge exit
    mov 0x0(%rbx), %rdx
    add $1, %rax
    jmp loop
exit:
    halt
";

    #[test]
    fn successors_by_kind() {
        let p = parse_program(LOOP).unwrap();
        assert_eq!(branch_successors(&p, 2), Some((Some(3), Some(6))));
        assert_eq!(branch_successors(&p, 5), Some((None, Some(1))));
        assert_eq!(branch_successors(&p, 6), Some((None, None)));
        assert_eq!(branch_successors(&p, 3), Some((Some(4), None)));
        assert_eq!(branch_successors(&p, 7), None);
    }

    #[test]
    fn straight_line_is_one_block() {
        let p = parse_program("mov $1, %rax\nadd $2, %rax\nhalt\n").unwrap();
        let cfg = build_cfg(&p);
        assert_eq!(cfg.blocks, vec![BasicBlock { start: 0, end: 2 }]);
        assert!(cfg.edges.is_empty());
    }

    #[test]
    fn cond_branch_block_has_two_successors() {
        let p = parse_program("cmp $1, %rax\nje done\nmov $5, %rbx\ndone:\nhalt\n").unwrap();
        let cfg = build_cfg(&p);
        let b = cfg.block_of[1];
        let succ: Vec<_> = cfg.successors(b).collect();
        assert_eq!(succ.len(), 2);
        assert!(succ.iter().any(|e| e.polarity == Polarity::Taken));
        assert!(succ.iter().any(|e| e.polarity == Polarity::NotTaken));
    }
}
