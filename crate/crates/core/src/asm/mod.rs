//! Minimal AT&T-style assembly dialect: registers, operands, instructions,
//! the parser and control-flow graph construction.
//!
//! The grammar is documented in `docs/dialect.md` at the repository root.

mod cfg;
mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cfg::{branch_successors, build_cfg, BasicBlock, Cfg, CfgEdge, Polarity};
pub use parse::{parse_program, ParseError};

/// One of the 16 x86-64 general purpose registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Register {
    Rax,
    Rbx,
    Rcx,
    Rdx,
    Rsi,
    Rdi,
    Rbp,
    Rsp,
    R8,
    R9,
    R10,
    R11,
    R12,
    R13,
    R14,
    R15,
}

impl Register {
    pub const COUNT: usize = 16;

    /// Canonical order, also used for register arrays in trace files.
    pub const ALL: [Register; 16] = [
        Register::Rax,
        Register::Rbx,
        Register::Rcx,
        Register::Rdx,
        Register::Rsi,
        Register::Rdi,
        Register::Rbp,
        Register::Rsp,
        Register::R8,
        Register::R9,
        Register::R10,
        Register::R11,
        Register::R12,
        Register::R13,
        Register::R14,
        Register::R15,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Register::Rax => "rax",
            Register::Rbx => "rbx",
            Register::Rcx => "rcx",
            Register::Rdx => "rdx",
            Register::Rsi => "rsi",
            Register::Rdi => "rdi",
            Register::Rbp => "rbp",
            Register::Rsp => "rsp",
            Register::R8 => "r8",
            Register::R9 => "r9",
            Register::R10 => "r10",
            Register::R11 => "r11",
            Register::R12 => "r12",
            Register::R13 => "r13",
            Register::R14 => "r14",
            Register::R15 => "r15",
        }
    }
}

impl FromStr for Register {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let s = s.strip_prefix('%').unwrap_or(s);
        Register::ALL
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or(())
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "%{}", self.name())
    }
}

/// Addressing scale of an indexed memory operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scale {
    One = 1,
    Two = 2,
    Four = 4,
    Eight = 8,
}

impl Scale {
    pub fn from_factor(n: u64) -> Option<Scale> {
        match n {
            1 => Some(Scale::One),
            2 => Some(Scale::Two),
            4 => Some(Scale::Four),
            8 => Some(Scale::Eight),
            _ => None,
        }
    }

    pub fn factor(self) -> u64 {
        self as u64
    }
}

/// `disp(base, index, scale)`; at least one of base/index is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemRef {
    pub offset: i64,
    pub base: Option<Register>,
    pub index: Option<Register>,
    pub scale: Scale,
}

impl MemRef {
    /// Effective address under the given register file.
    pub fn address(&self, reg: impl Fn(Register) -> u64) -> u64 {
        let mut addr = self.offset as u64;
        if let Some(b) = self.base {
            addr = addr.wrapping_add(reg(b));
        }
        if let Some(i) = self.index {
            addr = addr.wrapping_add(reg(i).wrapping_mul(self.scale.factor()));
        }
        addr
    }
}

impl fmt::Display for MemRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.offset < 0 {
            write!(f, "-{:#x}", self.offset.unsigned_abs())?;
        } else if self.offset > 0 {
            write!(f, "{:#x}", self.offset)?;
        }
        write!(f, "(")?;
        if let Some(b) = self.base {
            write!(f, "{b}")?;
        }
        if let Some(i) = self.index {
            write!(f, ",{},{}", i, self.scale.factor())?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    Imm(u64),
    Reg(Register),
    Mem(MemRef),
}

impl Operand {
    /// Registers read to evaluate this operand, in textual order.
    pub fn registers(&self) -> Vec<Register> {
        match self {
            Operand::Imm(_) => vec![],
            Operand::Reg(r) => vec![*r],
            Operand::Mem(m) => m.base.iter().chain(m.index.iter()).copied().collect(),
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Imm(v) => write!(f, "${v:#x}"),
            Operand::Reg(r) => write!(f, "{r}"),
            Operand::Mem(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mnemonic {
    Mov,
    Add,
    Sub,
    Imul,
    Inc,
    Cmp,
    Jmp,
    Je,
    Jne,
    Jl,
    Jle,
    Jg,
    Jge,
    Halt,
}

impl Mnemonic {
    pub const ALL: [Mnemonic; 14] = [
        Mnemonic::Mov,
        Mnemonic::Add,
        Mnemonic::Sub,
        Mnemonic::Imul,
        Mnemonic::Inc,
        Mnemonic::Cmp,
        Mnemonic::Jmp,
        Mnemonic::Je,
        Mnemonic::Jne,
        Mnemonic::Jl,
        Mnemonic::Jle,
        Mnemonic::Jg,
        Mnemonic::Jge,
        Mnemonic::Halt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mnemonic::Mov => "mov",
            Mnemonic::Add => "add",
            Mnemonic::Sub => "sub",
            Mnemonic::Imul => "imul",
            Mnemonic::Inc => "inc",
            Mnemonic::Cmp => "cmp",
            Mnemonic::Jmp => "jmp",
            Mnemonic::Je => "je",
            Mnemonic::Jne => "jne",
            Mnemonic::Jl => "jl",
            Mnemonic::Jle => "jle",
            Mnemonic::Jg => "jg",
            Mnemonic::Jge => "jge",
            Mnemonic::Halt => "halt",
        }
    }

    pub fn is_cond_branch(self) -> bool {
        matches!(
            self,
            Mnemonic::Je | Mnemonic::Jne | Mnemonic::Jl | Mnemonic::Jle | Mnemonic::Jg | Mnemonic::Jge
        )
    }
}

impl FromStr for Mnemonic {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Mnemonic::ALL.iter().copied().find(|m| m.name() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstrKind {
    Arith,
    MoveLoad,
    MoveStore,
    MoveReg,
    Compare,
    CondBranch,
    Jump,
    Halt,
}

/// How an operand participates in its instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperandRole {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub index: usize,
    pub mnemonic: Mnemonic,
    pub operands: Vec<Operand>,
    pub kind: InstrKind,
    /// Resolved branch target; set exactly for cond-branch and jump.
    pub target: Option<usize>,
}

impl Instruction {
    /// Role of each operand. `inc` has a single target; binary ops read the
    /// first operand and write the last. `cmp` writes nothing, but its
    /// second operand still takes the target role so the two sides of the
    /// comparison stay distinguishable.
    pub fn roles(&self) -> Vec<OperandRole> {
        match (self.kind, self.operands.len()) {
            (InstrKind::Compare, 2) => vec![OperandRole::Source, OperandRole::Target],
            (_, 1) => vec![OperandRole::Target],
            (_, 2) => vec![OperandRole::Source, OperandRole::Target],
            (_, n) => vec![OperandRole::Source; n],
        }
    }

    /// The memory operand read by a load.
    pub fn load_source(&self) -> Option<&MemRef> {
        match (self.kind, self.operands.first()) {
            (InstrKind::MoveLoad, Some(Operand::Mem(m))) => Some(m),
            _ => None,
        }
    }

    pub fn store_target(&self) -> Option<&MemRef> {
        match (self.kind, self.operands.get(1)) {
            (InstrKind::MoveStore, Some(Operand::Mem(m))) => Some(m),
            _ => None,
        }
    }
}

/// A parsed program: dense instruction list plus label bindings.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub instructions: Vec<Instruction>,
    pub labels: BTreeMap<String, usize>,
}

impl Program {
    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Re-emit the program in the accepted dialect. Parsing the result
    /// yields a structurally equal program.
    pub fn pretty(&self) -> String {
        let mut by_index: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
        for (name, &idx) in &self.labels {
            by_index.entry(idx).or_default().push(name);
        }
        let target_name = |t: usize| -> String {
            by_index
                .get(&t)
                .and_then(|names| names.first())
                .map(|s| s.to_string())
                .unwrap_or_else(|| t.to_string())
        };
        let mut out = String::new();
        for (i, ins) in self.instructions.iter().enumerate() {
            for name in by_index.get(&i).into_iter().flatten() {
                out.push_str(name);
                out.push_str(":\n");
            }
            out.push_str("    ");
            out.push_str(ins.mnemonic.name());
            if let Some(t) = ins.target {
                out.push(' ');
                out.push_str(&target_name(t));
            } else if !ins.operands.is_empty() {
                let ops: Vec<String> = ins.operands.iter().map(|o| o.to_string()).collect();
                out.push(' ');
                out.push_str(&ops.join(", "));
            }
            out.push('\n');
        }
        // Labels bound past the last instruction.
        for (idx, names) in by_index.range(self.instructions.len()..) {
            let _ = idx;
            for name in names {
                out.push_str(name);
                out.push_str(":\n");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operand_roles_keep_order() {
        let p = parse_program("    cmp %rcx, %rax\n    add $1, %rax\n    inc %rbx\n    halt\n").unwrap();
        let roles: Vec<Vec<OperandRole>> = p.instructions.iter().map(Instruction::roles).collect();
        assert_eq!(roles[0], vec![OperandRole::Source, OperandRole::Target]);
        assert_eq!(roles[1], vec![OperandRole::Source, OperandRole::Target]);
        assert_eq!(roles[2], vec![OperandRole::Target]);
        assert!(roles[3].is_empty());
    }
}
