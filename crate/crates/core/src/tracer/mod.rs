//! Deterministic interpreter for the dialect that records a labelled
//! snapshot at every executed conditional branch and load.

mod io;
mod window;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::asm::{InstrKind, MemRef, Mnemonic, Operand, Program, Register};

pub use io::{read_trace, read_trace_from, write_trace, write_trace_to};
pub use window::{snapshot_window, LoadHistory};

/// Default number of recent memory entries captured per snapshot.
pub const DEFAULT_WINDOW: usize = 32;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("pc {pc}: {access} of unmapped address {addr:#x}")]
    Fault { pc: usize, addr: u64, access: &'static str },
    #[error("instruction limit must be positive")]
    ZeroLimit,
    #[error("line {line}: malformed trace record: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Initial register file and mapped memory words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InitState {
    pub regs: [u64; Register::COUNT],
    pub mem: BTreeMap<u64, u64>,
}

impl InitState {
    pub fn with_reg(mut self, r: Register, v: u64) -> Self {
        self.regs[r.index()] = v;
        self
    }

    pub fn with_word(mut self, addr: u64, v: u64) -> Self {
        self.mem.insert(addr, v);
        self
    }

    /// Maps `words` consecutive zeroed 8-byte words starting at `base`.
    pub fn with_zeroed(mut self, base: u64, words: u64) -> Self {
        for i in 0..words {
            self.mem.entry(base + 8 * i).or_insert(0);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub zf: bool,
    pub sf: bool,
}

/// Full interpreter state. Memory is word-granular and sparse: only mapped
/// addresses may be read or written.
#[derive(Debug, Clone)]
pub struct MachineState {
    pub regs: [u64; Register::COUNT],
    pub mem: HashMap<u64, u64>,
    pub flags: Flags,
    pub pc: usize,
    pub instr_count: u64,
    pub halted: bool,
}

impl MachineState {
    pub fn new(init: &InitState) -> Self {
        Self {
            regs: init.regs,
            mem: init.mem.iter().map(|(&a, &v)| (a, v)).collect(),
            flags: Flags::default(),
            pc: 0,
            instr_count: 0,
            halted: false,
        }
    }

    pub fn reg(&self, r: Register) -> u64 {
        self.regs[r.index()]
    }

    fn value(&self, op: &Operand) -> u64 {
        match op {
            Operand::Imm(v) => *v,
            Operand::Reg(r) => self.reg(*r),
            Operand::Mem(_) => unreachable!("memory operands are resolved by the caller"),
        }
    }

    fn address(&self, m: &MemRef) -> u64 {
        m.address(|r| self.reg(r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Branch,
    Load,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Taken(bool),
    /// Address of the next dynamic execution of the same load, if any.
    NextLoadAddr(Option<u64>),
}

/// One labelled dynamic snapshot.
///
/// Registers are captured before the instruction executes. For loads the
/// window already includes the access being made, so the loaded word is
/// visible to the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotEvent {
    pub seq: u64,
    pub pc: usize,
    pub kind: EventKind,
    pub regs: [u64; Register::COUNT],
    /// Effective address for loads.
    pub addr: Option<u64>,
    pub recent_mem: Vec<(u64, u64)>,
    pub instr_count: u64,
    pub label: Label,
}

impl SnapshotEvent {
    pub fn reg(&self, r: Register) -> u64 {
        self.regs[r.index()]
    }

    pub fn taken(&self) -> Option<bool> {
        match self.label {
            Label::Taken(t) => Some(t),
            _ => None,
        }
    }

    pub fn next_addr(&self) -> Option<u64> {
        match self.label {
            Label::NextLoadAddr(a) => a,
            _ => None,
        }
    }

    pub fn recent_value(&self, addr: u64) -> Option<u64> {
        self.recent_mem.iter().find(|(a, _)| *a == addr).map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub program_id: String,
    pub events: Vec<SnapshotEvent>,
    pub total_instr: u64,
    pub window: usize,
    /// Execution hit the instruction limit before `halt`.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceConfig {
    pub window: usize,
    pub limit: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { window: DEFAULT_WINDOW, limit: 10_000_000 }
    }
}

fn branch_condition(m: Mnemonic, f: Flags) -> bool {
    match m {
        Mnemonic::Je => f.zf,
        Mnemonic::Jne => !f.zf,
        Mnemonic::Jl => f.sf,
        Mnemonic::Jle => f.sf || f.zf,
        Mnemonic::Jg => !f.sf && !f.zf,
        Mnemonic::Jge => !f.sf,
        _ => unreachable!("not a conditional branch"),
    }
}

/// Run `program` from `init` until `halt` or `config.limit` instructions.
pub fn execute(
    program: &Program,
    program_id: &str,
    init: &InitState,
    config: TraceConfig,
) -> Result<Trace, TraceError> {
    if config.limit == 0 {
        return Err(TraceError::ZeroLimit);
    }
    let mut st = MachineState::new(init);
    let mut history = LoadHistory::new(config.window);
    let mut events = Vec::new();
    st.halted = program.is_empty();

    while !st.halted && st.instr_count < config.limit {
        let pc = st.pc;
        let ins = &program.instructions[pc];
        let pre_regs = st.regs;
        let mut next_pc = pc + 1;
        match ins.kind {
            InstrKind::MoveReg => {
                let v = st.value(&ins.operands[0]);
                write_reg(&mut st, &ins.operands[1], v);
            }
            InstrKind::MoveLoad => {
                let m = ins.load_source().expect("load has a memory source");
                let addr = st.address(m);
                let v = *st.mem.get(&addr).ok_or(TraceError::Fault { pc, addr, access: "load" })?;
                history.touch(addr);
                let recent_mem = snapshot_window(|a| st.mem.get(&a).copied(), &history, config.window);
                events.push(SnapshotEvent {
                    seq: events.len() as u64,
                    pc,
                    kind: EventKind::Load,
                    regs: pre_regs,
                    addr: Some(addr),
                    recent_mem,
                    instr_count: st.instr_count,
                    label: Label::NextLoadAddr(None),
                });
                write_reg(&mut st, &ins.operands[1], v);
            }
            InstrKind::MoveStore => {
                let v = st.value(&ins.operands[0]);
                let m = ins.store_target().expect("store has a memory target");
                let addr = st.address(m);
                match st.mem.get_mut(&addr) {
                    Some(slot) => *slot = v,
                    None => return Err(TraceError::Fault { pc, addr, access: "store" }),
                }
            }
            InstrKind::Arith => {
                let (src, dst) = match ins.operands.as_slice() {
                    [d] => (1, d),
                    [s, d] => (st.value(s), d),
                    _ => unreachable!("arith arity checked by the parser"),
                };
                let cur = st.value(dst);
                let v = match ins.mnemonic {
                    Mnemonic::Add | Mnemonic::Inc => cur.wrapping_add(src),
                    Mnemonic::Sub => cur.wrapping_sub(src),
                    Mnemonic::Imul => cur.wrapping_mul(src),
                    m => unreachable!("{m:?} is not arithmetic"),
                };
                write_reg(&mut st, dst, v);
            }
            InstrKind::Compare => {
                // AT&T: `cmp a, b` sets flags from b - a.
                let a = st.value(&ins.operands[0]);
                let b = st.value(&ins.operands[1]);
                st.flags = Flags { zf: a == b, sf: (b as i64) < (a as i64) };
            }
            InstrKind::CondBranch => {
                let taken = branch_condition(ins.mnemonic, st.flags);
                events.push(SnapshotEvent {
                    seq: events.len() as u64,
                    pc,
                    kind: EventKind::Branch,
                    regs: pre_regs,
                    addr: None,
                    recent_mem: snapshot_window(|a| st.mem.get(&a).copied(), &history, config.window),
                    instr_count: st.instr_count,
                    label: Label::Taken(taken),
                });
                if taken {
                    next_pc = ins.target.expect("branch target");
                }
            }
            InstrKind::Jump => next_pc = ins.target.expect("jump target"),
            InstrKind::Halt => st.halted = true,
        }
        st.instr_count += 1;
        st.pc = next_pc;
    }

    // Next-load labels: scan backwards remembering the following address per pc.
    let mut following: HashMap<usize, u64> = HashMap::new();
    for ev in events.iter_mut().rev() {
        if ev.kind == EventKind::Load {
            let addr = ev.addr.expect("load events carry their address");
            ev.label = Label::NextLoadAddr(following.insert(ev.pc, addr));
        }
    }

    Ok(Trace {
        program_id: program_id.to_string(),
        events,
        total_instr: st.instr_count,
        window: config.window,
        truncated: !st.halted,
    })
}

fn write_reg(st: &mut MachineState, op: &Operand, v: u64) {
    match op {
        Operand::Reg(r) => st.regs[r.index()] = v,
        _ => unreachable!("destination is a register"),
    }
}
