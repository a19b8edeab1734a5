//! Synthetic programs written in the dialect, with generators for their
//! initial machine states.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::asm::{parse_program, Program, Register};
use crate::tracer::{execute, InitState, Trace, TraceConfig};

use super::EvalError;

pub const LOOP_K: &str = include_str!("../../programs/loop_k.s");
pub const STRIDE_WALK: &str = include_str!("../../programs/stride_walk.s");
pub const POINTER_CHASE: &str = include_str!("../../programs/pointer_chase.s");
pub const BUBBLE_SORT: &str = include_str!("../../programs/bubble_sort.s");
pub const LINEAR_SEARCH: &str = include_str!("../../programs/linear_search.s");
pub const MATMUL: &str = include_str!("../../programs/matmul.s");
pub const FIB_MEMO: &str = include_str!("../../programs/fib_memo.s");
pub const LIST_SUM: &str = include_str!("../../programs/list_sum.s");

/// Every bundled program with its name.
pub const CORPUS: [(&str, &str); 8] = [
    ("loop_k", LOOP_K),
    ("stride_walk", STRIDE_WALK),
    ("pointer_chase", POINTER_CHASE),
    ("bubble_sort", BUBBLE_SORT),
    ("linear_search", LINEAR_SEARCH),
    ("matmul", MATMUL),
    ("fib_memo", FIB_MEMO),
    ("list_sum", LIST_SUM),
];

/// A program with one initial state.
#[derive(Debug, Clone)]
pub struct Job {
    pub name: String,
    pub program: Program,
    pub init: InitState,
}

impl Job {
    pub fn run(&self) -> Result<Trace, EvalError> {
        let t = execute(&self.program, &self.name, &self.init, TraceConfig::default())?;
        if t.truncated {
            return Err(EvalError::Invalid(format!("{} hit the instruction limit", self.name)));
        }
        Ok(t)
    }
}

fn parse(src: &str) -> Program {
    parse_program(src).expect("bundled program parses")
}

/// The bounded loop run with bound `k`.
pub fn loop_k(k: u64) -> Job {
    Job { name: format!("loop_k{k}"), program: parse(LOOP_K), init: InitState::default().with_reg(Register::Rcx, k) }
}

/// `n` words 4 bytes apart at `base`.
pub fn stride_walk(n: u64, base: u64, seed: u64) -> Job {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = InitState::default().with_reg(Register::Rbx, base).with_reg(Register::Rcx, n);
    for i in 0..n {
        init = init.with_word(base + 4 * i, rng.gen_range(0..1000));
    }
    Job { name: format!("stride_walk{n}"), program: parse(STRIDE_WALK), init }
}

/// Distinct node addresses, `align`-aligned, in random order.
fn node_addresses(rng: &mut impl Rng, nodes: usize, align: u64) -> Vec<u64> {
    let base = 0x10_0000u64;
    let mut slots: Vec<u64> = (0..nodes as u64 * 8).collect();
    slots.shuffle(rng);
    slots.truncate(nodes);
    slots.into_iter().map(|s| base + s * align).collect()
}

/// A cyclic list in random layout walked for `hops` links. The link of
/// each node is stored `field` bytes past its start.
fn cyclic_list(rng: &mut impl Rng, nodes: usize, field: u64, init: InitState) -> (InitState, u64) {
    let addrs = node_addresses(rng, nodes, 0x100);
    let mut init = init;
    for (i, &a) in addrs.iter().enumerate() {
        init = init.with_word(a + field, addrs[(i + 1) % nodes]);
    }
    (init, addrs[0])
}

pub fn pointer_chase(nodes: usize, hops: u64, seed: u64) -> Job {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (init, head) = cyclic_list(&mut rng, nodes, 0, InitState::default());
    let init = init.with_reg(Register::Rbx, head).with_reg(Register::Rcx, hops);
    Job { name: format!("pointer_chase{nodes}"), program: parse(POINTER_CHASE), init }
}

/// Pointer chase through an indexed link field at
/// `node + offset + index * scale`.
pub fn indexed_chase(offset: u64, scale: u64, index: u64, nodes: usize, hops: u64, seed: u64) -> Job {
    let src = POINTER_CHASE.replace("mov 0x0(%rbx), %rbx", &format!("mov {offset:#x}(%rbx,%rsi,{scale}), %rbx"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (init, head) = cyclic_list(&mut rng, nodes, offset + index * scale, InitState::default());
    let init = init.with_reg(Register::Rbx, head).with_reg(Register::Rcx, hops).with_reg(Register::Rsi, index);
    Job { name: format!("indexed_chase_o{offset}_s{scale}_i{index}"), program: parse(&src), init }
}

/// The pointer-chase suite: a plain chase plus indexed chases whose
/// offset and scale swap roles pairwise.
pub fn chase_suite(nodes: usize, hops: u64, seed: u64) -> Vec<Job> {
    let mut jobs = vec![pointer_chase(nodes, hops, seed)];
    for (i, &(off, scale, index)) in [(8, 1, 16), (1, 8, 16), (2, 4, 8), (4, 2, 8)].iter().enumerate() {
        jobs.push(indexed_chase(off, scale, index, nodes, hops, seed.wrapping_add(1 + i as u64)));
    }
    jobs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProgramClass {
    Sort,
    Search,
    Matmul,
    Fib,
    ListWalk,
}

impl ProgramClass {
    pub const ALL: [ProgramClass; 5] = [Self::Sort, Self::Search, Self::Matmul, Self::Fib, Self::ListWalk];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sort => "sort",
            Self::Search => "search",
            Self::Matmul => "matmul",
            Self::Fib => "fib",
            Self::ListWalk => "list_walk",
        }
    }

    fn source(self) -> &'static str {
        match self {
            Self::Sort => BUBBLE_SORT,
            Self::Search => LINEAR_SEARCH,
            Self::Matmul => MATMUL,
            Self::Fib => FIB_MEMO,
            Self::ListWalk => LIST_SUM,
        }
    }
}

/// Rewrites `inc %r` as `add $1, %r`.
fn spell_out_increments(src: &str) -> String {
    src.lines()
        .map(|l| match l.trim().strip_prefix("inc ") {
            Some(r) => format!("    add $1, {r}"),
            None => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

/// One member of a program class: random input size and data, and a
/// random choice of increment spelling.
pub fn class_variant(class: ProgramClass, variant: u64, seed: u64) -> Job {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (variant << 8) ^ class as u64);
    let src = if rng.gen_bool(0.5) { spell_out_increments(class.source()) } else { class.source().to_string() };
    let base = 0x2_0000 + 0x1000 * rng.gen_range(0..16u64);
    let mut init = InitState::default().with_reg(Register::Rbx, base);
    match class {
        ProgramClass::Sort | ProgramClass::Search => {
            let n = rng.gen_range(4..=10u64);
            let data: Vec<u64> = (0..n).map(|_| rng.gen_range(0..100)).collect();
            for (i, &v) in data.iter().enumerate() {
                init = init.with_word(base + 8 * i as u64, v);
            }
            init = init.with_reg(Register::Rcx, n);
            if class == ProgramClass::Search {
                let key = if rng.gen_bool(0.7) { data[rng.gen_range(0..n as usize)] } else { 1000 };
                init = init.with_reg(Register::Rdx, key);
            }
        }
        ProgramClass::Matmul => {
            let n = rng.gen_range(2..=3u64);
            let (b, c) = (base + 0x400, base + 0x800);
            for i in 0..n * n {
                init = init.with_word(base + 8 * i, rng.gen_range(0..10)).with_word(b + 8 * i, rng.gen_range(0..10));
            }
            init = init.with_zeroed(c, n * n).with_reg(Register::Rcx, n).with_reg(Register::Rsi, b).with_reg(Register::Rdi, c);
        }
        ProgramClass::Fib => {
            let n = rng.gen_range(6..=20u64);
            init = init.with_zeroed(base, n.max(2)).with_reg(Register::Rcx, n);
        }
        ProgramClass::ListWalk => {
            let n = rng.gen_range(4..=12usize);
            let addrs = node_addresses(&mut rng, n, 0x10);
            for (i, &a) in addrs.iter().enumerate() {
                let next = addrs.get(i + 1).copied().unwrap_or(0);
                init = init.with_word(a, next).with_word(a + 8, rng.gen_range(0..100));
            }
            init = init.with_reg(Register::Rbx, addrs[0]);
        }
    }
    Job { name: format!("{}_{variant}", class.name()), program: parse_program(&src).expect("variant parses"), init }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracer::Label;

    #[test]
    fn corpus_parses_and_runs() {
        for (name, src) in CORPUS {
            assert!(parse_program(src).is_ok(), "{name}");
        }
        for class in ProgramClass::ALL {
            for v in 0..5 {
                let t = class_variant(class, v, 3).run().unwrap();
                assert!(!t.events.is_empty(), "{class:?}");
            }
        }
    }

    #[test]
    fn loop_exit_is_kth_branch() {
        for k in [1, 2, 7] {
            let t = loop_k(k).run().unwrap();
            let labels: Vec<bool> = t.events.iter().filter_map(|e| e.taken()).collect();
            assert_eq!(labels.len() as u64, k);
            assert!(labels[..k as usize - 1].iter().all(|&t| !t) && labels[k as usize - 1]);
        }
    }

    #[test]
    fn chase_next_address_is_loaded_link() {
        for job in chase_suite(64, 200, 5) {
            let t = job.run().unwrap();
            let loads: Vec<_> = t.events.iter().filter(|e| e.addr.is_some()).collect();
            assert_eq!(loads.len(), 200);
            for w in loads.windows(2) {
                assert_eq!(w[0].label, Label::NextLoadAddr(w[1].addr));
            }
        }
    }

    #[test]
    fn sort_sorts() {
        let job = class_variant(ProgramClass::Sort, 1, 9);
        let t = job.run().unwrap();
        assert!(t.total_instr > 10);
    }
}
