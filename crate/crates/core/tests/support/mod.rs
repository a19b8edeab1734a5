//! Independent reference implementations and whole-suite checks shared by
//! the integration tests and the acceptance suite. Each check returns the
//! first violation it finds.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use codefusion::asm::{build_cfg, Cfg, InstrKind, Mnemonic, Program, Register};
use codefusion::baselines::{AddressPredictor, Bimodal, BranchPredictor, Correlation, Perceptron, Stride};
use codefusion::ggnn::gradcheck::{check_gradients, random_sample};
use codefusion::ggnn::{input_gradient, loss_and_grads, GgnnParams, Sample, Task, TaskBatch};
use codefusion::graph::{build_graph, Binding, EdgeType, FusedGraph, GraphMode, NodeKind, PseudoSub, VarSub};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Baseline references. Each recomputes its state from the full event
// history instead of keeping incremental tables.

pub fn ref_bimodal(events: &[(usize, bool)]) -> Vec<bool> {
    let mut out = Vec::with_capacity(events.len());
    for (t, &(pc, _)) in events.iter().enumerate() {
        let mut counter = 2i32;
        for &(p, taken) in &events[..t] {
            if p == pc {
                counter = (counter + if taken { 1 } else { -1 }).clamp(0, 3);
            }
        }
        out.push(counter >= 2);
    }
    out
}

/// Global history, newest first, padded with not-taken.
pub fn ref_perceptron(events: &[(usize, bool)], h: usize, theta: i64, l2: f64) -> Vec<bool> {
    let mut weights: BTreeMap<usize, Vec<i64>> = BTreeMap::new();
    let mut outcomes: Vec<i64> = Vec::new();
    let mut out = Vec::with_capacity(events.len());
    for &(pc, taken) in events {
        let x: Vec<i64> = (1..=h).map(|j| if j <= outcomes.len() { outcomes[outcomes.len() - j] } else { -1 }).collect();
        let w = weights.entry(pc).or_insert_with(|| vec![0; h + 1]);
        let y = w[0] + (0..h).map(|j| w[j + 1] * x[j]).sum::<i64>();
        let predicted = y >= 0;
        out.push(predicted);
        let t = if taken { 1 } else { -1 };
        if predicted != taken || y.abs() <= theta {
            for wi in w.iter_mut() {
                *wi -= (*wi as f64 * l2).trunc() as i64;
            }
            w[0] += t;
            for j in 0..h {
                w[j + 1] += t * x[j];
            }
        }
        outcomes.push(t);
    }
    out
}

/// Most frequent value; ties go to the one seen last.
fn most_frequent_recent(values: &[u64]) -> Option<u64> {
    let mut best: Option<(usize, usize, u64)> = None;
    for &v in values {
        let count = values.iter().filter(|&&u| u == v).count();
        let last = values.iter().rposition(|&u| u == v).expect("present");
        if best.map_or(true, |(c, l, _)| (count, last) > (c, l)) {
            best = Some((count, last, v));
        }
    }
    best.map(|(_, _, v)| v)
}

pub fn ref_stride(events: &[(usize, u64)]) -> Vec<Option<u64>> {
    let mut out = Vec::with_capacity(events.len());
    for (t, &(pc, _)) in events.iter().enumerate() {
        let seen: Vec<u64> = events[..t].iter().filter(|e| e.0 == pc).map(|e| e.1).collect();
        let strides: Vec<u64> = seen.windows(2).map(|w| w[1].wrapping_sub(w[0])).collect();
        out.push(seen.last().and_then(|&last| most_frequent_recent(&strides).map(|s| last.wrapping_add(s))));
    }
    out
}

pub fn ref_correlation(events: &[(usize, u64)]) -> Vec<Option<u64>> {
    let mut out = Vec::with_capacity(events.len());
    for (t, &(pc, _)) in events.iter().enumerate() {
        let seen: Vec<u64> = events[..t].iter().filter(|e| e.0 == pc).map(|e| e.1).collect();
        out.push(seen.last().and_then(|&cur| {
            let succ: Vec<u64> = seen.windows(2).filter(|w| w[0] == cur).map(|w| w[1]).collect();
            most_frequent_recent(&succ)
        }));
    }
    out
}

pub fn random_branches(seed: u64, n: usize) -> Vec<(usize, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bias: Vec<f64> = (0..8).map(|_| rng.gen_range(0.05..0.95)).collect();
    (0..n)
        .map(|_| {
            let pc = rng.gen_range(0..8);
            (pc, rng.gen_bool(bias[pc]))
        })
        .collect()
}

/// Mixes stride runs, revisits of a small address pool and fresh jumps so
/// every table path is exercised.
pub fn random_loads(seed: u64, n: usize) -> Vec<(usize, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<u64> = (0..12).map(|_| rng.gen_range(0..1u64 << 20) * 8).collect();
    let mut last = [0u64; 6];
    (0..n)
        .map(|_| {
            let pc = rng.gen_range(0..6);
            let addr = match rng.gen_range(0..10) {
                0..=3 => last[pc].wrapping_add([4, 8, 8, 16, u64::MAX - 7][rng.gen_range(0..5)]),
                4..=8 => pool[rng.gen_range(0..pool.len())],
                _ => rng.gen(),
            };
            last[pc] = addr;
            (pc, addr)
        })
        .collect()
}

fn first_difference<T: PartialEq + std::fmt::Debug>(name: &str, got: &[T], want: &[T]) -> Check {
    ensure(got.len() == want.len(), || format!("{name}: {} predictions vs {}", got.len(), want.len()))?;
    match got.iter().zip(want).position(|(a, b)| a != b) {
        None => Ok(()),
        Some(i) => Err(format!("{name}: event {i} predicted {:?}, reference {:?}", got[i], want[i])),
    }
}

/// Bit-identical prediction streams for all four table baselines.
pub fn check_baselines(n: usize, seed: u64) -> Check {
    let br = random_branches(seed, n);
    let mut b = Bimodal::new();
    let got: Vec<bool> = br.iter().map(|&(pc, t)| b.step(pc, t)).collect();
    first_difference("bimodal", &got, &ref_bimodal(&br))?;

    let mut p = Perceptron::new();
    let got: Vec<bool> = br.iter().map(|&(pc, t)| p.step(pc, t)).collect();
    let want = ref_perceptron(&br, Perceptron::HISTORY, Perceptron::default_theta(Perceptron::HISTORY), Perceptron::L2);
    first_difference("perceptron", &got, &want)?;

    let ld = random_loads(seed ^ 0xadd, n);
    let mut s = Stride::new();
    let got: Vec<Option<u64>> = ld.iter().map(|&(pc, a)| s.step(pc, a)).collect();
    first_difference("stride", &got, &ref_stride(&ld))?;

    let mut c = Correlation::new();
    let got: Vec<Option<u64>> = ld.iter().map(|&(pc, a)| c.step(pc, a)).collect();
    first_difference("correlation", &got, &ref_correlation(&ld))
}

// ---------------------------------------------------------------------------
// Control flow, written from the instruction semantics alone.

pub fn successors(program: &Program, i: usize) -> Vec<usize> {
    let ins = &program.instructions[i];
    let n = program.len();
    let mut s = match ins.mnemonic {
        Mnemonic::Halt => vec![],
        Mnemonic::Jmp => vec![ins.target.expect("jump target")],
        m if m.is_cond_branch() => vec![i + 1, ins.target.expect("branch target")],
        _ => vec![i + 1],
    };
    s.retain(|&t| t < n);
    s.sort_unstable();
    s.dedup();
    s
}

/// Instruction-level successor lists implied by `cfg`.
fn cfg_successors(cfg: &Cfg) -> BTreeMap<usize, Vec<usize>> {
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (b, block) in cfg.blocks.iter().enumerate() {
        for i in block.start..=block.end {
            let list = out.entry(i).or_default();
            if i < block.end {
                list.push(i + 1);
            } else {
                list.extend(cfg.successors(b).map(|e| cfg.blocks[e.to].start));
            }
            list.sort_unstable();
            list.dedup();
        }
    }
    out
}

fn paths(start: usize, len: usize, succ: &dyn Fn(usize) -> Vec<usize>) -> BTreeSet<Vec<usize>> {
    let mut done = BTreeSet::new();
    let mut frontier = vec![vec![start]];
    for _ in 0..len {
        let mut next = Vec::new();
        for p in frontier {
            let s = succ(*p.last().expect("non-empty"));
            if s.is_empty() {
                done.insert(p);
            } else {
                for t in s {
                    let mut q = p.clone();
                    q.push(t);
                    next.push(q);
                }
            }
        }
        frontier = next;
    }
    done.extend(frontier);
    done
}

/// Blocks partition the program, are maximal, and every bounded path from
/// the entry through the block graph is a path of the instruction semantics
/// and vice versa.
pub fn check_cfg(program: &Program, path_len: usize) -> Check {
    let n = program.len();
    let cfg = build_cfg(program);
    let mut covered = 0;
    for (b, block) in cfg.blocks.iter().enumerate() {
        ensure(block.start == covered && block.start <= block.end, || format!("block {b} {block:?} leaves a gap"))?;
        for i in block.start..=block.end {
            ensure(cfg.block_of[i] == b, || format!("block_of[{i}] = {} not {b}", cfg.block_of[i]))?;
        }
        covered = block.end + 1;
    }
    ensure(covered == n, || format!("blocks cover {covered} of {n} instructions"))?;

    let targets: BTreeSet<usize> = program.instructions.iter().filter_map(|i| i.target).collect();
    let transfers = |i: usize| matches!(program.instructions[i].kind, InstrKind::CondBranch | InstrKind::Jump | InstrKind::Halt);
    for i in 1..n {
        let should_lead = targets.contains(&i) || transfers(i - 1);
        let leads = cfg.blocks[cfg.block_of[i]].start == i;
        ensure(should_lead == leads, || format!("instruction {i}: leader {leads}, expected {should_lead}"))?;
    }

    let from_cfg = cfg_successors(&cfg);
    for i in 0..n {
        ensure(from_cfg[&i] == successors(program, i), || {
            format!("instruction {i}: cfg successors {:?}, semantics {:?}", from_cfg[&i], successors(program, i))
        })?;
    }
    if n > 0 {
        let a = paths(0, path_len, &|i| successors(program, i));
        let b = paths(0, path_len, &|i| from_cfg[&i].clone());
        ensure(a == b, || "bounded path sets differ".into())?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Fused graph invariants.

/// Usage edges by backward search: an occurrence of `r` is linked from
/// the previous occurrence in the same instruction, or else from the last
/// occurrence of `r` in every instruction reachable backwards without
/// passing another instruction that mentions `r`.
pub fn ref_usage_edges(program: &Program, g: &FusedGraph) -> BTreeSet<(usize, usize)> {
    let n = program.len();
    let mut occ: Vec<Vec<(usize, Register)>> = vec![Vec::new(); n];
    for (id, node) in g.nodes.iter().enumerate() {
        if let (NodeKind::Variable(VarSub::Reg), Some(Binding::Reg(r))) = (node.kind, node.binding) {
            occ[node.instr].push((id, r));
        }
    }
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for s in successors(program, i) {
            preds[s].push(i);
        }
    }
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for (k, &(node, r)) in occ[i].iter().enumerate() {
            if let Some(&(prev, _)) = occ[i][..k].iter().rev().find(|o| o.1 == r) {
                edges.insert((prev, node));
                continue;
            }
            let mut seen = vec![false; n];
            let mut stack = preds[i].clone();
            while let Some(j) = stack.pop() {
                if std::mem::replace(&mut seen[j], true) {
                    continue;
                }
                match occ[j].iter().rev().find(|o| o.1 == r) {
                    Some(&(prev, _)) => {
                        edges.insert((prev, node));
                    }
                    None => stack.extend(preds[j].iter().copied()),
                }
            }
        }
    }
    edges
}

pub fn check_graph(program: &Program, mode: GraphMode) -> Check {
    let g = build_graph(program, &build_cfg(program), mode);
    let is_instr = |v: usize| g.nodes[v].kind == NodeKind::Instruction;

    // Parent edges form a forest rooted at instruction nodes.
    let mut parent: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(c, p) in g.edges_of(EdgeType::Parent) {
        parent.entry(c).or_default().push(p);
    }
    for (v, node) in g.nodes.iter().enumerate() {
        let ps = parent.get(&v).cloned().unwrap_or_default();
        if is_instr(v) {
            ensure(ps.is_empty(), || format!("instruction node {v} has parents {ps:?}"))?;
            continue;
        }
        ensure(ps.len() == 1, || format!("node {v} has {} parents", ps.len()))?;
        let mut cur = v;
        let mut depth = 0;
        while !is_instr(cur) {
            cur = parent[&cur][0];
            depth += 1;
            ensure(depth <= 4, || format!("node {v}: parent chain longer than 4"))?;
            ensure(g.nodes[cur].instr == node.instr, || format!("node {v}: parent {cur} belongs to another instruction"))?;
        }
        ensure(g.instr_nodes[&node.instr] == cur, || format!("node {v} roots at {cur}"))?;
    }

    // Control flow joins instruction nodes with the semantic out-degree.
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in g.edges_of(EdgeType::ControlFlow) {
        ensure(is_instr(a) && is_instr(b), || format!("control-flow edge {a}->{b} leaves instruction nodes"))?;
        out.entry(g.nodes[a].instr).or_default().push(g.nodes[b].instr);
    }
    for ins in &program.instructions {
        let mut got = out.get(&ins.index).cloned().unwrap_or_default();
        got.sort_unstable();
        let want = successors(program, ins.index);
        ensure(got == want, || format!("instruction {} ({:?}): control flow to {got:?}, expected {want:?}", ins.index, ins.mnemonic))?;
        let degree_ok = match ins.kind {
            InstrKind::Halt => got.is_empty(),
            InstrKind::Jump => got.len() == 1,
            InstrKind::CondBranch => got.len() == 2 || ins.target == Some(ins.index + 1),
            _ => got.len() == 1 || ins.index + 1 == program.len(),
        };
        ensure(degree_ok, || format!("instruction {}: out-degree {}", ins.index, got.len()))?;
    }

    // Every edge list is duplicate-free and mirrored by its reverse.
    for t in EdgeType::ALL {
        let fwd = g.edges_of(t);
        ensure(fwd.windows(2).all(|w| w[0] < w[1]), || format!("{} edges unsorted or repeated", t.name()))?;
        let mut mirrored: Vec<(usize, usize)> = fwd.iter().map(|&(a, b)| (b, a)).collect();
        mirrored.sort_unstable();
        ensure(mirrored == g.edges_of(t.reverse()), || format!("{} is not the mirror of {}", t.name(), t.reverse().name()))?;
    }

    // Usage edges are exactly the reaching occurrences.
    let usage: BTreeSet<(usize, usize)> = g.edges_of(EdgeType::Usage).iter().copied().collect();
    let want = ref_usage_edges(program, &g);
    if let Some(e) = usage.symmetric_difference(&want).next() {
        let side = if usage.contains(e) { "extra" } else { "missing" };
        return Err(format!("{side} usage edge {e:?}"));
    }
    for &(a, b) in &usage {
        let reg = |v: usize| match (g.nodes[v].kind, g.nodes[v].binding) {
            (NodeKind::Variable(VarSub::Reg), Some(Binding::Reg(r))) => Some(r),
            _ => None,
        };
        ensure(reg(a).is_some() && reg(a) == reg(b), || format!("usage edge {a}->{b} joins different registers"))?;
    }

    // Address decomposition only in the full graph; one task per load and branch.
    let decomposed =
        g.nodes.iter().any(|n| matches!(n.kind, NodeKind::Pseudo(PseudoSub::Base | PseudoSub::IndBase | PseudoSub::Offset)));
    let has_mem = program.instructions.iter().any(|i| i.load_source().is_some() || i.store_target().is_some());
    ensure(decomposed == (mode == GraphMode::Full && has_mem), || format!("{mode} graph decomposition present: {decomposed}"))?;
    let loads = program.instructions.iter().filter(|i| i.load_source().is_some()).count();
    let branches = program.instructions.iter().filter(|i| i.kind == InstrKind::CondBranch).count();
    ensure(g.prefetch_tasks.len() == loads, || format!("{} prefetch tasks for {loads} loads", g.prefetch_tasks.len()))?;
    ensure(g.branch_tasks.len() == branches, || format!("{} branch tasks for {branches} branches", g.branch_tasks.len()))?;
    for (&pc, &v) in &g.prefetch_tasks {
        ensure(g.nodes[v].kind == NodeKind::Pseudo(PseudoSub::MemSrc) && g.nodes[v].instr == pc, || {
            format!("prefetch task of {pc} is node {v}")
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// GGNN gradient checks.

pub fn random_params(rng: &mut ChaCha8Rng, dim: usize, fw: usize) -> GgnnParams<f64> {
    let mut p = GgnnParams::init(dim, fw, rng);
    // Non-zero biases so their gradients are exercised away from the origin.
    for (_, mut t) in p.tensors_mut() {
        t.mapv_inplace(|v| v + rng.gen_range(-0.3..0.3));
    }
    p
}

/// Analytic against central-difference gradients on `graphs` random graphs
/// of at most 12 nodes, cycling T through 1, 3 and 5.
pub fn check_gradient_fidelity(graphs: u64, eps: f64, tol: f64) -> Check {
    for seed in 0..graphs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Sample<f64> = random_sample(&mut rng, 12, 3);
        let p = random_params(&mut rng, 4, 3);
        let steps = [1, 3, 5][seed as usize % 3];
        for e in check_gradients(&TaskBatch::single(&s), &p, steps, eps).map_err(|e| e.to_string())? {
            ensure(e.max_rel_error < tol, || format!("seed {seed} T={steps} {}: relative error {}", e.name, e.max_rel_error))?;
        }
    }
    Ok(())
}

/// A task with mask 0 contributes nothing: loss and gradients equal those
/// of the sample without it.
pub fn check_zero_mask(graphs: u64) -> Check {
    for seed in 0..graphs {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut s: Sample<f64> = random_sample(&mut rng, 12, 3);
        let p = random_params(&mut rng, 4, 3);
        let extra = s.tasks[0];
        s.tasks.push(Task { mask: 0.0, ..extra });
        let masked = loss_and_grads(&TaskBatch::single(&s), &p, 2).map_err(|e| e.to_string())?;
        s.tasks.pop();
        let removed = loss_and_grads(&TaskBatch::single(&s), &p, 2).map_err(|e| e.to_string())?;
        ensure(masked.0 == removed.0 && masked.1 == removed.1, || format!("seed {seed}: masked task changed the loss"))?;
    }
    Ok(())
}

/// Hop distance of every node to the nearest task node, following message
/// direction backwards.
pub fn hops_from_tasks(s: &Sample<f64>) -> Vec<usize> {
    let n = s.input.topology.nodes;
    let mut dist = vec![usize::MAX; n];
    let mut frontier: Vec<usize> = s.tasks.iter().map(|t| t.node).collect();
    for &v in &frontier {
        dist[v] = 0;
    }
    let mut d = 0;
    while !frontier.is_empty() {
        d += 1;
        let mut next = Vec::new();
        for edges in &s.input.topology.edges {
            for &(u, v) in edges {
                if frontier.contains(&v) && dist[u] == usize::MAX {
                    dist[u] = d;
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    dist
}

/// Inputs more than T hops from every task get exactly zero gradient.
/// Returns how many such nodes were checked.
pub fn check_locality(graphs: u64) -> Result<usize, String> {
    let mut checked = 0;
    for seed in 0..graphs {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let s: Sample<f64> = random_sample(&mut rng, 12, 3);
        let p = random_params(&mut rng, 4, 3);
        let steps = 1 + seed as usize % 3;
        let dx = input_gradient(&TaskBatch::single(&s), &p, steps).map_err(|e| e.to_string())?;
        for (v, &d) in hops_from_tasks(&s).iter().enumerate() {
            if d > steps {
                checked += 1;
                ensure(dx.row(v).iter().all(|&g| g == 0.0), || format!("seed {seed}: node {v} at {d} hops has gradient"))?;
            }
        }
    }
    ensure(checked > 0, || "no node lay beyond T hops".into())?;
    Ok(checked)
}
