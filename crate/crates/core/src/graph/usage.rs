//! Usage edges: each register occurrence links from every occurrence of the
//! same register that may be the most recent prior access (read or write)
//! along some control-flow path. Forward may-analysis over instructions.

use std::collections::{BTreeSet, VecDeque};

use crate::asm::{branch_successors, Program, Register};

use super::NodeId;

type State = Vec<BTreeSet<NodeId>>;

fn transfer(state: &mut State, occ: &[(NodeId, Register)]) {
    for &(node, r) in occ {
        let set = &mut state[r.index()];
        set.clear();
        set.insert(node);
    }
}

pub(super) fn usage_edges(program: &Program, occurrences: &[Vec<(NodeId, Register)>]) -> Vec<(NodeId, NodeId)> {
    let n = program.len();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let (f, t) = branch_successors(program, i).expect("index in range");
            f.into_iter().chain(t).filter(|&s| s < n).collect()
        })
        .collect();

    let empty: State = vec![BTreeSet::new(); Register::COUNT];
    let mut inputs: Vec<State> = vec![empty.clone(); n];
    let mut queue: VecDeque<usize> = (0..n).collect();
    let mut queued = vec![true; n];
    while let Some(i) = queue.pop_front() {
        queued[i] = false;
        let mut out = inputs[i].clone();
        transfer(&mut out, &occurrences[i]);
        for &s in &succ[i] {
            let mut changed = false;
            for (dst, src) in inputs[s].iter_mut().zip(&out) {
                for &x in src {
                    changed |= dst.insert(x);
                }
            }
            if changed && !queued[s] {
                queued[s] = true;
                queue.push_back(s);
            }
        }
    }

    let mut edges = Vec::new();
    for i in 0..n {
        let mut state = inputs[i].clone();
        for &(node, r) in &occurrences[i] {
            for &prev in &state[r.index()] {
                edges.push((prev, node));
            }
            transfer(&mut state, &[(node, r)]);
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}
