mod support;

use codefusion::asm::{build_cfg, parse_program};
use codefusion::eval::workloads::{chase_suite, class_variant, ProgramClass, CORPUS};
use codefusion::graph::GraphMode;
use proptest::prelude::*;

const MODES: [GraphMode; 2] = [GraphMode::Full, GraphMode::SrcTgtOnly];

#[test]
fn corpus_cfgs_match_instruction_semantics() {
    for (name, src) in CORPUS {
        let p = parse_program(src).unwrap();
        if let Err(e) = support::check_cfg(&p, 16) {
            panic!("{name}: {e}");
        }
    }
}

#[test]
fn corpus_graph_invariants() {
    let mut programs: Vec<(String, _)> = CORPUS.iter().map(|(n, s)| (n.to_string(), parse_program(s).unwrap())).collect();
    programs.extend(chase_suite(8, 4, 0).into_iter().map(|j| (j.name, j.program)));
    programs.extend(ProgramClass::ALL.into_iter().map(|c| class_variant(c, 1, 0)).map(|j| (j.name, j.program)));
    for (name, p) in &programs {
        for mode in MODES {
            if let Err(e) = support::check_graph(p, mode) {
                panic!("{name} ({mode}): {e}");
            }
        }
    }
}

#[test]
fn usage_oracle_on_a_hand_example() {
    // %rax at 0 reaches the cmp through both the loop back edge and entry;
    // the add reads then writes %rax, linking its two occurrences in order.
    let p = parse_program("    mov $0, %rax\nl:\n    cmp %rcx, %rax\n    jge e\n    add $1, %rax\n    jmp l\ne:\n    halt\n").unwrap();
    let g = codefusion::graph::build_graph(&p, &build_cfg(&p), GraphMode::Full);
    let usage = support::ref_usage_edges(&p, &g);
    let rax_at = |i: usize| -> Vec<usize> {
        g.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.instr == i && n.binding == Some(codefusion::graph::Binding::Reg(codefusion::asm::Register::Rax)))
            .map(|(id, _)| id)
            .collect()
    };
    let (mov, cmp, add) = (rax_at(0)[0], rax_at(1)[0], rax_at(3)[0]);
    assert!(usage.contains(&(mov, cmp)));
    assert!(usage.contains(&(add, cmp)));
    assert!(usage.contains(&(cmp, add)));
    assert!(!usage.contains(&(mov, add)));
    support::check_graph(&p, GraphMode::Full).unwrap();
}

const REGS: [&str; 6] = ["%rax", "%rbx", "%rcx", "%rdx", "%rsi", "%r8"];

fn reg() -> impl Strategy<Value = &'static str> {
    prop::sample::select(&REGS[..])
}

fn mem() -> impl Strategy<Value = String> {
    (0u64..64, reg(), prop::option::of((reg(), prop::sample::select(vec![1u8, 2, 4, 8])))).prop_map(|(o, b, ix)| match ix {
        Some((i, s)) => format!("{o:#x}({b},{i},{s})"),
        None => format!("{o:#x}({b})"),
    })
}

/// One instruction line; branch targets are label indices resolved later.
fn line() -> impl Strategy<Value = (String, Option<usize>)> {
    let plain = prop_oneof![
        (0u64..100, reg()).prop_map(|(v, r)| format!("mov ${v}, {r}")),
        (reg(), reg()).prop_map(|(a, b)| format!("mov {a}, {b}")),
        (mem(), reg()).prop_map(|(m, r)| format!("mov {m}, {r}")),
        (reg(), mem()).prop_map(|(r, m)| format!("mov {r}, {m}")),
        (prop::sample::select(vec!["add", "sub", "imul"]), reg(), reg()).prop_map(|(op, a, b)| format!("{op} {a}, {b}")),
        (0u64..9, reg()).prop_map(|(v, r)| format!("add ${v}, {r}")),
        reg().prop_map(|r| format!("inc {r}")),
        (reg(), reg()).prop_map(|(a, b)| format!("cmp {a}, {b}")),
    ];
    prop_oneof![
        4 => plain.prop_map(|s| (s, None)),
        1 => (prop::sample::select(vec!["je", "jne", "jl", "jle", "jg", "jge", "jmp"]), any::<prop::sample::Index>())
            .prop_map(|(m, t)| (m.to_string(), Some(t.index(usize::MAX)))),
    ]
}

/// A program whose every line carries a label, ending in `halt`.
fn program_text() -> impl Strategy<Value = String> {
    prop::collection::vec(line(), 0..24).prop_map(|lines| {
        let n = lines.len() + 1;
        let mut src = String::new();
        for (i, (text, target)) in lines.iter().enumerate() {
            match target {
                Some(t) => src.push_str(&format!("L{i}: {text} L{}\n", t % n)),
                None => src.push_str(&format!("L{i}: {text}\n")),
            }
        }
        src.push_str(&format!("L{}: halt\n", n - 1));
        src
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn random_programs_satisfy_structure(src in program_text()) {
        let p = parse_program(&src).unwrap();
        prop_assert_eq!(support::check_cfg(&p, 12), Ok(()));
        for mode in MODES {
            prop_assert_eq!(support::check_graph(&p, mode), Ok(()));
        }
    }

    #[test]
    fn pretty_printing_round_trips(src in program_text()) {
        let p = parse_program(&src).unwrap();
        prop_assert_eq!(parse_program(&p.pretty()).unwrap(), p);
    }
}
