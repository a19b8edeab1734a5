//! Exit criteria. Each test prints one `PASS`/`FAIL` line with the
//! measured values; tests run one at a time so wall-clock limits are not
//! skewed by each other.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use codefusion::asm::parse_program;
use codefusion::encode::EncodingKind;
use codefusion::eval::experiments::{
    accuracy_of, evaluate, generalization_counts, run_classify, run_generalization, run_jobs, run_loop_exit,
    ClassifyConfig, EvalOptions, GeneralizationConfig, LoopExitConfig,
};
use codefusion::eval::workloads::{chase_suite, stride_walk, CORPUS};
use codefusion::eval::{run_address_predictor, split_trace, PredictorKind, TaskGraphs};
use codefusion::baselines::Stride;
use codefusion::graph::GraphMode;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the verdict line and fails the test on `FAIL`.
fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    let line = format!("[{}] criterion {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    println!("{line}");
    assert!(pass, "{line}");
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t < limit, format!("{:.1}s of {}s", t.as_secs_f64(), limit.as_secs()))
}

#[test]
fn criterion_01_gradient_fidelity() {
    let _g = serial();
    let t0 = Instant::now();
    let r = support::check_gradient_fidelity(20, 1e-4, 1e-4);
    let (fast, time) = within(t0, Duration::from_secs(60));
    verdict(1, "gradient fidelity", r.is_ok() && fast, format!("20 graphs, T in 1/3/5, {r:?}, {time}"));
}

#[test]
fn criterion_02_generalization() {
    let _g = serial();
    let t0 = Instant::now();
    let cfg = GeneralizationConfig::default();
    let rows = run_generalization(&cfg).expect("experiment runs");
    let b = generalization_counts(&rows, EncodingKind::Binary);
    let s = generalization_counts(&rows, EncodingKind::Scalar);
    let c = generalization_counts(&rows, EncodingKind::Categorical);
    let trained = cfg.train_ks.len();
    let order = b > s && s > c;
    let categorical_bounded = c <= trained + 2;
    let (fast, time) = within(t0, Duration::from_secs(300));
    verdict(
        2,
        "generalization ordering",
        order && categorical_bounded && fast,
        format!("fully correct k of 80: binary {b}, scalar {s}, categorical {c} (bound {}), {time}", trained + 2),
    );
}

#[test]
fn criterion_03_loop_exit() {
    let _g = serial();
    let t0 = Instant::now();
    let cfg = LoopExitConfig::default();
    let rows = run_loop_exit(&cfg).expect("experiment runs");
    let held_out: Vec<_> = rows.iter().filter(|r| r.predictor == "ncf" && r.k <= 40).collect();
    let ncf_ok = held_out.iter().filter(|r| r.exit_correct).count();
    let ncf_frac = ncf_ok as f64 / held_out.len() as f64;
    let classic_miss = |name: &str| {
        rows.iter().filter(|r| r.predictor == name && r.k >= 3).all(|r| !r.exit_correct)
    };
    let (bi, pe) = (classic_miss("bimodal"), classic_miss("perceptron"));
    let (fast, time) = within(t0, Duration::from_secs(300));
    verdict(
        3,
        "loop exit",
        ncf_frac >= 0.9 && bi && pe && fast,
        format!(
            "ncf exit correct on {ncf_ok}/{} held-out k (need 90%), bimodal always misses {bi}, perceptron always misses {pe}, {time}",
            held_out.len()
        ),
    );
}

#[test]
fn criterion_04_baseline_oracles() {
    let _g = serial();
    let t0 = Instant::now();
    let r = support::check_baselines(10_000, 0);
    let (fast, time) = within(t0, Duration::from_secs(30));
    verdict(4, "baseline oracle equivalence", r.is_ok() && fast, format!("10k events each, {r:?}, {time}"));
}

#[test]
fn criterion_05_stride_sanity() {
    let _g = serial();
    let t0 = Instant::now();
    let runs = run_jobs(vec![stride_walk(256, 0x4000, 1)]).expect("trace");
    let records = run_address_predictor(&mut Stride::new(), &runs[0].trace.events, 0);
    // The prediction made right after the first access has no stride yet.
    let warm = &records[1..];
    let stride_acc = accuracy_of(warm, false).unwrap_or(0.0);
    let opts = EvalOptions { predictors: vec![PredictorKind::Ncf], ..Default::default() };
    assert_eq!(opts.ncf.encoding, EncodingKind::Binary);
    let (report, _) = evaluate(&runs, &opts).expect("evaluation");
    let ncf_acc = report.get("ncf", "prefetch", "complete_accuracy").unwrap_or(0.0);
    let (fast, time) = within(t0, Duration::from_secs(600));
    verdict(
        5,
        "stride sanity",
        stride_acc == 1.0 && ncf_acc >= 0.95 && fast,
        format!("stride {stride_acc:.4} (need 1.0), ncf held-out {ncf_acc:.4} (need 0.95), {time}"),
    );
}

/// Both graph modes on the pointer-chase suite, plus the full-mode NCF and
/// stride accuracies on the plain randomized chase alone.
struct ChaseResults {
    prefetch: [f64; 2],
    branch: [f64; 2],
    chase_ncf: f64,
    chase_stride: f64,
    elapsed: Duration,
}

fn chase_results() -> &'static ChaseResults {
    static CELL: std::sync::OnceLock<ChaseResults> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let t0 = Instant::now();
        let runs = run_jobs(chase_suite(64, 300, 0)).expect("traces");
        let mut prefetch = [0.0; 2];
        let mut branch = [0.0; 2];
        let mut chase_ncf = 0.0;
        for (i, mode) in [GraphMode::Full, GraphMode::SrcTgtOnly].into_iter().enumerate() {
            let mut opts = EvalOptions {
                predictors: vec![PredictorKind::Stride, PredictorKind::Correlation, PredictorKind::Ncf],
                ..Default::default()
            };
            opts.ncf.mode = mode;
            let (report, model) = evaluate(&runs, &opts).expect("evaluation");
            prefetch[i] = report.get("ncf", "prefetch", "complete_accuracy").unwrap_or(0.0);
            branch[i] = report.get("ncf", "branch", "accuracy").unwrap_or(0.0);
            if mode == GraphMode::Full {
                let model = model.expect("trained model");
                let graphs = TaskGraphs::new(&runs[0].job.program, 0, mode, model.config.radius);
                let (_, eval) = split_trace(&runs[0].trace.events, opts.fraction).expect("split");
                chase_ncf = accuracy_of(&model.predict(&graphs, eval).expect("predict"), false).unwrap_or(0.0);
            }
        }
        let (_, eval) = split_trace(&runs[0].trace.events, 0.7).expect("split");
        let from = eval[0].seq;
        let stride = run_address_predictor(&mut Stride::new(), &runs[0].trace.events, from);
        let chase_stride = accuracy_of(&stride, false).unwrap_or(0.0);
        ChaseResults { prefetch, branch, chase_ncf, chase_stride, elapsed: t0.elapsed() }
    })
}

#[test]
fn criterion_06_irregular_prefetch() {
    let _g = serial();
    let r = chase_results();
    let gap = r.chase_ncf - r.chase_stride;
    verdict(
        6,
        "irregular prefetch",
        gap >= 0.30,
        format!(
            "64-node randomized chase: ncf {:.4}, stride {:.4}, gap {:.1} points (need 30), {:.1}s",
            r.chase_ncf,
            r.chase_stride,
            100.0 * gap,
            r.elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_07_graph_invariants() {
    let _g = serial();
    let t0 = Instant::now();
    let mut failures = Vec::new();
    for (name, src) in CORPUS {
        let p = parse_program(src).expect("corpus parses");
        if let Err(e) = support::check_cfg(&p, 16) {
            failures.push(format!("{name}: {e}"));
        }
        for mode in [GraphMode::Full, GraphMode::SrcTgtOnly] {
            if let Err(e) = support::check_graph(&p, mode) {
                failures.push(format!("{name} ({mode}): {e}"));
            }
        }
    }
    let (fast, time) = within(t0, Duration::from_secs(10));
    verdict(
        7,
        "graph invariants",
        failures.is_empty() && fast,
        format!("{} programs x 2 modes, failures {failures:?}, {time}", CORPUS.len()),
    );
}

#[test]
fn criterion_08_masking_locality() {
    let _g = serial();
    let t0 = Instant::now();
    let mask = support::check_zero_mask(20);
    let local = support::check_locality(40);
    let (fast, time) = within(t0, Duration::from_secs(60));
    verdict(
        8,
        "masking and locality",
        mask.is_ok() && local.is_ok() && fast,
        format!("zero mask {mask:?}, nodes beyond T hops checked {local:?}, {time}"),
    );
}

#[test]
fn criterion_09_ablation_direction() {
    let _g = serial();
    let r = chase_results();
    let prefetch_drop = r.prefetch[0] - r.prefetch[1];
    let branch_change = (r.branch[0] - r.branch[1]).abs();
    verdict(
        9,
        "ablation direction",
        prefetch_drop > branch_change,
        format!(
            "prefetch full {:.4} vs src-tgt {:.4}, branch full {:.4} vs src-tgt {:.4}",
            r.prefetch[0], r.prefetch[1], r.branch[0], r.branch[1]
        ),
    );
}

#[test]
fn criterion_10_classification_transfer() {
    let _g = serial();
    let t0 = Instant::now();
    let cfg = ClassifyConfig::default();
    assert_eq!(cfg.per_class, (30, 10, 10));
    let r = run_classify(&cfg).expect("experiment runs");
    let (fast, time) = within(t0, Duration::from_secs(900));
    verdict(
        10,
        "classification transfer",
        r.test_accuracy >= 0.8 && r.test_accuracy >= 3.0 * r.shuffled_accuracy && fast,
        format!("{} classes, test {:.4}, shuffled labels {:.4}, {time}", r.classes, r.test_accuracy, r.shuffled_accuracy),
    );
}

fn cli(args: &[&str], dir: &Path) {
    let out = Command::new(env!("CARGO_BIN_EXE_codefusion")).args(args).current_dir(dir).output().expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).expect("dir") {
        let p = entry.expect("entry").path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            let bytes = fs::read(&p).expect("read");
            out.push((p.strip_prefix(dir).expect("inside").to_path_buf(), bytes));
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_11_determinism() {
    let _g = serial();
    let t0 = Instant::now();
    let work = tempfile::tempdir().expect("tempdir");
    let w = work.path();
    fs::write(w.join("walk.s"), codefusion::eval::workloads::STRIDE_WALK).unwrap();
    fs::write(w.join("walk.init"), "%rbx = 0x1000\n%rcx = 4\nmem 0x1000 = 3\nmem 0x1004 = 1\nmem 0x1008 = 4\nmem 0x100c = 1\n").unwrap();
    fs::write(w.join("small.cfg"), "# tiny models\nnodes = 16\nhops = 40\ndim = 8\nepochs = 2\n").unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["parse", "--program", "walk.s"],
        vec!["trace", "--program", "walk.s", "--init", "walk.init"],
        vec!["graph", "--program", "walk.s", "--set", "mode=src-tgt"],
        vec!["train", "--config", "small.cfg", "--set", "workload=pointer_chase"],
        vec!["eval", "--config", "small.cfg", "--set", "workload=pointer_chase"],
        vec!["experiment", "generalization", "--set", "mlp_epochs=20", "--set", "test_ks=1,2,3,40"],
        vec!["experiment", "loop-exit", "--set", "epochs=2", "--set", "dim=8", "--set", "train_ks=1,4", "--set", "test_ks=2,3"],
        vec!["experiment", "ablation", "--config", "small.cfg"],
        vec!["experiment", "prop-sweep", "--config", "small.cfg", "--set", "sweep_steps=1,2"],
        vec![
            "experiment", "classify", "--set", "epochs=1", "--set", "dim=8", "--set", "train_per_class=3",
            "--set", "val_per_class=1", "--set", "test_per_class=1", "--set", "max_events=16",
        ],
    ];
    let mut identical = 0;
    let mut differing = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let mut outs = Vec::new();
        for rep in 0..2 {
            let out = format!("out/{i}_{rep}");
            let mut full: Vec<&str> = args.clone();
            full.extend(["--seed", "7", "--out", &out]);
            cli(&full, w);
            if args[0] == "train" {
                // Evaluate the checkpoint this repetition just wrote.
                let ckpt = format!("{out}/model.ckpt");
                let eval_out = format!("{out}/eval");
                cli(&["eval", "--config", "small.cfg", "--set", "workload=pointer_chase", "--checkpoint", &ckpt, "--seed", "7", "--out", &eval_out], w);
            }
            outs.push(files(&w.join(&out)));
        }
        if outs[0] == outs[1] && !outs[0].is_empty() {
            identical += 1;
        } else {
            differing.push(args.join(" "));
        }
    }
    verdict(
        11,
        "determinism",
        differing.is_empty(),
        format!("{identical}/{} commands byte-identical across two runs, differing {differing:?}, {:.1}s", runs.len(), t0.elapsed().as_secs_f64()),
    );
}
