use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use codefusion::asm::{build_cfg, parse_program, Program};
use codefusion::eval::experiments::{
    evaluate_with, run_ablation, run_classify, run_generalization, run_jobs, run_loop_exit, run_prop_sweep, train_ncf,
    ChaseConfig, ClassifyConfig, EvalOptions, GeneralizationConfig, LoopExitConfig,
};
use codefusion::eval::workloads::{chase_suite, loop_k, pointer_chase, stride_walk, Job};
use codefusion::eval::{fingerprint, EvalReport, NcfConfig, NcfModel, PredictorKind, RunManifest};
use codefusion::ggnn::{read_checkpoint, write_checkpoint};
use codefusion::graph::{build_graph, GraphMode};
use codefusion::tracer::{execute, write_trace_to, InitState, TraceConfig};
use codefusion::Real;

use crate::config::Config;
use crate::init_state::parse_init_state;
use crate::{Command, Experiment, GlobalArgs, Inputs};

/// Collects the files a command produces and the inputs it read.
struct Run {
    cfg: Config,
    seed: u64,
    inputs: BTreeMap<String, String>,
    outputs: Vec<(String, Vec<u8>)>,
}

impl Run {
    fn read_input(&mut self, path: &Path) -> Result<String> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.note_input(path, text.as_bytes());
        Ok(text)
    }

    fn note_input(&mut self, path: &Path, bytes: &[u8]) {
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.inputs.insert(format!("input.{name}"), fingerprint(bytes));
    }

    fn output(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.outputs.push((name.to_string(), bytes.into()));
    }

    fn program(&mut self, path: &Path) -> Result<Program> {
        let src = self.read_input(path)?;
        parse_program(&src).with_context(|| format!("parsing {}", path.display()))
    }

    fn init(&mut self, path: Option<&Path>) -> Result<InitState> {
        match path {
            Some(p) => {
                let text = self.read_input(p)?;
                parse_init_state(&text).with_context(|| format!("in {}", p.display()))
            }
            None => Ok(InitState::default()),
        }
    }
}

pub fn run(global: &GlobalArgs, command: Command) -> Result<()> {
    let mut cfg = match &global.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for pair in &global.set {
        cfg.set_pair(pair)?;
    }
    if let Some(seed) = global.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(enc) = &global.encoding {
        cfg.set("encoding", enc)?;
    }
    if let Some(bits) = global.bits {
        cfg.set("bits", &bits.to_string())?;
    }
    let seed = cfg.get("seed", 0u64)?;
    let mut run = Run { cfg, seed, inputs: BTreeMap::new(), outputs: Vec::new() };
    let name = match command {
        Command::Parse { program } => {
            parse_cmd(&mut run, &program)?;
            "parse".to_string()
        }
        Command::Trace { program, init } => {
            trace_cmd(&mut run, &program, init.as_deref())?;
            "trace".to_string()
        }
        Command::Graph { program } => {
            graph_cmd(&mut run, &program)?;
            "graph".to_string()
        }
        Command::Train { inputs } => {
            train_cmd(&mut run, &inputs)?;
            "train".to_string()
        }
        Command::Eval { inputs, checkpoint } => {
            eval_cmd(&mut run, &inputs, checkpoint.as_deref())?;
            "eval".to_string()
        }
        Command::Experiment(e) => {
            experiment_cmd(&mut run, e)?;
            format!("experiment {}", experiment_name(e))
        }
    };
    run.cfg.check_unused()?;
    write_outputs(&run, &global.out, &name)
}

fn write_outputs(run: &Run, dir: &Path, command: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut config = run.cfg.resolved();
    config.extend(run.inputs.clone());
    let mut manifest = RunManifest::new(command, run.seed, config);
    for (name, bytes) in &run.outputs {
        let path = dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        manifest.record_output(name, bytes);
        println!("wrote {}", path.display());
    }
    let path = dir.join("manifest.json");
    fs::write(&path, manifest.to_json()).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn experiment_name(e: Experiment) -> &'static str {
    match e {
        Experiment::Generalization => "generalization",
        Experiment::Ablation => "ablation",
        Experiment::PropSweep => "prop-sweep",
        Experiment::Classify => "classify",
        Experiment::LoopExit => "loop-exit",
    }
}

fn parse_cmd(run: &mut Run, path: &Path) -> Result<()> {
    let program = run.program(path)?;
    let cfg = build_cfg(&program);
    run.output("program.txt", program.pretty());
    run.output("cfg.json", serde_json::to_string_pretty(&cfg)? + "\n");
    Ok(())
}

fn trace_config(cfg: &Config) -> Result<TraceConfig> {
    let d = TraceConfig::default();
    Ok(TraceConfig { window: cfg.get("window", d.window)?, limit: cfg.get("limit", d.limit)? })
}

fn trace_cmd(run: &mut Run, program: &Path, init: Option<&Path>) -> Result<()> {
    let p = run.program(program)?;
    let init = run.init(init)?;
    let tcfg = trace_config(&run.cfg)?;
    let id = program.file_stem().map_or_else(|| "program".into(), |s| s.to_string_lossy().into_owned());
    let trace = execute(&p, &id, &init, tcfg)?;
    if trace.truncated {
        eprintln!("warning: stopped at the instruction limit of {}", tcfg.limit);
    }
    let mut bytes = Vec::new();
    write_trace_to(&trace, &mut bytes)?;
    run.output("trace.jsonl", bytes);
    Ok(())
}

fn graph_cmd(run: &mut Run, path: &Path) -> Result<()> {
    let program = run.program(path)?;
    let mode: GraphMode = run.cfg.get("mode", GraphMode::Full)?;
    let graph = build_graph(&program, &build_cfg(&program), mode);
    run.output("graph.json", graph.to_json());
    Ok(())
}

const NCF_KEYS: &[&str] = &["mode", "encoding", "bits", "radius", "dim", "steps", "lr", "epochs", "batch_size", "tasks"];

/// GGNN settings read from config on top of `base`.
fn ncf_config(run: &Run, base: NcfConfig) -> Result<NcfConfig> {
    let c = &run.cfg;
    let mut n = base;
    n.mode = c.get("mode", n.mode)?;
    n.encoding = c.get("encoding", n.encoding)?;
    n.bits = c.get("bits", n.bits)?;
    n.radius = c.get("radius", n.radius)?;
    n.train.dim = c.get("dim", n.train.dim)?;
    n.train.steps = c.get("steps", n.train.steps)?;
    n.train.lr = c.get("lr", n.train.lr)?;
    n.train.epochs = c.get("epochs", n.train.epochs)?;
    n.train.batch_size = c.get("batch_size", n.train.batch_size)?;
    n.train.tasks = c.get("tasks", n.train.tasks)?;
    n.train.seed = run.seed;
    Ok(n)
}

fn jobs(run: &mut Run, inputs: &Inputs) -> Result<Vec<Job>> {
    if !inputs.program.is_empty() {
        if !inputs.init.is_empty() && inputs.init.len() != inputs.program.len() {
            bail!("{} --init files for {} --program files", inputs.init.len(), inputs.program.len());
        }
        let mut out = Vec::new();
        for (i, path) in inputs.program.iter().enumerate() {
            let program = run.program(path)?;
            let init = run.init(inputs.init.get(i).map(|p| p.as_path()))?;
            let name = path.file_stem().map_or_else(|| format!("program{i}"), |s| s.to_string_lossy().into_owned());
            out.push(Job { name, program, init });
        }
        return Ok(out);
    }
    if !inputs.init.is_empty() {
        bail!("--init needs a matching --program");
    }
    let c = &run.cfg;
    let workload: String = c.get("workload", "chase_suite".to_string())?;
    Ok(match workload.as_str() {
        "chase_suite" => chase_suite(c.get("nodes", 64usize)?, c.get("hops", 300u64)?, run.seed),
        "pointer_chase" => vec![pointer_chase(c.get("nodes", 64usize)?, c.get("hops", 300u64)?, run.seed)],
        "stride_walk" => vec![stride_walk(c.get("n", 256u64)?, c.get("base", 0x1000u64)?, run.seed)],
        "loop_k" => c.get_list("ks", &[10u64])?.into_iter().map(loop_k).collect(),
        other => bail!("unknown workload `{other}` (chase_suite, pointer_chase, stride_walk, loop_k)"),
    })
}

fn train_cmd(run: &mut Run, inputs: &Inputs) -> Result<()> {
    let ncf = ncf_config(run, NcfConfig::default())?;
    let fraction = run.cfg.get("fraction", 0.7f64)?;
    let traced = run_jobs(jobs(run, inputs)?)?;
    let (model, log) = train_ncf(&traced, &ncf, fraction)?;
    let mut ckpt = Vec::new();
    write_checkpoint(&mut ckpt, &model.params, &model.checkpoint_meta())?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in log.epoch_losses.iter().enumerate() {
        writeln!(csv, "{},{l}", i + 1)?;
    }
    run.output("model.ckpt", ckpt);
    run.output("train_log.csv", csv);
    Ok(())
}

fn eval_cmd(run: &mut Run, inputs: &Inputs, checkpoint: Option<&Path>) -> Result<()> {
    let pretrained = match checkpoint {
        Some(p) => {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            run.note_input(p, &bytes);
            Some(NcfModel::<Real>::from_checkpoint(read_checkpoint(bytes.as_slice())?)?)
        }
        None => None,
    };
    let d = EvalOptions::default();
    let mut opts = EvalOptions {
        predictors: run.cfg.get_list("predictors", &d.predictors)?,
        fraction: run.cfg.get("fraction", d.fraction)?,
        ..d
    };
    if pretrained.is_some() {
        let ignored = run.cfg.ignore(NCF_KEYS);
        if !ignored.is_empty() {
            eprintln!("note: the checkpoint fixes the model; ignoring {}", ignored.join(", "));
        }
    } else if opts.predictors.contains(&PredictorKind::Ncf) {
        opts.ncf = ncf_config(run, opts.ncf)?;
    }
    if opts.predictors.contains(&PredictorKind::Mlp) {
        opts.mlp.epochs = run.cfg.get("mlp_epochs", opts.mlp.epochs)?;
        opts.mlp.lr = run.cfg.get("mlp_lr", opts.mlp.lr)?;
        opts.mlp.seed = run.seed;
    }
    let traced = run_jobs(jobs(run, inputs)?)?;
    let (report, _) = evaluate_with(&traced, &opts, pretrained.as_ref())?;
    run.output("report.csv", report.to_csv());
    Ok(())
}

/// Report rows with a leading column.
fn prefixed(header: &str, rows: &[(String, EvalReport)]) -> String {
    let mut out = format!("{header},predictor,task,metric,value\n");
    for (key, report) in rows {
        for line in report.to_csv().lines().skip(1) {
            out.push_str(&format!("{key},{line}\n"));
        }
    }
    out
}

fn chase_config(run: &Run) -> Result<ChaseConfig> {
    let d = ChaseConfig::default();
    Ok(ChaseConfig {
        nodes: run.cfg.get("nodes", d.nodes)?,
        hops: run.cfg.get("hops", d.hops)?,
        fraction: run.cfg.get("fraction", d.fraction)?,
        seed: run.seed,
        ncf: ncf_config(run, d.ncf)?,
    })
}

fn experiment_cmd(run: &mut Run, e: Experiment) -> Result<()> {
    let c = &run.cfg;
    match e {
        Experiment::Generalization => {
            let d = GeneralizationConfig::default();
            let mut mlp = d.mlp.clone();
            mlp.lr = c.get("mlp_lr", mlp.lr)?;
            mlp.epochs = c.get("mlp_epochs", mlp.epochs)?;
            mlp.batch_size = c.get("mlp_batch_size", mlp.batch_size)?;
            mlp.seed = run.seed;
            let g = GeneralizationConfig {
                train_ks: c.get_list("train_ks", &d.train_ks)?,
                test_ks: c.get_list("test_ks", &d.test_ks)?,
                max_value: c.get("max_value", d.max_value)?,
                bits: c.get("bits", d.bits)?,
                mlp,
            };
            let rows = run_generalization(&g)?;
            let mut csv = String::from("encoding,k,all_correct\n");
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for r in &rows {
                writeln!(csv, "{},{},{}", r.encoding, r.k, r.all_correct)?;
                *counts.entry(r.encoding.to_string()).or_default() += r.all_correct as usize;
            }
            let mut summary = String::from("encoding,fully_correct_k\n");
            for (enc, n) in counts {
                writeln!(summary, "{enc},{n}")?;
            }
            run.output("generalization.csv", csv);
            run.output("generalization_summary.csv", summary);
        }
        Experiment::LoopExit => {
            let d = LoopExitConfig::default();
            let l = LoopExitConfig {
                train_ks: c.get_list("train_ks", &d.train_ks)?,
                test_ks: c.get_list("test_ks", &d.test_ks)?,
                ncf: ncf_config(run, d.ncf.clone())?,
            };
            let mut csv = String::from("predictor,k,exit_correct,all_correct\n");
            for r in run_loop_exit(&l)? {
                writeln!(csv, "{},{},{},{}", r.predictor, r.k, r.exit_correct, r.all_correct)?;
            }
            run.output("loop_exit.csv", csv);
        }
        Experiment::Ablation => {
            let rows: Vec<(String, EvalReport)> =
                run_ablation(&chase_config(run)?)?.into_iter().map(|(m, r)| (m.to_string(), r)).collect();
            run.output("ablation.csv", prefixed("mode", &rows));
        }
        Experiment::PropSweep => {
            let steps = c.get_list("sweep_steps", &[1usize, 2, 3, 5, 8])?;
            let rows: Vec<(String, EvalReport)> =
                run_prop_sweep(&chase_config(run)?, &steps)?.into_iter().map(|(t, r)| (t.to_string(), r)).collect();
            run.output("prop_sweep.csv", prefixed("steps", &rows));
        }
        Experiment::Classify => {
            let d = ClassifyConfig::default();
            let mut svm = d.svm.clone();
            svm.l2 = c.get("svm_l2", svm.l2)?;
            svm.iterations = c.get("svm_iterations", svm.iterations)?;
            let k = ClassifyConfig {
                per_class: (
                    c.get("train_per_class", d.per_class.0)?,
                    c.get("val_per_class", d.per_class.1)?,
                    c.get("test_per_class", d.per_class.2)?,
                ),
                seed: run.seed,
                max_events: c.get("max_events", d.max_events)?,
                shuffles: c.get("shuffles", d.shuffles)?,
                svm,
                ncf: ncf_config(run, d.ncf.clone())?,
            };
            let r = run_classify(&k)?;
            let mut csv = String::from("metric,value\n");
            for (name, v) in [
                ("train_accuracy", r.train_accuracy),
                ("val_accuracy", r.val_accuracy),
                ("test_accuracy", r.test_accuracy),
                ("shuffled_label_accuracy", r.shuffled_accuracy),
                ("chance", 1.0 / r.classes as f64),
            ] {
                writeln!(csv, "{name},{v}")?;
            }
            run.output("classify.csv", csv);
        }
    }
    Ok(())
}
