//! Experiment drivers. Each returns plain tables; the CLI renders them.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::asm::Register;
use crate::baselines::{Bimodal, Mlp, MlpConfig, Perceptron};
use crate::encode::EncodingKind;
use crate::ggnn::{TaskSet, TrainLog};
use crate::graph::GraphMode;
use crate::tracer::{SnapshotEvent, Trace};
use crate::Real;

use super::baseline_run::{run_address_predictor, run_branch_predictor, run_mlp_branch, PredictorKind};
use super::metrics::{split_trace, EvalReport, Outcome, PredictionRecord};
use super::ncf::{NcfConfig, NcfModel, TaskGraphs, Workload};
use super::svm::{LinearSvm, Standardizer, SvmConfig};
use super::workloads::{chase_suite, class_variant, loop_k, Job, ProgramClass};
use super::EvalError;

/// A traced job ready for evaluation.
pub struct Traced {
    pub job: Job,
    pub trace: Trace,
}

pub fn run_jobs(jobs: Vec<Job>) -> Result<Vec<Traced>, EvalError> {
    jobs.into_par_iter().map(|job| job.run().map(|trace| Traced { job, trace })).collect()
}

/// Options for [`evaluate`].
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub predictors: Vec<PredictorKind>,
    pub fraction: f64,
    pub ncf: NcfConfig,
    pub mlp: MlpConfig,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            predictors: PredictorKind::ALL.to_vec(),
            fraction: 0.7,
            ncf: NcfConfig::default(),
            mlp: MlpConfig { hidden: vec![], epochs: 20, ..MlpConfig::default() },
        }
    }
}

/// Splits every trace chronologically, trains the offline predictors on
/// the first parts and scores every predictor on the last parts. Online
/// baselines run through whole traces but are scored on the last parts
/// only. Returns the report and the trained GGNN, if any.
pub fn evaluate(runs: &[Traced], opts: &EvalOptions) -> Result<(EvalReport, Option<NcfModel<Real>>), EvalError> {
    evaluate_with(runs, opts, None)
}

/// [`evaluate`] with an already trained GGNN in place of fitting one.
pub fn evaluate_with(
    runs: &[Traced],
    opts: &EvalOptions,
    pretrained: Option<&NcfModel<Real>>,
) -> Result<(EvalReport, Option<NcfModel<Real>>), EvalError> {
    let mut splits = Vec::new();
    let mut instructions = 0;
    for r in runs {
        let (train, eval) = split_trace(&r.trace.events, opts.fraction)?;
        let first = eval.first().ok_or(EvalError::EmptyTrace)?;
        instructions += r.trace.total_instr - first.instr_count;
        splits.push((train, eval, first.seq));
    }
    let mut report = EvalReport::default();
    let mut model = None;
    for &kind in &opts.predictors {
        let mut records: Vec<PredictionRecord> = Vec::new();
        match kind {
            PredictorKind::Bimodal | PredictorKind::Perceptron => {
                for (r, &(_, _, from)) in runs.iter().zip(&splits) {
                    let mut p = kind.branch_predictor().expect("branch predictor");
                    records.extend(run_branch_predictor(p.as_mut(), &r.trace.events, from));
                }
            }
            PredictorKind::Stride | PredictorKind::Correlation => {
                for (r, &(_, _, from)) in runs.iter().zip(&splits) {
                    let mut p = kind.address_predictor().expect("address predictor");
                    records.extend(run_address_predictor(p.as_mut(), &r.trace.events, from));
                }
            }
            PredictorKind::Mlp => {
                for &(train, eval, _) in &splits {
                    let mut cfg = opts.mlp.clone();
                    if cfg.hidden.is_empty() {
                        let width = 65 * Register::COUNT;
                        cfg.hidden = vec![width, width];
                    }
                    records.extend(run_mlp_branch::<Real>(train, eval, &cfg)?);
                }
            }
            PredictorKind::Ncf => {
                let ncf = pretrained.map(|m| &m.config).unwrap_or(&opts.ncf);
                let graphs: Vec<TaskGraphs> =
                    runs.iter().enumerate().map(|(i, r)| TaskGraphs::new(&r.job.program, i, ncf.mode, ncf.radius)).collect();
                let m = match pretrained {
                    Some(m) => m.clone(),
                    None => {
                        let data: Vec<Workload> =
                            graphs.iter().zip(&splits).map(|(g, &(train, _, _))| Workload { graphs: g, events: train }).collect();
                        NcfModel::<Real>::fit(&opts.ncf, &data)?.0
                    }
                };
                for (g, &(_, eval, _)) in graphs.iter().zip(&splits) {
                    records.extend(m.predict(g, eval)?);
                }
                model = Some(m);
            }
        }
        report.add_records(kind.name(), &records, instructions)?;
    }
    Ok((report, model))
}

/// Trains the GGNN on the chronological training parts of `runs`.
pub fn train_ncf(runs: &[Traced], cfg: &NcfConfig, fraction: f64) -> Result<(NcfModel<Real>, TrainLog), EvalError> {
    let graphs: Vec<TaskGraphs> =
        runs.iter().enumerate().map(|(i, r)| TaskGraphs::new(&r.job.program, i, cfg.mode, cfg.radius)).collect();
    let mut data = Vec::new();
    for (g, r) in graphs.iter().zip(runs) {
        data.push(Workload { graphs: g, events: split_trace(&r.trace.events, fraction)?.0 });
    }
    NcfModel::fit(cfg, &data)
}

/// Loop-bound generalization of an MLP over `(i, k)` features.
#[derive(Debug, Clone)]
pub struct GeneralizationConfig {
    pub train_ks: Vec<u64>,
    pub test_ks: Vec<u64>,
    /// Largest representable value; fixes categorical and scalar ranges.
    pub max_value: u64,
    pub bits: u32,
    pub mlp: MlpConfig,
}

impl Default for GeneralizationConfig {
    fn default() -> Self {
        Self {
            train_ks: (1..=37).step_by(3).collect(),
            test_ks: (1..=80).collect(),
            max_value: 80,
            bits: 7,
            mlp: MlpConfig { hidden: vec![], lr: 0.01, epochs: 3000, batch_size: 200, ..MlpConfig::default() },
        }
    }
}

/// `(i, k)` encoded as one-hot over `1..=max`, as `v / max`, or as `bits`
/// binary digits each.
pub fn loop_features(kind: EncodingKind, i: u64, k: u64, max: u64, bits: u32) -> Vec<f64> {
    let mut out = Vec::new();
    for v in [i, k] {
        match kind {
            EncodingKind::Categorical => {
                let mut hot = vec![0.0; max as usize];
                if (1..=max).contains(&v) {
                    hot[v as usize - 1] = 1.0;
                }
                out.extend(hot);
            }
            EncodingKind::Scalar => out.push(v as f64 / max as f64),
            EncodingKind::Binary => out.extend((0..bits).rev().map(|b| ((v >> b) & 1) as f64)),
        }
    }
    out
}

/// `(i, k, taken)` at every branch of the loop run with bound `k`.
fn loop_branches(k: u64) -> Result<Vec<(u64, u64, bool)>, EvalError> {
    let t = loop_k(k).run()?;
    Ok(t.events.iter().filter_map(|e| e.taken().map(|tk| (e.reg(Register::Rax), e.reg(Register::Rcx), tk))).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizationRow {
    pub encoding: EncodingKind,
    pub k: u64,
    pub all_correct: bool,
}

pub fn run_generalization(cfg: &GeneralizationConfig) -> Result<Vec<GeneralizationRow>, EvalError> {
    let train: Vec<(u64, u64, bool)> = cfg.train_ks.iter().map(|&k| loop_branches(k)).collect::<Result<Vec<_>, _>>()?.concat();
    let tests: Vec<(u64, Vec<(u64, u64, bool)>)> =
        cfg.test_ks.iter().map(|&k| loop_branches(k).map(|b| (k, b))).collect::<Result<_, _>>()?;
    let kinds = [EncodingKind::Categorical, EncodingKind::Scalar, EncodingKind::Binary];
    let per_kind: Vec<Vec<GeneralizationRow>> = kinds
        .par_iter()
        .map(|&kind| -> Result<Vec<GeneralizationRow>, EvalError> {
            let feats = |rows: &[(u64, u64, bool)]| -> Array2<f64> {
                let flat: Vec<Vec<f64>> = rows.iter().map(|&(i, k, _)| loop_features(kind, i, k, cfg.max_value, cfg.bits)).collect();
                let w = flat[0].len();
                Array2::from_shape_vec((flat.len(), w), flat.concat()).expect("rectangular")
            };
            let x = feats(&train);
            let y: Vec<bool> = train.iter().map(|r| r.2).collect();
            let mut mcfg = cfg.mlp.clone();
            if mcfg.hidden.is_empty() {
                mcfg.hidden = vec![2 * x.ncols()];
            }
            let (net, _) = Mlp::<f64>::train(x.view(), &y, &mcfg)?;
            Ok(tests
                .iter()
                .map(|(k, rows)| {
                    let pred = net.predict(feats(rows).view());
                    let all_correct = pred.iter().zip(rows).all(|(p, r)| *p == r.2);
                    GeneralizationRow { encoding: kind, k: *k, all_correct }
                })
                .collect())
        })
        .collect::<Result<_, _>>()?;
    Ok(per_kind.concat())
}

/// Number of fully correct `k` per encoding.
pub fn generalization_counts(rows: &[GeneralizationRow], kind: EncodingKind) -> usize {
    rows.iter().filter(|r| r.encoding == kind && r.all_correct).count()
}

#[derive(Debug, Clone)]
pub struct LoopExitConfig {
    pub train_ks: Vec<u64>,
    pub test_ks: Vec<u64>,
    pub ncf: NcfConfig,
}

impl Default for LoopExitConfig {
    fn default() -> Self {
        let train_ks: Vec<u64> = (1..=37).step_by(3).collect();
        let test_ks = (1..=40).filter(|k| !train_ks.contains(k)).collect();
        let mut ncf = NcfConfig::default();
        ncf.train.tasks = TaskSet::BRANCH;
        ncf.train.epochs = 200;
        Self { train_ks, test_ks, ncf }
    }
}

/// Whether each predictor got the exit branch right, per test `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopExitRow {
    pub predictor: String,
    pub k: u64,
    pub exit_correct: bool,
    pub all_correct: bool,
}

/// Trains the GGNN on whole loop runs with training bounds and checks the
/// exit branch on held-out bounds. Classical predictors start fresh on
/// every run.
pub fn run_loop_exit(cfg: &LoopExitConfig) -> Result<Vec<LoopExitRow>, EvalError> {
    let train = run_jobs(cfg.train_ks.iter().map(|&k| loop_k(k)).collect())?;
    let test = run_jobs(cfg.test_ks.iter().map(|&k| loop_k(k)).collect())?;
    let graphs = TaskGraphs::new(&train[0].job.program, 0, cfg.ncf.mode, cfg.ncf.radius);
    let data: Vec<Workload> = train.iter().map(|t| Workload { graphs: &graphs, events: &t.trace.events }).collect();
    let (model, _) = NcfModel::<Real>::fit(&cfg.ncf, &data)?;
    let mut rows = Vec::new();
    for (t, &k) in test.iter().zip(&cfg.test_ks) {
        let mut push = |name: &str, recs: Vec<PredictionRecord>| {
            let exit_correct = recs.last().is_some_and(|r| r.outcome.correct());
            let all_correct = recs.iter().all(|r| r.outcome.correct());
            rows.push(LoopExitRow { predictor: name.into(), k, exit_correct, all_correct });
        };
        push("ncf", model.predict(&graphs, &t.trace.events)?);
        push("bimodal", run_branch_predictor(&mut Bimodal::new(), &t.trace.events, 0));
        push("perceptron", run_branch_predictor(&mut Perceptron::new(), &t.trace.events, 0));
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct ChaseConfig {
    pub nodes: usize,
    pub hops: u64,
    pub seed: u64,
    pub fraction: f64,
    pub ncf: NcfConfig,
}

impl Default for ChaseConfig {
    fn default() -> Self {
        Self { nodes: 64, hops: 300, seed: 0, fraction: 0.7, ncf: NcfConfig::default() }
    }
}

/// Per-mode report on the pointer-chase suite. The address baselines do
/// not depend on the graph and appear in both reports.
pub fn run_ablation(cfg: &ChaseConfig) -> Result<Vec<(GraphMode, EvalReport)>, EvalError> {
    let runs = run_jobs(chase_suite(cfg.nodes, cfg.hops, cfg.seed))?;
    [GraphMode::Full, GraphMode::SrcTgtOnly]
        .into_iter()
        .map(|mode| {
            let mut ncf = cfg.ncf.clone();
            ncf.mode = mode;
            let predictors = vec![PredictorKind::Stride, PredictorKind::Correlation, PredictorKind::Ncf];
            let opts = EvalOptions { predictors, fraction: cfg.fraction, ncf, ..Default::default() };
            evaluate(&runs, &opts).map(|(r, _)| (mode, r))
        })
        .collect()
}

/// One GGNN per propagation step count on the pointer-chase suite.
pub fn run_prop_sweep(cfg: &ChaseConfig, steps: &[usize]) -> Result<Vec<(usize, EvalReport)>, EvalError> {
    let runs = run_jobs(chase_suite(cfg.nodes, cfg.hops, cfg.seed))?;
    let mut sorted: Vec<usize> = steps.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    sorted.retain(|&t| t > 0);
    sorted
        .into_iter()
        .map(|t| {
            let mut ncf = cfg.ncf.clone();
            ncf.train.steps = t;
            let opts = EvalOptions { predictors: vec![PredictorKind::Ncf], fraction: cfg.fraction, ncf, ..Default::default() };
            evaluate(&runs, &opts).map(|(r, _)| (t, r))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ClassifyConfig {
    pub per_class: (usize, usize, usize),
    pub seed: u64,
    /// Events per program used for pretraining and for embeddings.
    pub max_events: usize,
    pub ncf: NcfConfig,
    pub svm: SvmConfig,
    pub shuffles: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        let mut ncf = NcfConfig::default();
        ncf.train.tasks = TaskSet::BRANCH;
        ncf.train.epochs = 3;
        Self { per_class: (30, 10, 10), seed: 0, max_events: 64, ncf, svm: SvmConfig::default(), shuffles: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyResult {
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    /// Mean test accuracy over label permutations of the training set.
    pub shuffled_accuracy: f64,
    pub classes: usize,
}

/// Branch-pretrained GGNN embeddings averaged per program, classified by a
/// linear squared-hinge model.
pub fn run_classify(cfg: &ClassifyConfig) -> Result<ClassifyResult, EvalError> {
    let (ntr, nva, nte) = cfg.per_class;
    let per = ntr + nva + nte;
    let mut jobs = Vec::new();
    for class in ProgramClass::ALL {
        for v in 0..per as u64 {
            jobs.push(class_variant(class, v, cfg.seed));
        }
    }
    let runs = run_jobs(jobs)?;
    let graphs: Vec<TaskGraphs> =
        runs.iter().enumerate().map(|(i, r)| TaskGraphs::new(&r.job.program, i, cfg.ncf.mode, cfg.ncf.radius)).collect();
    let events: Vec<&[SnapshotEvent]> = runs.iter().map(|r| &r.trace.events[..r.trace.events.len().min(cfg.max_events)]).collect();
    let split = |i: usize| i % per;
    let data: Vec<Workload> = (0..runs.len())
        .filter(|&i| split(i) < ntr)
        .map(|i| Workload { graphs: &graphs[i], events: events[i] })
        .collect();
    let (model, _) = NcfModel::<Real>::fit(&cfg.ncf, &data)?;
    let emb: Vec<Vec<f64>> = (0..runs.len()).map(|i| model.embedding(&graphs[i], events[i])).collect::<Result<_, _>>()?;
    let label = |i: usize| i / per;
    let pick = |lo: usize, hi: usize| -> (Vec<Vec<f64>>, Vec<usize>) {
        (0..runs.len()).filter(|&i| (lo..hi).contains(&split(i))).map(|i| (emb[i].clone(), label(i))).unzip()
    };
    let (xtr, ytr) = pick(0, ntr);
    let (xva, yva) = pick(ntr, ntr + nva);
    let (xte, yte) = pick(ntr + nva, per);
    let std = Standardizer::fit(&xtr);
    let z = |x: &[Vec<f64>]| -> Vec<Vec<f64>> { x.iter().map(|r| std.apply(r)).collect() };
    let (ztr, zva, zte) = (z(&xtr), z(&xva), z(&xte));
    let svm = LinearSvm::fit(&ztr, &ytr, &cfg.svm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut shuffled = 0.0;
    for _ in 0..cfg.shuffles.max(1) {
        let mut y = ytr.clone();
        y.shuffle(&mut rng);
        shuffled += LinearSvm::fit(&ztr, &y, &cfg.svm)?.accuracy(&zte, &yte);
    }
    Ok(ClassifyResult {
        train_accuracy: svm.accuracy(&ztr, &ytr),
        val_accuracy: svm.accuracy(&zva, &yva),
        test_accuracy: svm.accuracy(&zte, &yte),
        shuffled_accuracy: shuffled / cfg.shuffles.max(1) as f64,
        classes: ProgramClass::ALL.len(),
    })
}

/// Mean final node state of a trained model over a program's events.
pub fn export_embedding(model: &NcfModel<Real>, graphs: &TaskGraphs, events: &[SnapshotEvent]) -> Result<Vec<f64>, EvalError> {
    model.embedding(graphs, events)
}

/// Correct-prediction fraction of one outcome kind.
pub fn accuracy_of(records: &[PredictionRecord], branch: bool) -> Option<f64> {
    let sel: Vec<_> = records.iter().filter(|r| matches!(r.outcome, Outcome::Branch { .. }) == branch).collect();
    (!sel.is_empty()).then(|| sel.iter().filter(|r| r.outcome.correct()).count() as f64 / sel.len() as f64)
}
