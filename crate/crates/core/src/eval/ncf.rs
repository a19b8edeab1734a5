//! Binds traces onto fused graphs to form GGNN samples, and wraps a trained
//! model as a predictor over snapshot events.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;

use crate::asm::{build_cfg, Program};
use crate::encode::{node_features, Encoding, EncodingKind};
use crate::ggnn::{forward, train, Checkpoint, GgnnParams, GraphInput, Sample, Target, Task, TaskBatch, TaskOutput, TrainConfig, TrainLog};
use crate::graph::{assign_dynamic_values, build_graph, neighborhood, FusedGraph, GraphMode, NodeId, Subgraph};
use crate::tracer::{Label, SnapshotEvent};
use crate::Scalar;

use super::metrics::{Outcome, PredictionRecord};
use super::EvalError;

pub const DEFAULT_RADIUS: usize = 100;

/// Feature and graph choices shared by training and inference.
#[derive(Debug, Clone, PartialEq)]
pub struct NcfConfig {
    pub mode: GraphMode,
    pub encoding: EncodingKind,
    /// Width of binary encodings.
    pub bits: u32,
    pub radius: usize,
    pub train: TrainConfig,
}

impl Default for NcfConfig {
    fn default() -> Self {
        Self { mode: GraphMode::Full, encoding: EncodingKind::Binary, bits: 64, radius: DEFAULT_RADIUS, train: TrainConfig::default() }
    }
}

struct PcGraph {
    input: Arc<GraphInput>,
    sub: Subgraph,
    task: NodeId,
}

/// Per-pc task neighborhoods of one program.
pub struct TaskGraphs {
    pub graph: FusedGraph,
    per_pc: BTreeMap<usize, PcGraph>,
}

impl TaskGraphs {
    /// `program_id` separates graph ids across programs in one dataset.
    pub fn new(program: &Program, program_id: usize, mode: GraphMode, radius: usize) -> Self {
        let graph = build_graph(program, &build_cfg(program), mode);
        let mut per_pc = BTreeMap::new();
        for (&pc, &node) in graph.branch_tasks.iter().chain(&graph.prefetch_tasks) {
            let sub = neighborhood(&graph, node, radius).expect("task node is in graph");
            let task = sub.local_id(node).expect("seed is kept");
            let input = Arc::new(GraphInput::new(program_id << 20 | pc, &sub.graph));
            per_pc.insert(pc, PcGraph { input, sub, task });
        }
        Self { graph, per_pc }
    }

    /// Supervision target of an event, if it has one.
    pub fn target(event: &SnapshotEvent) -> Option<Target> {
        match event.label {
            Label::Taken(t) => Some(Target::Taken(t)),
            Label::NextLoadAddr(a) => a.map(Target::Address),
        }
    }

    /// Every node value of the event's task neighborhood.
    pub fn values<'a>(&'a self, event: &'a SnapshotEvent) -> impl Iterator<Item = u64> + 'a {
        self.per_pc.get(&event.pc).into_iter().flat_map(move |pg| {
            assign_dynamic_values(&pg.sub.graph, event).values.into_iter().filter_map(|v| v.parts()).map(|(v, _)| v)
        })
    }

    /// The event bound onto its neighborhood. Unlabeled events keep a task
    /// entry with mask 0 so they can still be scored.
    pub fn sample<S: Scalar>(&self, event: &SnapshotEvent, enc: &Encoding) -> Option<Sample<S>> {
        let pg = self.per_pc.get(&event.pc)?;
        let vg = assign_dynamic_values(&pg.sub.graph, event);
        let features: Array2<S> = node_features(&vg, enc);
        let (mask, target) = match Self::target(event) {
            Some(t) => (S::one(), t),
            None => (S::zero(), Target::Address(0)),
        };
        Some(Sample { input: pg.input.clone(), features, tasks: vec![Task { node: pg.task, mask, target }] })
    }
}

/// A program with traces for one experiment.
pub struct Workload<'a> {
    pub graphs: &'a TaskGraphs,
    pub events: &'a [SnapshotEvent],
}

pub fn fit_encoding(cfg: &NcfConfig, data: &[Workload]) -> Result<Encoding, EvalError> {
    let values = data.iter().flat_map(|w| w.events.iter().flat_map(move |e| w.graphs.values(e)));
    Ok(Encoding::fit(cfg.encoding, values, cfg.bits)?)
}

pub fn labeled_samples<S: Scalar>(data: &[Workload], enc: &Encoding) -> Vec<Sample<S>> {
    data.iter()
        .flat_map(|w| w.events.iter().filter(|e| TaskGraphs::target(e).is_some()).filter_map(|e| w.graphs.sample(e, enc)))
        .collect()
}

/// A trained GGNN with the encoding it was trained under.
#[derive(Debug, Clone)]
pub struct NcfModel<S> {
    pub config: NcfConfig,
    pub encoding: Encoding,
    pub params: GgnnParams<S>,
}

impl<S: Scalar> NcfModel<S> {
    /// Fits the encoding on the training events and trains.
    pub fn fit(config: &NcfConfig, data: &[Workload]) -> Result<(Self, TrainLog), EvalError> {
        let encoding = fit_encoding(config, data)?;
        let samples = labeled_samples::<S>(data, &encoding);
        let (params, log) = train(&samples, &config.train)?;
        Ok((Self { config: config.clone(), encoding, params }, log))
    }

    /// Everything besides the weights needed to rebuild the model.
    pub fn checkpoint_meta(&self) -> BTreeMap<String, String> {
        let c = &self.config;
        let t = &c.train;
        [
            ("encoding", self.encoding.describe()),
            ("mode", c.mode.to_string()),
            ("bits", c.bits.to_string()),
            ("radius", c.radius.to_string()),
            ("dim", t.dim.to_string()),
            ("steps", t.steps.to_string()),
            ("lr", t.lr.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("seed", t.seed.to_string()),
            ("tasks", t.tasks.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn from_checkpoint(ckpt: Checkpoint<S>) -> Result<Self, EvalError> {
        let get = |k: &str| ckpt.meta.get(k).ok_or_else(|| EvalError::Invalid(format!("checkpoint lacks `{k}`")));
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T, EvalError> {
            v.parse().map_err(|_| EvalError::Invalid(format!("checkpoint `{k}` = `{v}` is malformed")))
        }
        let encoding = Encoding::from_description(get("encoding")?)?;
        let train = TrainConfig {
            dim: num("dim", get("dim")?)?,
            steps: num("steps", get("steps")?)?,
            lr: num("lr", get("lr")?)?,
            epochs: num("epochs", get("epochs")?)?,
            batch_size: num("batch_size", get("batch_size")?)?,
            seed: num("seed", get("seed")?)?,
            tasks: get("tasks")?.parse().map_err(EvalError::Invalid)?,
        };
        let config = NcfConfig {
            mode: get("mode")?.parse().map_err(EvalError::Invalid)?,
            encoding: encoding.kind(),
            bits: num("bits", get("bits")?)?,
            radius: num("radius", get("radius")?)?,
            train,
        };
        if ckpt.params.dim() != config.train.dim || ckpt.params.feature_width() != encoding.width() {
            return Err(EvalError::Invalid("checkpoint tensors do not match its metadata".into()));
        }
        Ok(Self { config, encoding, params: ckpt.params })
    }

    /// Frozen predictions for every labeled event in order. Work is split
    /// into fixed chunks so results do not depend on thread count.
    pub fn predict(&self, graphs: &TaskGraphs, events: &[SnapshotEvent]) -> Result<Vec<PredictionRecord>, EvalError> {
        let labeled: Vec<&SnapshotEvent> = events.iter().filter(|e| TaskGraphs::target(e).is_some() && graphs.per_pc.contains_key(&e.pc)).collect();
        let chunks: Vec<Vec<PredictionRecord>> = labeled
            .par_chunks(64)
            .map(|chunk| self.predict_chunk(graphs, chunk))
            .collect::<Result<_, _>>()?;
        Ok(chunks.into_iter().flatten().collect())
    }

    fn predict_chunk(&self, graphs: &TaskGraphs, events: &[&SnapshotEvent]) -> Result<Vec<PredictionRecord>, EvalError> {
        let samples: Vec<Sample<S>> = events.iter().filter_map(|e| graphs.sample(e, &self.encoding)).collect();
        let batch = TaskBatch::new(&samples);
        let out = forward(&batch, &self.params, self.config.train.steps)?;
        Ok(events
            .iter()
            .zip(out.outputs)
            .map(|(e, o)| {
                let outcome = match (o, e.label) {
                    (TaskOutput::Branch { prob, .. }, Label::Taken(actual)) => {
                        Outcome::Branch { predicted: prob >= S::of(0.5), actual }
                    }
                    (o @ TaskOutput::Prefetch { .. }, Label::NextLoadAddr(Some(actual))) => {
                        Outcome::Prefetch { predicted: o.address(), actual }
                    }
                    _ => unreachable!("labels select the head"),
                };
                PredictionRecord { seq: e.seq, pc: e.pc, outcome }
            })
            .collect())
    }

    /// Mean final node state over all events and all neighborhood nodes.
    pub fn embedding(&self, graphs: &TaskGraphs, events: &[SnapshotEvent]) -> Result<Vec<f64>, EvalError> {
        let parts: Vec<(Vec<f64>, usize)> = events
            .par_chunks(64)
            .map(|chunk| -> Result<(Vec<f64>, usize), EvalError> {
                let samples: Vec<Sample<S>> = chunk.iter().filter_map(|e| graphs.sample(e, &self.encoding)).collect();
                let dim = self.params.dim();
                if samples.is_empty() {
                    return Ok((vec![0.0; dim], 0));
                }
                let batch = TaskBatch::new(&samples);
                let h = forward(&batch, &self.params, self.config.train.steps)?.h;
                let sum = h.rows().into_iter().fold(vec![0.0; dim], |mut acc, r| {
                    acc.iter_mut().zip(r).for_each(|(a, &v)| *a += v.as_f64());
                    acc
                });
                Ok((sum, h.nrows()))
            })
            .collect::<Result<_, _>>()?;
        let n: usize = parts.iter().map(|p| p.1).sum();
        if n == 0 {
            return Err(EvalError::EmptyTrace);
        }
        let mut mean = vec![0.0; self.params.dim()];
        for (s, _) in &parts {
            mean.iter_mut().zip(s).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        Ok(mean)
    }
}
