use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::asm::Register;
use crate::baselines::{AddressPredictor, Bimodal, BranchPredictor, Correlation, Mlp, MlpConfig, Perceptron, Stride};
use crate::encode::Encoding;
use crate::tracer::{EventKind, Label, SnapshotEvent};
use crate::Scalar;

use super::metrics::{Outcome, PredictionRecord};
use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PredictorKind {
    Bimodal,
    Perceptron,
    Mlp,
    Stride,
    Correlation,
    Ncf,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 6] = [Self::Bimodal, Self::Perceptron, Self::Mlp, Self::Stride, Self::Correlation, Self::Ncf];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bimodal => "bimodal",
            Self::Perceptron => "perceptron",
            Self::Mlp => "mlp",
            Self::Stride => "stride",
            Self::Correlation => "ac",
            Self::Ncf => "ncf",
        }
    }

    pub fn branch_predictor(self) -> Option<Box<dyn BranchPredictor>> {
        match self {
            Self::Bimodal => Some(Box::new(Bimodal::new())),
            Self::Perceptron => Some(Box::new(Perceptron::new())),
            _ => None,
        }
    }

    pub fn address_predictor(self) -> Option<Box<dyn AddressPredictor>> {
        match self {
            Self::Stride => Some(Box::new(Stride::new())),
            Self::Correlation => Some(Box::new(Correlation::new())),
            _ => None,
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredictorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown predictor `{s}`"))
    }
}

/// Runs online over every event and keeps records with `seq >= from_seq`.
pub fn run_branch_predictor(p: &mut dyn BranchPredictor, events: &[SnapshotEvent], from_seq: u64) -> Vec<PredictionRecord> {
    let mut out = Vec::new();
    for e in events {
        if let Label::Taken(actual) = e.label {
            let predicted = p.step(e.pc, actual);
            if e.seq >= from_seq {
                out.push(PredictionRecord { seq: e.seq, pc: e.pc, outcome: Outcome::Branch { predicted, actual } });
            }
        }
    }
    out
}

/// Online run over load events. Every load updates the table; only events
/// with a next address are scored.
pub fn run_address_predictor(p: &mut dyn AddressPredictor, events: &[SnapshotEvent], from_seq: u64) -> Vec<PredictionRecord> {
    let mut out = Vec::new();
    for e in events.iter().filter(|e| e.kind == EventKind::Load) {
        let addr = e.addr.expect("load events carry their address");
        p.update(e.pc, addr);
        // The prediction for the next access at this pc is made now, right
        // after observing the current one.
        if let (Some(actual), true) = (e.next_addr(), e.seq >= from_seq) {
            out.push(PredictionRecord { seq: e.seq, pc: e.pc, outcome: Outcome::Prefetch { predicted: p.predict(e.pc), actual } });
        }
    }
    out
}

/// Binary encodings (with missing flags) of all 16 registers.
pub fn gpr_features<S: Scalar>(events: &[&SnapshotEvent]) -> Array2<S> {
    let enc = Encoding::binary(64).expect("valid width");
    let w = enc.width();
    let mut x = Array2::zeros((events.len(), w * Register::COUNT));
    for (row, e) in x.rows_mut().into_iter().zip(events) {
        let row = row.into_slice().expect("row-major");
        for (r, chunk) in e.regs.iter().zip(row.chunks_mut(w)) {
            enc.encode_into(*r, false, chunk);
        }
    }
    x
}

/// Offline MLP: trained on `train` branch events, frozen on `eval`.
pub fn run_mlp_branch<S: Scalar>(
    train: &[SnapshotEvent],
    eval: &[SnapshotEvent],
    cfg: &MlpConfig,
) -> Result<Vec<PredictionRecord>, EvalError> {
    let branches = |ev: &[SnapshotEvent]| -> Vec<(SnapshotEvent, bool)> {
        ev.iter().filter_map(|e| e.taken().map(|t| (e.clone(), t))).collect()
    };
    let tr = branches(train);
    let ev = branches(eval);
    if ev.is_empty() {
        return Ok(Vec::new());
    }
    let x: Array2<S> = gpr_features(&tr.iter().map(|(e, _)| e).collect::<Vec<_>>());
    let y: Vec<bool> = tr.iter().map(|(_, t)| *t).collect();
    let (net, _) = Mlp::train(x.view(), &y, cfg)?;
    let xe: Array2<S> = gpr_features(&ev.iter().map(|(e, _)| e).collect::<Vec<_>>());
    Ok(ev
        .iter()
        .zip(net.predict(xe.view()))
        .map(|((e, actual), predicted)| PredictionRecord {
            seq: e.seq,
            pc: e.pc,
            outcome: Outcome::Branch { predicted, actual: *actual },
        })
        .collect())
}
