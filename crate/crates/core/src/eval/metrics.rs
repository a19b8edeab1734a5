use std::fmt::Write as _;

use crate::tracer::SnapshotEvent;

use super::EvalError;

/// Chronological split at `floor(n * fraction)`.
pub fn split_trace(events: &[SnapshotEvent], fraction: f64) -> Result<(&[SnapshotEvent], &[SnapshotEvent]), EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::BadFraction(fraction));
    }
    if events.is_empty() {
        return Err(EvalError::EmptyTrace);
    }
    let cut = (events.len() as f64 * fraction).floor() as usize;
    Ok(events.split_at(cut))
}

/// Mispredictions per thousand instructions.
pub fn mpki(mispredictions: u64, instructions: u64) -> Result<f64, EvalError> {
    if instructions == 0 {
        return Err(EvalError::ZeroInstructions);
    }
    Ok(1000.0 * mispredictions as f64 / instructions as f64)
}

/// Fraction of predictions equal to their label in all 64 bits. A missing
/// prediction counts as wrong.
pub fn complete_accuracy(predicted: &[Option<u64>], labels: &[u64]) -> Result<f64, EvalError> {
    if predicted.len() != labels.len() {
        return Err(EvalError::LengthMismatch { predicted: predicted.len(), labels: labels.len() });
    }
    if labels.is_empty() {
        return Err(EvalError::NoLabels);
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| **p == Some(**l)).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Branch { predicted: bool, actual: bool },
    Prefetch { predicted: Option<u64>, actual: u64 },
}

impl Outcome {
    pub fn correct(&self) -> bool {
        match *self {
            Outcome::Branch { predicted, actual } => predicted == actual,
            Outcome::Prefetch { predicted, actual } => predicted == Some(actual),
        }
    }
}

/// One prediction made at one snapshot event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictionRecord {
    pub seq: u64,
    pub pc: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub predictor: String,
    pub task: String,
    pub metric: String,
    pub value: f64,
}

/// Metrics table with one row per (predictor, task, metric).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn push(&mut self, predictor: &str, task: &str, metric: &str, value: f64) {
        self.rows.push(ReportRow { predictor: predictor.into(), task: task.into(), metric: metric.into(), value });
    }

    /// Summarizes a record stream. `instructions` is the instruction count
    /// of the evaluated region.
    pub fn add_records(&mut self, predictor: &str, records: &[PredictionRecord], instructions: u64) -> Result<(), EvalError> {
        let branch: Vec<_> = records.iter().filter(|r| matches!(r.outcome, Outcome::Branch { .. })).collect();
        let prefetch: Vec<_> = records.iter().filter(|r| matches!(r.outcome, Outcome::Prefetch { .. })).collect();
        for (task, recs) in [("branch", branch), ("prefetch", prefetch)] {
            if recs.is_empty() {
                continue;
            }
            let wrong = recs.iter().filter(|r| !r.outcome.correct()).count() as u64;
            let n = recs.len() as u64;
            self.push(predictor, task, "events", n as f64);
            self.push(predictor, task, "mispredictions", wrong as f64);
            self.push(predictor, task, "mpki", mpki(wrong, instructions)?);
            let acc = (n - wrong) as f64 / n as f64;
            self.push(predictor, task, if task == "branch" { "accuracy" } else { "complete_accuracy" }, acc);
        }
        Ok(())
    }

    pub fn get(&self, predictor: &str, task: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.predictor == predictor && r.task == task && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn merge(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("predictor,task,metric,value\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.predictor, r.task, r.metric, r.value).expect("string write");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracer::{EventKind, Label};

    fn events(n: u64) -> Vec<SnapshotEvent> {
        (0..n)
            .map(|seq| SnapshotEvent {
                seq,
                pc: 0,
                kind: EventKind::Branch,
                regs: [0; 16],
                addr: None,
                recent_mem: vec![],
                instr_count: seq,
                label: Label::Taken(true),
            })
            .collect()
    }

    #[test]
    fn split_floor() {
        let ev = events(10);
        let (a, b) = split_trace(&ev, 0.7).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
        let ev = events(3);
        let (a, b) = split_trace(&ev, 0.7).unwrap();
        assert_eq!((a.len(), b.len()), (2, 1));
        assert!(a.iter().chain(b).map(|e| e.seq).eq(0..3));
        assert_eq!(split_trace(&[], 0.7).unwrap_err(), EvalError::EmptyTrace);
        assert_eq!(split_trace(&ev, 1.0).unwrap_err(), EvalError::BadFraction(1.0));
    }

    #[test]
    fn mpki_values() {
        assert_eq!(mpki(5, 2000).unwrap(), 2.5);
        assert_eq!(mpki(0, 10).unwrap(), 0.0);
        assert_eq!(mpki(26, 1000).unwrap(), 26.0);
        assert_eq!(mpki(1, 0).unwrap_err(), EvalError::ZeroInstructions);
    }

    #[test]
    fn complete_accuracy_values() {
        let l = [1, 2, 3, 4];
        assert_eq!(complete_accuracy(&[Some(1), Some(2), Some(3), Some(4)], &l).unwrap(), 1.0);
        assert_eq!(complete_accuracy(&[Some(1), Some(2), Some(3), Some(4 ^ 1 << 40)], &l).unwrap(), 0.75);
        assert_eq!(complete_accuracy(&[], &[]).unwrap_err(), EvalError::NoLabels);
        assert!(complete_accuracy(&[None], &[1, 2]).is_err());
    }

    #[test]
    fn report_matches_hand_count() {
        let recs = [
            PredictionRecord { seq: 0, pc: 1, outcome: Outcome::Branch { predicted: true, actual: false } },
            PredictionRecord { seq: 1, pc: 1, outcome: Outcome::Branch { predicted: true, actual: true } },
            PredictionRecord { seq: 2, pc: 2, outcome: Outcome::Prefetch { predicted: None, actual: 8 } },
            PredictionRecord { seq: 3, pc: 2, outcome: Outcome::Prefetch { predicted: Some(16), actual: 16 } },
        ];
        let mut r = EvalReport::default();
        r.add_records("x", &recs, 500).unwrap();
        assert_eq!(r.get("x", "branch", "mpki"), Some(2.0));
        assert_eq!(r.get("x", "prefetch", "complete_accuracy"), Some(0.5));
        assert!(r.to_csv().starts_with("predictor,task,metric,value\nx,branch,events,2\n"));
    }
}
