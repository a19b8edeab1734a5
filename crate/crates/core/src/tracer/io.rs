//! JSON-lines trace codec. The first line is a header object, every later
//! line one event. 64-bit quantities are `0x`-prefixed hex strings.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{EventKind, Label, SnapshotEvent, Trace, TraceError};
use crate::asm::Register;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Hex(u64);

impl Serialize for Hex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:#x}", self.0))
    }
}

impl<'de> Deserialize<'de> for Hex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let body = s
            .strip_prefix("0x")
            .ok_or_else(|| serde::de::Error::custom(format!("expected 0x-hex string, got `{s}`")))?;
        u64::from_str_radix(body, 16).map(Hex).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    program_id: String,
    total_instr: u64,
    window: usize,
    truncated: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindRecord {
    Branch,
    Load,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    seq: u64,
    pc: usize,
    kind: KindRecord,
    instr_count: u64,
    regs: Vec<Hex>,
    recent_mem: Vec<(Hex, Hex)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    taken: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    addr: Option<Hex>,
    /// Present (possibly `null`) on load records only.
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "present")]
    next_addr: Option<Option<Hex>>,
}

/// Distinguishes an explicit `null` from an absent field.
fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<Hex>>, D::Error> {
    Option::<Hex>::deserialize(d).map(Some)
}

impl From<&SnapshotEvent> for EventRecord {
    fn from(e: &SnapshotEvent) -> Self {
        let (taken, next_addr) = match e.label {
            Label::Taken(t) => (Some(t), None),
            Label::NextLoadAddr(a) => (None, Some(a.map(Hex))),
        };
        EventRecord {
            seq: e.seq,
            pc: e.pc,
            kind: match e.kind {
                EventKind::Branch => KindRecord::Branch,
                EventKind::Load => KindRecord::Load,
            },
            instr_count: e.instr_count,
            regs: e.regs.iter().map(|&v| Hex(v)).collect(),
            recent_mem: e.recent_mem.iter().map(|&(a, v)| (Hex(a), Hex(v))).collect(),
            taken,
            addr: e.addr.map(Hex),
            next_addr,
        }
    }
}

impl EventRecord {
    fn into_event(self) -> Result<SnapshotEvent, String> {
        let regs: [u64; Register::COUNT] = self
            .regs
            .iter()
            .map(|h| h.0)
            .collect::<Vec<_>>()
            .try_into()
            .map_err(|v: Vec<u64>| format!("expected {} registers, got {}", Register::COUNT, v.len()))?;
        let (kind, label, addr) = match (self.kind, self.taken, self.next_addr, self.addr) {
            (KindRecord::Branch, Some(t), None, None) => (EventKind::Branch, Label::Taken(t), None),
            (KindRecord::Load, None, Some(next), Some(a)) => {
                (EventKind::Load, Label::NextLoadAddr(next.map(|h| h.0)), Some(a.0))
            }
            (KindRecord::Branch, ..) => return Err("branch record needs `taken` and no load fields".into()),
            (KindRecord::Load, ..) => return Err("load record needs `addr` and `next_addr`".into()),
        };
        Ok(SnapshotEvent {
            seq: self.seq,
            pc: self.pc,
            kind,
            regs,
            addr,
            recent_mem: self.recent_mem.into_iter().map(|(a, v)| (a.0, v.0)).collect(),
            instr_count: self.instr_count,
            label,
        })
    }
}

pub fn write_trace_to<W: Write>(trace: &Trace, mut w: W) -> Result<(), TraceError> {
    let header = Header {
        program_id: trace.program_id.clone(),
        total_instr: trace.total_instr,
        window: trace.window,
        truncated: trace.truncated,
    };
    serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    for e in &trace.events {
        serde_json::to_writer(&mut w, &EventRecord::from(e)).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<(), TraceError> {
    write_trace_to(trace, BufWriter::new(File::create(path)?))
}

pub fn read_trace_from<R: BufRead>(r: R) -> Result<Trace, TraceError> {
    let mut lines = r.lines().enumerate();
    let malformed = |line: usize, msg: String| TraceError::Malformed { line, msg };
    let header: Header = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?).map_err(|e| malformed(1, e.to_string()))?,
        None => return Err(malformed(1, "missing header".into())),
    };
    let mut events = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(&line).map_err(|e| malformed(lineno, e.to_string()))?;
        let ev = rec.into_event().map_err(|m| malformed(lineno, m))?;
        if ev.seq != events.len() as u64 {
            return Err(malformed(lineno, format!("expected seq {}, got {}", events.len(), ev.seq)));
        }
        events.push(ev);
    }
    Ok(Trace {
        program_id: header.program_id,
        events,
        total_instr: header.total_instr,
        window: header.window,
        truncated: header.truncated,
    })
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    read_trace_from(BufReader::new(File::open(path)?))
}
