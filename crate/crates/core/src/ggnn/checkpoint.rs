//! Binary checkpoint: magic, version, string metadata, then named tensors
//! with shapes and little-endian `f64` payloads.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::Scalar;

use super::params::GgnnParams;
use super::GgnnError;

const MAGIC: &[u8; 4] = b"CFGN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<S> {
    pub meta: BTreeMap<String, String>,
    pub params: GgnnParams<S>,
}

fn bad(msg: impl Into<String>) -> GgnnError {
    GgnnError::Checkpoint(msg.into())
}

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    put_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

pub fn write_checkpoint<S: Scalar>(
    w: &mut impl Write,
    params: &GgnnParams<S>,
    meta: &BTreeMap<String, String>,
) -> Result<(), GgnnError> {
    w.write_all(MAGIC)?;
    put_u32(w, CHECKPOINT_VERSION)?;
    put_u32(w, meta.len() as u32)?;
    for (k, v) in meta {
        put_str(w, k)?;
        put_str(w, v)?;
    }
    let tensors = params.tensors();
    put_u32(w, tensors.len() as u32)?;
    for (name, t) in tensors {
        put_str(w, &name)?;
        put_u32(w, t.ndim() as u32)?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &x in t.iter() {
            w.write_all(&x.as_f64().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_checkpoint<S: Scalar>(
    path: impl AsRef<Path>,
    params: &GgnnParams<S>,
    meta: &BTreeMap<String, String>,
) -> Result<(), GgnnError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, params, meta)?;
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], GgnnError> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|_| bad("truncated file"))?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32, GgnnError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64, GgnnError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn string(&mut self) -> Result<String, GgnnError> {
        let n = self.u32()? as usize;
        if n > 1 << 20 {
            return Err(bad("string too long"));
        }
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|_| bad("truncated file"))?;
        String::from_utf8(buf).map_err(|_| bad("invalid utf-8"))
    }
}

pub fn read_checkpoint<S: Scalar>(r: impl Read) -> Result<Checkpoint<S>, GgnnError> {
    let mut r = Reader { inner: r };
    if &r.bytes::<4>()? != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mut meta = BTreeMap::new();
    for _ in 0..r.u32()? {
        let k = r.string()?;
        meta.insert(k, r.string()?);
    }
    let mut tensors: BTreeMap<String, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
    for _ in 0..r.u32()? {
        let name = r.string()?;
        let ndim = r.u32()? as usize;
        if ndim > 2 {
            return Err(bad(format!("{name}: rank {ndim}")));
        }
        let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let len: usize = shape.iter().product();
        if len > 1 << 28 {
            return Err(bad(format!("{name}: tensor too large")));
        }
        let data = (0..len).map(|_| r.bytes::<8>().map(f64::from_le_bytes)).collect::<Result<Vec<_>, _>>()?;
        tensors.insert(name, (shape, data));
    }
    let dim = tensors.get("gru.bz").map(|(s, _)| s[0]).ok_or_else(|| bad("missing gru.bz"))?;
    let fw = tensors
        .get("embedder.projection")
        .and_then(|(s, _)| s.get(1).copied())
        .ok_or_else(|| bad("missing embedder.projection"))?;
    let mut params = GgnnParams::<S>::zeros(dim, fw);
    for (name, mut dst) in params.tensors_mut() {
        let (shape, data) = tensors.remove(&name).ok_or_else(|| bad(format!("missing tensor {name}")))?;
        if shape != dst.shape() {
            return Err(bad(format!("{name}: shape {shape:?}, expected {:?}", dst.shape())));
        }
        dst.iter_mut().zip(data).for_each(|(d, x)| *d = S::of(x));
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(bad(format!("unexpected tensor {extra}")));
    }
    Ok(Checkpoint { meta, params })
}

pub fn load_checkpoint<S: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<S>, GgnnError> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
