//! Numeric encodings of 64-bit dynamic values and the learned embedding
//! layer that turns encoded nodes into initial GGNN states.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use thiserror::Error;

use crate::graph::{FusedGraph, NodeKind, ValuedGraph};
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("categorical vocabulary must be non-empty")]
    EmptyVocab,
    #[error("categorical vocabulary contains {0:#x} twice")]
    DuplicateVocab(u64),
    #[error("scalar scale must be positive, got {0}")]
    BadScale(f64),
    #[error("binary width must be in 1..=64, got {0}")]
    BadWidth(u32),
    #[error("dimension mismatch: {what} expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("unknown encoding `{0}` (expected binary, scalar or categorical)")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncodingKind {
    Categorical,
    Scalar,
    Binary,
}

impl FromStr for EncodingKind {
    type Err = EncodeError;

    fn from_str(s: &str) -> Result<Self, EncodeError> {
        match s {
            "categorical" => Ok(EncodingKind::Categorical),
            "scalar" => Ok(EncodingKind::Scalar),
            "binary" => Ok(EncodingKind::Binary),
            other => Err(EncodeError::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingKind::Categorical => "categorical",
            EncodingKind::Scalar => "scalar",
            EncodingKind::Binary => "binary",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoding {
    /// One-hot over a sorted vocabulary plus a trailing out-of-vocabulary slot.
    Categorical { vocab: Vec<u64> },
    /// `value / scale`.
    Scalar { scale: f64 },
    /// Low `width` bits, most significant first.
    Binary { width: u32 },
}

impl Encoding {
    pub fn categorical(vocab: impl IntoIterator<Item = u64>) -> Result<Self, EncodeError> {
        let mut vocab: Vec<u64> = vocab.into_iter().collect();
        if vocab.is_empty() {
            return Err(EncodeError::EmptyVocab);
        }
        vocab.sort_unstable();
        if let Some(w) = vocab.windows(2).find(|w| w[0] == w[1]) {
            return Err(EncodeError::DuplicateVocab(w[0]));
        }
        Ok(Encoding::Categorical { vocab })
    }

    pub fn scalar(scale: f64) -> Result<Self, EncodeError> {
        if scale.is_finite() && scale > 0.0 {
            Ok(Encoding::Scalar { scale })
        } else {
            Err(EncodeError::BadScale(scale))
        }
    }

    pub fn binary(width: u32) -> Result<Self, EncodeError> {
        if (1..=64).contains(&width) {
            Ok(Encoding::Binary { width })
        } else {
            Err(EncodeError::BadWidth(width))
        }
    }

    /// Builds an encoding from training values: the distinct values for
    /// categorical, the maximum for scalar, `bits` for binary.
    pub fn fit(kind: EncodingKind, values: impl IntoIterator<Item = u64>, bits: u32) -> Result<Self, EncodeError> {
        match kind {
            EncodingKind::Binary => Encoding::binary(bits),
            EncodingKind::Categorical => {
                let mut v: Vec<u64> = values.into_iter().collect();
                v.sort_unstable();
                v.dedup();
                if v.is_empty() {
                    v.push(0);
                }
                Encoding::categorical(v)
            }
            EncodingKind::Scalar => {
                let max = values.into_iter().max().unwrap_or(0);
                Encoding::scalar((max as f64).max(1.0))
            }
        }
    }

    pub fn kind(&self) -> EncodingKind {
        match self {
            Encoding::Categorical { .. } => EncodingKind::Categorical,
            Encoding::Scalar { .. } => EncodingKind::Scalar,
            Encoding::Binary { .. } => EncodingKind::Binary,
        }
    }

    /// Width without the missing-flag slot.
    pub fn raw_width(&self) -> usize {
        match self {
            Encoding::Categorical { vocab } => vocab.len() + 1,
            Encoding::Scalar { .. } => 1,
            Encoding::Binary { width } => *width as usize,
        }
    }

    /// Full feature width including the missing flag.
    pub fn width(&self) -> usize {
        self.raw_width() + 1
    }

    /// Writes the flag-less encoding of `value` into `out[..raw_width()]`.
    pub fn encode_raw_into<S: Scalar>(&self, value: u64, out: &mut [S]) {
        let out = &mut out[..self.raw_width()];
        out.iter_mut().for_each(|x| *x = S::zero());
        match self {
            Encoding::Categorical { vocab } => {
                let slot = vocab.binary_search(&value).unwrap_or(vocab.len());
                out[slot] = S::one();
            }
            Encoding::Scalar { scale } => out[0] = S::of(value as f64 / scale),
            Encoding::Binary { width } => {
                let w = *width as usize;
                for (i, x) in out.iter_mut().enumerate() {
                    if (value >> (w - 1 - i)) & 1 == 1 {
                        *x = S::one();
                    }
                }
            }
        }
    }

    pub fn encode_into<S: Scalar>(&self, value: u64, missing: bool, out: &mut [S]) {
        self.encode_raw_into(value, out);
        out[self.raw_width()] = if missing { S::one() } else { S::zero() };
    }

    pub fn encode_value<S: Scalar>(&self, value: u64, missing: bool) -> Vec<S> {
        let mut out = vec![S::zero(); self.width()];
        self.encode_into(value, missing, &mut out);
        out
    }

    /// Config-string form, e.g. `binary:64`, `scalar:80`, `categorical:3,7,9`.
    pub fn describe(&self) -> String {
        match self {
            Encoding::Binary { width } => format!("binary:{width}"),
            Encoding::Scalar { scale } => format!("scalar:{scale:?}"),
            Encoding::Categorical { vocab } => {
                let v: Vec<String> = vocab.iter().map(|x| format!("{x:#x}")).collect();
                format!("categorical:{}", v.join(","))
            }
        }
    }

    pub fn from_description(s: &str) -> Result<Self, EncodeError> {
        let bad = || EncodeError::UnknownKind(s.to_string());
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "binary" => Encoding::binary(arg.parse().map_err(|_| bad())?),
            "scalar" => Encoding::scalar(arg.parse().map_err(|_| bad())?),
            "categorical" => Encoding::categorical(
                arg.split(',')
                    .map(|t| {
                        let t = t.trim();
                        match t.strip_prefix("0x") {
                            Some(h) => u64::from_str_radix(h, 16),
                            None => t.parse(),
                        }
                    })
                    .collect::<Result<Vec<u64>, _>>()
                    .map_err(|_| bad())?,
            ),
            _ => Err(bad()),
        }
    }
}

/// Learned embedding layer: `x = P · enc(value) + S[subtype]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedderParams<S> {
    /// `D × F`, `F` the encoding width including the missing flag.
    pub projection: Array2<S>,
    /// One `D`-vector per node sub-type.
    pub subtype: Array2<S>,
}

impl<S: Scalar> EmbedderParams<S> {
    pub fn zeros(dim: usize, feature_width: usize) -> Self {
        Self {
            projection: Array2::zeros((dim, feature_width)),
            subtype: Array2::zeros((NodeKind::SUBTYPES, dim)),
        }
    }

    /// Uniform `(-1/sqrt(D), 1/sqrt(D))` entries.
    pub fn random(dim: usize, feature_width: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (dim as f64).sqrt();
        let mut draw = |shape: (usize, usize)| {
            Array2::from_shape_simple_fn(shape, || S::of(rng.gen_range(-bound..bound)))
        };
        Self { projection: draw((dim, feature_width)), subtype: draw((NodeKind::SUBTYPES, dim)) }
    }

    pub fn dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn feature_width(&self) -> usize {
        self.projection.ncols()
    }

    fn embed_row(&self, features: ArrayView1<S>, subtype: usize) -> Array1<S> {
        self.projection.dot(&features) + &self.subtype.row(subtype)
    }
}

/// Encoded features (`N × F`, zero rows for instruction nodes) of a valued graph.
pub fn node_features<S: Scalar>(vg: &ValuedGraph, enc: &Encoding) -> Array2<S> {
    let mut feats = Array2::zeros((vg.graph.len(), enc.width()));
    for (i, v) in vg.values.iter().enumerate() {
        if let Some((value, missing)) = v.parts() {
            enc.encode_into(value, missing, feats.row_mut(i).as_slice_mut().expect("row-major"));
        }
    }
    feats
}

/// Sub-type index per node (`None` for instruction nodes).
pub fn node_subtypes(graph: &FusedGraph) -> Vec<Option<usize>> {
    graph.nodes.iter().map(|n| n.kind.subtype_index()).collect()
}

/// Embeds pre-computed features. Instruction rows stay zero.
pub fn embed_features<S: Scalar>(
    features: &Array2<S>,
    subtypes: &[Option<usize>],
    params: &EmbedderParams<S>,
) -> Result<Array2<S>, EncodeError> {
    if features.ncols() != params.feature_width() {
        return Err(EncodeError::DimensionMismatch {
            what: "feature width",
            expected: params.feature_width(),
            got: features.ncols(),
        });
    }
    if features.nrows() != subtypes.len() {
        return Err(EncodeError::DimensionMismatch {
            what: "node count",
            expected: subtypes.len(),
            got: features.nrows(),
        });
    }
    let mut x = Array2::zeros((features.nrows(), params.dim()));
    for (i, sub) in subtypes.iter().enumerate() {
        if let Some(s) = sub {
            x.row_mut(i).assign(&params.embed_row(features.row(i), *s));
        }
    }
    Ok(x)
}

/// Initial node embeddings (`N × D`) for a valued graph.
pub fn init_node_embeddings<S: Scalar>(
    vg: &ValuedGraph,
    enc: &Encoding,
    params: &EmbedderParams<S>,
) -> Result<Array2<S>, EncodeError> {
    embed_features(&node_features(vg, enc), &node_subtypes(vg.graph), params)
}
