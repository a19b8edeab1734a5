use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::Rng;

use crate::encode::EmbedderParams;
use crate::graph::EdgeType;
use crate::Scalar;

use super::ADDRESS_BITS;

/// GRU weights; `w*` act on the aggregated message, `u*` on the state.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<S> {
    pub wz: Array2<S>,
    pub uz: Array2<S>,
    pub bz: Array1<S>,
    pub wr: Array2<S>,
    pub ur: Array2<S>,
    pub br: Array1<S>,
    pub wh: Array2<S>,
    pub uh: Array2<S>,
    pub bh: Array1<S>,
}

/// Every learned tensor of the model. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct GgnnParams<S> {
    /// Per edge type `D × D`.
    pub msg_w: Vec<Array2<S>>,
    pub msg_b: Vec<Array1<S>>,
    pub gru: GruParams<S>,
    pub branch_w: Array1<S>,
    /// Length-1 bias.
    pub branch_b: Array1<S>,
    /// `64 × D`, row `i` scores address bit `63 - i`.
    pub prefetch_w: Array2<S>,
    pub prefetch_b: Array1<S>,
    pub embedder: EmbedderParams<S>,
}

impl<S: Scalar> GgnnParams<S> {
    pub fn zeros(dim: usize, feature_width: usize) -> Self {
        let m = || Array2::zeros((dim, dim));
        let v = || Array1::zeros(dim);
        Self {
            msg_w: (0..EdgeType::COUNT).map(|_| m()).collect(),
            msg_b: (0..EdgeType::COUNT).map(|_| v()).collect(),
            gru: GruParams { wz: m(), uz: m(), bz: v(), wr: m(), ur: m(), br: v(), wh: m(), uh: m(), bh: v() },
            branch_w: v(),
            branch_b: Array1::zeros(1),
            prefetch_w: Array2::zeros((ADDRESS_BITS, dim)),
            prefetch_b: Array1::zeros(ADDRESS_BITS),
            embedder: EmbedderParams::zeros(dim, feature_width),
        }
    }

    /// Matrices uniform in `(-1/sqrt(D), 1/sqrt(D))`, biases zero.
    pub fn init(dim: usize, feature_width: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(dim, feature_width);
        let bound = 1.0 / (dim as f64).sqrt();
        for (name, mut t) in p.tensors_mut() {
            let bias = name.ends_with(".b") || name.starts_with("gru.b");
            if !bias && !name.starts_with("embedder") {
                t.mapv_inplace(|_| S::of(rng.gen_range(-bound..bound)));
            }
        }
        p.embedder = EmbedderParams::random(dim, feature_width, rng);
        p
    }

    pub fn dim(&self) -> usize {
        self.gru.bz.len()
    }

    pub fn feature_width(&self) -> usize {
        self.embedder.feature_width()
    }

    /// Named views of every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, S>)> {
        let mut out = Vec::new();
        for (k, (w, b)) in self.msg_w.iter().zip(&self.msg_b).enumerate() {
            out.push((format!("msg.{}.w", EdgeType::ALL[k].name()), w.view().into_dyn()));
            out.push((format!("msg.{}.b", EdgeType::ALL[k].name()), b.view().into_dyn()));
        }
        let g = &self.gru;
        for (name, t) in [("gru.wz", &g.wz), ("gru.uz", &g.uz), ("gru.wr", &g.wr), ("gru.ur", &g.ur), ("gru.wh", &g.wh), ("gru.uh", &g.uh)] {
            out.push((name.to_string(), t.view().into_dyn()));
        }
        for (name, t) in [("gru.bz", &g.bz), ("gru.br", &g.br), ("gru.bh", &g.bh)] {
            out.push((name.to_string(), t.view().into_dyn()));
        }
        out.push(("head.branch.w".into(), self.branch_w.view().into_dyn()));
        out.push(("head.branch.b".into(), self.branch_b.view().into_dyn()));
        out.push(("head.prefetch.w".into(), self.prefetch_w.view().into_dyn()));
        out.push(("head.prefetch.b".into(), self.prefetch_b.view().into_dyn()));
        out.push(("embedder.projection".into(), self.embedder.projection.view().into_dyn()));
        out.push(("embedder.subtype".into(), self.embedder.subtype.view().into_dyn()));
        out
    }

    /// Mutable counterpart of [`tensors`](Self::tensors), same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, S>)> {
        let mut out = Vec::new();
        for (k, (w, b)) in self.msg_w.iter_mut().zip(self.msg_b.iter_mut()).enumerate() {
            out.push((format!("msg.{}.w", EdgeType::ALL[k].name()), w.view_mut().into_dyn()));
            out.push((format!("msg.{}.b", EdgeType::ALL[k].name()), b.view_mut().into_dyn()));
        }
        let g = &mut self.gru;
        for (name, t) in [
            ("gru.wz", &mut g.wz),
            ("gru.uz", &mut g.uz),
            ("gru.wr", &mut g.wr),
            ("gru.ur", &mut g.ur),
            ("gru.wh", &mut g.wh),
            ("gru.uh", &mut g.uh),
        ] {
            out.push((name.to_string(), t.view_mut().into_dyn()));
        }
        for (name, t) in [("gru.bz", &mut g.bz), ("gru.br", &mut g.br), ("gru.bh", &mut g.bh)] {
            out.push((name.to_string(), t.view_mut().into_dyn()));
        }
        out.push(("head.branch.w".into(), self.branch_w.view_mut().into_dyn()));
        out.push(("head.branch.b".into(), self.branch_b.view_mut().into_dyn()));
        out.push(("head.prefetch.w".into(), self.prefetch_w.view_mut().into_dyn()));
        out.push(("head.prefetch.b".into(), self.prefetch_b.view_mut().into_dyn()));
        out.push(("embedder.projection".into(), self.embedder.projection.view_mut().into_dyn()));
        out.push(("embedder.subtype".into(), self.embedder.subtype.view_mut().into_dyn()));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Same tensors converted to another scalar type.
    pub fn cast<T: Scalar>(&self) -> GgnnParams<T> {
        let mut out = GgnnParams::<T>::zeros(self.dim(), self.feature_width());
        for ((_, src), (_, mut dst)) in self.tensors().into_iter().zip(out.tensors_mut()) {
            dst.zip_mut_with(&src, |d, &s| *d = T::of(s.as_f64()));
        }
        out
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, scale: S) {
        for ((_, mut dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.zip_mut_with(&src, |d, &s| *d += scale * s);
        }
    }

    pub fn squared_norm(&self) -> S {
        self.tensors().iter().map(|(_, t)| t.iter().map(|&x| x * x).sum::<S>()).sum()
    }
}
