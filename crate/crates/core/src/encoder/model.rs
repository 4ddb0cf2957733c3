//! A pre-LayerNorm transformer encoder with a tied masked-LM head and
//! hand-derived gradients.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::nn::{self, LayerNormCache, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub vocab: usize,
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff: usize,
    pub max_positions: usize,
}

impl ModelShape {
    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F> {
    pub ln1_g: Array1<F>,
    pub ln1_b: Array1<F>,
    pub wq: Array2<F>,
    pub bq: Array1<F>,
    pub wk: Array2<F>,
    pub bk: Array1<F>,
    pub wv: Array2<F>,
    pub bv: Array1<F>,
    pub wo: Array2<F>,
    pub bo: Array1<F>,
    pub ln2_g: Array1<F>,
    pub ln2_b: Array1<F>,
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
}

/// Model weights. The same type holds gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    pub shape: ModelShape,
    pub tok: Array2<F>,
    pub pos: Array2<F>,
    pub layers: Vec<LayerParams<F>>,
    pub lnf_g: Array1<F>,
    pub lnf_b: Array1<F>,
    pub out_b: Array1<F>,
}

macro_rules! layer_fields {
    ($l:expr, $f:ident) => {{
        let LayerParams {
            ln1_g,
            ln1_b,
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
            ln2_g,
            ln2_b,
            w1,
            b1,
            w2,
            b2,
        } = $l;
        vec![
            ln1_g.$f(),
            ln1_b.$f(),
            wq.$f(),
            bq.$f(),
            wk.$f(),
            bk.$f(),
            wv.$f(),
            bv.$f(),
            wo.$f(),
            bo.$f(),
            ln2_g.$f(),
            ln2_b.$f(),
            w1.$f(),
            b1.$f(),
            w2.$f(),
            b2.$f(),
        ]
    }};
}

impl<F: Real> Params<F> {
    pub fn zeros(shape: ModelShape) -> Self {
        let (d, ff) = (shape.dim, shape.ff);
        let layer = LayerParams {
            ln1_g: Array1::zeros(d),
            ln1_b: Array1::zeros(d),
            wq: Array2::zeros((d, d)),
            bq: Array1::zeros(d),
            wk: Array2::zeros((d, d)),
            bk: Array1::zeros(d),
            wv: Array2::zeros((d, d)),
            bv: Array1::zeros(d),
            wo: Array2::zeros((d, d)),
            bo: Array1::zeros(d),
            ln2_g: Array1::zeros(d),
            ln2_b: Array1::zeros(d),
            w1: Array2::zeros((d, ff)),
            b1: Array1::zeros(ff),
            w2: Array2::zeros((ff, d)),
            b2: Array1::zeros(d),
        };
        Params {
            shape,
            tok: Array2::zeros((shape.vocab, d)),
            pos: Array2::zeros((shape.max_positions, d)),
            layers: vec![layer; shape.layers],
            lnf_g: Array1::zeros(d),
            lnf_b: Array1::zeros(d),
            out_b: Array1::zeros(shape.vocab),
        }
    }

    /// Weight matrices drawn from N(0, 0.02²), LayerNorm gains one, biases zero.
    pub fn init<R: Rng>(shape: ModelShape, rng: &mut R) -> Self {
        let mut p = Self::zeros(shape);
        let normal = Normal::new(0.0, 0.02).expect("valid normal");
        let mut fill = |a: &mut Array2<F>| a.mapv_inplace(|_| F::lit(normal.sample(rng)));
        fill(&mut p.tok);
        fill(&mut p.pos);
        for l in &mut p.layers {
            for w in [&mut l.wq, &mut l.wk, &mut l.wv, &mut l.wo, &mut l.w1, &mut l.w2] {
                fill(w);
            }
            l.ln1_g.fill(F::one());
            l.ln2_g.fill(F::one());
        }
        p.lnf_g.fill(F::one());
        p
    }

    /// Every tensor as a flat slice, in a fixed order.
    pub fn tensors(&self) -> Vec<&[F]> {
        let mut out = vec![
            self.tok.as_slice().expect("standard layout"),
            self.pos.as_slice().expect("standard layout"),
        ];
        for l in &self.layers {
            out.extend(layer_fields!(l, as_slice).into_iter().map(|s| s.expect("standard layout")));
        }
        out.push(self.lnf_g.as_slice().expect("standard layout"));
        out.push(self.lnf_b.as_slice().expect("standard layout"));
        out.push(self.out_b.as_slice().expect("standard layout"));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let Params {
            tok,
            pos,
            layers,
            lnf_g,
            lnf_b,
            out_b,
            ..
        } = self;
        let mut out = vec![
            tok.as_slice_mut().expect("standard layout"),
            pos.as_slice_mut().expect("standard layout"),
        ];
        for l in layers.iter_mut() {
            out.extend(layer_fields!(l, as_slice_mut).into_iter().map(|s| s.expect("standard layout")));
        }
        out.push(lnf_g.as_slice_mut().expect("standard layout"));
        out.push(lnf_b.as_slice_mut().expect("standard layout"));
        out.push(out_b.as_slice_mut().expect("standard layout"));
        out
    }

    /// Which tensors are weight matrices (eligible for weight decay).
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut out = vec![true, true];
        for _ in &self.layers {
            out.extend([
                false, false, true, false, true, false, true, false, true, false, false, false, true, false, true, false,
            ]);
        }
        out.extend([false, false, false]);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(F::zero());
        }
    }

    pub fn cast<G: Real>(&self) -> Params<G> {
        let mut out = Params::<G>::zeros(self.shape);
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = G::from(*s).expect("finite parameter");
            }
        }
        out
    }

    /// Flattened copy, one vector per tensor.
    pub fn to_vecs(&self) -> Vec<Vec<F>> {
        self.tensors().into_iter().map(<[F]>::to_vec).collect()
    }

    pub fn from_vecs(shape: ModelShape, vecs: &[Vec<F>]) -> Option<Self> {
        let mut p = Self::zeros(shape);
        let mut dst = p.tensors_mut();
        if dst.len() != vecs.len() || dst.iter().zip(vecs).any(|(d, v)| d.len() != v.len()) {
            return None;
        }
        for (d, v) in dst.iter_mut().zip(vecs) {
            d.copy_from_slice(v);
        }
        drop(dst);
        Some(p)
    }
}

struct LayerCache<F> {
    ln1: LayerNormCache<F>,
    a: Array2<F>,
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    probs: Vec<Array2<F>>,
    o: Array2<F>,
    ln2: LayerNormCache<F>,
    b: Array2<F>,
    hpre: Array2<F>,
    hact: Array2<F>,
}

pub struct Forward<F> {
    layers: Vec<LayerCache<F>>,
    lnf: LayerNormCache<F>,
    /// Residual stream: the embedding sum followed by each block's output.
    pub residual: Vec<Array2<F>>,
    /// Final LayerNorm output.
    pub hidden: Array2<F>,
}

/// One training sequence: input ids plus `(position, original id)` targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedSequence {
    pub input: Vec<u32>,
    pub targets: Vec<(usize, u32)>,
}

impl<F: Real> Params<F> {
    pub fn forward(&self, ids: &[u32]) -> Forward<F> {
        let shape = self.shape;
        let n = ids.len();
        assert!(n <= shape.max_positions, "sequence of {n} exceeds {} positions", shape.max_positions);
        let dh = shape.head_dim();
        let scale = F::one() / F::from_usize(dh).expect("fits").sqrt();

        let mut x = Array2::<F>::zeros((n, shape.dim));
        for (i, &id) in ids.iter().enumerate() {
            let mut row = x.row_mut(i);
            row.assign(&self.tok.row(id as usize));
            row += &self.pos.row(i);
        }
        let mut residual = vec![x.clone()];
        let mut caches = Vec::with_capacity(shape.layers);

        for l in &self.layers {
            let (a, ln1) = nn::layer_norm(&x, &l.ln1_g, &l.ln1_b);
            let q = nn::linear(&a.view(), &l.wq, &l.bq);
            let k = nn::linear(&a.view(), &l.wk, &l.bk);
            let v = nn::linear(&a.view(), &l.wv, &l.bv);
            let mut o = Array2::<F>::zeros((n, shape.dim));
            let mut probs = Vec::with_capacity(shape.heads);
            for h in 0..shape.heads {
                let cols = s![.., h * dh..(h + 1) * dh];
                let mut scores = q.slice(cols).dot(&k.slice(cols).t());
                scores *= scale;
                nn::softmax_rows(&mut scores);
                o.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
                probs.push(scores);
            }
            x += &nn::linear(&o.view(), &l.wo, &l.bo);
            let (b, ln2) = nn::layer_norm(&x, &l.ln2_g, &l.ln2_b);
            let hpre = nn::linear(&b.view(), &l.w1, &l.b1);
            let hact = nn::gelu(&hpre);
            x += &nn::linear(&hact.view(), &l.w2, &l.b2);
            residual.push(x.clone());
            caches.push(LayerCache {
                ln1,
                a,
                q,
                k,
                v,
                probs,
                o,
                ln2,
                b,
                hpre,
                hact,
            });
        }
        let (hidden, lnf) = nn::layer_norm(&x, &self.lnf_g, &self.lnf_b);
        Forward {
            layers: caches,
            lnf,
            residual,
            hidden,
        }
    }

    /// Summed cross-entropy over the targets of `seq`. Gradients of
    /// `scale * loss` are added into `grads`.
    pub fn loss_and_grad(&self, seq: &MaskedSequence, scale: F, grads: &mut Params<F>) -> F {
        let shape = self.shape;
        let n = seq.input.len();
        let fwd = self.forward(&seq.input);
        if seq.targets.is_empty() {
            return F::zero();
        }

        let k = seq.targets.len();
        let mut hm = Array2::<F>::zeros((k, shape.dim));
        for (i, &(pos, _)) in seq.targets.iter().enumerate() {
            hm.row_mut(i).assign(&fwd.hidden.row(pos));
        }
        let mut probs = hm.dot(&self.tok.t());
        probs += &self.out_b;
        nn::softmax_rows(&mut probs);
        let mut loss = F::zero();
        for (i, &(_, label)) in seq.targets.iter().enumerate() {
            let p = &mut probs[[i, label as usize]];
            loss -= p.max(F::min_positive_value()).ln();
            *p -= F::one();
        }
        let dlogits = probs * scale;
        grads.out_b += &dlogits.sum_axis(Axis(0));
        ndarray::linalg::general_mat_mul(F::one(), &dlogits.t(), &hm, F::one(), &mut grads.tok);
        let dhm = dlogits.dot(&self.tok);
        let mut dhidden = Array2::<F>::zeros((n, shape.dim));
        for (i, &(pos, _)) in seq.targets.iter().enumerate() {
            let mut row = dhidden.row_mut(pos);
            row += &dhm.row(i);
        }

        let mut dx = nn::layer_norm_backward(&dhidden, &self.lnf_g, &fwd.lnf, &mut grads.lnf_g, &mut grads.lnf_b);
        let dh = shape.head_dim();
        let attn_scale = F::one() / F::from_usize(dh).expect("fits").sqrt();

        for ((l, c), g) in self.layers.iter().zip(&fwd.layers).zip(grads.layers.iter_mut()).rev() {
            // feed-forward branch
            let dhact = nn::linear_backward(&c.hact.view(), &l.w2, &dx, &mut g.w2, &mut g.b2);
            let dhpre = nn::gelu_backward(&c.hpre, &dhact);
            let db = nn::linear_backward(&c.b.view(), &l.w1, &dhpre, &mut g.w1, &mut g.b1);
            dx += &nn::layer_norm_backward(&db, &l.ln2_g, &c.ln2, &mut g.ln2_g, &mut g.ln2_b);

            // attention branch
            let d_o = nn::linear_backward(&c.o.view(), &l.wo, &dx, &mut g.wo, &mut g.bo);
            let mut dq = Array2::<F>::zeros((n, shape.dim));
            let mut dk = Array2::<F>::zeros((n, shape.dim));
            let mut dv = Array2::<F>::zeros((n, shape.dim));
            for (h, p) in c.probs.iter().enumerate() {
                let cols = s![.., h * dh..(h + 1) * dh];
                let d_oh = d_o.slice(cols);
                let dp = d_oh.dot(&c.v.slice(cols).t());
                dv.slice_mut(cols).assign(&p.t().dot(&d_oh));
                let mut ds = &dp * p;
                let row_dot = ds.sum_axis(Axis(1));
                for ((mut ds_row, p_row), &rd) in ds.rows_mut().into_iter().zip(p.rows()).zip(&row_dot) {
                    ds_row.scaled_add(-rd, &p_row);
                }
                ds *= attn_scale;
                dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
                dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
            }
            let mut da = nn::linear_backward(&c.a.view(), &l.wq, &dq, &mut g.wq, &mut g.bq);
            da += &nn::linear_backward(&c.a.view(), &l.wk, &dk, &mut g.wk, &mut g.bk);
            da += &nn::linear_backward(&c.a.view(), &l.wv, &dv, &mut g.wv, &mut g.bv);
            dx += &nn::layer_norm_backward(&da, &l.ln1_g, &c.ln1, &mut g.ln1_g, &mut g.ln1_b);
        }

        for (i, &id) in seq.input.iter().enumerate() {
            let mut t = grads.tok.row_mut(id as usize);
            t += &dx.row(i);
            let mut p = grads.pos.row_mut(i);
            p += &dx.row(i);
        }
        loss
    }

    /// Summed loss without gradients.
    pub fn loss(&self, seq: &MaskedSequence) -> F {
        let fwd = self.forward(&seq.input);
        let mut loss = F::zero();
        for &(pos, label) in &seq.targets {
            let mut logits = self.tok.dot(&fwd.hidden.row(pos));
            logits += &self.out_b;
            let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
            let lse = logits.iter().map(|&z| (z - max).exp()).sum::<F>().ln() + max;
            loss += lse - logits[label as usize];
        }
        loss
    }
}
