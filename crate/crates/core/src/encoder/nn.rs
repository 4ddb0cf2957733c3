//! Forward and backward passes of the building blocks, row-major with one
//! row per sequence position.

use std::fmt::Debug;

use ndarray::{Array1, Array2, ArrayView2, Axis, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};

/// Floating-point type the model can run in.
pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + FromPrimitive
    + Debug
    + Send
    + Sync
    + std::iter::Sum
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal fits")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub const LN_EPS: f64 = 1e-5;

/// `x W + b`.
pub fn linear<F: Real>(x: &ArrayView2<F>, w: &Array2<F>, b: &Array1<F>) -> Array2<F> {
    let mut y = x.dot(w);
    y += b;
    y
}

/// Accumulates `dW`, `db` and returns `dx` for `y = x W + b`.
pub fn linear_backward<F: Real>(
    x: &ArrayView2<F>,
    w: &Array2<F>,
    dy: &Array2<F>,
    dw: &mut Array2<F>,
    db: &mut Array1<F>,
) -> Array2<F> {
    ndarray::linalg::general_mat_mul(F::one(), &x.t(), dy, F::one(), dw);
    *db += &dy.sum_axis(Axis(0));
    dy.dot(&w.t())
}

pub struct LayerNormCache<F> {
    pub xhat: Array2<F>,
    pub rstd: Array1<F>,
}

pub fn layer_norm<F: Real>(x: &Array2<F>, gamma: &Array1<F>, beta: &Array1<F>) -> (Array2<F>, LayerNormCache<F>) {
    let d = F::from_usize(x.ncols()).expect("width fits");
    let eps = F::lit(LN_EPS);
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in xhat.rows_mut().into_iter().zip(rstd.iter_mut()) {
        let mean = row.sum() / d;
        row -= mean;
        let var = row.iter().map(|&v| v * v).sum::<F>() / d;
        *r = F::one() / (var + eps).sqrt();
        row *= *r;
    }
    let mut y = &xhat * gamma;
    y += beta;
    (y, LayerNormCache { xhat, rstd })
}

pub fn layer_norm_backward<F: Real>(
    dy: &Array2<F>,
    gamma: &Array1<F>,
    cache: &LayerNormCache<F>,
    dgamma: &mut Array1<F>,
    dbeta: &mut Array1<F>,
) -> Array2<F> {
    *dgamma += &(dy * &cache.xhat).sum_axis(Axis(0));
    *dbeta += &dy.sum_axis(Axis(0));
    let d = F::from_usize(dy.ncols()).expect("width fits");
    let mut dx = dy * gamma;
    for ((mut row, xhat), &r) in dx.rows_mut().into_iter().zip(cache.xhat.rows()).zip(&cache.rstd) {
        let mean_dxhat = row.sum() / d;
        let mean_dxhat_xhat = row.iter().zip(xhat).map(|(&a, &b)| a * b).sum::<F>() / d;
        for (v, &xh) in row.iter_mut().zip(xhat) {
            *v = r * (*v - mean_dxhat - xh * mean_dxhat_xhat);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// Tanh approximation of GELU.
pub fn gelu<F: Real>(x: &Array2<F>) -> Array2<F> {
    let (c, a, half) = (F::lit(GELU_C), F::lit(GELU_A), F::lit(0.5));
    x.mapv(|v| half * v * (F::one() + (c * (v + a * v * v * v)).tanh()))
}

pub fn gelu_backward<F: Real>(x: &Array2<F>, dy: &Array2<F>) -> Array2<F> {
    let (c, a, half, three) = (F::lit(GELU_C), F::lit(GELU_A), F::lit(0.5), F::lit(3.0));
    let mut dx = dy.clone();
    ndarray::Zip::from(&mut dx).and(x).for_each(|g, &v| {
        let t = (c * (v + a * v * v * v)).tanh();
        let dt = (F::one() - t * t) * c * (F::one() + three * a * v * v);
        *g *= half * (F::one() + t) + half * v * dt;
    });
    dx
}

pub fn softmax_rows<F: Real>(x: &mut Array2<F>) {
    for mut row in x.rows_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}
