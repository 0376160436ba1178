//! Forward kernels on plain slices and tensors.
//!
//! The tape in [`super::tape`] calls into these for its forward values, so
//! there is one definition of every operation.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Dot product with four independent accumulators. The summation order is
/// fixed, so results are reproducible bit-for-bit.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..chunks {
        let i = c * 4;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..n {
        tail += a[i] * b[i];
    }
    (s0 + s1) + (s2 + s3) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `W x` for a row-major `rows x cols` matrix.
pub fn matvec_raw(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    (0..rows)
        .map(|r| dot(&w[r * cols..(r + 1) * cols], x))
        .collect()
}

/// `Wᵀ v` for a row-major `rows x cols` matrix.
pub fn mat_t_vec_raw(w: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(v.len(), rows);
    let mut out = vec![0.0; cols];
    for (r, &vr) in v.iter().enumerate() {
        axpy(vr, &w[r * cols..(r + 1) * cols], &mut out);
    }
    out
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("softmax logit is not finite: {bad}")));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

fn as_vector<'a>(op: &'static str, t: &'a Tensor) -> Result<&'a [f64]> {
    if t.rank() != 1 {
        return Err(Error::shape(op, t.shape(), &[]));
    }
    Ok(t.data())
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = t.data().iter().map(|&v| f(v)).collect();
    Tensor::new(t.shape().to_vec(), data).expect("shape preserved")
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("add", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("mul", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn sigmoid_t(t: &Tensor) -> Tensor {
    map(t, sigmoid)
}

pub fn tanh_t(t: &Tensor) -> Tensor {
    map(t, f64::tanh)
}

pub fn relu_t(t: &Tensor) -> Tensor {
    map(t, relu)
}

/// Matrix-vector product; `w` is `[rows, cols]`, `x` is `[cols]`.
pub fn matvec(w: &Tensor, x: &Tensor) -> Result<Tensor> {
    if w.rank() != 2 || x.rank() != 1 || w.cols() != x.len() {
        return Err(Error::shape("matvec", w.shape(), x.shape()));
    }
    Ok(Tensor::vector(matvec_raw(w.data(), w.rows(), w.cols(), x.data())))
}

/// Two-dimensional matrix product.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows() {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            axpy(a.data()[i * k + p], &b.data()[p * n..(p + 1) * n], row);
        }
    }
    Tensor::matrix(m, n, out)
}

/// `W x + b`.
pub fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let wx = matvec(w, x)?;
    if b.shape() != wx.shape() {
        return Err(Error::shape("affine bias", b.shape(), wx.shape()));
    }
    add(&wx, b)
}

pub fn concat(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::invalid("concat of nothing"));
    }
    let mut data = Vec::new();
    for p in parts {
        data.extend_from_slice(as_vector("concat", p)?);
    }
    Ok(Tensor::vector(data))
}

pub fn sum(t: &Tensor) -> Tensor {
    Tensor::scalar(t.data().iter().sum())
}

pub fn mean(t: &Tensor) -> Tensor {
    Tensor::scalar(t.data().iter().sum::<f64>() / t.len() as f64)
}

pub fn softmax_t(t: &Tensor) -> Result<Tensor> {
    Ok(Tensor::vector(softmax(as_vector("softmax", t)?)?))
}
