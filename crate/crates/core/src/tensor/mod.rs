//! Dense tensors and the small layer set the detection head is built from.
//!
//! There is no autodiff graph. Every layer exposes a forward pass and a
//! hand-written backward pass; composites chain them explicitly. Inference
//! runs in `f32`, gradient checking in `f64`.

mod activation;
mod conv;
mod gradcheck;
mod linear;
mod norm;
mod params;
mod pool;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward};
pub(crate) use activation::sigmoid_scalar;
pub use conv::{conv2d, Conv2d};
pub use gradcheck::{grad_check, GradCheckReport};
pub use linear::{linear, Linear};
pub use norm::{batchnorm2d, BatchNorm2d, BnCache};
pub use params::{LayerKind, Parameters};
pub(crate) use params::{scoped, scoped_mut};
pub use pool::{adaptive_avg_pool_1x1, adaptive_avg_pool_1x1_backward};

/// Element type tag used by the `DNM1` container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

/// Floating-point element type. `f32` routes matrix products through a
/// blocked SIMD kernel; `f64` uses plain ordered loops so results are
/// reproducible against naive references.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    const DTYPE: DType;

    /// `c = a * b + beta * c` for row/column-strided operands.
    ///
    /// `a` is `m x k`, `b` is `k x n`, `c` is `m x n` (row-major, contiguous).
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: (usize, usize),
        b: &[Self],
        b_strides: (usize, usize),
        beta: Self,
        c: &mut [Self],
    );

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite conversion")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const DTYPE: DType = DType::F32;

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f32],
        (rsa, csa): (usize, usize),
        b: &[f32],
        (rsb, csb): (usize, usize),
        beta: f32,
        c: &mut [f32],
    ) {
        if m == 0 || n == 0 {
            return;
        }
        assert!(c.len() >= m * n);
        if k > 0 {
            assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
            assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
        }
        // SAFETY: operand extents were checked against the strides above.
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa as isize,
                csa as isize,
                b.as_ptr(),
                rsb as isize,
                csb as isize,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

impl Scalar for f64 {
    const DTYPE: DType = DType::F64;

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        (rsa, csa): (usize, usize),
        b: &[f64],
        (rsb, csb): (usize, usize),
        beta: f64,
        c: &mut [f64],
    ) {
        for i in 0..m {
            for j in 0..n {
                let mut acc = if beta == 0.0 { 0.0 } else { beta * c[i * n + j] };
                for p in 0..k {
                    acc += a[i * rsa + p * csa] * b[p * rsb + j * csb];
                }
                c[i * n + j] = acc;
            }
        }
    }
}

/// Row-major dense tensor with an optional gradient buffer of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
            grad: None,
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape("tensor", numel, data.len()));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    /// Samples i.i.d. normal entries with the given standard deviation.
    pub fn randn<R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| T::from_f64_lossy(rng.sample::<f64, _>(StandardNormal) * std))
            .collect();
        Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        }
    }

    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| T::from_f64_lossy(rng.gen_range(-bound..=bound)))
            .collect();
        Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Gradient buffer, allocated as zeros on first use.
    pub fn grad_mut(&mut self) -> &mut [T] {
        let n = self.data.len();
        self.grad.get_or_insert_with(|| vec![T::zero(); n])
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Returns `[d0, d1, d2, d3]` or a shape error naming `context`.
    pub fn dims4(&self, context: &'static str) -> Result<[usize; 4]> {
        match self.shape[..] {
            [a, b, c, d] => Ok([a, b, c, d]),
            _ => Err(Error::shape(context, "rank 4", &self.shape)),
        }
    }

    pub fn dims2(&self, context: &'static str) -> Result<[usize; 2]> {
        match self.shape[..] {
            [a, b] => Ok([a, b]),
            _ => Err(Error::shape(context, "rank 2", &self.shape)),
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != self.data.len() {
            return Err(Error::shape("reshape", numel, self.data.len()));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
            grad: None,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from_f64_lossy(v.as_f64()))
                .collect(),
            grad: None,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs().as_f64())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::<f32>::from_vec(&[2, 3], vec![1.0; 6]).unwrap();
        assert_eq!(t.numel(), 6);
        assert_eq!(t.dims2("t").unwrap(), [2, 3]);
        assert!(t.dims4("t").is_err());
    }

    #[test]
    fn grad_buffer_matches_shape() {
        let mut t = Tensor::<f64>::zeros(&[3, 4]);
        assert!(t.grad().is_none());
        t.grad_mut()[5] = 2.0;
        assert_eq!(t.grad().unwrap().len(), 12);
        t.zero_grad();
        assert!(t.grad().unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gemm_backends_agree() {
        let a: Vec<f64> = (0..6).map(|v| v as f64 * 0.5 - 1.0).collect();
        let b: Vec<f64> = (0..12).map(|v| (v as f64).sin()).collect();
        let mut c64 = vec![1.0; 8];
        f64::gemm(2, 3, 4, &a, (3, 1), &b, (4, 1), 1.0, &mut c64);
        let a32: Vec<f32> = a.iter().map(|&v| v as f32).collect();
        let b32: Vec<f32> = b.iter().map(|&v| v as f32).collect();
        let mut c32 = vec![1.0f32; 8];
        f32::gemm(2, 3, 4, &a32, (3, 1), &b32, (4, 1), 1.0, &mut c32);
        for (x, y) in c64.iter().zip(&c32) {
            assert!((x - *y as f64).abs() < 1e-5);
        }
        // transposed operand through strides
        let mut ct = vec![0.0; 8];
        let bt: Vec<f64> = (0..4)
            .flat_map(|j| (0..3).map(move |p| (p * 4 + j) as f64))
            .map(|i| (i).sin())
            .collect();
        f64::gemm(2, 3, 4, &a, (3, 1), &bt, (1, 3), 0.0, &mut ct);
        for (x, y) in c64.iter().zip(&ct) {
            assert!((x - 1.0 - y).abs() < 1e-12);
        }
    }
}
