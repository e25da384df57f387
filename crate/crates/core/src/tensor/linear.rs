use rand::Rng;

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Fully connected layer: `y = x W^T + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T = f32> {
    /// `[out, in]`
    pub weight: Tensor<T>,
    /// `[out]`
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let [out, _] = weight.dims2("linear weight")?;
        if bias.shape() != [out] {
            return Err(Error::shape("linear bias", [out], bias.shape()));
        }
        Ok(Linear { weight, bias })
    }

    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = (1.0 / inputs as f64).sqrt();
        Linear {
            weight: Tensor::uniform(&[outputs, inputs], bound, rng),
            bias: Tensor::uniform(&[outputs], bound, rng),
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<usize> {
        let [b, i] = x.dims2("linear input")?;
        if i != self.in_features() {
            return Err(Error::shape("linear input features", self.in_features(), i));
        }
        Ok(b)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let b = self.check_input(x)?;
        let (i, o) = (self.in_features(), self.out_features());
        let mut out = Tensor::zeros(&[b, o]);
        for row in out.data_mut().chunks_mut(o) {
            row.copy_from_slice(self.bias.data());
        }
        T::gemm(b, i, o, x.data(), (i, 1), self.weight.data(), (1, i), T::one(), out.data_mut());
        Ok(out)
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let b = self.check_input(x)?;
        let (i, o) = (self.in_features(), self.out_features());
        if grad_out.shape() != [b, o] {
            return Err(Error::shape("linear grad_out", [b, o], grad_out.shape()));
        }
        let gb = self.bias.grad_mut();
        for row in grad_out.data().chunks(o) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += *d;
            }
        }
        // dW[o, i] += dY^T[o, b] * X[b, i]
        let gw = self.weight.grad_mut();
        T::gemm(o, b, i, grad_out.data(), (1, o), x.data(), (i, 1), T::one(), gw);
        let mut dx = Tensor::zeros(&[b, i]);
        T::gemm(b, o, i, grad_out.data(), (o, 1), self.weight.data(), (i, 1), T::zero(), dx.data_mut());
        Ok(dx)
    }
}

pub fn linear<T: Scalar>(input: &Tensor<T>, params: &Linear<T>) -> Result<Tensor<T>> {
    params.forward(input)
}
