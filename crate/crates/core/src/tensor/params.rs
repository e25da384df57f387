use super::{BatchNorm2d, Conv2d, Linear, Scalar, Tensor};
use crate::error::{Error, Result};

/// Layer kind tag; used as the name prefix convention in parameter files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d,
    Linear,
    BatchNorm2d,
}

/// Named access to trainable tensors (and non-trainable buffers).
///
/// Names are stable dotted paths; they double as `DNM1` entry names.
pub trait Parameters<T: Scalar> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor<T>));

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>));

    /// Running statistics and other state that is saved but not trained.
    fn visit_buffers(&self, _f: &mut dyn FnMut(&str, &Tensor<T>)) {}

    fn visit_buffers_mut(&mut self, _f: &mut dyn FnMut(&str, &mut Tensor<T>)) {}

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, t| n += t.numel());
        n
    }

    fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::new();
        self.visit_params(&mut |_, t| out.extend_from_slice(t.data()));
        out
    }

    fn set_flat_params(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::shape("flat params", self.param_count(), values.len()));
        }
        let mut offset = 0;
        self.visit_params_mut(&mut |_, t| {
            let n = t.numel();
            t.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        });
        Ok(())
    }

    /// Concatenated gradients; missing buffers read as zero.
    fn flat_grads(&self) -> Vec<T> {
        let mut out = Vec::new();
        self.visit_params(&mut |_, t| match t.grad() {
            Some(g) => out.extend_from_slice(g),
            None => out.extend(std::iter::repeat(T::zero()).take(t.numel())),
        });
        out
    }

    fn zero_grads(&mut self) {
        self.visit_params_mut(&mut |_, t| t.zero_grad());
    }

    /// Plain SGD: `p -= lr * grad`.
    fn sgd_step(&mut self, lr: T) {
        self.visit_params_mut(&mut |_, t| {
            let Some(g) = t.grad().map(|g| g.to_vec()) else {
                return;
            };
            for (p, g) in t.data_mut().iter_mut().zip(g) {
                *p -= lr * g;
            }
        });
    }
}

pub(crate) fn scoped<'a, T: Scalar>(
    prefix: &'a str,
    f: &'a mut dyn FnMut(&str, &Tensor<T>),
) -> impl FnMut(&str, &Tensor<T>) + 'a {
    move |name, t| f(&format!("{prefix}.{name}"), t)
}

pub(crate) fn scoped_mut<'a, T: Scalar>(
    prefix: &'a str,
    f: &'a mut dyn FnMut(&str, &mut Tensor<T>),
) -> impl FnMut(&str, &mut Tensor<T>) + 'a {
    move |name, t| f(&format!("{prefix}.{name}"), t)
}

impl<T: Scalar> Parameters<T> for Conv2d<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        f("weight", &self.weight);
        if let Some(b) = &self.bias {
            f("bias", b);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f("weight", &mut self.weight);
        if let Some(b) = &mut self.bias {
            f("bias", b);
        }
    }
}

impl<T: Scalar> Parameters<T> for Linear<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}

impl<T: Scalar> Parameters<T> for BatchNorm2d<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        f("gamma", &self.gamma);
        f("beta", &self.beta);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f("gamma", &mut self.gamma);
        f("beta", &mut self.beta);
    }

    fn visit_buffers(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        f("running_mean", &self.running_mean);
        f("running_var", &self.running_var);
    }

    fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f("running_mean", &mut self.running_mean);
        f("running_var", &mut self.running_var);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip_and_sgd() {
        let mut lin = Linear::<f64>::new(Tensor::full(&[2, 3], 1.0), Tensor::zeros(&[2])).unwrap();
        assert_eq!(lin.param_count(), 8);
        let vals: Vec<f64> = (0..8).map(|v| v as f64).collect();
        lin.set_flat_params(&vals).unwrap();
        assert_eq!(lin.flat_params(), vals);
        lin.weight.grad_mut().fill(1.0);
        lin.sgd_step(0.5);
        assert_eq!(lin.weight.data()[0], -0.5);
        // bias grad never allocated: untouched
        assert_eq!(lin.bias.data(), &[6.0, 7.0]);
        lin.sgd_step(0.0);
        assert_eq!(lin.weight.data()[1], 0.5);
    }
}
