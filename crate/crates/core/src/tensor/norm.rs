use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Per-channel batch normalization over `[B, C, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d<T = f32> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub eps: f64,
    pub momentum: f64,
}

/// Saved activations from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    shape: [usize; 4],
    xhat: Vec<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> BatchNorm2d<T> {
    /// Identity-initialized layer: scale 1, shift 0, running mean 0, var 1.
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Tensor::full(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.numel()
    }

    fn check(&self, x: &Tensor<T>) -> Result<[usize; 4]> {
        let dims = x.dims4("batchnorm input")?;
        if dims[1] != self.channels() {
            return Err(Error::shape("batchnorm channels", self.channels(), dims[1]));
        }
        for (name, t) in [
            ("beta", &self.beta),
            ("running_mean", &self.running_mean),
            ("running_var", &self.running_var),
        ] {
            if t.numel() != self.channels() {
                return Err(Error::shape("batchnorm params", (name, self.channels()), t.numel()));
            }
        }
        Ok(dims)
    }

    /// Eval mode: normalizes with the running statistics.
    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let [b, c, h, w] = self.check(x)?;
        let plane = h * w;
        let eps = T::from_f64_lossy(self.eps);
        let mut out = x.clone();
        for bi in 0..b {
            for ci in 0..c {
                let scale = self.gamma.data()[ci] / (self.running_var.data()[ci] + eps).sqrt();
                let shift = self.beta.data()[ci] - self.running_mean.data()[ci] * scale;
                let start = (bi * c + ci) * plane;
                for v in &mut out.data_mut()[start..start + plane] {
                    *v = *v * scale + shift;
                }
            }
        }
        Ok(out)
    }

    /// Training mode: batch statistics, running-stat update, cache for backward.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, BnCache<T>)> {
        let [b, c, h, w] = self.check(x)?;
        let plane = h * w;
        let n = b * plane;
        let nf = T::from_f64_lossy(n as f64);
        let eps = T::from_f64_lossy(self.eps);
        let momentum = T::from_f64_lossy(self.momentum);
        let mut out = Tensor::zeros(&[b, c, h, w]);
        let mut xhat = vec![T::zero(); x.numel()];
        let mut inv_std = vec![T::zero(); c];
        for ci in 0..c {
            let channel = || (0..b).flat_map(move |bi| {
                let start = (bi * c + ci) * plane;
                start..start + plane
            });
            let mean = channel().map(|i| x.data()[i]).sum::<T>() / nf;
            let var = channel()
                .map(|i| {
                    let d = x.data()[i] - mean;
                    d * d
                })
                .sum::<T>()
                / nf;
            let istd = (var + eps).sqrt().recip();
            inv_std[ci] = istd;
            let (g, be) = (self.gamma.data()[ci], self.beta.data()[ci]);
            for i in channel() {
                let xh = (x.data()[i] - mean) * istd;
                xhat[i] = xh;
                out.data_mut()[i] = xh * g + be;
            }
            let unbiased = if n > 1 {
                var * nf / T::from_f64_lossy((n - 1) as f64)
            } else {
                var
            };
            let rm = &mut self.running_mean.data_mut()[ci];
            *rm = (T::one() - momentum) * *rm + momentum * mean;
            let rv = &mut self.running_var.data_mut()[ci];
            *rv = (T::one() - momentum) * *rv + momentum * unbiased;
        }
        let cache = BnCache {
            shape: [b, c, h, w],
            xhat,
            inv_std,
        };
        Ok((out, cache))
    }

    /// Accumulates `gamma`/`beta` gradients and returns `dL/dx`.
    pub fn backward(&mut self, cache: &BnCache<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let [b, c, h, w] = cache.shape;
        if grad_out.shape() != cache.shape {
            return Err(Error::shape("batchnorm grad_out", cache.shape, grad_out.shape()));
        }
        let plane = h * w;
        let nf = T::from_f64_lossy((b * plane) as f64);
        let mut dx = Tensor::zeros(&cache.shape);
        let gamma = self.gamma.data().to_vec();
        let mut dgamma = vec![T::zero(); c];
        let mut dbeta = vec![T::zero(); c];
        for ci in 0..c {
            let idx = || (0..b).flat_map(move |bi| {
                let start = (bi * c + ci) * plane;
                start..start + plane
            });
            let mut sum_dy = T::zero();
            let mut sum_dy_xhat = T::zero();
            for i in idx() {
                let dy = grad_out.data()[i];
                sum_dy += dy;
                sum_dy_xhat += dy * cache.xhat[i];
            }
            dgamma[ci] = sum_dy_xhat;
            dbeta[ci] = sum_dy;
            let k = gamma[ci] * cache.inv_std[ci] / nf;
            for i in idx() {
                let dy = grad_out.data()[i];
                dx.data_mut()[i] = k * (nf * dy - sum_dy - cache.xhat[i] * sum_dy_xhat);
            }
        }
        for (g, d) in self.gamma.grad_mut().iter_mut().zip(dgamma) {
            *g += d;
        }
        for (g, d) in self.beta.grad_mut().iter_mut().zip(dbeta) {
            *g += d;
        }
        Ok(dx)
    }
}

/// Free-function form: `training` selects batch statistics.
pub fn batchnorm2d<T: Scalar>(
    input: &Tensor<T>,
    params: &mut BatchNorm2d<T>,
    training: bool,
) -> Result<Tensor<T>> {
    if training {
        params.forward_train(input).map(|(y, _)| y)
    } else {
        params.forward_eval(input)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn eval_identity_params() {
        let bn = BatchNorm2d::<f64>::new(3);
        let x = Tensor::randn(&[2, 3, 4, 4], 2.0, &mut ChaCha8Rng::seed_from_u64(3));
        let y = bn.forward_eval(&x).unwrap();
        // 1/sqrt(1 + 1e-5) scaling only
        assert!(y.max_abs_diff(&x) < 1e-4);
    }

    #[test]
    fn train_mode_normalizes_batch() {
        let mut bn = BatchNorm2d::<f64>::new(2);
        bn.gamma = Tensor::from_vec(&[2], vec![2.0, 0.5]).unwrap();
        bn.beta = Tensor::from_vec(&[2], vec![-1.0, 3.0]).unwrap();
        let x = Tensor::randn(&[4, 2, 3, 3], 5.0, &mut ChaCha8Rng::seed_from_u64(4)).map(|v| v + 7.0);
        let (y, _) = bn.forward_train(&x).unwrap();
        for ci in 0..2 {
            let vals: Vec<f64> = (0..4)
                .flat_map(|b| y.data()[(b * 2 + ci) * 9..(b * 2 + ci + 1) * 9].to_vec())
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
            assert!((mean - bn.beta.data()[ci]).abs() < 1e-5);
            // eps in the denominator shrinks the std slightly
            assert!((std - bn.gamma.data()[ci]).abs() < 1e-5 * bn.gamma.data()[ci] * 10.0);
        }
        // running stats moved toward the batch mean (~7)
        assert!(bn.running_mean.data().iter().all(|&m| m > 0.3 && m < 1.0));
    }

    #[test]
    fn channel_mismatch() {
        let bn = BatchNorm2d::<f32>::new(3);
        assert!(bn.forward_eval(&Tensor::zeros(&[1, 2, 2, 2])).is_err());
    }
}
