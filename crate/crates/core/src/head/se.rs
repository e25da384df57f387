use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{
    adaptive_avg_pool_1x1, adaptive_avg_pool_1x1_backward, relu, relu_backward, scoped, scoped_mut, sigmoid,
    sigmoid_backward, Linear, Parameters, Scalar, Tensor,
};

/// Squeeze-and-excitation: `x * sigmoid(fc2(relu(fc1(avgpool(x)))))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeBlock<T = f32> {
    pub fc1: Linear<T>,
    pub fc2: Linear<T>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct SeCache<T> {
    x: Tensor<T>,
    pooled: Tensor<T>,
    z1: Tensor<T>,
    a1: Tensor<T>,
    w: Tensor<T>,
}

impl<T: Scalar> SeBlock<T> {
    pub fn new(fc1: Linear<T>, fc2: Linear<T>) -> Result<Self> {
        let (c, r) = (fc1.in_features(), fc1.out_features());
        if fc2.in_features() != r || fc2.out_features() != c {
            return Err(Error::shape(
                "se fc2",
                [c, r],
                [fc2.out_features(), fc2.in_features()],
            ));
        }
        Ok(SeBlock { fc1, fc2 })
    }

    /// Hidden width is `max(1, channels / reduction)`.
    pub fn init<R: Rng + ?Sized>(channels: usize, reduction: usize, rng: &mut R) -> Self {
        let hidden = (channels / reduction.max(1)).max(1);
        SeBlock {
            fc1: Linear::init(channels, hidden, rng),
            fc2: Linear::init(hidden, channels, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.fc1.in_features()
    }

    pub fn hidden(&self) -> usize {
        self.fc1.out_features()
    }

    fn excite(&self, x: &Tensor<T>) -> Result<SeCache<T>> {
        let [b, c, _, _] = x.dims4("se input")?;
        if c != self.channels() {
            return Err(Error::shape("se channels", self.channels(), c));
        }
        let pooled = adaptive_avg_pool_1x1(x)?.reshape(&[b, c])?;
        let z1 = self.fc1.forward(&pooled)?;
        let a1 = relu(&z1);
        let w = sigmoid(&self.fc2.forward(&a1)?);
        Ok(SeCache {
            x: x.clone(),
            pooled,
            z1,
            a1,
            w,
        })
    }

    /// Channel weights `[B, C]`, each in `(0, 1)`.
    pub fn channel_weights(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.excite(x)?.w)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Tensor<T>) -> Result<(Tensor<T>, SeCache<T>)> {
        let cache = self.excite(x)?;
        Ok((gate(&cache.x, &cache.w), cache))
    }

    /// Accumulates fc1/fc2 gradients and returns `dL/dx`.
    pub fn backward(&mut self, cache: &SeCache<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = &cache.x;
        if grad_out.shape() != x.shape() {
            return Err(Error::shape("se grad_out", x.shape(), grad_out.shape()));
        }
        let [b, c, h, w] = x.dims4("se input")?;
        let plane = h * w;
        let mut dx = gate(grad_out, &cache.w);
        let mut dw = Tensor::zeros(&[b, c]);
        for (i, g) in dw.data_mut().iter_mut().enumerate() {
            let xs = &x.data()[i * plane..(i + 1) * plane];
            let gs = &grad_out.data()[i * plane..(i + 1) * plane];
            *g = xs.iter().zip(gs).map(|(&a, &d)| a * d).sum();
        }
        let dz2 = sigmoid_backward(&cache.w, &dw)?;
        let da1 = self.fc2.backward(&cache.a1, &dz2)?;
        let dz1 = relu_backward(&cache.z1, &da1)?;
        let dpooled = self.fc1.backward(&cache.pooled, &dz1)?;
        let dpool_x = adaptive_avg_pool_1x1_backward([b, c, h, w], &dpooled)?;
        for (d, p) in dx.data_mut().iter_mut().zip(dpool_x.data()) {
            *d += *p;
        }
        Ok(dx)
    }
}

/// Scales every `H x W` plane of `x` by the matching entry of `w`.
fn gate<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>) -> Tensor<T> {
    let plane = x.shape()[2] * x.shape()[3];
    let mut out = x.clone();
    out.clear_grad();
    for (chunk, &s) in out.data_mut().chunks_mut(plane).zip(w.data()) {
        for v in chunk {
            *v *= s;
        }
    }
    out
}

/// Free-function form of [`SeBlock::forward`].
pub fn se_forward<T: Scalar>(x: &Tensor<T>, params: &SeBlock<T>) -> Result<Tensor<T>> {
    params.forward(x)
}

impl<T: Scalar> Parameters<T> for SeBlock<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        self.fc1.visit_params(&mut scoped("fc1", f));
        self.fc2.visit_params(&mut scoped("fc2", f));
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.fc1.visit_params_mut(&mut scoped_mut("fc1", f));
        self.fc2.visit_params_mut(&mut scoped_mut("fc2", f));
    }
}
