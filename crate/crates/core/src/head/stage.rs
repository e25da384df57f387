use rand::Rng;

use super::se::{SeBlock, SeCache};
use crate::error::Result;
use crate::tensor::{relu, relu_backward, scoped, scoped_mut, BatchNorm2d, BnCache, Conv2d, Parameters, Scalar, Tensor};

/// One scale of the head: conv3x3 -> BN -> ReLU -> SE -> conv1x1.
///
/// The 3x3 convolution has no bias; batch normalization directly after it
/// would cancel one.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadStage<T = f32> {
    pub reduce: Conv2d<T>,
    pub bn: BatchNorm2d<T>,
    pub se: SeBlock<T>,
    pub predict: Conv2d<T>,
}

#[derive(Debug, Clone)]
pub struct StageCache<T> {
    input: Tensor<T>,
    bn: BnCache<T>,
    normed: Tensor<T>,
    se: SeCache<T>,
    gated: Tensor<T>,
}

impl<T: Scalar> HeadStage<T> {
    pub fn init<R: Rng + ?Sized>(
        in_channels: usize,
        hidden: usize,
        reduction: usize,
        out_channels: usize,
        rng: &mut R,
    ) -> Self {
        HeadStage {
            reduce: Conv2d::init(in_channels, hidden, 3, false, rng),
            bn: BatchNorm2d::new(hidden),
            se: SeBlock::init(hidden, reduction, rng),
            predict: Conv2d::init(hidden, out_channels, 1, true, rng),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.reduce.in_channels()
    }

    /// Inference path; batch normalization uses running statistics.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.bn.forward_eval(&self.reduce.forward(x)?)?;
        let y = self.se.forward(&relu(&y))?;
        self.predict.forward(&y)
    }

    /// Training path; batch statistics are used and running stats updated.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, StageCache<T>)> {
        let reduced = self.reduce.forward(x)?;
        let (normed, bn) = self.bn.forward_train(&reduced)?;
        let (gated, se) = self.se.forward_cached(&relu(&normed))?;
        let out = self.predict.forward(&gated)?;
        let cache = StageCache {
            input: x.clone(),
            bn,
            normed,
            se,
            gated,
        };
        Ok((out, cache))
    }

    /// Accumulates parameter gradients; returns `dL/dx` when asked.
    pub fn backward(
        &mut self,
        cache: &StageCache<T>,
        grad_out: &Tensor<T>,
        want_input_grad: bool,
    ) -> Result<Option<Tensor<T>>> {
        let d_gated = self
            .predict
            .backward(&cache.gated, grad_out, true)?
            .expect("input grad requested");
        let d_act = self.se.backward(&cache.se, &d_gated)?;
        let d_normed = relu_backward(&cache.normed, &d_act)?;
        let d_reduced = self.bn.backward(&cache.bn, &d_normed)?;
        self.reduce.backward(&cache.input, &d_reduced, want_input_grad)
    }
}

impl<T: Scalar> Parameters<T> for HeadStage<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        self.reduce.visit_params(&mut scoped("reduce", f));
        self.bn.visit_params(&mut scoped("bn", f));
        self.se.visit_params(&mut scoped("se", f));
        self.predict.visit_params(&mut scoped("predict", f));
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.reduce.visit_params_mut(&mut scoped_mut("reduce", f));
        self.bn.visit_params_mut(&mut scoped_mut("bn", f));
        self.se.visit_params_mut(&mut scoped_mut("se", f));
        self.predict.visit_params_mut(&mut scoped_mut("predict", f));
    }

    fn visit_buffers(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        self.bn.visit_buffers(&mut scoped("bn", f));
    }

    fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.bn.visit_buffers_mut(&mut scoped_mut("bn", f));
    }
}
