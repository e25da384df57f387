use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{HeadConfig, NUM_ANCHORS, NUM_SCALES, SCALE_NAMES, STRIDES};
use super::stage::{HeadStage, StageCache};
use crate::container::Container;
use crate::error::{Error, Result};
use crate::tensor::{scoped, scoped_mut, Parameters, Scalar, Tensor};

/// Standard deviation of the final 1x1 convolution weights at init; small so
/// initial boxes sit on their anchors.
pub const PREDICT_INIT_STD: f64 = 0.01;

/// The three-scale detection head.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionHead<T = f32> {
    config: HeadConfig,
    stages: Vec<HeadStage<T>>,
}

impl<T: Scalar> DetectionHead<T> {
    /// Random initialization with objectness and class biases set to their
    /// priors: about 8 objects per image and a near-uniform class guess.
    pub fn init(config: HeadConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let no = config.outputs_per_anchor();
        let nc = config.num_classes as f64;
        let cls_prior = (0.6 / (nc - 0.99).max(0.01)).ln();
        let stages = (0..NUM_SCALES)
            .map(|s| {
                let mut stage = HeadStage::init(
                    config.in_channels[s],
                    config.hidden,
                    config.reduction,
                    config.out_channels(),
                    &mut rng,
                );
                stage.predict.weight = Tensor::randn(stage.predict.weight.shape(), PREDICT_INIT_STD, &mut rng);
                let cells = (config.grid(s) * config.grid(s)) as f64;
                let obj_prior = (8.0 / cells).ln();
                let bias = stage.predict.bias.as_mut().expect("predict conv has bias");
                for a in 0..NUM_ANCHORS {
                    let b = bias.data_mut();
                    b[a * no + 4] = T::from_f64_lossy(obj_prior);
                    for c in 0..config.num_classes {
                        b[a * no + 5 + c] = T::from_f64_lossy(cls_prior);
                    }
                }
                stage
            })
            .collect();
        Ok(DetectionHead { config, stages })
    }

    pub fn config(&self) -> &HeadConfig {
        &self.config
    }

    pub fn stages(&self) -> &[HeadStage<T>] {
        &self.stages
    }

    pub fn stages_mut(&mut self) -> &mut [HeadStage<T>] {
        &mut self.stages
    }

    fn check_features(&self, features: &[Tensor<T>]) -> Result<()> {
        if features.len() != NUM_SCALES {
            return Err(Error::invalid(format!(
                "head: expected {NUM_SCALES} feature scales (P3, P4, P5), got {}",
                features.len()
            )));
        }
        let b = features[0].dims4("P3 features")?[0];
        for (s, f) in features.iter().enumerate() {
            let g = self.config.grid(s);
            let expected = [b, self.config.in_channels[s], g, g];
            if f.shape() != expected {
                return Err(Error::Shape {
                    context: "head features",
                    expected: format!("{} {:?}", SCALE_NAMES[s], expected),
                    actual: format!("{:?}", f.shape()),
                });
            }
        }
        Ok(())
    }

    /// Raw outputs `[B, A * (classes + 5), H, W]` per scale, inference mode.
    pub fn forward(&self, features: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        self.check_features(features)?;
        self.stages.iter().zip(features).map(|(s, f)| s.forward(f)).collect()
    }

    pub fn forward_train(&mut self, features: &[Tensor<T>]) -> Result<(Vec<Tensor<T>>, Vec<StageCache<T>>)> {
        self.check_features(features)?;
        let mut outs = Vec::with_capacity(NUM_SCALES);
        let mut caches = Vec::with_capacity(NUM_SCALES);
        for (stage, f) in self.stages.iter_mut().zip(features) {
            let (o, c) = stage.forward_train(f)?;
            outs.push(o);
            caches.push(c);
        }
        Ok((outs, caches))
    }

    /// Accumulates gradients from `dL/d(raw outputs)`; feature gradients are
    /// returned only when `want_input_grad` is set.
    pub fn backward(
        &mut self,
        caches: &[StageCache<T>],
        grad_out: &[Tensor<T>],
        want_input_grad: bool,
    ) -> Result<Vec<Option<Tensor<T>>>> {
        if caches.len() != NUM_SCALES || grad_out.len() != NUM_SCALES {
            return Err(Error::invalid("head backward: one cache and gradient per scale required"));
        }
        self.stages
            .iter_mut()
            .zip(caches)
            .zip(grad_out)
            .map(|((s, c), g)| s.backward(c, g, want_input_grad))
            .collect()
    }

    pub fn strides(&self) -> [usize; NUM_SCALES] {
        STRIDES
    }

    /// Parameters and batch-norm statistics as a `DNM1` container.
    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        self.visit_params(&mut |name, t| c.insert_tensor(name, t));
        self.visit_buffers(&mut |name, t| c.insert_tensor(name, t));
        c
    }

    /// Loads every parameter and buffer named by `config`'s layout.
    pub fn from_container(config: HeadConfig, container: &Container) -> Result<Self> {
        let mut head = DetectionHead::init(config, 0)?;
        let mut failure = None;
        let mut load = |name: &str, t: &mut Tensor<T>| {
            if failure.is_some() {
                return;
            }
            match container.tensor::<T>(name) {
                Ok(src) if src.shape() == t.shape() => *t = src,
                Ok(src) => {
                    failure = Some(Error::format(
                        name,
                        format!("expected shape {:?}, found {:?}", t.shape(), src.shape()),
                    ))
                }
                Err(e) => failure = Some(e),
            }
        };
        head.visit_params_mut(&mut load);
        head.visit_buffers_mut(&mut load);
        match failure {
            Some(e) => Err(e),
            None => Ok(head),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(config: HeadConfig, path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(config, &Container::load(path)?)
    }

    pub fn cast<U: Scalar>(&self) -> DetectionHead<U> {
        let mut out = DetectionHead::<U>::init(self.config.clone(), 0).expect("config already validated");
        let c = self.to_container();
        let mut copy = |name: &str, t: &mut Tensor<U>| {
            *t = c.tensor(name).expect("same layout");
        };
        out.visit_params_mut(&mut copy);
        out.visit_buffers_mut(&mut copy);
        out
    }
}

/// Free-function form of [`DetectionHead::forward`].
pub fn head_forward<T: Scalar>(features: &[Tensor<T>], head: &DetectionHead<T>) -> Result<Vec<Tensor<T>>> {
    head.forward(features)
}

fn scale_prefix(s: usize) -> &'static str {
    ["p3", "p4", "p5"][s]
}

impl<T: Scalar> Parameters<T> for DetectionHead<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        for (s, stage) in self.stages.iter().enumerate() {
            stage.visit_params(&mut scoped(scale_prefix(s), f));
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        for (s, stage) in self.stages.iter_mut().enumerate() {
            stage.visit_params_mut(&mut scoped_mut(scale_prefix(s), f));
        }
    }

    fn visit_buffers(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        for (s, stage) in self.stages.iter().enumerate() {
            stage.visit_buffers(&mut scoped(scale_prefix(s), f));
        }
    }

    fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        for (s, stage) in self.stages.iter_mut().enumerate() {
            stage.visit_buffers_mut(&mut scoped_mut(scale_prefix(s), f));
        }
    }
}
