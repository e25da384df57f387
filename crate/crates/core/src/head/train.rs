use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::NUM_SCALES;
use super::loss::{assign_targets, head_loss_with_grad, GroundTruth, LossBreakdown, LossWeights};
use super::model::DetectionHead;
use crate::error::{Error, Result};
use crate::tensor::{Parameters, Scalar, Tensor};

/// One training image: its P3/P4/P5 features (batch dimension 1) and boxes.
#[derive(Debug, Clone)]
pub struct TrainSample<T = f32> {
    pub features: Vec<Tensor<T>>,
    pub targets: Vec<GroundTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            batch_size: 64,
            epochs: 1,
            seed: 0,
            weights: LossWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub steps: Vec<LossBreakdown>,
    /// Mean total loss per epoch.
    pub epochs: Vec<f64>,
}

/// Concatenates `[1, C, H, W]` tensors along the batch axis.
pub fn stack_batch<T: Scalar>(items: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = items.first().ok_or_else(|| Error::invalid("stack_batch: no tensors"))?;
    let dims = first.dims4("stack_batch item")?;
    let mut data = Vec::with_capacity(first.numel() * items.len());
    let mut batch = 0;
    for t in items {
        let d = t.dims4("stack_batch item")?;
        if d[1..] != dims[1..] {
            return Err(Error::shape("stack_batch item", dims, d));
        }
        batch += d[0];
        data.extend_from_slice(t.data());
    }
    Tensor::from_vec(&[batch, dims[1], dims[2], dims[3]], data)
}

/// Runs one SGD step on a mini-batch and returns its loss before the update.
pub fn train_step<T: Scalar>(
    head: &mut DetectionHead<T>,
    batch: &[&TrainSample<T>],
    lr: f64,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let features = (0..NUM_SCALES)
        .map(|s| stack_batch(&batch.iter().map(|x| &x.features[s]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let gts: Vec<Vec<GroundTruth>> = batch.iter().map(|x| x.targets.clone()).collect();
    let targets = assign_targets(&gts, head.config())?;
    head.zero_grads();
    let (raw, caches) = head.forward_train(&features)?;
    let (loss, grads) = head_loss_with_grad(&raw, &targets, head.config(), weights)?;
    head.backward(&caches, &grads, false)?;
    head.sgd_step(T::from_f64_lossy(lr));
    Ok(loss)
}

/// Plain mini-batch SGD on the head parameters.
pub fn train_head<T: Scalar>(
    head: &mut DetectionHead<T>,
    data: &[TrainSample<T>],
    config: &TrainConfig,
) -> Result<TrainHistory> {
    if data.is_empty() {
        return Err(Error::invalid("train_head: empty dataset"));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("train_head: batch size must be positive"));
    }
    if data.iter().any(|d| d.features.len() != NUM_SCALES) {
        return Err(Error::invalid("train_head: every sample needs P3, P4 and P5 features"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut count = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&TrainSample<T>> = chunk.iter().map(|&i| &data[i]).collect();
            let step = history.steps.len();
            let loss = train_step(head, &batch, config.lr, &config.weights).map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("step {step}: {msg}")),
                other => other,
            })?;
            if !loss.total.is_finite() {
                return Err(Error::Numeric(format!("step {step}: loss diverged")));
            }
            sum += loss.total;
            count += 1;
            history.steps.push(loss);
        }
        history.epochs.push(sum / count as f64);
    }
    Ok(history)
}
