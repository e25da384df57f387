//! Finite-difference checks (f64, central differences, eps 1e-4) of every
//! backward pass, from single layers up to the full head, plus the loss.
//! Each check panics on a violation and returns the worst relative error.
use denom_core::head::{
    assign_targets, head_loss, head_loss_with_grad, DetectionHead, GroundTruth, HeadConfig, HeadStage, LossWeights,
    SeBlock,
};
use denom_core::tensor::{
    adaptive_avg_pool_1x1, adaptive_avg_pool_1x1_backward, grad_check, relu, relu_backward, sigmoid,
    sigmoid_backward, BatchNorm2d, Conv2d, Linear, Parameters, Tensor,
};
use denom_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-4;
pub const TOL: f64 = 1e-5;
pub const SEEDS: u64 = 10;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Neumaier-compensated sum, so the objective's own rounding stays far
/// below the finite-difference resolution.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

/// Random projection `sum(r * y)`; its gradient in `y` is `r`.
fn project(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    compensated_sum(y.data().iter().zip(r.data()).map(|(a, b)| a * b))
}

fn project_all(ys: &[Tensor<f64>], rs: &[Tensor<f64>]) -> f64 {
    compensated_sum(ys.iter().zip(rs).flat_map(|(y, r)| y.data().iter().zip(r.data()).map(|(a, b)| a * b)))
}

fn tensor_like(t: &Tensor<f64>, values: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(t.shape(), values.to_vec()).unwrap()
}

/// Checks the gradient of `objective(module, input)` with respect to every
/// parameter of `module` and every element of `input`.
fn check_module<M, F, B>(name: &str, seed: u64, module: M, input: Tensor<f64>, objective: F, backward: B) -> f64
where
    M: Parameters<f64> + Clone,
    F: Fn(&M, &Tensor<f64>) -> Result<f64>,
    B: Fn(&mut M, &Tensor<f64>) -> Result<Tensor<f64>>,
{
    let mut m = module.clone();
    m.zero_grads();
    let dx = backward(&mut m, &input).unwrap();
    let mut analytic = m.flat_grads().iter().copied().collect::<Vec<f64>>();
    analytic.extend_from_slice(dx.data());
    let mut point = module.flat_params();
    let n_params = point.len();
    point.extend_from_slice(input.data());
    let report = grad_check(&point, &analytic, EPS, |p| {
        let mut m = module.clone();
        m.set_flat_params(&p[..n_params])?;
        objective(&m, &tensor_like(&input, &p[n_params..]))
    })
    .unwrap();
    assert!(
        report.max_rel_error < TOL,
        "{name} seed {seed}: rel error {:e} at {} (analytic {}, numeric {})",
        report.max_rel_error,
        report.worst_index,
        report.analytic,
        report.numeric
    );
    report.max_rel_error
}

/// Element-wise ops: gradient with respect to the input only.
fn check_elementwise(
    name: &str,
    seed: u64,
    x: Tensor<f64>,
    f: impl Fn(&Tensor<f64>) -> Tensor<f64>,
    df: impl Fn(&Tensor<f64>, &Tensor<f64>) -> Tensor<f64>,
) -> f64 {
    let y = f(&x);
    let r = Tensor::randn(y.shape(), 1.0, &mut rng(seed + 1000));
    let analytic = df(&x, &r);
    let report = grad_check(x.data(), analytic.data(), EPS, |p| Ok(project(&f(&tensor_like(&x, p)), &r))).unwrap();
    assert!(report.max_rel_error < TOL, "{name} seed {seed}: {report:?}");
    report.max_rel_error
}

pub fn relu_gradient() -> f64 {
    let mut worst = 0f64;
    for seed in 0..SEEDS {
        // keep every input at least 10 * eps away from the kink
        let x = Tensor::<f64>::randn(&[2, 3, 4, 4], 1.0, &mut rng(seed))
            .map(|v| if v.abs() < 1e-2 { v + 0.05f64.copysign(v) } else { v });
        worst = worst.max(check_elementwise("relu", seed, x, relu, |x, r| relu_backward(x, r).unwrap()));
    }
    worst
}

pub fn sigmoid_gradient() -> f64 {
    let mut worst = 0f64;
    for seed in 0..SEEDS {
        let x = Tensor::<f64>::randn(&[2, 3, 4, 4], 2.0, &mut rng(seed));
        worst = worst.max(check_elementwise("sigmoid", seed, x, sigmoid, |x, r| sigmoid_backward(&sigmoid(x), r).unwrap()));
    }
    worst
}

pub fn avg_pool_gradient() -> f64 {
    let mut worst = 0f64;
    for seed in 0..SEEDS {
        let x = Tensor::<f64>::randn(&[2, 3, 3, 5], 1.0, &mut rng(seed));
        worst = worst.max(check_elementwise(
            "avgpool",
            seed,
            x,
            |x| adaptive_avg_pool_1x1(x).unwrap(),
            |x, r| {
                let d = x.shape();
                adaptive_avg_pool_1x1_backward([d[0], d[1], d[2], d[3]], r).unwrap()
            },
        ));
    }
    worst
}

pub fn linear_gradient() -> f64 {
    let mut worst = 0f64;
    for seed in 0..SEEDS {
        let mut g = rng(seed);
        let layer = Linear::<f64>::init(4, 3, &mut g);
        let x = Tensor::randn(&[3, 4], 1.0, &mut g);
        let r = Tensor::randn(&[3, 3], 1.0, &mut g);
        let err = check_module(
            "linear",
            seed,
            layer,
            x,
            |m, x| Ok(project(&m.forward(x)?, &r)),
            |m, x| m.backward(x, &r),
        );
        assert!(err < 1e-6, "linear seed {seed}: {err:e}");
        worst = worst.max(err);
    }
    worst
}

pub fn conv_gradient() -> f64 {
    let mut worst = 0f64;
    for seed in 0..SEEDS {
        for (k, bias) in [(3, false), (3, true), (1, true)] {
            let mut g = rng(seed);
            let layer = Conv2d::<f64>::init(3, 4, k, bias, &mut g);
            let x = Tensor::randn(&[2, 3, 5, 4], 1.0, &mut g);
            let r = Tensor::randn(&[2, 4, 5, 4], 1.0, &mut g);
            worst = worst.max(check_module(
                "conv2d",
                seed,
                layer,
                x,
                |m, x| Ok(project(&m.forward(x)?, &r)),
                |m, x| Ok(m.backward(x, &r, true)?.unwrap()),
            ));
        }
    }
    worst
}

pub fn batchnorm_train_gradient() -> f64 {
    let mut worst = 0f64;
    for seed in 0..SEEDS {
        let mut g = rng(seed);
        let mut bn = BatchNorm2d::<f64>::new(3);
        bn.gamma = Tensor::randn(&[3], 1.0, &mut g);
        bn.beta = Tensor::randn(&[3], 1.0, &mut g);
        let x = Tensor::randn(&[2, 3, 3, 3], 2.0, &mut g);
        let r = Tensor::randn(&[2, 3, 3, 3], 1.0, &mut g);
        worst = worst.max(check_module(
            "batchnorm",
            seed,
            bn,
            x,
            |m, x| Ok(project(&m.clone().forward_train(x)?.0, &r)),
            |m, x| {
                let (_, cache) = m.forward_train(x)?;
                m.backward(&cache, &r)
            },
        ));
    }
    worst
}

pub fn se_block_gradient() -> f64 {
    let mut worst = 0f64;
    for seed in 0..SEEDS {
        let mut g = rng(seed);
        let se = SeBlock::<f64>::init(8, 4, &mut g);
        let x = Tensor::randn(&[1, 8, 4, 4], 1.0, &mut g);
        let r = Tensor::randn(&[1, 8, 4, 4], 1.0, &mut g);
        worst = worst.max(check_module(
            "se",
            seed,
            se,
            x,
            |m, x| Ok(project(&m.forward(x)?, &r)),
            |m, x| {
                let (_, cache) = m.forward_cached(x)?;
                m.backward(&cache, &r)
            },
        ));
    }
    worst
}

pub fn head_stage_gradient() -> f64 {
    let mut worst = 0f64;
    for seed in 0..SEEDS {
        let mut g = rng(seed);
        let stage = HeadStage::<f64>::init(3, 8, 4, 7, &mut g);
        let x = loop {
            let x = Tensor::randn(&[2, 3, 4, 4], 1.0, &mut g);
            if relu_margin(&stage, &x) > KINK_MARGIN {
                break x;
            }
        };
        let r = Tensor::randn(&[2, 7, 4, 4], 1.0, &mut g);
        worst = worst.max(check_module(
            "head stage",
            seed,
            stage,
            x,
            |m, x| Ok(project(&m.clone().forward_train(x)?.0, &r)),
            |m, x| {
                let (_, cache) = m.forward_train(x)?;
                Ok(m.backward(&cache, &r, true)?.unwrap())
            },
        ));
    }
    worst
}

/// Smallest distance to a ReLU kink over a stage's BN outputs and SE hidden
/// pre-activations, in training mode.
fn relu_margin(stage: &HeadStage<f64>, x: &Tensor<f64>) -> f64 {
    let normed = stage.bn.clone().forward_train(&stage.reduce.forward(x).unwrap()).unwrap().0;
    let act = relu(&normed);
    let [b, c, _, _] = act.dims4("act").unwrap();
    let pooled = adaptive_avg_pool_1x1(&act).unwrap().reshape(&[b, c]).unwrap();
    let z1 = stage.se.fc1.forward(&pooled).unwrap();
    normed.data().iter().chain(z1.data()).fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

const KINK_MARGIN: f64 = 2e-3;

fn tiny_features(config: &HeadConfig, batch: usize, g: &mut ChaCha8Rng) -> Vec<Tensor<f64>> {
    (0..3)
        .map(|s| {
            let n = config.grid(s);
            Tensor::randn(&[batch, config.in_channels[s], n, n], 1.0, g)
        })
        .collect()
}

fn tiny_targets(config: &HeadConfig, batch: usize, g: &mut ChaCha8Rng) -> Vec<Vec<GroundTruth>> {
    let size = config.input_size as f64;
    (0..batch)
        .map(|_| {
            (0..2)
                .map(|_| {
                    let w = g.gen_range(6.0..40.0);
                    let h = g.gen_range(6.0..40.0);
                    let cx = g.gen_range(w / 2.0..size - w / 2.0);
                    let cy = g.gen_range(h / 2.0..size - h / 2.0);
                    GroundTruth {
                        bbox: [cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0],
                        class_id: g.gen_range(0..config.num_classes),
                    }
                })
                .collect()
        })
        .collect()
}

pub fn loss_gradient_wrt_logits() -> f64 {
    let mut worst = 0f64;
    let config = super::tiny_config();
    let weights = LossWeights::default();
    for seed in 0..SEEDS {
        let mut g = rng(seed);
        let gts = tiny_targets(&config, 2, &mut g);
        let targets = assign_targets(&gts, &config).unwrap();
        let raw: Vec<Tensor<f64>> = (0..3)
            .map(|s| {
                let n = config.grid(s);
                Tensor::randn(&[2, config.out_channels(), n, n], 0.5, &mut g)
            })
            .collect();
        let (_, grads) = head_loss_with_grad(&raw, &targets, &config, &weights).unwrap();
        let point: Vec<f64> = raw.iter().flat_map(|t| t.data().to_vec()).collect();
        let analytic: Vec<f64> = grads.iter().flat_map(|t| t.data().to_vec()).collect();
        let report = grad_check(&point, &analytic, EPS, |p| {
            let mut off = 0;
            let rebuilt: Vec<Tensor<f64>> = raw
                .iter()
                .map(|t| {
                    let v = tensor_like(t, &p[off..off + t.numel()]);
                    off += t.numel();
                    v
                })
                .collect();
            Ok(head_loss(&rebuilt, &targets, &config, &weights)?.total)
        })
        .unwrap();
        assert!(report.max_rel_error < TOL, "loss seed {seed}: {report:?}");
        worst = worst.max(report.max_rel_error);
    }
    worst
}

/// Full head in training mode under a random projection of all three
/// outputs; gradient with respect to every parameter and feature element.
pub fn composed_head_gradient() -> f64 {
    let mut worst = 0f64;
    let config = super::tiny_config();
    for seed in 0..SEEDS {
        let mut g = rng(seed);
        let mut head = DetectionHead::<f64>::init(config.clone(), seed).unwrap();
        // move the output layer off its prior init so every path carries gradient
        for stage in head.stages_mut() {
            stage.predict.weight = Tensor::randn(stage.predict.weight.shape(), 0.3, &mut g);
        }
        let feats = loop {
            let f = tiny_features(&config, 2, &mut g);
            if head.stages().iter().zip(&f).all(|(s, x)| relu_margin(s, x) > KINK_MARGIN) {
                break f;
            }
        };
        let proj: Vec<Tensor<f64>> = (0..3)
            .map(|s| {
                let n = config.grid(s);
                Tensor::randn(&[2, config.out_channels(), n, n], 1.0 / n as f64, &mut g)
            })
            .collect();
        let objective = |raw: &[Tensor<f64>]| project_all(raw, &proj);

        let mut m = head.clone();
        m.zero_grads();
        let (_, caches) = m.forward_train(&feats).unwrap();
        let dx = m.backward(&caches, &proj, true).unwrap();
        let mut analytic = m.flat_grads();
        for d in &dx {
            analytic.extend_from_slice(d.as_ref().unwrap().data());
        }
        let mut point = head.flat_params();
        let n_params = point.len();
        for f in &feats {
            point.extend_from_slice(f.data());
        }
        let report = grad_check(&point, &analytic, EPS, |p| {
            let mut h = head.clone();
            h.set_flat_params(&p[..n_params])?;
            let mut off = n_params;
            let fs: Vec<Tensor<f64>> = feats
                .iter()
                .map(|f| {
                    let v = tensor_like(f, &p[off..off + f.numel()]);
                    off += f.numel();
                    v
                })
                .collect();
            Ok(objective(&h.forward_train(&fs)?.0))
        })
        .unwrap();
        assert!(report.max_rel_error < TOL, "head seed {seed}: {report:?}");
        worst = worst.max(report.max_rel_error);
    }
    worst
}

/// Every check, in order from single layers to the composed head.
pub const ALL: &[(&str, fn() -> f64)] = &[
    ("relu", relu_gradient),
    ("sigmoid", sigmoid_gradient),
    ("avgpool", avg_pool_gradient),
    ("linear", linear_gradient),
    ("conv2d", conv_gradient),
    ("batchnorm", batchnorm_train_gradient),
    ("se", se_block_gradient),
    ("head stage", head_stage_gradient),
    ("loss", loss_gradient_wrt_logits),
    ("head", composed_head_gradient),
];
