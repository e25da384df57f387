use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// `[B, C, H, W] -> [B, C, 1, 1]` per-channel spatial mean.
pub fn adaptive_avg_pool_1x1<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [b, c, h, w] = x.dims4("avg pool input")?;
    if h == 0 || w == 0 {
        return Err(Error::shape("avg pool input", "H, W >= 1", x.shape()));
    }
    let plane = h * w;
    let scale = T::from_f64_lossy(plane as f64).recip();
    let data = x
        .data()
        .chunks(plane)
        .map(|ch| ch.iter().copied().sum::<T>() * scale)
        .collect();
    Tensor::from_vec(&[b, c, 1, 1], data)
}

/// Spreads `[B, C, 1, 1]` (or `[B, C]`) gradients uniformly over `H x W`.
pub fn adaptive_avg_pool_1x1_backward<T: Scalar>(
    input_shape: [usize; 4],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let [b, c, h, w] = input_shape;
    if grad_out.numel() != b * c {
        return Err(Error::shape("avg pool grad_out", [b, c, 1, 1], grad_out.shape()));
    }
    let plane = h * w;
    let scale = T::from_f64_lossy(plane as f64).recip();
    let mut dx = Tensor::zeros(&input_shape);
    for (chunk, g) in dx.data_mut().chunks_mut(plane).zip(grad_out.data()) {
        chunk.fill(*g * scale);
    }
    Ok(dx)
}
