use rand::Rng;

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Stride-1 2-D convolution (cross-correlation, no kernel flip) with
/// symmetric zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T = f32> {
    /// `[out_ch, in_ch, k, k]`
    pub weight: Tensor<T>,
    /// `[out_ch]`
    pub bias: Option<Tensor<T>>,
    pub padding: usize,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(weight: Tensor<T>, bias: Option<Tensor<T>>, padding: usize) -> Result<Self> {
        let [out_ch, _, kh, kw] = weight.dims4("conv2d weight")?;
        if kh != kw {
            return Err(Error::shape("conv2d weight", "square kernel", weight.shape()));
        }
        if let Some(b) = &bias {
            if b.shape() != [out_ch] {
                return Err(Error::shape("conv2d bias", [out_ch], b.shape()));
            }
        }
        Ok(Conv2d {
            weight,
            bias,
            padding,
        })
    }

    /// Kaiming-uniform weights; "same" padding for odd kernels.
    pub fn init<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        with_bias: bool,
        rng: &mut R,
    ) -> Self {
        let fan_in = (in_ch * kernel * kernel) as f64;
        let bound = (1.0 / fan_in).sqrt();
        let weight = Tensor::uniform(&[out_ch, in_ch, kernel, kernel], bound * 3f64.sqrt(), rng);
        let bias = with_bias.then(|| Tensor::uniform(&[out_ch], bound, rng));
        Conv2d {
            weight,
            bias,
            padding: kernel / 2,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel_size(&self) -> usize {
        self.weight.shape()[2]
    }

    fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let k = self.kernel_size();
        let (hp, wp) = (h + 2 * self.padding, w + 2 * self.padding);
        if hp < k || wp < k {
            return Err(Error::shape("conv2d input", format!(">= {k} after padding"), (h, w)));
        }
        Ok((hp - k + 1, wp - k + 1))
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<[usize; 4]> {
        let dims = x.dims4("conv2d input")?;
        if dims[1] != self.in_channels() {
            return Err(Error::shape(
                "conv2d input channels",
                self.in_channels(),
                dims[1],
            ));
        }
        Ok(dims)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let [b, c, h, w] = self.check_input(x)?;
        let (oh, ow) = self.output_hw(h, w)?;
        let o = self.out_channels();
        let k = self.kernel_size();
        let rows = c * k * k;
        let mut col = vec![T::zero(); rows * oh * ow];
        let mut out = Tensor::zeros(&[b, o, oh, ow]);
        let plane = oh * ow;
        for bi in 0..b {
            let xin = &x.data()[bi * c * h * w..(bi + 1) * c * h * w];
            im2col(xin, c, h, w, k, self.padding, oh, ow, &mut col);
            let dst = &mut out.data_mut()[bi * o * plane..(bi + 1) * o * plane];
            let beta = match &self.bias {
                Some(bias) => {
                    for (oc, chunk) in dst.chunks_mut(plane).enumerate() {
                        chunk.fill(bias.data()[oc]);
                    }
                    T::one()
                }
                None => T::zero(),
            };
            T::gemm(
                o,
                rows,
                plane,
                self.weight.data(),
                (rows, 1),
                &col,
                (plane, 1),
                beta,
                dst,
            );
        }
        Ok(out)
    }

    /// Accumulates weight/bias gradients and optionally returns `dL/dx`.
    pub fn backward(
        &mut self,
        x: &Tensor<T>,
        grad_out: &Tensor<T>,
        want_input_grad: bool,
    ) -> Result<Option<Tensor<T>>> {
        let [b, c, h, w] = self.check_input(x)?;
        let (oh, ow) = self.output_hw(h, w)?;
        let o = self.out_channels();
        if grad_out.shape() != [b, o, oh, ow] {
            return Err(Error::shape(
                "conv2d grad_out",
                [b, o, oh, ow],
                grad_out.shape(),
            ));
        }
        let k = self.kernel_size();
        let rows = c * k * k;
        let plane = oh * ow;
        let mut col = vec![T::zero(); rows * plane];
        let mut dcol = if want_input_grad {
            vec![T::zero(); rows * plane]
        } else {
            Vec::new()
        };
        let mut dx = want_input_grad.then(|| Tensor::zeros(&[b, c, h, w]));
        let weight = self.weight.data().to_vec();

        if let Some(bias) = self.bias.as_mut() {
            let gb = bias.grad_mut();
            for bi in 0..b {
                for (oc, g) in gb.iter_mut().enumerate() {
                    let start = (bi * o + oc) * plane;
                    *g += grad_out.data()[start..start + plane].iter().copied().sum();
                }
            }
        }

        let gw = self.weight.grad_mut();
        for bi in 0..b {
            let xin = &x.data()[bi * c * h * w..(bi + 1) * c * h * w];
            let gout = &grad_out.data()[bi * o * plane..(bi + 1) * o * plane];
            im2col(xin, c, h, w, k, self.padding, oh, ow, &mut col);
            // dW[o, rows] += dOut[o, plane] * col^T[plane, rows]
            T::gemm(o, plane, rows, gout, (plane, 1), &col, (1, plane), T::one(), gw);
            if let Some(dx) = dx.as_mut() {
                // dcol[rows, plane] = W^T[rows, o] * dOut[o, plane]
                T::gemm(rows, o, plane, &weight, (1, rows), gout, (plane, 1), T::zero(), &mut dcol);
                let dst = &mut dx.data_mut()[bi * c * h * w..(bi + 1) * c * h * w];
                col2im(&dcol, c, h, w, k, self.padding, oh, ow, dst);
            }
        }
        Ok(dx)
    }
}

/// Free-function form of [`Conv2d::forward`].
pub fn conv2d<T: Scalar>(input: &Tensor<T>, params: &Conv2d<T>) -> Result<Tensor<T>> {
    params.forward(input)
}

#[allow(clippy::too_many_arguments)]
fn im2col<T: Scalar>(
    x: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    col: &mut [T],
) {
    let plane = oh * ow;
    for ci in 0..c {
        for kh in 0..k {
            for kw in 0..k {
                let row = (ci * k + kh) * k + kw;
                let dst = &mut col[row * plane..(row + 1) * plane];
                for oy in 0..oh {
                    let iy = (oy + kh) as isize - pad as isize;
                    let line = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src = &x[(ci * h + iy as usize) * w..(ci * h + iy as usize + 1) * w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox + kw) as isize - pad as isize;
                        *v = if ix < 0 || ix >= w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im<T: Scalar>(
    col: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    dx: &mut [T],
) {
    let plane = oh * ow;
    for ci in 0..c {
        for kh in 0..k {
            for kw in 0..k {
                let row = (ci * k + kh) * k + kw;
                let src = &col[row * plane..(row + 1) * plane];
                for oy in 0..oh {
                    let iy = (oy + kh) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let base = (ci * h + iy as usize) * w;
                    for ox in 0..ow {
                        let ix = (ox + kw) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dx[base + ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}
