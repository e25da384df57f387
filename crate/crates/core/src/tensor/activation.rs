use super::{Scalar, Tensor};
use crate::error::{Error, Result};

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient through ReLU given the forward *input*.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape() != grad_out.shape() {
        return Err(Error::shape("relu grad_out", x.shape(), grad_out.shape()));
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

pub(crate) fn sigmoid_scalar<T: Scalar>(v: T) -> T {
    // split on sign so exp never overflows
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// Gradient through the logistic function given the forward *output*.
pub fn sigmoid_backward<T: Scalar>(y: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if y.shape() != grad_out.shape() {
        return Err(Error::shape("sigmoid grad_out", y.shape(), grad_out.shape()));
    }
    let data = y
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&s, &g)| g * s * (T::one() - s))
        .collect();
    Tensor::from_vec(y.shape(), data)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn relu_clamps_negatives() {
        let x = Tensor::<f32>::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let x = Tensor::<f64>::zeros(&[1]);
        assert_eq!(sigmoid(&x).data(), &[0.5]);
    }

    proptest! {
        #[test]
        fn sigmoid_in_open_unit_interval(v in -30.0f64..30.0) {
            let s = sigmoid_scalar(v);
            prop_assert!(s > 0.0 && s < 1.0);
        }

        #[test]
        fn sigmoid_never_nan(v in proptest::num::f32::NORMAL) {
            let s = sigmoid_scalar(v);
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
