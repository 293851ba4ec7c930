//! Composite layers built from graph primitives.

use super::graph::Var;
use super::scalar::Scalar;
use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const PIXEL_NORM_EPS: f64 = 1e-8;
pub const STDDEV_EPS: f64 = 1e-8;

pub fn leaky_relu<'g, T: Scalar>(x: Var<'g, T>) -> Var<'g, T> {
    x.leaky_relu(T::lit(LEAKY_SLOPE))
}

/// Divide each position's channel vector by its RMS (ε inside the root).
pub fn pixel_norm<'g, T: Scalar>(x: Var<'g, T>) -> Result<Var<'g, T>> {
    let shape = x.shape();
    let last = shape.len().checked_sub(1).ok_or_else(|| Error::shape("pixel_norm", "scalar input"))?;
    let c = shape[last];
    let inv = x
        .mul(x)?
        .sum_axis(last)?
        .scale(T::one() / T::lit(c as f64))
        .add_scalar(T::lit(PIXEL_NORM_EPS))
        .powf(T::lit(-0.5))
        .broadcast_axis(last, c)?;
    x.mul(inv)
}

/// Append one channel holding the batch-wide average of per-position stddevs.
///
/// The stddev is computed as `var / sqrt(var + ε)`, which is exactly zero for an
/// identical batch and stays differentiable there.
pub fn minibatch_stddev<'g, T: Scalar>(x: Var<'g, T>) -> Result<Var<'g, T>> {
    let shape = x.shape();
    let &[n, h, w, _] = &shape[..] else {
        return Err(Error::shape("minibatch_stddev", format!("expected NHWC, got {shape:?}")));
    };
    let inv_n = T::one() / T::lit(n as f64);
    let mean = x.sum_axis(0)?.scale(inv_n).broadcast_axis(0, n)?;
    let dev = x.sub(mean)?;
    let var = dev.mul(dev)?.sum_axis(0)?.scale(inv_n);
    let std = var.mul(var.add_scalar(T::lit(STDDEV_EPS)).powf(T::lit(-0.5)))?;
    let s = std.mean_all();
    x.concat_last(s.broadcast_scalar(&[n, h, w, 1])?)
}

/// `x·w + b` for `x` of shape `[n, in]`.
pub fn dense<'g, T: Scalar>(x: Var<'g, T>, w: Var<'g, T>, b: Var<'g, T>) -> Result<Var<'g, T>> {
    x.matmul(w)?.add_bias(b)
}

/// Same-padded convolution plus per-channel bias.
pub fn conv<'g, T: Scalar>(x: Var<'g, T>, w: Var<'g, T>, b: Var<'g, T>) -> Result<Var<'g, T>> {
    x.conv2d(w)?.add_bias(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Graph, Tensor};

    #[test]
    fn pixel_norm_closed_forms() {
        let g = Graph::<f64>::new();
        let x = g.leaf(Tensor::from_f64(&[1, 1, 1, 2], &[3.0, 4.0]).unwrap());
        let y = pixel_norm(x).unwrap().value();
        assert!((y.data()[0] - 0.84853).abs() < 1e-4);
        assert!((y.data()[1] - 1.13137).abs() < 1e-4);

        let ones = g.leaf(Tensor::ones(&[2, 3, 2, 5]));
        let y = pixel_norm(ones).unwrap().value();
        assert!(y.data().iter().all(|v| (v - 1.0).abs() < 1e-7));

        let zeros = g.leaf(Tensor::zeros(&[1, 2, 2, 3]));
        assert_eq!(*pixel_norm(zeros).unwrap().value(), Tensor::zeros(&[1, 2, 2, 3]));
    }

    #[test]
    fn stddev_of_identical_batch_is_zero() {
        let g = Graph::<f64>::new();
        let one = Tensor::from_fn(&[1, 2, 3, 4], |i| i as f64 * 0.3 - 1.0);
        let x = g.leaf(Tensor::stack_rows(&[one.clone(), one.clone(), one]).unwrap());
        let y = minibatch_stddev(x).unwrap().value();
        assert_eq!(y.shape(), &[3, 2, 3, 5]);
        assert!(y.data().chunks(5).all(|c| c[4].abs() < 1e-20));
    }

    #[test]
    fn stddev_single_differing_position() {
        let g = Graph::<f64>::new();
        let mut a = Tensor::full(&[1, 2, 2, 2], 1.0);
        let b = a.clone();
        a.data_mut()[3] = 0.0;
        let mut b = b;
        b.data_mut()[3] = 2.0;
        let x = g.leaf(Tensor::stack_rows(&[a, b]).unwrap());
        let y = minibatch_stddev(x).unwrap().value();
        // population stddev of {0, 2} is 1, averaged over 8 positions
        let expected = 1.0 / (1.0f64 + 1e-8).sqrt() / 8.0;
        assert!(y.data().chunks(3).all(|c| (c[2] - expected).abs() < 1e-12));
    }

    #[test]
    fn table_shape_of_stddev_concat() {
        let g = Graph::<f32>::new();
        let x = g.leaf(Tensor::ones(&[2, 2, 16, 256]));
        assert_eq!(minibatch_stddev(x).unwrap().shape(), vec![2, 2, 16, 257]);
    }
}
