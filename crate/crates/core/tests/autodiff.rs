mod common;

use ifsynth::tensor::gradcheck::relative_errors;
use ifsynth::tensor::{nn, Graph, Tensor};
use proptest::prelude::*;

#[test]
fn every_op_matches_finite_differences() {
    let mut r = common::rng(7);
    for case in common::catalog() {
        for _ in 0..5 {
            let inputs = (case.inputs)(&mut r);
            let errs = relative_errors(case.forward, &inputs, 1e-3).unwrap();
            for (i, e) in errs.iter().enumerate() {
                assert!(*e < 1e-4, "{} input {i}: relative error {e:e}", case.name);
            }
        }
    }
}

#[test]
fn backward_is_deterministic() {
    let run = || {
        let g = Graph::<f32>::new();
        let x = g.leaf(Tensor::from_fn(&[2, 4, 4, 3], |i| ((i * 31) % 17) as f32 / 17.0 - 0.5));
        let w = g.leaf(Tensor::from_fn(&[3, 3, 3, 4], |i| ((i * 7) % 11) as f32 / 11.0 - 0.5));
        let y = nn::pixel_norm(nn::leaky_relu(x.conv2d(w).unwrap())).unwrap();
        let loss = y.mul(y).unwrap().mean_all();
        g.backward(loss, &[x, w]).unwrap()
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn pixel_norm_has_unit_rms(values in prop::collection::vec(-10.0f64..10.0, 12)) {
        prop_assume!(values.chunks(4).all(|c| c.iter().map(|v| v * v).sum::<f64>() > 1e-3));
        let g = Graph::<f64>::new();
        let x = g.leaf(Tensor::new(&[1, 3, 1, 4], values).unwrap());
        let y = nn::pixel_norm(x).unwrap().value();
        for c in y.data().chunks(4) {
            let rms = (c.iter().map(|v| v * v).sum::<f64>() / 4.0).sqrt();
            prop_assert!((rms - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn upsample_then_downsample_is_identity(values in prop::collection::vec(-5.0f64..5.0, 24)) {
        let g = Graph::<f64>::new();
        let x = g.leaf(Tensor::new(&[2, 2, 3, 2], values).unwrap());
        let y = x.upsample2x().unwrap().downsample2x().unwrap();
        let (a, b) = (y.value(), x.value());
        prop_assert_eq!(a.as_ref(), b.as_ref());
    }

    #[test]
    fn identity_kernel_is_identity(values in prop::collection::vec(-5.0f64..5.0, 18), c in 1usize..4) {
        let n = values.len() / (3 * c);
        let x = Tensor::new(&[1, 3, n, c], values[..3 * n * c].to_vec()).unwrap();
        let k = Tensor::from_fn(&[1, 1, c, c], |i| if i / c == i % c { 1.0 } else { 0.0 });
        let g = Graph::<f64>::new();
        let y = g.leaf(x.clone()).conv2d(g.leaf(k)).unwrap();
        let a = y.value();
        prop_assert_eq!(a.as_ref(), &x);
    }
}
