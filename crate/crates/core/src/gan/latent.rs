use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `n` i.i.d. standard normal latent vectors as an `[n, dim]` tensor.
pub fn sample_latent(n: usize, dim: usize, seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&[n, dim], |_| StandardNormal.sample(&mut rng))
}

/// Spherical interpolation; linear when the vectors are nearly parallel.
pub fn slerp(z1: &[f32], z2: &[f32], t: f64) -> Result<Vec<f32>> {
    if z1.len() != z2.len() {
        return Err(Error::shape("slerp", format!("{} vs {}", z1.len(), z2.len())));
    }
    let n1 = z1.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    let n2 = z2.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot = z1.iter().zip(z2).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>();
    let theta = (dot / (n1 * n2)).clamp(-1.0, 1.0).acos();
    let (a, b) = if theta < 1e-4 {
        (1.0 - t, t)
    } else {
        let s = theta.sin();
        (((1.0 - t) * theta).sin() / s, (t * theta).sin() / s)
    };
    Ok(z1.iter().zip(z2).map(|(&x, &y)| (a * x as f64 + b * y as f64) as f32).collect())
}
