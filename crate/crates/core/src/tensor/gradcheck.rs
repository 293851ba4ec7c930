//! Finite-difference verification of graph gradients in f64.

use super::array::Tensor;
use super::graph::{Graph, Var};
use crate::error::Result;

/// Fixed pseudo-random projection weights so every output element contributes.
fn projection(n: usize) -> Tensor<f64> {
    Tensor::from_fn(&[n], |i| ((i as f64 + 1.0) * 0.7548776662).fract() * 2.0 - 1.0 + 0.1)
}

fn projected<'g>(graph: &'g Graph<f64>, out: Var<'g, f64>) -> Result<Var<'g, f64>> {
    let n = out.value().len();
    let w = graph.leaf(projection(n));
    out.reshape(&[n])?.mul(w).map(|p| p.sum_all())
}

/// Relative error `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)` for each input,
/// using central differences with step `eps`.
pub fn relative_errors<F>(f: F, inputs: &[Tensor<f64>], eps: f64) -> Result<Vec<f64>>
where
    F: for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Result<Var<'g, f64>>,
{
    let eval = |xs: &[Tensor<f64>]| -> Result<f64> {
        let g = Graph::new();
        let vars: Vec<_> = xs.iter().map(|x| g.leaf(x.clone())).collect();
        let out = f(&g, &vars)?;
        Ok(projected(&g, out)?.value().item())
    };

    let g = Graph::new();
    let vars: Vec<_> = inputs.iter().map(|x| g.leaf(x.clone())).collect();
    let loss = projected(&g, f(&g, &vars)?)?;
    let analytic = g.backward(loss, &vars)?;

    let mut errors = Vec::with_capacity(inputs.len());
    let mut xs = inputs.to_vec();
    for (k, a) in analytic.iter().enumerate() {
        let mut num = vec![0.0; xs[k].len()];
        for (i, slot) in num.iter_mut().enumerate() {
            let orig = xs[k].data()[i];
            xs[k].data_mut()[i] = orig + eps;
            let up = eval(&xs)?;
            xs[k].data_mut()[i] = orig - eps;
            let down = eval(&xs)?;
            xs[k].data_mut()[i] = orig;
            *slot = (up - down) / (2.0 * eps);
        }
        let num = Tensor::new(xs[k].shape(), num)?;
        let diff = Tensor::from_fn(a.shape(), |i| a.data()[i] - num.data()[i]).norm();
        let scale = a.norm().max(num.norm()).max(1e-8);
        errors.push(diff / scale);
    }
    Ok(errors)
}

/// Largest relative error over all inputs.
pub fn max_relative_error<F>(f: F, inputs: &[Tensor<f64>], eps: f64) -> Result<f64>
where
    F: for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Result<Var<'g, f64>>,
{
    Ok(relative_errors(f, inputs, eps)?.into_iter().fold(0.0, f64::max))
}
