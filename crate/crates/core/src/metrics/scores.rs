use crate::error::{Error, Result};
use crate::tensor::Tensor;

const SIMPLEX_TOL: f64 = 1e-4;

fn rows(probs: &Tensor<f32>) -> Result<(usize, usize)> {
    match probs.shape() {
        [n, c] if *n > 0 && *c > 0 => Ok((*n, *c)),
        s => Err(Error::shape("probabilities", format!("expected non-empty [n, classes], got {s:?}"))),
    }
}

/// Rows as f64, checked to lie on the probability simplex.
fn simplex_rows(probs: &Tensor<f32>) -> Result<Vec<Vec<f64>>> {
    let (_, c) = rows(probs)?;
    probs
        .data()
        .chunks(c)
        .enumerate()
        .map(|(i, r)| {
            let r: Vec<f64> = r.iter().map(|&v| v as f64).collect();
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL || r.iter().any(|&v| v < -1e-7 || !v.is_finite()) {
                return Err(Error::NotSimplex { row: i, sum });
            }
            Ok(r)
        })
        .collect()
}

fn mean_row(rows: &[Vec<f64>]) -> Vec<f64> {
    let c = rows[0].len();
    let mut m = vec![0.0; c];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|v| *v /= rows.len() as f64);
    m
}

/// `exp(mean_i KL(p_i ‖ p̄))` with `p̄` the mean row.
pub fn inception_score(probs: &Tensor<f32>) -> Result<f64> {
    let rows = simplex_rows(probs)?;
    let marginal = mean_row(&rows);
    let kl: f64 = rows
        .iter()
        .map(|r| r.iter().zip(&marginal).filter(|(p, _)| **p > 0.0).map(|(p, q)| p * (p / q).ln()).sum::<f64>())
        .sum::<f64>()
        / rows.len() as f64;
    Ok(kl.exp())
}

/// Fraction of rows whose argmax equals the label.
pub fn pitch_accuracy(probs: &Tensor<f32>, labels: &[usize]) -> Result<f64> {
    let (n, c) = rows(probs)?;
    if labels.len() != n {
        return Err(Error::shape("pitch_accuracy", format!("{n} rows, {} labels", labels.len())));
    }
    let hits = probs.data().chunks(c).zip(labels).filter(|(r, &l)| argmax(r) == l).count();
    Ok(hits as f64 / n as f64)
}

/// Entropy in nats of the mean predicted distribution.
pub fn pitch_entropy(probs: &Tensor<f32>) -> Result<f64> {
    let rows = simplex_rows(probs)?;
    Ok(entropy(&mean_row(&rows)))
}

/// Mean over rows of each row's own entropy, in nats.
pub fn mean_example_entropy(probs: &Tensor<f32>) -> Result<f64> {
    let rows = simplex_rows(probs)?;
    Ok(rows.iter().map(|r| entropy(r)).sum::<f64>() / rows.len() as f64)
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

pub fn argmax(row: &[f32]) -> usize {
    row.iter().enumerate().fold((0, f32::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best }).0
}
