use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const RIDGE: f64 = 1e-6;

fn gaussian(x: &Tensor<f32>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let &[n, d] = x.shape() else {
        return Err(Error::shape("fid", format!("features must be [n, d], got {:?}", x.shape())));
    };
    if n < 2 {
        return Err(Error::Invalid(format!("FID needs at least 2 samples per set, got {n}")));
    }
    let m = DMatrix::from_row_iterator(n, d, x.data().iter().map(|&v| v as f64));
    let mean = DVector::from_iterator(d, m.column_iter().map(|c| c.mean()));
    let mut centered = m;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
    if n <= d {
        cov += DMatrix::identity(d, d) * RIDGE;
    }
    Ok((mean, cov))
}

/// Symmetric PSD square root with negative eigenvalues clamped to zero.
fn sqrtm_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussians fitted to two feature sets `[n, d]`.
pub fn fid(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<f64> {
    if a.shape().get(1) != b.shape().get(1) {
        return Err(Error::shape("fid", format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let (ma, ca) = gaussian(a)?;
    let (mb, cb) = gaussian(b)?;
    Ok(frechet(&ma, &ca, &mb, &cb))
}

/// `‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa^½ Σb Σa^½)^½)`.
pub fn frechet(ma: &DVector<f64>, ca: &DMatrix<f64>, mb: &DVector<f64>, cb: &DMatrix<f64>) -> f64 {
    let ra = sqrtm_psd(ca);
    let cross = sqrtm_psd(&(&ra * cb * &ra));
    let d = (ma - mb).norm_squared() + ca.trace() + cb.trace() - 2.0 * cross.trace();
    d.max(0.0)
}
