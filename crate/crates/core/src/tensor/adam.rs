use super::array::Tensor;
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Adam with bias correction; defaults follow the progressive-GAN setting.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.0, beta2: 0.99, eps: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Tensor<T>], &[Tensor<T>]) {
        (&self.m, &self.v)
    }

    /// Restore moment buffers and the step counter, e.g. after loading a checkpoint.
    pub fn restore(&mut self, step: u64, m: Vec<Tensor<T>>, v: Vec<Tensor<T>>) -> Result<()> {
        if m.len() != v.len() || m.iter().zip(&v).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::shape("adam_restore", "first and second moments disagree"));
        }
        self.step = step;
        self.m = m;
        self.v = v;
        Ok(())
    }

    /// Apply one update in place.
    pub fn update(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape("adam_step", format!("{} params vs {} grads", params.len(), grads.len())));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::shape("adam_step", format!("param {:?} vs grad {:?}", p.shape(), g.shape())));
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, p)| m.shape() != p.shape()) {
            return Err(Error::shape("adam_step", "parameter list changed since the previous step"));
        }
        self.step += 1;
        let t = self.step as f64;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::lit(1.0 - self.beta1.powf(t));
        let c2 = T::lit(1.0 - self.beta2.powf(t));
        let lr = T::lit(self.lr);
        let eps = T::lit(self.eps);
        let one = T::one();
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let pd = p.data_mut();
            for (((pi, &gi), mi), vi) in pd.iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                let mh = *mi / c1;
                let vh = *vi / c2;
                *pi -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::<f64>::from_fn(&[4], |i| i as f64);
        let before = p.clone();
        let mut opt = Adam::new(0.1);
        opt.update(&mut [&mut p], &[Tensor::zeros(&[4])]).unwrap();
        assert_eq!(p, before);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for (b1, b2) in [(0.0, 0.99), (0.9, 0.999)] {
            let mut p = Tensor::<f64>::zeros(&[3]);
            let mut opt = Adam::new(0.01).with_betas(b1, b2);
            opt.update(&mut [&mut p], &[Tensor::from_f64(&[3], &[0.5, -2.0, 7.0]).unwrap()]).unwrap();
            assert!((p.data()[0] + 0.01).abs() < 1e-8);
            assert!((p.data()[1] - 0.01).abs() < 1e-8);
            assert!((p.data()[2] + 0.01).abs() < 1e-8);
        }
    }

    #[test]
    fn counter_increments_once_per_call() {
        let mut p = Tensor::<f32>::zeros(&[2]);
        let mut opt = Adam::new(1e-3);
        for i in 1..=5 {
            opt.update(&mut [&mut p], &[Tensor::ones(&[2])]).unwrap();
            assert_eq!(opt.step_count(), i);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = Tensor::<f32>::zeros(&[2]);
        assert!(Adam::new(1e-3).update(&mut [&mut p], &[Tensor::ones(&[3])]).is_err());
    }
}
