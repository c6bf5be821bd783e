use crate::error::{Error, Result};
use crate::neural::Param;
use crate::numerics::{Scalar, Tensor};

/// Adam with bias correction. Moment buffers are allocated on the first
/// step and tied to the parameter list passed there; later steps must pass
/// the same parameters in the same order.
pub struct AdamState<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    t: u32,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        assert!(lr > 0.0 && (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2));
        AdamState {
            lr: T::cast(lr),
            beta1: T::cast(beta1),
            beta2: T::cast(beta2),
            eps: T::cast(1e-8),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u32 {
        self.t
    }

    /// Applies one update from the gradients currently held in `params`.
    pub fn step(&mut self, mut params: Vec<&mut Param<T>>) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| p.value.zeros_like()).collect();
            self.v = params.iter().map(|p| p.value.zeros_like()).collect();
        }
        if params.len() != self.m.len() {
            return Err(Error::Usage(format!(
                "optimizer tracks {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        self.t += 1;
        let one = T::one();
        let bc1 = one - self.beta1.powi(self.t as i32);
        let bc2 = one - self.beta2.powi(self.t as i32);
        for (i, p) in params.iter_mut().enumerate() {
            if p.value.shape() != self.m[i].shape() {
                return Err(Error::Usage(format!(
                    "parameter `{}` changed shape under the optimizer",
                    p.name
                )));
            }
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for ((val, &g), (mi, vi)) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(p.grad.data())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mi = self.beta1 * *mi + (one - self.beta1) * g;
                *vi = self.beta2 * *vi + (one - self.beta2) * g * g;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *val -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(value: f64) -> Param<f64> {
        Param::new("p", Tensor::from_vec(&[2], vec![value, -value]).unwrap())
    }

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        let lr = 0.002;
        let mut opt = AdamState::new(lr, 0.5, 0.999);
        let mut p = single_param(1.0);
        p.grad = Tensor::from_vec(&[2], vec![0.37, -5.0]).unwrap();
        opt.step(vec![&mut p]).unwrap();
        // With bias correction the first update is -lr * g / (|g| + eps).
        assert!((p.value.data()[0] - (1.0 - lr)).abs() < 1e-9);
        assert!((p.value.data()[1] - (-1.0 + lr)).abs() < 1e-9);
    }

    #[test]
    fn converges_on_a_quadratic() {
        let mut opt = AdamState::new(0.1, 0.9, 0.999);
        let mut p = Param::new("q", Tensor::<f64>::from_vec(&[1], vec![-4.0]).unwrap());
        for _ in 0..800 {
            let x = p.value.data()[0];
            p.grad.data_mut()[0] = 2.0 * (x - 3.0);
            opt.step(vec![&mut p]).unwrap();
        }
        assert!((p.value.data()[0] - 3.0).abs() < 0.01);
    }

    #[test]
    fn rejects_parameter_list_changes() {
        let mut opt = AdamState::new(0.01, 0.9, 0.999);
        let mut p = single_param(0.0);
        opt.step(vec![&mut p]).unwrap();
        let mut q = single_param(0.0);
        assert!(opt.step(vec![&mut p, &mut q]).is_err());
    }
}
