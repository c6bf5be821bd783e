use crate::error::Result;
use crate::metrics;
use crate::neural::Network;
use crate::numerics::{Scalar, Tensor};

/// Differentiable scalar objective over a network output. Implementations
/// must be pure: repeated calls on equal inputs return equal values.
pub trait LossFn<T: Scalar> {
    fn loss(&mut self, y: &Tensor<T>) -> Result<T>;

    /// Gradient of [`LossFn::loss`] with respect to `y`.
    fn grad(&mut self, y: &Tensor<T>) -> Result<Tensor<T>>;
}

/// `0.5 ||y - target||^2`.
pub struct QuadraticLoss<T> {
    pub target: Tensor<T>,
}

impl<T: Scalar> LossFn<T> for QuadraticLoss<T> {
    fn loss(&mut self, y: &Tensor<T>) -> Result<T> {
        Ok(y.sub(&self.target)?.sq_sum() * T::cast(0.5))
    }

    fn grad(&mut self, y: &Tensor<T>) -> Result<Tensor<T>> {
        y.sub(&self.target)
    }
}

/// Cross-entropy against a fixed class, for probability-vector outputs.
pub struct CrossEntropyLoss {
    pub target: usize,
}

impl<T: Scalar> LossFn<T> for CrossEntropyLoss {
    fn loss(&mut self, y: &Tensor<T>) -> Result<T> {
        metrics::cross_entropy(y, self.target)
    }

    fn grad(&mut self, y: &Tensor<T>) -> Result<Tensor<T>> {
        metrics::cross_entropy_grad(y, self.target)
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// Location of the worst disagreement, for diagnostics.
    pub worst: String,
}

/// Below this scale the comparison is effectively absolute: central
/// differences carry ~1e-9 of cancellation noise on O(1) losses, which would
/// swamp a relative comparison of near-zero gradients.
const REL_FLOOR: f64 = 1e-4;

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares every parameter gradient of `net` under `loss` against central
/// differences with the given step. The network must be deterministic.
pub fn grad_check<T: Scalar>(
    net: &mut Network<T>,
    x: &Tensor<T>,
    loss: &mut dyn LossFn<T>,
    step: f64,
) -> Result<GradCheckReport> {
    net.zero_grads();
    let y = net.forward(x)?;
    let g = loss.grad(&y)?;
    net.backward(&g)?;
    let analytic: Vec<(String, Vec<f64>)> = net
        .params()
        .iter()
        .map(|p| {
            (
                p.name.clone(),
                p.grad.data().iter().map(|&v| v.into_f64()).collect(),
            )
        })
        .collect();

    let h = T::cast(step);
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: String::new(),
    };
    for pi in 0..analytic.len() {
        for i in 0..analytic[pi].1.len() {
            let orig = net.params()[pi].value.data()[i];
            net.params_mut()[pi].value.data_mut()[i] = orig + h;
            let up = loss.loss(&net.forward(x)?)?.into_f64();
            net.params_mut()[pi].value.data_mut()[i] = orig - h;
            let down = loss.loss(&net.forward(x)?)?.into_f64();
            net.params_mut()[pi].value.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let err = rel_err(analytic[pi].1[i], numeric);
            report.checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = format!(
                    "{}[{}]: analytic {} vs numeric {}",
                    analytic[pi].0, i, analytic[pi].1[i], numeric
                );
            }
        }
    }
    Ok(report)
}

/// Same comparison for the gradient that `backward` returns with respect to
/// the network input.
pub fn grad_check_input<T: Scalar>(
    net: &mut Network<T>,
    x: &Tensor<T>,
    loss: &mut dyn LossFn<T>,
    step: f64,
) -> Result<GradCheckReport> {
    net.zero_grads();
    let y = net.forward(x)?;
    let g = loss.grad(&y)?;
    let analytic = net.backward(&g)?;

    let mut probe = x.clone();
    let h = T::cast(step);
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: String::new(),
    };
    for i in 0..probe.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = loss.loss(&net.forward(&probe)?)?.into_f64();
        probe.data_mut()[i] = orig - h;
        let down = loss.loss(&net.forward(&probe)?)?.into_f64();
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let err = rel_err(analytic.data()[i].into_f64(), numeric);
        report.checked += 1;
        if err > report.max_rel_err {
            report.max_rel_err = err;
            report.worst = format!(
                "input[{}]: analytic {} vs numeric {}",
                i,
                analytic.data()[i],
                numeric
            );
        }
    }
    Ok(report)
}
