//! Perceptual distortion, budget, and attack-success metrics.

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

/// Stabilizers for the structural-similarity score, derived from the dynamic
/// range `L` of the pixel values: `c1 = (0.01 L)^2`, `c2 = (0.03 L)^2`.
#[derive(Clone, Copy, Debug)]
pub struct SsimParams<T> {
    pub c1: T,
    pub c2: T,
    pub dynamic_range: T,
}

impl<T: Scalar> SsimParams<T> {
    pub fn for_range(l: f64) -> Self {
        SsimParams {
            c1: T::cast((0.01 * l) * (0.01 * l)),
            c2: T::cast((0.03 * l) * (0.03 * l)),
            dynamic_range: T::cast(l),
        }
    }
}

impl<T: Scalar> Default for SsimParams<T> {
    /// Unit dynamic range: images live in `[0, 1]`.
    fn default() -> Self {
        Self::for_range(1.0)
    }
}

struct ChannelMoments<T> {
    mean_x: T,
    mean_y: T,
    var_x: T,
    var_y: T,
    cov: T,
}

fn moments<T: Scalar>(x: &[T], y: &[T]) -> ChannelMoments<T> {
    let n = T::cast(x.len() as f64);
    let mean_x = x.iter().copied().sum::<T>() / n;
    let mean_y = y.iter().copied().sum::<T>() / n;
    let mut var_x = T::zero();
    let mut var_y = T::zero();
    let mut cov = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        var_x += dx * dx;
        var_y += dy * dy;
        cov += dx * dy;
    }
    ChannelMoments {
        mean_x,
        mean_y,
        var_x: var_x / n,
        var_y: var_y / n,
        cov: cov / n,
    }
}

fn check_image_pair<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>) -> Result<()> {
    x.check_same_shape(y)?;
    if x.rank() != 3 || x.is_empty() {
        return Err(Error::Shape(format!(
            "expected nonempty [channels, height, width] images, got shape {:?}",
            x.shape()
        )));
    }
    Ok(())
}

/// `1 - SSIM(x_adv, x)` with one set of global moments per channel, averaged
/// over channels. Zero iff the images agree; grows toward 2 as structure
/// anticorrelates.
pub fn ssim_dissimilarity<T: Scalar>(
    x_adv: &Tensor<T>,
    x: &Tensor<T>,
    params: &SsimParams<T>,
) -> Result<T> {
    check_image_pair(x_adv, x)?;
    let channels = x.shape()[0];
    let mut score = T::zero();
    for c in 0..channels {
        let m = moments(x_adv.channel(c), x.channel(c));
        let a1 = T::cast(2.0) * m.mean_x * m.mean_y + params.c1;
        let a2 = T::cast(2.0) * m.cov + params.c2;
        let b1 = m.mean_x * m.mean_x + m.mean_y * m.mean_y + params.c1;
        let b2 = m.var_x + m.var_y + params.c2;
        score += (a1 * a2) / (b1 * b2);
    }
    Ok(T::one() - score / T::cast(channels as f64))
}

/// Analytic gradient of [`ssim_dissimilarity`] with respect to `x_adv`.
pub fn ssim_dissimilarity_grad<T: Scalar>(
    x_adv: &Tensor<T>,
    x: &Tensor<T>,
    params: &SsimParams<T>,
) -> Result<Tensor<T>> {
    check_image_pair(x_adv, x)?;
    let channels = x.shape()[0];
    let mut grad = x_adv.zeros_like();
    let two = T::cast(2.0);
    let chan_scale = T::cast(channels as f64);
    for c in 0..channels {
        let xs = x_adv.channel(c);
        let ys = x.channel(c);
        let m = moments(xs, ys);
        let n = T::cast(xs.len() as f64);
        let a1 = two * m.mean_x * m.mean_y + params.c1;
        let a2 = two * m.cov + params.c2;
        let b1 = m.mean_x * m.mean_x + m.mean_y * m.mean_y + params.c1;
        let b2 = m.var_x + m.var_y + params.c2;
        let denom = b1 * b2;
        let s = (a1 * a2) / denom;
        let gout = grad.channel_mut(c);
        for (i, (&xi, &yi)) in xs.iter().zip(ys).enumerate() {
            // Per-element derivatives of the four factors.
            let da1 = two * m.mean_y / n;
            let da2 = two * (yi - m.mean_y) / n;
            let db1 = two * m.mean_x / n;
            let db2 = two * (xi - m.mean_x) / n;
            let ds = (da1 * a2 + a1 * da2) / denom - s * (db1 / b1 + db2 / b2);
            // D = 1 - mean_c S_c.
            gout[i] = -ds / chan_scale;
        }
    }
    Ok(grad)
}

/// `||x_adv - x||_2 / ||x||_2`. The reference image must be nonzero.
pub fn relative_l2<T: Scalar>(x_adv: &Tensor<T>, x: &Tensor<T>) -> Result<T> {
    x_adv.check_same_shape(x)?;
    let norm = x.l2_norm();
    if norm == T::zero() {
        return Err(Error::Degenerate(
            "relative L2 is undefined against an all-zero reference".into(),
        ));
    }
    Ok(x_adv.sub(x)?.l2_norm() / norm)
}

fn check_probs<T: Scalar>(probs: &Tensor<T>) -> Result<()> {
    if probs.rank() != 1 || probs.is_empty() {
        return Err(Error::Probability(format!(
            "expected a nonempty rank-1 vector, got shape {:?}",
            probs.shape()
        )));
    }
    let mut sum = T::zero();
    for &p in probs.data() {
        if !p.is_finite() || p < T::cast(-1e-9) || p > T::cast(1.0 + 1e-9) {
            return Err(Error::Probability(format!("entry {p} outside [0, 1]")));
        }
        sum += p;
    }
    if (sum - T::one()).abs() > T::cast(1e-6) {
        return Err(Error::Probability(format!("entries sum to {sum}, not 1")));
    }
    Ok(())
}

/// `-ln(max(p[target], 1e-12))` on an already-normalized probability vector.
pub fn cross_entropy<T: Scalar>(probs: &Tensor<T>, target: usize) -> Result<T> {
    check_probs(probs)?;
    if target >= probs.len() {
        return Err(Error::InvalidArgument(format!(
            "target class {target} out of range for {} classes",
            probs.len()
        )));
    }
    Ok(-probs.data()[target].max(T::cast(1e-12)).ln())
}

/// Gradient of [`cross_entropy`] with respect to the probability vector:
/// `-1/p` at the target (with the same floor), zero elsewhere. Pushed through
/// a softmax backward pass this yields the familiar `p - onehot` at the
/// logits.
pub fn cross_entropy_grad<T: Scalar>(probs: &Tensor<T>, target: usize) -> Result<Tensor<T>> {
    check_probs(probs)?;
    if target >= probs.len() {
        return Err(Error::InvalidArgument(format!(
            "target class {target} out of range for {} classes",
            probs.len()
        )));
    }
    let mut grad = probs.zeros_like();
    let p = probs.data()[target].max(T::cast(1e-12));
    grad.data_mut()[target] = -T::one() / p;
    Ok(grad)
}

/// Index of the smallest probability; ties break to the lowest index.
pub fn least_likely_class<T: Scalar>(probs: &Tensor<T>) -> Result<usize> {
    check_probs(probs)?;
    let mut best = 0;
    for (i, &p) in probs.data().iter().enumerate().skip(1) {
        if p < probs.data()[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Fraction of positions where the two label sequences disagree. Used both
/// for prediction change (reference = clean predictions) and for
/// misclassification against ground truth (reference = true labels).
pub fn fooling_ratio(reference: &[usize], predictions: &[usize]) -> Result<f64> {
    if reference.len() != predictions.len() {
        return Err(Error::Shape(format!(
            "label sequences differ in length: {} vs {}",
            reference.len(),
            predictions.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::Degenerate("fooling ratio over zero samples".into()));
    }
    let changed = reference
        .iter()
        .zip(predictions)
        .filter(|(a, b)| a != b)
        .count();
    Ok(changed as f64 / reference.len() as f64)
}

/// One evaluation row: a (model, defense) cell of the results grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub defense: String,
    /// Fraction of samples whose prediction changed relative to the clean
    /// prediction of the same model.
    pub fooling_ratio: f64,
    /// Fraction of samples misclassified against ground truth.
    pub fool_vs_truth: f64,
    pub mean_rel_l2: f64,
    pub mean_ssim_d: f64,
    pub n: usize,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str =
        "model,defense,fooling_ratio,fool_vs_truth,mean_rel_l2,mean_ssim_d,n";

    /// Fixed-precision row under [`Self::CSV_HEADER`]. Model and defense
    /// names must not contain commas.
    pub fn csv_row(&self) -> String {
        debug_assert!(!self.model.contains(',') && !self.defense.contains(','));
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{}",
            self.model,
            self.defense,
            self.fooling_ratio,
            self.fool_vs_truth,
            self.mean_rel_l2,
            self.mean_ssim_d,
            self.n
        )
    }
}
