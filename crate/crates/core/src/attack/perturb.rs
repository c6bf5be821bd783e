use crate::attack::config::AttackConfig;
use crate::attack::loss::{wgap_loss_parts, LossParts};
use crate::error::{Error, Result};
use crate::metrics::{cross_entropy_grad, ssim_dissimilarity_grad, SsimParams};
use crate::neural::{ClassifierNet, GeneratorNet, LossFn};
use crate::numerics::{gaussian_sample, Prng, Scalar, Tensor};
use crate::wavelet::{decompose, reconstruct, replace_details, DetailBands, FilterBank, Pyramid};

/// Anything that maps a generator input to a same-shaped tensor in [-1, 1].
/// The neural generator is the real implementation; tests substitute fixed
/// functions to pin the surrounding plumbing.
pub trait Generator<T: Scalar> {
    fn generate(&mut self, input: &Tensor<T>) -> Result<Tensor<T>>;
}

impl<T: Scalar> Generator<T> for GeneratorNet<T> {
    fn generate(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward(input)
    }
}

/// Concatenates the three oriented bands along channels: `[3c, h, w]` with
/// d1 first, then d2, then d3.
pub fn stack_details<T: Scalar>(bands: &DetailBands<T>) -> Tensor<T> {
    let shape = bands.shape();
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let mut out = Tensor::zeros(&[3 * c, h, w]);
    for (slot, band) in [&bands.d1, &bands.d2, &bands.d3].into_iter().enumerate() {
        for ch in 0..c {
            out.channel_mut(slot * c + ch).copy_from_slice(band.channel(ch));
        }
    }
    out
}

/// Inverse of [`stack_details`].
pub fn unstack_details<T: Scalar>(stack: &Tensor<T>) -> Result<DetailBands<T>> {
    if stack.rank() != 3 || stack.shape()[0] % 3 != 0 || stack.shape()[0] == 0 {
        return Err(Error::Shape(format!(
            "detail stack must be [3c, h, w], got {:?}",
            stack.shape()
        )));
    }
    let (c, h, w) = (stack.shape()[0] / 3, stack.shape()[1], stack.shape()[2]);
    let mut bands = DetailBands::zeros(&[c, h, w]);
    for (slot, band) in [&mut bands.d1, &mut bands.d2, &mut bands.d3]
        .into_iter()
        .enumerate()
    {
        for ch in 0..c {
            band.channel_mut(ch).copy_from_slice(stack.channel(slot * c + ch));
        }
    }
    Ok(bands)
}

/// Scaled detail edit shared by training and inference: the post-tanh output
/// is multiplied by the max-abs of the input details (so its amplitude is
/// commensurate with the coefficients it replaces), written into the level
/// `j0` bands, and the image is rebuilt. Returns the clamped adversarial
/// image and the raw reconstruction.
fn apply_detail_edit<T: Scalar>(
    pyramid: &Pyramid<T>,
    stack_in: &Tensor<T>,
    scale: T,
    y: &Tensor<T>,
    fb: &FilterBank<T>,
    cfg: &AttackConfig<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    y.check_same_shape(stack_in)?;
    let mut new_stack = y.scale(scale);
    if cfg.additive {
        new_stack.add_scaled(stack_in, T::one())?;
    }
    let bands = unstack_details(&new_stack)?;
    let edited = replace_details(pyramid, cfg.j0, &bands)?;
    let x_rec = reconstruct(&edited, fb)?;
    let x_adv = if cfg.clamp_output {
        x_rec.clamp01()
    } else {
        x_rec.clone()
    };
    Ok((x_adv, x_rec))
}

/// The detail stack divided by its own max-abs, so the generator always sees
/// coefficients on a fixed [-1, 1] range. The per-sample amplitude it must
/// not see is restored on the way out (the output is multiplied by the same
/// `scale`); without this split a purely convolutional net cannot express
/// the identity edit, because that would require dividing by a global
/// per-sample statistic.
fn normalized_input<T: Scalar>(stack_in: &Tensor<T>, scale: T) -> Tensor<T> {
    if scale > T::zero() {
        stack_in.scale(T::one() / scale)
    } else {
        stack_in.clone()
    }
}

/// Adversarial image from the wavelet attack, inference only.
///
/// A constant image has all-zero details, so `scale` is 0 and the output
/// equals the input: there is no coefficient amplitude to imitate.
pub fn perturb_wavelet<T: Scalar>(
    x: &Tensor<T>,
    generator: &mut dyn Generator<T>,
    fb: &FilterBank<T>,
    cfg: &AttackConfig<T>,
) -> Result<Tensor<T>> {
    let pyramid = decompose(x, cfg.j0, fb)?;
    let stack_in = stack_details(pyramid.details_at(cfg.j0)?);
    let scale = stack_in.max_abs();
    let y = generator.generate(&normalized_input(&stack_in, scale))?;
    Ok(apply_detail_edit(&pyramid, &stack_in, scale, &y, fb, cfg)?.0)
}

/// Pixel-domain perturbation: `clamp01(x + m * y / ||y||_inf)`. The output
/// of the generator is rescaled to max-abs exactly `m`; an all-zero output
/// leaves the image unchanged.
fn apply_pixel_edit<T: Scalar>(
    x: &Tensor<T>,
    y: &Tensor<T>,
    magnitude: T,
) -> Result<(Tensor<T>, Tensor<T>)> {
    x.check_same_shape(y)?;
    let norm = y.max_abs();
    let x_pre = if norm > T::zero() {
        let mut p = x.clone();
        p.add_scaled(y, magnitude / norm)?;
        p
    } else {
        x.clone()
    };
    Ok((x_pre.clamp01(), x_pre))
}

/// Adversarial image from the pixel-domain attack, inference only.
pub fn perturb_time<T: Scalar>(
    x: &Tensor<T>,
    generator: &mut dyn Generator<T>,
    cfg: &AttackConfig<T>,
) -> Result<Tensor<T>> {
    let y = generator.generate(x)?;
    Ok(apply_pixel_edit(x, &y, cfg.time_magnitude)?.0)
}

/// Norm-matched control: `clamp01(x + eps * ||x|| * u / ||u||)` with `u`
/// standard normal. Before clamping, the relative distance is exactly `eps`.
pub fn random_baseline<T: Scalar>(
    x: &Tensor<T>,
    epsilon: T,
    rng: &mut Prng,
) -> Result<Tensor<T>> {
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let x_norm = x.l2_norm();
    if x_norm == T::zero() {
        return Err(Error::Degenerate(
            "random baseline is undefined for an all-zero image".into(),
        ));
    }
    let u = gaussian_sample::<T>(rng, x.shape());
    let u_norm = u.l2_norm();
    let mut out = x.clone();
    if u_norm > T::zero() {
        out.add_scaled(&u, epsilon * x_norm / u_norm)?;
    }
    Ok(out.clamp01())
}

/// The differentiable chain `generator output -> detail edit -> image ->
/// frozen classifier -> budget-conditioned loss`, exposed as a loss over the
/// generator output so training and finite-difference checks share one
/// implementation.
///
/// Backward passes accumulate gradients into the classifier as a side
/// effect; the training loop discards them (the classifier is frozen).
pub struct WaveletPipeline<'a, T: Scalar> {
    x: &'a Tensor<T>,
    surrogate: &'a mut ClassifierNet<T>,
    fb: &'a FilterBank<T>,
    cfg: &'a AttackConfig<T>,
    least_likely: usize,
    pyramid: Pyramid<T>,
    stack_in: Tensor<T>,
    gen_in: Tensor<T>,
    scale: T,
}

impl<'a, T: Scalar> WaveletPipeline<'a, T> {
    pub fn new(
        x: &'a Tensor<T>,
        surrogate: &'a mut ClassifierNet<T>,
        fb: &'a FilterBank<T>,
        cfg: &'a AttackConfig<T>,
        least_likely: usize,
    ) -> Result<Self> {
        let pyramid = decompose(x, cfg.j0, fb)?;
        let stack_in = stack_details(pyramid.details_at(cfg.j0)?);
        let scale = stack_in.max_abs();
        let gen_in = normalized_input(&stack_in, scale);
        Ok(WaveletPipeline {
            x,
            surrogate,
            fb,
            cfg,
            least_likely,
            pyramid,
            stack_in,
            gen_in,
            scale,
        })
    }

    /// What the generator should be fed for this image: the detail stack at
    /// unit max-abs.
    pub fn generator_input(&self) -> &Tensor<T> {
        &self.gen_in
    }

    /// Adversarial image for a generator output.
    pub fn apply(&self, y: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.apply_full(y)?.0)
    }

    fn apply_full(&self, y: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        apply_detail_edit(&self.pyramid, &self.stack_in, self.scale, y, self.fb, self.cfg)
    }

    /// Loss decomposition and its gradient with respect to the generator
    /// output, in one pass.
    pub fn parts_and_grad(&mut self, y: &Tensor<T>) -> Result<(LossParts<T>, Tensor<T>)> {
        let (x_adv, x_rec) = self.apply_full(y)?;
        let probs = self.surrogate.forward(&x_adv)?;
        let parts = wgap_loss_parts(&x_adv, self.x, &probs, self.least_likely, self.cfg)?;

        let gp = cross_entropy_grad(&probs, self.least_likely)?;
        let mut gx = self.surrogate.backward(&gp)?;
        if parts.over_budget && self.cfg.penalty_weight > T::zero() {
            let gd = ssim_dissimilarity_grad(&x_adv, self.x, &SsimParams::default())?;
            gx.add_scaled(&gd, self.cfg.penalty_weight)?;
        }
        if self.cfg.clamp_output {
            // Regions the clamp saturated contribute nothing downstream.
            gx = gx.zip_map(&x_rec, |g, v| {
                if v < T::zero() || v > T::one() {
                    T::zero()
                } else {
                    g
                }
            })?;
        }
        // The adjoint of reconstruction, restricted to the level-j0 details,
        // is the forward analysis of the gradient image at those positions.
        let gpyr = decompose(&gx, self.cfg.j0, self.fb)?;
        let gstack = stack_details(gpyr.details_at(self.cfg.j0)?);
        Ok((parts, gstack.scale(self.scale)))
    }
}

impl<T: Scalar> LossFn<T> for WaveletPipeline<'_, T> {
    fn loss(&mut self, y: &Tensor<T>) -> Result<T> {
        let (x_adv, _) = self.apply_full(y)?;
        let probs = self.surrogate.forward(&x_adv)?;
        Ok(wgap_loss_parts(&x_adv, self.x, &probs, self.least_likely, self.cfg)?.total)
    }

    fn grad(&mut self, y: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.parts_and_grad(y)?.1)
    }
}

/// Pixel-domain counterpart of [`WaveletPipeline`]: `generator output ->
/// max-abs rescale -> add and clamp -> frozen classifier -> loss`.
pub struct TimePipeline<'a, T: Scalar> {
    x: &'a Tensor<T>,
    surrogate: &'a mut ClassifierNet<T>,
    cfg: &'a AttackConfig<T>,
    least_likely: usize,
}

impl<'a, T: Scalar> TimePipeline<'a, T> {
    pub fn new(
        x: &'a Tensor<T>,
        surrogate: &'a mut ClassifierNet<T>,
        cfg: &'a AttackConfig<T>,
        least_likely: usize,
    ) -> Self {
        TimePipeline {
            x,
            surrogate,
            cfg,
            least_likely,
        }
    }

    pub fn generator_input(&self) -> &Tensor<T> {
        self.x
    }

    pub fn parts_and_grad(&mut self, y: &Tensor<T>) -> Result<(LossParts<T>, Tensor<T>)> {
        let m = self.cfg.time_magnitude;
        let (x_adv, x_pre) = apply_pixel_edit(self.x, y, m)?;
        let probs = self.surrogate.forward(&x_adv)?;
        let parts = wgap_loss_parts(&x_adv, self.x, &probs, self.least_likely, self.cfg)?;

        let gp = cross_entropy_grad(&probs, self.least_likely)?;
        let mut gx = self.surrogate.backward(&gp)?;
        if parts.over_budget && self.cfg.penalty_weight > T::zero() {
            let gd = ssim_dissimilarity_grad(&x_adv, self.x, &SsimParams::default())?;
            gx.add_scaled(&gd, self.cfg.penalty_weight)?;
        }
        gx = gx.zip_map(&x_pre, |g, v| {
            if v < T::zero() || v > T::one() {
                T::zero()
            } else {
                g
            }
        })?;

        let norm = y.max_abs();
        if norm <= T::zero() {
            // Degenerate all-zero output: the perturbation vanished and so
            // does its derivative.
            return Ok((parts, y.zeros_like()));
        }
        // p = m y / ||y||_inf. The max coordinate carries an extra term from
        // differentiating the norm itself.
        let mut gy = gx.scale(m / norm);
        let k = y
            .data()
            .iter()
            .position(|v| v.abs() == norm)
            .expect("norm attained by construction");
        let sign = if y.data()[k] >= T::zero() { T::one() } else { -T::one() };
        let coupling = gx.dot(y)?;
        gy.data_mut()[k] -= m * sign * coupling / (norm * norm);
        Ok((parts, gy))
    }
}

impl<T: Scalar> LossFn<T> for TimePipeline<'_, T> {
    fn loss(&mut self, y: &Tensor<T>) -> Result<T> {
        let (x_adv, _) = apply_pixel_edit(self.x, y, self.cfg.time_magnitude)?;
        let probs = self.surrogate.forward(&x_adv)?;
        Ok(wgap_loss_parts(&x_adv, self.x, &probs, self.least_likely, self.cfg)?.total)
    }

    fn grad(&mut self, y: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.parts_and_grad(y)?.1)
    }
}
