use crate::attack::config::{AttackConfig, AttackMode};
use crate::attack::perturb::{TimePipeline, WaveletPipeline};
use crate::error::{Error, Result};
use crate::metrics::least_likely_class;
use crate::neural::{AdamState, ClassifierNet, GeneratorConfig, GeneratorNet};
use crate::numerics::{prng_stream, Scalar, Tensor};
use crate::wavelet::make_filterbank;

/// One optimizer step worth of telemetry, averaged over the batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainLogRow {
    /// 1-based.
    pub epoch: usize,
    /// 1-based within the epoch.
    pub iteration: usize,
    pub loss: f64,
    /// Fraction of batch samples whose realized distance exceeded epsilon.
    pub over_budget_frac: f64,
    /// Mean realized distance under the configured budget mode (relative L2
    /// by default).
    pub mean_rel_l2: f64,
}

/// A trained generator plus its per-iteration training log.
pub struct TrainedAttack<T: Scalar> {
    pub generator: GeneratorNet<T>,
    pub log: Vec<TrainLogRow>,
}

/// Trains a perturbation generator against a frozen classifier.
///
/// The classifier is only borrowed mutably because forward/backward passes
/// cache activations and leak parameter gradients; those gradients are
/// discarded every step and its weights never move.
///
/// Sampling is with replacement. All randomness derives from `cfg.seed`, so
/// equal inputs produce bitwise-equal generators.
pub fn train_attack<T: Scalar>(
    images: &[Tensor<T>],
    surrogate: &mut ClassifierNet<T>,
    cfg: &AttackConfig<T>,
) -> Result<TrainedAttack<T>> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::InvalidArgument("no training images".into()));
    }
    for x in images {
        if x.shape() != surrogate.input_shape {
            return Err(Error::Shape(format!(
                "image shape {:?} does not match classifier input {:?}",
                x.shape(),
                surrogate.input_shape
            )));
        }
    }

    let fb = make_filterbank::<T>(&cfg.wavelet)?;
    let mut root = prng_stream(cfg.seed);
    let mut init_rng = root.split();
    let mut batch_rng = root.split();

    let channels = match cfg.mode {
        AttackMode::Wavelet => 3 * surrogate.input_shape[0],
        AttackMode::Time => surrogate.input_shape[0],
    };
    let gcfg = GeneratorConfig {
        channels,
        base_filters: cfg.base_filters,
        res_blocks: cfg.res_blocks,
    };
    let mut generator = GeneratorNet::new(&gcfg, &mut init_rng);
    let mut adam = AdamState::new(cfg.learning_rate, cfg.beta1, cfg.beta2);

    // Attack targets are fixed before training: the least-likely class of
    // each clean image under the frozen classifier.
    let mut targets = Vec::with_capacity(images.len());
    for x in images {
        let probs = surrogate.forward(x)?;
        targets.push(least_likely_class(&probs)?);
    }

    // The loss keeps its shape across the whole run; only the penalty weight
    // is scheduled (reconstruction-heavy early, attack-led after the warmup).
    let warm_cfg = AttackConfig {
        penalty_weight: cfg.warmup_penalty,
        ..cfg.clone()
    };

    let mut log = Vec::with_capacity(cfg.epochs * cfg.iterations);
    for epoch in 1..=cfg.epochs {
        let cfg_eff = if epoch <= cfg.warmup_epochs { &warm_cfg } else { cfg };
        for iteration in 1..=cfg.iterations {
            generator.net.zero_grads();
            let mut loss_sum = 0.0;
            let mut over_count = 0usize;
            let mut dist_sum = 0.0;

            for _ in 0..cfg.batch_size {
                let idx = batch_rng.below(images.len());
                let x = &images[idx];
                let parts = match cfg.mode {
                    AttackMode::Wavelet => {
                        let mut pipe =
                            WaveletPipeline::new(x, surrogate, &fb, cfg_eff, targets[idx])?;
                        let input = pipe.generator_input().clone();
                        let y = generator.forward(&input)?;
                        let (parts, gy) = pipe.parts_and_grad(&y)?;
                        generator.backward(&gy)?;
                        parts
                    }
                    AttackMode::Time => {
                        let mut pipe = TimePipeline::new(x, surrogate, cfg_eff, targets[idx]);
                        let y = generator.forward(x)?;
                        let (parts, gy) = pipe.parts_and_grad(&y)?;
                        generator.backward(&gy)?;
                        parts
                    }
                };
                let total = parts.total.into_f64();
                if !total.is_finite() {
                    return Err(Error::Degenerate(format!(
                        "non-finite loss at epoch {epoch} iteration {iteration}"
                    )));
                }
                loss_sum += total;
                over_count += usize::from(parts.over_budget);
                dist_sum += parts.distance.into_f64();
            }

            // The classifier is frozen: the gradients backprop leaked into it
            // are dead weight.
            surrogate.zero_grads();
            let batch = T::cast(cfg.batch_size as f64);
            generator.net.scale_grads(T::one() / batch);
            adam.step(generator.net.params_mut())?;

            let b = cfg.batch_size as f64;
            log.push(TrainLogRow {
                epoch,
                iteration,
                loss: loss_sum / b,
                over_budget_frac: over_count as f64 / b,
                mean_rel_l2: dist_sum / b,
            });
        }
    }

    Ok(TrainedAttack { generator, log })
}
