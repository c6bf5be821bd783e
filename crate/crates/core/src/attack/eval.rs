use crate::attack::config::{AttackConfig, AttackMode};
use crate::attack::perturb::{perturb_time, perturb_wavelet, random_baseline, Generator};
use crate::defense::DefenseSpec;
use crate::error::{Error, Result};
use crate::metrics::{fooling_ratio, relative_l2, ssim_dissimilarity, EvalReport, SsimParams};
use crate::neural::ClassifierNet;
use crate::numerics::{prng_stream, Scalar, Tensor};
use crate::wavelet::make_filterbank;

/// Seed salt for the random-baseline control so it never shares a stream
/// with training or defenses.
const BASELINE_SALT: u64 = 0x52414E44;

/// Full evaluation grid plus the per-sample distortion distribution of the
/// undefended attack.
#[derive(Clone, Debug)]
pub struct EvaluationOutcome {
    /// Two rows per (defense, model) cell: the attack under the model's own
    /// name and the norm-matched random control under `name:random-baseline`.
    pub reports: Vec<EvalReport>,
    pub per_sample_rel_l2: Vec<f64>,
    pub per_sample_ssim_d: Vec<f64>,
}

/// Runs a trained generator over a test set and scores every model under
/// every defense (plus the undefended "none" column).
///
/// Fooling is measured against each model's own clean predictions on the
/// raw images; `fool_vs_truth` is measured against `labels`. Distortion
/// statistics describe the undefended adversarials: defenses alter what the
/// model sees, not what the attacker pays.
pub fn evaluate_attack<T: Scalar>(
    generator: &mut dyn Generator<T>,
    models: &mut [&mut ClassifierNet<T>],
    images: &[Tensor<T>],
    labels: &[usize],
    cfg: &AttackConfig<T>,
    defenses: &[DefenseSpec<T>],
) -> Result<EvaluationOutcome> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::InvalidArgument("no evaluation images".into()));
    }
    if images.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    if models.is_empty() {
        return Err(Error::InvalidArgument("no models to evaluate".into()));
    }

    let fb = make_filterbank::<T>(&cfg.wavelet)?;
    let mut advs = Vec::with_capacity(images.len());
    for x in images {
        let adv = match cfg.mode {
            AttackMode::Wavelet => perturb_wavelet(x, generator, &fb, cfg)?,
            AttackMode::Time => perturb_time(x, generator, cfg)?,
        };
        advs.push(adv);
    }

    let mut rand_rng = prng_stream(cfg.seed ^ BASELINE_SALT);
    let mut rands = Vec::with_capacity(images.len());
    for x in images {
        rands.push(random_baseline(x, cfg.epsilon, &mut rand_rng)?);
    }

    let mut per_sample_rel_l2 = Vec::with_capacity(images.len());
    let mut per_sample_ssim_d = Vec::with_capacity(images.len());
    for (x, adv) in images.iter().zip(&advs) {
        per_sample_rel_l2.push(relative_l2(adv, x)?.into_f64());
        per_sample_ssim_d.push(ssim_dissimilarity(adv, x, &SsimParams::default())?.into_f64());
    }
    let n = images.len() as f64;
    let mean_rel_l2 = per_sample_rel_l2.iter().sum::<f64>() / n;
    let mean_ssim_d = per_sample_ssim_d.iter().sum::<f64>() / n;

    let mut clean_preds = Vec::with_capacity(models.len());
    for model in models.iter_mut() {
        let preds = predict_all(model, images)?;
        clean_preds.push(preds);
    }

    let mut reports = Vec::new();
    let score_batch = |models: &mut [&mut ClassifierNet<T>],
                           clean: &[Vec<usize>],
                           batch: &[Tensor<T>],
                           defense: &str,
                           suffix: &str,
                           reports: &mut Vec<EvalReport>|
     -> Result<()> {
        for (model, clean) in models.iter_mut().zip(clean) {
            let preds = predict_all(model, batch)?;
            reports.push(EvalReport {
                model: format!("{}{}", model.kind.model_name(), suffix),
                defense: defense.to_string(),
                fooling_ratio: fooling_ratio(clean, &preds)?,
                fool_vs_truth: fooling_ratio(labels, &preds)?,
                mean_rel_l2,
                mean_ssim_d,
                n: images.len(),
            });
        }
        Ok(())
    };

    score_batch(models, &clean_preds, &advs, "none", "", &mut reports)?;
    score_batch(models, &clean_preds, &rands, "none", ":random-baseline", &mut reports)?;
    for defense in defenses {
        let defended_advs = defense.apply(&advs)?;
        let defended_rands = defense.apply(&rands)?;
        let dname = defense.name();
        score_batch(models, &clean_preds, &defended_advs, &dname, "", &mut reports)?;
        score_batch(
            models,
            &clean_preds,
            &defended_rands,
            &dname,
            ":random-baseline",
            &mut reports,
        )?;
    }

    Ok(EvaluationOutcome {
        reports,
        per_sample_rel_l2,
        per_sample_ssim_d,
    })
}

fn predict_all<T: Scalar>(
    model: &mut ClassifierNet<T>,
    images: &[Tensor<T>],
) -> Result<Vec<usize>> {
    images.iter().map(|x| model.predict(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::ClassifierKind;
    use crate::numerics::prng_stream;

    struct EchoGenerator;

    impl Generator<f64> for EchoGenerator {
        fn generate(&mut self, input: &Tensor<f64>) -> Result<Tensor<f64>> {
            let m = input.max_abs();
            Ok(if m > 0.0 { input.scale(1.0 / m) } else { input.clone() })
        }
    }

    fn setup() -> (Vec<Tensor<f64>>, Vec<usize>, ClassifierNet<f64>, ClassifierNet<f64>) {
        let mut rng = prng_stream(20);
        let images: Vec<_> = (0..6)
            .map(|_| {
                Tensor::from_vec(
                    &[1, 16, 16],
                    (0..256).map(|_| rng.uniform_in(0.1, 0.9)).collect(),
                )
                .unwrap()
            })
            .collect();
        let labels = vec![0, 1, 2, 0, 1, 2];
        let surrogate =
            ClassifierNet::new(ClassifierKind::Surrogate, [1, 16, 16], 3, &mut rng).unwrap();
        let transfer =
            ClassifierNet::new(ClassifierKind::TransferTarget, [1, 16, 16], 3, &mut rng).unwrap();
        (images, labels, surrogate, transfer)
    }

    #[test]
    fn grid_has_two_rows_per_model_and_defense() {
        let (images, labels, mut surrogate, mut transfer) = setup();
        let cfg = AttackConfig::<f64>::default();
        let defenses = vec![
            DefenseSpec::Jpeg { quality: 75 },
            DefenseSpec::WaveletDenoise {
                tau: 0.02,
                wavelet: "db2".into(),
                levels: 1,
            },
        ];
        let mut models: Vec<&mut ClassifierNet<f64>> = vec![&mut surrogate, &mut transfer];
        let out = evaluate_attack(
            &mut EchoGenerator,
            &mut models,
            &images,
            &labels,
            &cfg,
            &defenses,
        )
        .unwrap();
        // (1 none + 2 defenses) x 2 models x (attack + control).
        assert_eq!(out.reports.len(), 12);
        assert_eq!(out.per_sample_rel_l2.len(), images.len());
        assert_eq!(out.per_sample_ssim_d.len(), images.len());
        let names: Vec<_> = out
            .reports
            .iter()
            .map(|r| (r.model.clone(), r.defense.clone()))
            .collect();
        assert!(names.contains(&("surrogate".into(), "none".into())));
        assert!(names.contains(&("surrogate:random-baseline".into(), "jpeg_q75".into())));
        assert!(names.contains(&("transfer_target".into(), "denoise_t0.02_db2_l1".into())));
    }

    #[test]
    fn identity_attack_fools_nothing() {
        let (images, labels, mut surrogate, _) = setup();
        let cfg = AttackConfig::<f64>::default();
        let mut models: Vec<&mut ClassifierNet<f64>> = vec![&mut surrogate];
        let out = evaluate_attack(
            &mut EchoGenerator,
            &mut models,
            &images,
            &labels,
            &cfg,
            &[],
        )
        .unwrap();
        let attack_row = &out.reports[0];
        assert_eq!(attack_row.model, "surrogate");
        assert_eq!(attack_row.fooling_ratio, 0.0);
        assert!(attack_row.mean_rel_l2 < 1e-9);
        for v in &out.per_sample_rel_l2 {
            assert!(*v < 1e-9);
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let (images, labels, mut surrogate, _) = setup();
        let cfg = AttackConfig::<f64>::default();
        let defenses = vec![DefenseSpec::Randomization {
            min_ratio: 0.85,
            seed: 3,
        }];
        let mut models: Vec<&mut ClassifierNet<f64>> = vec![&mut surrogate];
        let a = evaluate_attack(
            &mut EchoGenerator,
            &mut models,
            &images,
            &labels,
            &cfg,
            &defenses,
        )
        .unwrap();
        let b = evaluate_attack(
            &mut EchoGenerator,
            &mut models,
            &images,
            &labels,
            &cfg,
            &defenses,
        )
        .unwrap();
        assert_eq!(a.reports, b.reports);
        assert_eq!(a.per_sample_rel_l2, b.per_sample_rel_l2);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let (images, labels, mut surrogate, _) = setup();
        let cfg = AttackConfig::<f64>::default();
        let mut models: Vec<&mut ClassifierNet<f64>> = vec![&mut surrogate];
        assert!(evaluate_attack(
            &mut EchoGenerator,
            &mut models,
            &images[..3],
            &labels,
            &cfg,
            &[],
        )
        .is_err());
        assert!(evaluate_attack(&mut EchoGenerator, &mut models, &[], &[], &cfg, &[]).is_err());
    }
}
