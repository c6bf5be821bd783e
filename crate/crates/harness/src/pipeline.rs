//! Command implementations behind the CLI: classifier training, attack
//! training, sample export, evaluation, transform inspection, and report
//! display. Commands read and write artifacts under one output directory;
//! progress goes to standard error, tables are returned as strings.

use std::path::{Path, PathBuf};
use std::time::Instant;

use wgap_core::attack::{evaluate_attack, perturb_time, perturb_wavelet, train_attack, AttackMode};
use wgap_core::metrics::cross_entropy;
use wgap_core::neural::{ClassifierKind, GeneratorConfig};
use wgap_core::numerics::prng_stream;
use wgap_core::wavelet::{decompose, make_filterbank, reconstruct};
use wgap_core::{AdamState, ClassifierNet, Error, GeneratorNet, Result, Tensor};

use crate::config::{DataSource, RunConfig};
use crate::dataset::{load_idx, synth_dataset, Dataset, Split};
use crate::derive_seed;
use crate::image_io::{export_residual, read_image, write_image};
use crate::report;

/// Loads one split according to the config's data source.
pub fn load_split(rc: &RunConfig, split: Split) -> Result<Dataset> {
    let mut ds = match &rc.source {
        DataSource::Synth {
            train_per_class,
            test_per_class,
        } => {
            let n = match split {
                Split::Train => *train_per_class,
                Split::Test => *test_per_class,
            };
            synth_dataset(derive_seed(rc.data_seed, split.tag()), n)
        }
        DataSource::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => match split {
            Split::Train => load_idx(train_images, train_labels)?,
            Split::Test => load_idx(test_images, test_labels)?,
        },
    };
    ds.split = split;
    Ok(ds)
}

/// Mass moved from the true class to a uniform floor while fitting
/// classifiers. Keeps logits from saturating on the easily separable
/// synthetic classes: an overconfident model has no reachable low-loss
/// region for a budgeted attack to settle in, so its attack training buys
/// ever more distortion for ever less progress.
const LABEL_SMOOTHING: f64 = 0.1;

/// Gradient of cross-entropy against the smoothed target distribution
/// `(1-a)*onehot + a/k`, with the same probability floor as the plain
/// metric. Through the softmax backward pass this is `p - q` at the logits.
fn smoothed_ce_grad(probs: &Tensor, target: usize) -> Tensor {
    let k = probs.len() as f64;
    let mut grad = probs.zeros_like();
    for (i, (g, &p)) in grad
        .data_mut()
        .iter_mut()
        .zip(probs.data())
        .enumerate()
    {
        let q = if i == target {
            1.0 - LABEL_SMOOTHING + LABEL_SMOOTHING / k
        } else {
            LABEL_SMOOTHING / k
        };
        *g = -q / p.max(1e-12);
    }
    grad
}

/// Minibatch Adam training against smoothed cross-entropy; returns per-epoch
/// mean (unsmoothed) loss. The classifier's own prediction layers stay
/// intact; this is plain supervised fitting.
pub fn fit_classifier(
    clf: &mut ClassifierNet,
    ds: &Dataset,
    epochs: usize,
    lr: f64,
    batch: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("no training images".into()));
    }
    let mut rng = prng_stream(seed);
    let mut adam = AdamState::new(lr, 0.9, 0.999);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            clf.zero_grads();
            for &i in chunk {
                let probs = clf.forward(&ds.images[i])?;
                epoch_loss += cross_entropy(&probs, ds.labels[i])?;
                let g = smoothed_ce_grad(&probs, ds.labels[i]);
                clf.backward(&g)?;
            }
            clf.net.scale_grads(1.0 / chunk.len() as f64);
            adam.step(clf.net.params_mut())?;
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Degenerate("classifier loss became non-finite".into()));
        }
        history.push(epoch_loss / ds.len() as f64);
    }
    Ok(history)
}

/// Fraction of samples predicted correctly.
pub fn accuracy(clf: &mut ClassifierNet, ds: &Dataset) -> Result<f64> {
    let mut hits = 0usize;
    for (x, &label) in ds.images.iter().zip(&ds.labels) {
        if clf.predict(x)? == label {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.len() as f64)
}

fn checkpoint_path(out: &Path, kind: ClassifierKind) -> PathBuf {
    out.join(format!("{}.ckpt", kind.model_name()))
}

/// Rebuilds a classifier from config-implied dimensions and restores its
/// checkpoint. The init stream is irrelevant: loading overwrites everything.
pub fn load_classifier(
    out: &Path,
    kind: ClassifierKind,
    input_shape: [usize; 3],
    num_classes: usize,
) -> Result<ClassifierNet> {
    let path = checkpoint_path(out, kind);
    if !path.exists() {
        return Err(Error::InvalidArgument(format!(
            "{} not found; run `wgap train-surrogate` first",
            path.display()
        )));
    }
    let mut clf = ClassifierNet::new(kind, input_shape, num_classes, &mut prng_stream(0))?;
    clf.load(&path)?;
    Ok(clf)
}

/// Generator channel count implied by the attack domain: the wavelet attack
/// sees the three detail bands stacked per image channel.
pub fn generator_channels(rc: &RunConfig, image_channels: usize) -> usize {
    match rc.attack.mode {
        AttackMode::Wavelet => 3 * image_channels,
        AttackMode::Time => image_channels,
    }
}

pub fn load_generator(rc: &RunConfig, out: &Path, image_channels: usize) -> Result<GeneratorNet> {
    let path = out.join("generator.ckpt");
    if !path.exists() {
        return Err(Error::InvalidArgument(format!(
            "{} not found; run `wgap train-attack` first",
            path.display()
        )));
    }
    let gcfg = GeneratorConfig {
        channels: generator_channels(rc, image_channels),
        base_filters: rc.attack.base_filters,
        res_blocks: rc.attack.res_blocks,
    };
    let mut gen = GeneratorNet::new(&gcfg, &mut prng_stream(0));
    gen.net.load(&path)?;
    Ok(gen)
}

/// Trains both classifiers on the train split, reports accuracies on both
/// splits, and checkpoints the weights.
pub fn cmd_train_surrogate(rc: &RunConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let train = load_split(rc, Split::Train)?;
    let test = load_split(rc, Split::Test)?;
    let shape = train.image_shape();

    let mut rows = String::from("model,split,accuracy,n\n");
    for kind in [ClassifierKind::Surrogate, ClassifierKind::TransferTarget] {
        let name = kind.model_name();
        let t0 = Instant::now();
        let mut init = prng_stream(derive_seed(rc.seed, &format!("model.{name}")));
        let mut clf = ClassifierNet::new(kind, shape, train.num_classes, &mut init)?;
        let losses = fit_classifier(
            &mut clf,
            &train,
            rc.surrogate_epochs,
            rc.classifier_lr,
            rc.classifier_batch,
            derive_seed(rc.seed, &format!("fit.{name}")),
        )?;
        for (e, loss) in losses.iter().enumerate() {
            eprintln!("{name}: epoch {}/{}: mean loss {loss:.4}", e + 1, losses.len());
        }
        let train_acc = accuracy(&mut clf, &train)?;
        let test_acc = accuracy(&mut clf, &test)?;
        eprintln!(
            "{name}: train accuracy {train_acc:.4}, test accuracy {test_acc:.4} ({:.1}s)",
            t0.elapsed().as_secs_f64()
        );
        rows.push_str(&format!("{name},train,{train_acc:.6},{}\n", train.len()));
        rows.push_str(&format!("{name},test,{test_acc:.6},{}\n", test.len()));
        clf.save(&checkpoint_path(out, kind))?;
    }
    std::fs::write(out.join("classifiers.csv"), rows)?;
    eprintln!("wrote {} and classifier checkpoints", out.join("classifiers.csv").display());
    Ok(())
}

/// Trains the perturbation generator against the checkpointed surrogate and
/// writes the generator checkpoint plus the iteration-level loss log.
pub fn cmd_train_attack(rc: &RunConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let train = load_split(rc, Split::Train)?;
    let shape = train.image_shape();
    let mut surrogate = load_classifier(out, ClassifierKind::Surrogate, shape, train.num_classes)?;
    let cfg = rc.attack_config();

    let t0 = Instant::now();
    let trained = train_attack(&train.images, &mut surrogate, &cfg)?;
    for epoch in 1..=cfg.epochs {
        let rows: Vec<_> = trained.log.iter().filter(|r| r.epoch == epoch).collect();
        let mean_loss = rows.iter().map(|r| r.loss).sum::<f64>() / rows.len().max(1) as f64;
        let last = rows.last().expect("every epoch logs its iterations");
        eprintln!(
            "attack epoch {epoch}/{}: mean loss {mean_loss:.4}, over budget {:.2}, rel l2 {:.4}",
            cfg.epochs, last.over_budget_frac, last.mean_rel_l2
        );
    }
    eprintln!("attack training took {:.1}s", t0.elapsed().as_secs_f64());

    trained.generator.net.save(&out.join("generator.ckpt"))?;
    report::write_loss_log(&out.join("loss_log.csv"), &trained.log)?;
    eprintln!("wrote {} and generator checkpoint", out.join("loss_log.csv").display());
    Ok(())
}

/// Writes clean/adversarial/residual image triplets for the first `count`
/// test samples. Residuals are amplified by `gain` before quantization.
pub fn cmd_generate(rc: &RunConfig, out: &Path, count: usize, gain: f64) -> Result<()> {
    let test = load_split(rc, Split::Test)?;
    let shape = test.image_shape();
    let mut gen = load_generator(rc, out, shape[0])?;
    let fb = make_filterbank(&rc.attack.wavelet)?;
    let cfg = rc.attack_config();

    let dir = out.join("samples");
    std::fs::create_dir_all(&dir)?;
    let ext = if shape[0] == 1 { "pgm" } else { "ppm" };
    let n = count.min(test.len());
    for (i, x) in test.images.iter().take(n).enumerate() {
        let adv = match cfg.mode {
            AttackMode::Wavelet => perturb_wavelet(x, &mut gen, &fb, &cfg)?,
            AttackMode::Time => perturb_time(x, &mut gen, &cfg)?,
        };
        write_image(&dir.join(format!("sample_{i:03}_clean.{ext}")), x)?;
        write_image(&dir.join(format!("sample_{i:03}_adv.{ext}")), &adv)?;
        export_residual(
            &dir.join(format!("sample_{i:03}_residual.{ext}")),
            x,
            &adv,
            gain,
        )?;
    }
    eprintln!("wrote {n} sample triplets under {}", dir.display());
    Ok(())
}

/// Scores the trained generator against both classifiers under every
/// configured defense, writing the aggregate grid and the per-sample
/// distortion distribution.
pub fn cmd_evaluate(rc: &RunConfig, out: &Path) -> Result<()> {
    let mut test = load_split(rc, Split::Test)?;
    test.truncate(rc.eval_n);
    let shape = test.image_shape();
    let mut surrogate = load_classifier(out, ClassifierKind::Surrogate, shape, test.num_classes)?;
    let mut transfer =
        load_classifier(out, ClassifierKind::TransferTarget, shape, test.num_classes)?;
    let mut gen = load_generator(rc, out, shape[0])?;
    let cfg = rc.attack_config();
    let defenses = rc.defense_specs();

    let t0 = Instant::now();
    let outcome = evaluate_attack(
        &mut gen,
        &mut [&mut surrogate, &mut transfer],
        &test.images,
        &test.labels,
        &cfg,
        &defenses,
    )?;
    for r in &outcome.reports {
        if r.defense == "none" {
            eprintln!(
                "{}: fooling {:.4}, vs truth {:.4} (n={})",
                r.model, r.fooling_ratio, r.fool_vs_truth, r.n
            );
        }
    }
    eprintln!("evaluation took {:.1}s", t0.elapsed().as_secs_f64());

    report::write_report_csv(&out.join("report.csv"), &outcome.reports)?;
    report::write_samples_csv(
        &out.join("rel_l2_samples.csv"),
        &outcome.per_sample_rel_l2,
        &outcome.per_sample_ssim_d,
    )?;
    eprintln!(
        "wrote {} and {}",
        out.join("report.csv").display(),
        out.join("rel_l2_samples.csv").display()
    );
    Ok(())
}

/// Decomposes one image file and returns a per-subband energy table. The
/// coefficient energies must sum to the image energy (orthonormality), and
/// the table carries the measured roundtrip error as evidence.
pub fn cmd_dwt(input: &Path, wavelet: &str, levels: usize) -> Result<String> {
    let img = read_image(input)?;
    let fb = make_filterbank(wavelet)?;
    let pyramid = decompose(&img, levels, &fb)?;
    let image_energy = img.sq_sum();
    let total = pyramid.sq_sum();
    let rec = reconstruct(&pyramid, &fb)?;
    let roundtrip = rec.sub(&img)?.max_abs();
    let denom = image_energy.max(f64::MIN_POSITIVE);

    let mut t = format!("{:<20} {:>16} {:>10}\n", "subband", "energy", "share");
    let mut line = |name: &str, energy: f64| {
        t.push_str(&format!(
            "{name:<20} {energy:>16.9e} {:>10.6}\n",
            energy / denom
        ));
    };
    for j in 1..=levels {
        let d = pyramid.details_at(j)?;
        line(&format!("level{j}.d1"), d.d1.sq_sum());
        line(&format!("level{j}.d2"), d.d2.sq_sum());
        line(&format!("level{j}.d3"), d.d3.sq_sum());
    }
    line(&format!("approx(level{levels})"), pyramid.approx.sq_sum());
    line("total", total);
    line("image", image_energy);
    t.push_str(&format!(
        "{:<20} {:>16.3e}\n{:<20} {:>16.3e}\n",
        "parseval_rel_gap",
        (total - image_energy).abs() / denom,
        "roundtrip_max_err",
        roundtrip
    ));
    Ok(t)
}

/// Renders the stored evaluation grid (and the tail of the training log if
/// present) as an aligned table.
pub fn cmd_report(out: &Path) -> Result<String> {
    let path = out.join("report.csv");
    if !path.exists() {
        return Err(Error::InvalidArgument(format!(
            "{} not found; run `wgap evaluate` first",
            path.display()
        )));
    }
    let rows = report::read_report_csv(&path)?;
    let model_w = rows
        .iter()
        .map(|r| r.model.len())
        .chain(["model".len()])
        .max()
        .unwrap();
    let defense_w = rows
        .iter()
        .map(|r| r.defense.len())
        .chain(["defense".len()])
        .max()
        .unwrap();
    let mut t = format!(
        "{:<model_w$}  {:<defense_w$}  {:>8}  {:>9}  {:>11}  {:>11}  {:>6}\n",
        "model", "defense", "fooling", "vs_truth", "mean_rel_l2", "mean_ssim_d", "n"
    );
    for r in &rows {
        t.push_str(&format!(
            "{:<model_w$}  {:<defense_w$}  {:>8.4}  {:>9.4}  {:>11.6}  {:>11.6}  {:>6}\n",
            r.model, r.defense, r.fooling_ratio, r.fool_vs_truth, r.mean_rel_l2, r.mean_ssim_d, r.n
        ));
    }
    let log_path = out.join("loss_log.csv");
    if log_path.exists() {
        let text = std::fs::read_to_string(&log_path)?;
        if let Some(last) = text.lines().last().filter(|l| *l != report::LOSS_HEADER) {
            t.push_str(&format!("last training step: {last}\n"));
        }
    }
    Ok(t)
}
