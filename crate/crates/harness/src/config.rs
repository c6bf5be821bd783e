//! Plain-text run configuration: `key = value` lines, `#` comments, a
//! closed key set with typed defaults. One config drives every command of a
//! run, so training and evaluation can never disagree about the pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use wgap_core::attack::{AttackMode, BudgetMode};
use wgap_core::wavelet::make_filterbank;
use wgap_core::{AttackConfig, DefenseSpec, Error, Result};

use crate::derive_seed;

/// Where the train/test splits come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    /// Built-in procedural dataset; split seeds derive from `data_seed`.
    Synth {
        train_per_class: usize,
        test_per_class: usize,
    },
    /// User-supplied IDX ubyte files.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

/// Everything a full run needs. `Default` is the shipped desk-scale setup;
/// a config file overrides individual keys.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Seed for dataset synthesis, separate from `seed` so the same data
    /// can be reused across model/attack seeds.
    pub data_seed: u64,
    pub source: DataSource,
    pub surrogate_epochs: usize,
    pub classifier_lr: f64,
    pub classifier_batch: usize,
    /// Cap on evaluation set size; 0 means the whole test split.
    pub eval_n: usize,
    /// Attack settings; its `seed` field is derived from `seed` at use time
    /// via [`RunConfig::attack_config`].
    pub attack: AttackConfig,
    pub defense_names: Vec<String>,
    pub jpeg_quality: u32,
    pub randomization_min_ratio: f64,
    pub denoise_tau: f64,
    pub denoise_wavelet: String,
    pub denoise_levels: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            data_seed: 7,
            source: DataSource::Synth {
                train_per_class: 100,
                test_per_class: 50,
            },
            surrogate_epochs: 5,
            classifier_lr: 1e-3,
            classifier_batch: 32,
            eval_n: 0,
            attack: AttackConfig::default(),
            defense_names: vec![
                "jpeg".to_string(),
                "randomization".to_string(),
                "denoise".to_string(),
            ],
            jpeg_quality: 75,
            randomization_min_ratio: 0.85,
            denoise_tau: 0.05,
            denoise_wavelet: "db2".to_string(),
            denoise_levels: 2,
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str, kind: &str) -> Result<T> {
    v.parse()
        .map_err(|_| usage(format!("config key `{key}`: cannot parse `{v}` as {kind}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(usage(format!(
            "config key `{key}`: expected `true` or `false`, got `{v}`"
        ))),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Parses config text. Unknown and duplicate keys are rejected; every
    /// value is type- and range-checked.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.split_once('#') {
                Some((before, _)) => before,
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if map.insert(key.clone(), value).is_some() {
                return Err(usage(format!("duplicate config key `{key}`")));
            }
        }

        let mut cfg = RunConfig::default();

        if let Some(v) = map.remove("seed") {
            cfg.seed = parse_value("seed", &v, "an unsigned integer")?;
        }
        if let Some(v) = map.remove("out_dir") {
            cfg.out_dir = PathBuf::from(v);
        }
        if let Some(v) = map.remove("data_seed") {
            cfg.data_seed = parse_value("data_seed", &v, "an unsigned integer")?;
        }

        let dataset = map.remove("dataset").unwrap_or_else(|| "synth".to_string());
        cfg.source = match dataset.as_str() {
            "synth" => {
                let mut train_per_class = 100;
                let mut test_per_class = 50;
                if let Some(v) = map.remove("train_per_class") {
                    train_per_class = parse_value("train_per_class", &v, "a count")?;
                }
                if let Some(v) = map.remove("test_per_class") {
                    test_per_class = parse_value("test_per_class", &v, "a count")?;
                }
                DataSource::Synth {
                    train_per_class,
                    test_per_class,
                }
            }
            "idx" => {
                let mut need = |key: &str| -> Result<PathBuf> {
                    map.remove(key)
                        .map(PathBuf::from)
                        .ok_or_else(|| usage(format!("missing required config key `{key}`")))
                };
                DataSource::Idx {
                    train_images: need("idx_train_images")?,
                    train_labels: need("idx_train_labels")?,
                    test_images: need("idx_test_images")?,
                    test_labels: need("idx_test_labels")?,
                }
            }
            other => {
                return Err(usage(format!(
                    "config key `dataset`: expected `synth` or `idx`, got `{other}`"
                )))
            }
        };

        if let Some(v) = map.remove("surrogate_epochs") {
            cfg.surrogate_epochs = parse_value("surrogate_epochs", &v, "a count")?;
        }
        if let Some(v) = map.remove("classifier_lr") {
            cfg.classifier_lr = parse_value("classifier_lr", &v, "a number")?;
        }
        if let Some(v) = map.remove("classifier_batch") {
            cfg.classifier_batch = parse_value("classifier_batch", &v, "a count")?;
        }
        if let Some(v) = map.remove("eval_n") {
            cfg.eval_n = parse_value("eval_n", &v, "a count")?;
        }

        if let Some(v) = map.remove("mode") {
            cfg.attack.mode = match v.as_str() {
                "wavelet" => AttackMode::Wavelet,
                "time" => AttackMode::Time,
                other => {
                    return Err(usage(format!(
                        "config key `mode`: expected `wavelet` or `time`, got `{other}`"
                    )))
                }
            };
        }
        if let Some(v) = map.remove("wavelet") {
            cfg.attack.wavelet = v;
        }
        if let Some(v) = map.remove("j0") {
            cfg.attack.j0 = parse_value("j0", &v, "a level")?;
        }
        if let Some(v) = map.remove("epsilon") {
            cfg.attack.epsilon = parse_value("epsilon", &v, "a number")?;
        }
        if let Some(v) = map.remove("penalty_weight") {
            cfg.attack.penalty_weight = parse_value("penalty_weight", &v, "a number")?;
        }
        if let Some(v) = map.remove("warmup_epochs") {
            cfg.attack.warmup_epochs = parse_value("warmup_epochs", &v, "a count")?;
        }
        if let Some(v) = map.remove("warmup_penalty") {
            cfg.attack.warmup_penalty = parse_value("warmup_penalty", &v, "a number")?;
        }
        if let Some(v) = map.remove("epochs") {
            cfg.attack.epochs = parse_value("epochs", &v, "a count")?;
        }
        if let Some(v) = map.remove("iterations") {
            cfg.attack.iterations = parse_value("iterations", &v, "a count")?;
        }
        if let Some(v) = map.remove("batch_size") {
            cfg.attack.batch_size = parse_value("batch_size", &v, "a count")?;
        }
        if let Some(v) = map.remove("clamp_output") {
            cfg.attack.clamp_output = parse_bool("clamp_output", &v)?;
        }
        if let Some(v) = map.remove("additive") {
            cfg.attack.additive = parse_bool("additive", &v)?;
        }
        if let Some(v) = map.remove("budget") {
            cfg.attack.budget = match v.as_str() {
                "relative" => BudgetMode::Relative,
                "absolute" => BudgetMode::Absolute,
                other => {
                    return Err(usage(format!(
                        "config key `budget`: expected `relative` or `absolute`, got `{other}`"
                    )))
                }
            };
        }
        if let Some(v) = map.remove("base_filters") {
            cfg.attack.base_filters = parse_value("base_filters", &v, "a count")?;
        }
        if let Some(v) = map.remove("res_blocks") {
            cfg.attack.res_blocks = parse_value("res_blocks", &v, "a count")?;
        }
        if let Some(v) = map.remove("learning_rate") {
            cfg.attack.learning_rate = parse_value("learning_rate", &v, "a number")?;
        }
        if let Some(v) = map.remove("beta1") {
            cfg.attack.beta1 = parse_value("beta1", &v, "a number")?;
        }
        if let Some(v) = map.remove("beta2") {
            cfg.attack.beta2 = parse_value("beta2", &v, "a number")?;
        }
        if let Some(v) = map.remove("time_magnitude") {
            cfg.attack.time_magnitude = parse_value("time_magnitude", &v, "a number")?;
        }

        if let Some(v) = map.remove("defenses") {
            cfg.defense_names = if v == "none" {
                Vec::new()
            } else {
                v.split(',').map(|s| s.trim().to_string()).collect()
            };
        }
        if let Some(v) = map.remove("jpeg_quality") {
            cfg.jpeg_quality = parse_value("jpeg_quality", &v, "a quality in 1..=100")?;
        }
        if let Some(v) = map.remove("randomization_min_ratio") {
            cfg.randomization_min_ratio = parse_value("randomization_min_ratio", &v, "a number")?;
        }
        if let Some(v) = map.remove("denoise_tau") {
            cfg.denoise_tau = parse_value("denoise_tau", &v, "a number")?;
        }
        if let Some(v) = map.remove("denoise_wavelet") {
            cfg.denoise_wavelet = v;
        }
        if let Some(v) = map.remove("denoise_levels") {
            cfg.denoise_levels = parse_value("denoise_levels", &v, "a count")?;
        }

        if let Some(key) = map.keys().next() {
            return Err(usage(format!("unknown config key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks beyond parsing; every violation is a usage error.
    pub fn validate(&self) -> Result<()> {
        self.attack
            .validate()
            .map_err(|e| usage(format!("config: {e}")))?;
        make_filterbank::<f64>(&self.attack.wavelet)
            .map_err(|e| usage(format!("config key `wavelet`: {e}")))?;
        if let DataSource::Synth {
            train_per_class,
            test_per_class,
        } = &self.source
        {
            if *train_per_class == 0 || *test_per_class == 0 {
                return Err(usage("config: per-class counts must be positive"));
            }
        }
        if self.surrogate_epochs == 0 || self.classifier_batch == 0 {
            return Err(usage(
                "config: surrogate_epochs and classifier_batch must be positive",
            ));
        }
        if !(self.classifier_lr > 0.0) {
            return Err(usage("config key `classifier_lr`: must be positive"));
        }
        if !(1..=100).contains(&self.jpeg_quality) {
            return Err(usage("config key `jpeg_quality`: must lie in 1..=100"));
        }
        if !(self.randomization_min_ratio > 0.0 && self.randomization_min_ratio <= 1.0) {
            return Err(usage(
                "config key `randomization_min_ratio`: must lie in (0, 1]",
            ));
        }
        if self.denoise_tau < 0.0 {
            return Err(usage("config key `denoise_tau`: must be nonnegative"));
        }
        if self.denoise_levels == 0 {
            return Err(usage("config key `denoise_levels`: must be positive"));
        }
        make_filterbank::<f64>(&self.denoise_wavelet)
            .map_err(|e| usage(format!("config key `denoise_wavelet`: {e}")))?;
        for name in &self.defense_names {
            if !matches!(name.as_str(), "jpeg" | "randomization" | "denoise") {
                return Err(usage(format!(
                    "config key `defenses`: unknown defense `{name}` (expected jpeg, randomization, denoise, or none)"
                )));
            }
        }
        Ok(())
    }

    /// The attack settings with a run-seed-derived stream seed filled in.
    pub fn attack_config(&self) -> AttackConfig {
        let mut a = self.attack.clone();
        a.seed = derive_seed(self.seed, "attack");
        a
    }

    /// Defense list in config order, seeded from the run seed.
    pub fn defense_specs(&self) -> Vec<DefenseSpec> {
        self.defense_names
            .iter()
            .map(|name| match name.as_str() {
                "jpeg" => DefenseSpec::Jpeg {
                    quality: self.jpeg_quality,
                },
                "randomization" => DefenseSpec::Randomization {
                    min_ratio: self.randomization_min_ratio,
                    seed: derive_seed(self.seed, "defense.randomization"),
                },
                "denoise" => DefenseSpec::WaveletDenoise {
                    tau: self.denoise_tau,
                    wavelet: self.denoise_wavelet.clone(),
                    levels: self.denoise_levels,
                },
                other => unreachable!("validated defense name {other}"),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn full_file_overrides_every_section() {
        let text = "\
# attack study
seed = 9
out_dir = results
data_seed = 11
dataset = synth
train_per_class = 4   # tiny
test_per_class = 2
surrogate_epochs = 3
classifier_lr = 0.01
classifier_batch = 8
eval_n = 5
mode = time
wavelet = haar
j0 = 2
epsilon = 0.2
penalty_weight = 2.5
warmup_epochs = 1
warmup_penalty = 30.0
epochs = 1
iterations = 2
batch_size = 3
clamp_output = false
additive = true
budget = absolute
base_filters = 4
res_blocks = 1
learning_rate = 0.001
beta1 = 0.9
beta2 = 0.99
time_magnitude = 0.05
defenses = jpeg, denoise
jpeg_quality = 40
randomization_min_ratio = 0.5
denoise_tau = 0.1
denoise_wavelet = haar
denoise_levels = 1
";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.out_dir, PathBuf::from("results"));
        assert_eq!(
            cfg.source,
            DataSource::Synth {
                train_per_class: 4,
                test_per_class: 2
            }
        );
        assert_eq!(cfg.attack.mode, AttackMode::Time);
        assert_eq!(cfg.attack.wavelet, "haar");
        assert_eq!(cfg.attack.j0, 2);
        assert_eq!(cfg.attack.epsilon, 0.2);
        assert_eq!(cfg.attack.warmup_epochs, 1);
        assert_eq!(cfg.attack.warmup_penalty, 30.0);
        assert!(!cfg.attack.clamp_output);
        assert!(cfg.attack.additive);
        assert_eq!(cfg.attack.budget, BudgetMode::Absolute);
        assert_eq!(cfg.defense_names, vec!["jpeg", "denoise"]);
        assert_eq!(cfg.jpeg_quality, 40);
        let specs = cfg.defense_specs();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].name(), "jpeg_q40");
    }

    #[test]
    fn unknown_duplicate_and_malformed_keys_are_rejected() {
        let err = RunConfig::from_text("betamax = 1\n").unwrap_err().to_string();
        assert!(err.contains("unknown config key `betamax`"), "{err}");

        let err = RunConfig::from_text("seed = 1\nseed = 2\n").unwrap_err().to_string();
        assert!(err.contains("duplicate config key `seed`"), "{err}");

        let err = RunConfig::from_text("just some words\n").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");

        let err = RunConfig::from_text("epsilon = fast\n").unwrap_err().to_string();
        assert!(err.contains("`epsilon`") && err.contains("`fast`"), "{err}");
    }

    #[test]
    fn idx_source_requires_all_four_paths() {
        let err = RunConfig::from_text("dataset = idx\nidx_train_images = a\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("missing required config key `idx_train_labels`"), "{err}");

        let cfg = RunConfig::from_text(
            "dataset = idx\nidx_train_images = a\nidx_train_labels = b\nidx_test_images = c\nidx_test_labels = d\n",
        )
        .unwrap();
        assert!(matches!(cfg.source, DataSource::Idx { .. }));
    }

    #[test]
    fn range_violations_are_usage_errors() {
        for text in [
            "epsilon = -1\n",
            "jpeg_quality = 0\n",
            "jpeg_quality = 101\n",
            "randomization_min_ratio = 0\n",
            "denoise_tau = -0.5\n",
            "defenses = jpeg, blur\n",
            "wavelet = db9\n",
            "mode = frequency\n",
        ] {
            let err = RunConfig::from_text(text).unwrap_err();
            assert!(matches!(err, Error::Usage(_)), "{text} -> {err}");
        }
    }

    #[test]
    fn derived_streams_follow_the_run_seed() {
        let mut a = RunConfig::default();
        let mut b = RunConfig::default();
        a.seed = 1;
        b.seed = 2;
        assert_ne!(a.attack_config().seed, b.attack_config().seed);
        assert_eq!(a.attack_config().seed, a.attack_config().seed);
        let sa = a.defense_specs();
        let sb = b.defense_specs();
        match (&sa[1], &sb[1]) {
            (
                DefenseSpec::Randomization { seed: x, .. },
                DefenseSpec::Randomization { seed: y, .. },
            ) => assert_ne!(x, y),
            _ => panic!("defense order changed"),
        }
    }
}
