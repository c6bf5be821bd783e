use crate::error::{Error, Result};
use crate::numerics::Scalar;

/// Which domain the generator perturbs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackMode {
    /// Rewrite the detail coefficients at one wavelet scale.
    Wavelet,
    /// Add a norm-limited perturbation directly to pixels.
    Time,
}

/// How the distortion budget `epsilon` is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetMode {
    /// `||x_adv - x|| / ||x||` (the default).
    Relative,
    /// `||x_adv - x||`.
    Absolute,
}

/// Everything that defines one attack run. The same config drives training
/// and evaluation so the two can never disagree about the pipeline.
#[derive(Clone, Debug)]
pub struct AttackConfig<T> {
    pub mode: AttackMode,
    /// Wavelet name for [`AttackMode::Wavelet`]: `haar` or `db2`.
    pub wavelet: String,
    /// Scale whose details are rewritten; 1 is the finest.
    pub j0: usize,
    /// Distortion budget; crossing it switches the training loss onto the
    /// penalized branch.
    pub epsilon: T,
    /// Weight of the structural-dissimilarity penalty when over budget.
    pub penalty_weight: T,
    /// For the first `warmup_epochs` epochs the penalty weight is
    /// `warmup_penalty` instead of `penalty_weight`. A large warmup weight
    /// makes the early epochs mostly a reconstruction phase, so the attack
    /// afterwards explores from near the budget surface instead of from a
    /// high-distortion map it would have to walk back. Zero disables it.
    pub warmup_epochs: usize,
    pub warmup_penalty: T,
    pub epochs: usize,
    pub iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Clamp adversarial images into [0, 1] (wavelet mode; the pixel-domain
    /// formula always clamps).
    pub clamp_output: bool,
    /// Add scaled generator output to the existing details instead of
    /// replacing them.
    pub additive: bool,
    pub budget: BudgetMode,
    pub base_filters: usize,
    pub res_blocks: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Max-abs magnitude of the pixel-domain perturbation, on the [0, 1]
    /// scale (10/255 by default).
    pub time_magnitude: T,
}

impl<T: Scalar> Default for AttackConfig<T> {
    fn default() -> Self {
        AttackConfig {
            mode: AttackMode::Wavelet,
            wavelet: "db2".into(),
            j0: 1,
            epsilon: T::cast(0.1),
            penalty_weight: T::cast(1.0),
            warmup_epochs: 0,
            warmup_penalty: T::zero(),
            epochs: 10,
            iterations: 50,
            batch_size: 16,
            seed: 0,
            clamp_output: true,
            additive: false,
            budget: BudgetMode::Relative,
            base_filters: 16,
            res_blocks: 2,
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            time_magnitude: T::cast(10.0 / 255.0),
        }
    }
}

impl<T: Scalar> AttackConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.j0 == 0 {
            return Err(Error::InvalidArgument("j0 must be at least 1".into()));
        }
        if !(self.epsilon > T::zero()) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if self.penalty_weight < T::zero() || self.warmup_penalty < T::zero() {
            return Err(Error::InvalidArgument(
                "penalty weights must be nonnegative".into(),
            ));
        }
        if self.epochs == 0 || self.iterations == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "epochs, iterations, and batch_size must be positive".into(),
            ));
        }
        if self.base_filters == 0 {
            return Err(Error::InvalidArgument("base_filters must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidArgument("betas must lie in [0, 1)".into()));
        }
        if !(self.time_magnitude > T::zero()) {
            return Err(Error::InvalidArgument(
                "time_magnitude must be positive".into(),
            ));
        }
        Ok(())
    }
}
