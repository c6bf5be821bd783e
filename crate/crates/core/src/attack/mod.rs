//! The wavelet-domain universal perturbation attack: a generator rewrites
//! one scale of detail coefficients so the reconstruction fools a frozen
//! classifier, trained under a budget-conditioned loss. A pixel-domain
//! variant of the same generator serves as the baseline attack, and a
//! norm-matched random perturbation serves as the control.

mod config;
mod eval;
mod loss;
mod perturb;
mod train;

pub use config::{AttackConfig, AttackMode, BudgetMode};
pub use eval::{evaluate_attack, EvaluationOutcome};
pub use loss::{budget_transfer, wgap_loss, wgap_loss_parts, LossParts};
pub use perturb::{
    perturb_time, perturb_wavelet, random_baseline, stack_details, unstack_details, Generator,
    TimePipeline, WaveletPipeline,
};
pub use train::{train_attack, TrainLogRow, TrainedAttack};
