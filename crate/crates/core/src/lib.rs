//! Wavelet-domain universal adversarial perturbations at desk scale.
//!
//! The crate is organized around one pipeline: decompose an image with an
//! orthonormal 2D DWT, let a small convolutional generator rewrite the detail
//! coefficients at one scale, reconstruct, and train the generator so the
//! reconstruction fools a frozen classifier while a budget-conditioned loss
//! keeps the perturbation small. Supporting modules provide the transform
//! ([`wavelet`]), the networks and their hand-written backward passes
//! ([`neural`]), perceptual and attack metrics ([`metrics`]), the attack
//! itself ([`attack`]), and input-transform defenses ([`defense`]).
//!
//! All numeric code is generic over [`numerics::Scalar`] (`f32` or `f64`);
//! the aliases below pin the concrete precision used by binaries and tests.

pub mod attack;
pub mod defense;
pub mod error;
pub mod metrics;
pub mod neural;
pub mod numerics;
pub mod wavelet;

pub use error::{Error, Result};

/// Precision used by the shipped tools. All tolerances in tests assume f64.
pub type Real = f64;

pub type Tensor = numerics::Tensor<Real>;
pub type FilterBank = wavelet::FilterBank<Real>;
pub type Subbands2D = wavelet::Subbands2D<Real>;
pub type DetailBands = wavelet::DetailBands<Real>;
pub type Pyramid = wavelet::Pyramid<Real>;
pub type SsimParams = metrics::SsimParams<Real>;
pub type GeneratorNet = neural::GeneratorNet<Real>;
pub type ClassifierNet = neural::ClassifierNet<Real>;
pub type AdamState = neural::AdamState<Real>;
pub type AttackConfig = attack::AttackConfig<Real>;
pub type DefenseSpec = defense::DefenseSpec<Real>;
