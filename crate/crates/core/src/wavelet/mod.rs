//! Orthonormal periodized discrete wavelet transforms in 1D and 2D, plus the
//! multilevel pyramid the attack edits.
//!
//! Conventions, fixed across the crate:
//! - Analysis is `a[n] = sum_k h[k] x[(2n-k) mod N]` and likewise for `g`;
//!   synthesis is its exact adjoint, so the transform is orthogonal and
//!   reconstruction is perfect up to rounding.
//! - 2D transforms filter rows (the `x` direction) first, then columns.
//!   `d1` is the row-high-pass band (responds to vertical edges), `d2` the
//!   column-high-pass band (horizontal edges), `d3` high-pass in both.
//! - Orthogonality makes Euclidean norms equal on both sides: changing
//!   detail coefficients by `delta` moves the image by exactly `||delta||`.

mod filterbank;
mod pyramid;
mod transform;

pub use filterbank::{make_filterbank, FilterBank};
pub use pyramid::{decompose, reconstruct, replace_details, DetailBands, Pyramid};
pub use transform::{dwt1d, dwt2d, idwt1d, idwt2d, Subbands2D};
