//! Experiment harness around `wgap_core`: datasets (a built-in procedural
//! set plus an IDX loader), PGM/PPM image files, plain-text run configs,
//! CSV reports, and the command implementations behind the `wgap` binary.
//!
//! Commands write artifacts (checkpoints, CSVs, images) under an output
//! directory and keep human-readable chatter on standard error, so a full
//! run is reproducible from its directory alone.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod image_io;
pub mod pipeline;
pub mod report;

/// Stable sub-seed for a named role so one run seed can drive independent
/// streams (dataset splits, model inits, defenses) without overlap.
/// FNV-1a over the tag, xor-folded with the seed.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64 ^ seed;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_separate_roles_and_follow_the_run_seed() {
        assert_eq!(derive_seed(1, "train"), derive_seed(1, "train"));
        assert_ne!(derive_seed(1, "train"), derive_seed(1, "test"));
        assert_ne!(derive_seed(1, "train"), derive_seed(2, "train"));
    }
}
