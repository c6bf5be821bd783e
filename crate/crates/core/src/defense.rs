//! Input-transformation defenses the attacks are evaluated against. Each is
//! deterministic given its spec (the resizing defense carries its own seed),
//! so evaluation grids are reproducible.

use crate::error::{Error, Result};
use crate::numerics::{prng_stream, Prng, Scalar, Tensor};
use crate::wavelet::{decompose, make_filterbank, reconstruct};

/// Base luminance quantization table, row-major zigzag-free layout.
const JPEG_LUMA_Q: [u32; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

#[derive(Clone, Debug, PartialEq)]
pub enum DefenseSpec<T> {
    /// Blockwise DCT quantization with the standard luminance table scaled
    /// by `quality` in 1..=100. Applied to every channel independently; no
    /// color transform or chroma subsampling.
    Jpeg { quality: u32 },
    /// Random isotropic downscale by a ratio in `[min_ratio, 1]` followed by
    /// zero-padding back to the original size at a random offset.
    /// `min_ratio = 1` is the identity.
    Randomization { min_ratio: T, seed: u64 },
    /// Soft-thresholds every detail coefficient of a `levels`-deep
    /// decomposition by `tau`. `tau = 0` is the identity.
    WaveletDenoise {
        tau: T,
        wavelet: String,
        levels: usize,
    },
}

impl<T: Scalar> DefenseSpec<T> {
    /// Stable, comma-free identifier used in result tables.
    pub fn name(&self) -> String {
        match self {
            DefenseSpec::Jpeg { quality } => format!("jpeg_q{quality}"),
            DefenseSpec::Randomization { min_ratio, .. } => {
                format!("randomization_r{}", min_ratio.into_f64())
            }
            DefenseSpec::WaveletDenoise { tau, wavelet, levels } => {
                format!("denoise_t{}_{}_l{}", tau.into_f64(), wavelet, levels)
            }
        }
    }

    /// Applies the defense to a batch. The resizing defense restarts its
    /// stream from its seed on every call, so equal-length batches see the
    /// same sequence of transforms; this keeps attack/control comparisons
    /// paired and evaluation order irrelevant.
    pub fn apply(&self, images: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        match self {
            DefenseSpec::Jpeg { quality } => {
                images.iter().map(|x| jpeg_defense(x, *quality)).collect()
            }
            DefenseSpec::Randomization { min_ratio, seed } => {
                let mut rng = prng_stream(*seed);
                images
                    .iter()
                    .map(|x| randomization_defense(x, *min_ratio, &mut rng))
                    .collect()
            }
            DefenseSpec::WaveletDenoise { tau, wavelet, levels } => images
                .iter()
                .map(|x| wavelet_denoise(x, *tau, wavelet, *levels))
                .collect(),
        }
    }

    pub fn apply_one(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self
            .apply(std::slice::from_ref(x))?
            .pop()
            .expect("one image in, one out"))
    }
}

/// Orthonormal 8-point DCT-II matrix. Its normalization coincides with the
/// baseline JPEG one, so the standard quantization tables apply unchanged.
fn dct8<T: Scalar>() -> [[T; 8]; 8] {
    let mut d = [[T::zero(); 8]; 8];
    for (k, row) in d.iter_mut().enumerate() {
        let s = if k == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
        for (n, v) in row.iter_mut().enumerate() {
            let angle = std::f64::consts::PI * (2.0 * n as f64 + 1.0) * k as f64 / 16.0;
            *v = T::cast(s * angle.cos());
        }
    }
    d
}

/// The scaled quantization table for a quality setting.
///
/// The DC entry is capped at its base value of 16 even at low quality:
/// otherwise coarse DC quantization shifts flat regions visibly, and a
/// constant image would not survive within one 8-bit step.
fn quant_table(quality: u32) -> Result<[f64; 64]> {
    if !(1..=100).contains(&quality) {
        return Err(Error::InvalidArgument(format!(
            "jpeg quality must be in 1..=100, got {quality}"
        )));
    }
    let s = if quality < 50 {
        5000 / quality
    } else {
        200 - 2 * quality
    };
    let mut q = [0.0f64; 64];
    for (i, &base) in JPEG_LUMA_Q.iter().enumerate() {
        q[i] = ((base * s + 50) / 100).clamp(1, 255) as f64;
    }
    q[0] = q[0].min(16.0);
    Ok(q)
}

/// JPEG-style lossy round trip: per 8x8 block and channel, center to
/// `255 x - 128`, orthonormal 2D DCT, divide by the scaled table and round,
/// multiply back, inverse DCT, undo the centering, clamp to [0, 1].
pub fn jpeg_defense<T: Scalar>(x: &Tensor<T>, quality: u32) -> Result<Tensor<T>> {
    if x.rank() != 3 {
        return Err(Error::Shape(format!("expected [c, h, w], got {:?}", x.shape())));
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    if h % 8 != 0 || w % 8 != 0 {
        return Err(Error::Shape(format!(
            "jpeg defense needs dims divisible by 8, got {h}x{w}"
        )));
    }
    let q = quant_table(quality)?;
    let d = dct8::<T>();
    let mut out = x.clone();
    let mut block = [[T::zero(); 8]; 8];
    let mut tmp = [[T::zero(); 8]; 8];
    let mut coef = [[T::zero(); 8]; 8];
    for ch in 0..c {
        let plane = out.channel_mut(ch);
        for by in (0..h).step_by(8) {
            for bx in (0..w).step_by(8) {
                for i in 0..8 {
                    for j in 0..8 {
                        let v = plane[(by + i) * w + (bx + j)];
                        block[i][j] = v * T::cast(255.0) - T::cast(128.0);
                    }
                }
                // coef = D block D^T
                mat8(&d, &block, &mut tmp, false, false);
                mat8(&tmp, &d, &mut coef, false, true);
                for i in 0..8 {
                    for j in 0..8 {
                        let qv = q[i * 8 + j];
                        let rounded = (coef[i][j].into_f64() / qv).round() * qv;
                        coef[i][j] = T::cast(rounded);
                    }
                }
                // block = D^T coef D
                mat8(&d, &coef, &mut tmp, true, false);
                mat8(&tmp, &d, &mut block, false, false);
                for i in 0..8 {
                    for j in 0..8 {
                        let v = (block[i][j] + T::cast(128.0)) / T::cast(255.0);
                        plane[(by + i) * w + (bx + j)] = v.max(T::zero()).min(T::one());
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `out = A' B'` where each prime is the transpose when the flag is set.
fn mat8<T: Scalar>(
    a: &[[T; 8]; 8],
    b: &[[T; 8]; 8],
    out: &mut [[T; 8]; 8],
    ta: bool,
    tb: bool,
) {
    for i in 0..8 {
        for j in 0..8 {
            let mut acc = T::zero();
            for k in 0..8 {
                let av = if ta { a[k][i] } else { a[i][k] };
                let bv = if tb { b[j][k] } else { b[k][j] };
                acc += av * bv;
            }
            out[i][j] = acc;
        }
    }
}

/// Downscales by a random ratio in `[min_ratio, 1]` with bilinear,
/// half-pixel-aligned sampling, then zero-pads back to the input size at a
/// random offset. Consumes exactly one float and two integer draws per image
/// regardless of the ratio, so stream positions stay aligned.
pub fn randomization_defense<T: Scalar>(
    x: &Tensor<T>,
    min_ratio: T,
    rng: &mut Prng,
) -> Result<Tensor<T>> {
    if x.rank() != 3 {
        return Err(Error::Shape(format!("expected [c, h, w], got {:?}", x.shape())));
    }
    let lo = min_ratio.into_f64();
    if !(lo > 0.0 && lo <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "min_ratio must be in (0, 1], got {lo}"
        )));
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let r = rng.uniform_in(lo, 1.0);
    let nh = ((r * h as f64).round() as usize).clamp(1, h);
    let nw = ((r * w as f64).round() as usize).clamp(1, w);
    let oy = rng.below(h - nh + 1);
    let ox = rng.below(w - nw + 1);

    let mut out = Tensor::zeros(&[c, h, w]);
    for ch in 0..c {
        let src = x.channel(ch);
        let dst = out.channel_mut(ch);
        for y in 0..nh {
            // Half-pixel mapping: identical sizes resample exactly.
            let sy = ((y as f64 + 0.5) * h as f64 / nh as f64 - 0.5).clamp(0.0, h as f64 - 1.0);
            let y0 = sy.floor() as usize;
            let y1 = (y0 + 1).min(h - 1);
            let fy = T::cast(sy - y0 as f64);
            for xx in 0..nw {
                let sx =
                    ((xx as f64 + 0.5) * w as f64 / nw as f64 - 0.5).clamp(0.0, w as f64 - 1.0);
                let x0 = sx.floor() as usize;
                let x1 = (x0 + 1).min(w - 1);
                let fx = T::cast(sx - x0 as f64);
                let top = src[y0 * w + x0] * (T::one() - fx) + src[y0 * w + x1] * fx;
                let bot = src[y1 * w + x0] * (T::one() - fx) + src[y1 * w + x1] * fx;
                dst[(oy + y) * w + (ox + xx)] = top * (T::one() - fy) + bot * fy;
            }
        }
    }
    Ok(out)
}

/// Soft-thresholds all detail coefficients of a multilevel decomposition:
/// `sign(d) * max(|d| - tau, 0)`. The approximation band passes through.
pub fn wavelet_denoise<T: Scalar>(
    x: &Tensor<T>,
    tau: T,
    wavelet: &str,
    levels: usize,
) -> Result<Tensor<T>> {
    if tau < T::zero() {
        return Err(Error::InvalidArgument("tau must be nonnegative".into()));
    }
    let fb = make_filterbank::<T>(wavelet)?;
    let mut pyr = decompose(x, levels, &fb)?;
    let shrink = |v: T| {
        let mag = (v.abs() - tau).max(T::zero());
        if v < T::zero() {
            -mag
        } else {
            mag
        }
    };
    for bands in &mut pyr.details {
        bands.d1.map_inplace(shrink);
        bands.d2.map_inplace(shrink);
        bands.d3.map_inplace(shrink);
    }
    Ok(reconstruct(&pyr, &fb)?.clamp01())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(seed: u64) -> Tensor<f64> {
        let mut rng = prng_stream(seed);
        Tensor::from_vec(
            &[1, 16, 16],
            (0..256).map(|_| rng.uniform()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn dct_matrix_is_orthonormal() {
        let d = dct8::<f64>();
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = (0..8).map(|k| d[i][k] * d[j][k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12, "row {i} vs {j}: {dot}");
            }
        }
    }

    #[test]
    fn quality_100_is_near_lossless() {
        let x = textured(1);
        let y = jpeg_defense(&x, 100).unwrap();
        assert!(x.sub(&y).unwrap().max_abs() <= 0.02);
    }

    #[test]
    fn constant_images_survive_any_quality() {
        for &v in &[0.0, 0.3, 0.5, 1.0] {
            let x = Tensor::filled(&[3, 8, 8], v);
            for &q in &[10, 50, 75, 90, 100] {
                let y = jpeg_defense(&x, q).unwrap();
                let err = x.sub(&y).unwrap().max_abs();
                assert!(
                    err <= 1.0 / 255.0 + 1e-12,
                    "value {v} quality {q}: err {err}"
                );
            }
        }
    }

    #[test]
    fn lower_quality_distorts_more() {
        let x = textured(2);
        let e90 = x.sub(&jpeg_defense(&x, 90).unwrap()).unwrap().l2_norm();
        let e10 = x.sub(&jpeg_defense(&x, 10).unwrap()).unwrap().l2_norm();
        assert!(e10 > e90, "q10 err {e10} should exceed q90 err {e90}");
    }

    #[test]
    fn jpeg_rejects_bad_sizes_and_quality() {
        assert!(jpeg_defense(&Tensor::<f64>::zeros(&[1, 12, 16]), 75).is_err());
        assert!(jpeg_defense(&Tensor::<f64>::zeros(&[1, 16, 16]), 0).is_err());
        assert!(jpeg_defense(&Tensor::<f64>::zeros(&[1, 16, 16]), 101).is_err());
    }

    #[test]
    fn randomization_with_unit_ratio_is_identity() {
        let x = textured(3);
        let spec = DefenseSpec::Randomization {
            min_ratio: 1.0,
            seed: 5,
        };
        let y = spec.apply_one(&x).unwrap();
        assert!(x.sub(&y).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn randomization_is_seed_deterministic_and_shape_preserving() {
        let x = textured(4);
        let spec = DefenseSpec::Randomization {
            min_ratio: 0.5,
            seed: 9,
        };
        let a = spec.apply_one(&x).unwrap();
        let b = spec.apply_one(&x).unwrap();
        assert_eq!(a.shape(), x.shape());
        assert_eq!(a.data(), b.data());
        assert!(x.sub(&a).unwrap().max_abs() > 1e-6, "shrinking must change the image");
    }

    #[test]
    fn randomization_batches_are_paired_across_calls() {
        let spec = DefenseSpec::Randomization {
            min_ratio: 0.5,
            seed: 11,
        };
        let xs = vec![textured(5), textured(6)];
        let ys = vec![textured(5), textured(7)];
        let dx = spec.apply(&xs).unwrap();
        let dy = spec.apply(&ys).unwrap();
        // Same position in the batch, same input: same transform.
        assert_eq!(dx[0].data(), dy[0].data());
    }

    #[test]
    fn zero_threshold_denoise_is_identity() {
        let x = textured(8);
        let y = wavelet_denoise(&x, 0.0, "db2", 2).unwrap();
        assert!(x.sub(&y).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn huge_threshold_keeps_only_the_approximation() {
        let x = textured(9);
        let fb = make_filterbank::<f64>("haar").unwrap();
        let y = wavelet_denoise(&x, 1e6, "haar", 1).unwrap();
        let mut pyr = decompose(&x, 1, &fb).unwrap();
        for bands in &mut pyr.details {
            bands.d1.fill(0.0);
            bands.d2.fill(0.0);
            bands.d3.fill(0.0);
        }
        let want = reconstruct(&pyr, &fb).unwrap().clamp01();
        assert!(want.sub(&y).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn names_are_stable_and_comma_free() {
        let specs: Vec<DefenseSpec<f64>> = vec![
            DefenseSpec::Jpeg { quality: 75 },
            DefenseSpec::Randomization {
                min_ratio: 0.85,
                seed: 0,
            },
            DefenseSpec::WaveletDenoise {
                tau: 0.05,
                wavelet: "db2".into(),
                levels: 2,
            },
        ];
        let names: Vec<_> = specs.iter().map(|s| s.name()).collect();
        assert_eq!(
            names,
            vec!["jpeg_q75", "randomization_r0.85", "denoise_t0.05_db2_l2"]
        );
        for n in names {
            assert!(!n.contains(','));
        }
    }
}
