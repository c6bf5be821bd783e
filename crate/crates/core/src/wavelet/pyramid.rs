use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};
use crate::wavelet::transform::{dwt2d, idwt2d, Subbands2D};
use crate::wavelet::FilterBank;

/// The three oriented detail bands of one level, all `[c, h, w]` with equal
/// shapes: `d1` row-high-pass, `d2` column-high-pass, `d3` both.
#[derive(Clone, Debug)]
pub struct DetailBands<T> {
    pub d1: Tensor<T>,
    pub d2: Tensor<T>,
    pub d3: Tensor<T>,
}

impl<T: Scalar> DetailBands<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        DetailBands {
            d1: Tensor::zeros(shape),
            d2: Tensor::zeros(shape),
            d3: Tensor::zeros(shape),
        }
    }

    pub fn shape(&self) -> &[usize] {
        self.d1.shape()
    }

    pub fn check_consistent(&self) -> Result<()> {
        self.d1.check_same_shape(&self.d2)?;
        self.d1.check_same_shape(&self.d3)
    }

    pub fn sq_sum(&self) -> T {
        self.d1.sq_sum() + self.d2.sq_sum() + self.d3.sq_sum()
    }

    pub fn max_abs(&self) -> T {
        self.d1.max_abs().max(self.d2.max_abs()).max(self.d3.max_abs())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(DetailBands {
            d1: self.d1.sub(&other.d1)?,
            d2: self.d2.sub(&other.d2)?,
            d3: self.d3.sub(&other.d3)?,
        })
    }
}

/// Multilevel decomposition of one image: the level-`J` approximation plus
/// detail bands for levels `1..=J`, finest first.
#[derive(Clone, Debug)]
pub struct Pyramid<T> {
    base_shape: [usize; 3],
    pub approx: Tensor<T>,
    /// `details[j - 1]` holds level `j`; level 1 is the finest.
    pub details: Vec<DetailBands<T>>,
}

impl<T: Scalar> Pyramid<T> {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Shape of the image this pyramid reconstructs to.
    pub fn base_shape(&self) -> [usize; 3] {
        self.base_shape
    }

    /// Detail bands at 1-based level `j`.
    pub fn details_at(&self, j: usize) -> Result<&DetailBands<T>> {
        if j == 0 || j > self.levels() {
            return Err(Error::InvalidArgument(format!(
                "level {j} out of range 1..={}",
                self.levels()
            )));
        }
        Ok(&self.details[j - 1])
    }

    /// Total coefficient energy; equals the image energy by orthogonality.
    pub fn sq_sum(&self) -> T {
        self.approx.sq_sum()
            + self
                .details
                .iter()
                .map(DetailBands::sq_sum)
                .fold(T::zero(), |a, b| a + b)
    }
}

/// Runs `levels` analysis steps, recursing on the approximation. Height and
/// width must both be divisible by `2^levels`.
pub fn decompose<T: Scalar>(
    img: &Tensor<T>,
    levels: usize,
    fb: &FilterBank<T>,
) -> Result<Pyramid<T>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("levels must be at least 1".into()));
    }
    if img.rank() != 3 {
        return Err(Error::Shape(format!(
            "expected [channels, height, width] image, got shape {:?}",
            img.shape()
        )));
    }
    let (h, w) = (img.shape()[1], img.shape()[2]);
    let div = 1usize
        .checked_shl(levels as u32)
        .filter(|d| h % d == 0 && w % d == 0 && h / d >= 1 && w / d >= 1);
    if div.is_none() {
        return Err(Error::Shape(format!(
            "image {h}x{w} does not support {levels} dyadic levels"
        )));
    }

    let base_shape = [img.shape()[0], h, w];
    let mut details = Vec::with_capacity(levels);
    let mut current = img.clone();
    for _ in 0..levels {
        let Subbands2D { approx, details: d } = dwt2d(&current, fb)?;
        details.push(d);
        current = approx;
    }
    Ok(Pyramid {
        base_shape,
        approx: current,
        details,
    })
}

/// Inverts [`decompose`] exactly (up to rounding): synthesizes coarsest
/// level first.
pub fn reconstruct<T: Scalar>(p: &Pyramid<T>, fb: &FilterBank<T>) -> Result<Tensor<T>> {
    if p.details.is_empty() {
        return Err(Error::InvalidArgument("pyramid has no levels".into()));
    }
    let mut current = p.approx.clone();
    for bands in p.details.iter().rev() {
        bands.check_consistent()?;
        current.check_same_shape(&bands.d1)?;
        current = idwt2d(
            &Subbands2D {
                approx: current,
                details: bands.clone(),
            },
            fb,
        )?;
    }
    Ok(current)
}

/// Copy of `p` with the level-`j0` detail bands swapped for `bands`.
/// Everything else, including the approximation, is untouched.
pub fn replace_details<T: Scalar>(
    p: &Pyramid<T>,
    j0: usize,
    bands: &DetailBands<T>,
) -> Result<Pyramid<T>> {
    let current = p.details_at(j0)?;
    bands.check_consistent()?;
    bands.d1.check_same_shape(&current.d1)?;
    let mut out = p.clone();
    out.details[j0 - 1] = bands.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gaussian_sample, prng_stream};
    use crate::wavelet::make_filterbank;

    fn random_image(seed: u64, c: usize, h: usize, w: usize) -> Tensor<f64> {
        let mut rng = prng_stream(seed);
        gaussian_sample(&mut rng, &[c, h, w])
    }

    #[test]
    fn level_shapes_halve_per_level() {
        let fb = make_filterbank::<f64>("db2").unwrap();
        let img = random_image(1, 3, 32, 32);
        let p = decompose(&img, 3, &fb).unwrap();
        assert_eq!(p.levels(), 3);
        assert_eq!(p.details_at(1).unwrap().shape(), &[3, 16, 16]);
        assert_eq!(p.details_at(2).unwrap().shape(), &[3, 8, 8]);
        assert_eq!(p.details_at(3).unwrap().shape(), &[3, 4, 4]);
        assert_eq!(p.approx.shape(), &[3, 4, 4]);
        assert_eq!(p.base_shape(), [3, 32, 32]);
    }

    #[test]
    fn unsupported_depth_is_rejected() {
        let fb = make_filterbank::<f64>("haar").unwrap();
        let img = random_image(2, 1, 12, 12);
        // 12 = 4 * 3: two levels fine, three impossible.
        assert!(decompose(&img, 2, &fb).is_ok());
        assert!(decompose(&img, 3, &fb).is_err());
        assert!(decompose(&img, 0, &fb).is_err());
    }

    #[test]
    fn multilevel_roundtrip_and_energy() {
        for name in ["haar", "db2"] {
            let fb = make_filterbank::<f64>(name).unwrap();
            let img = random_image(3, 3, 32, 32);
            for levels in 1..=3 {
                let p = decompose(&img, levels, &fb).unwrap();
                let back = reconstruct(&p, &fb).unwrap();
                let err = img.sub(&back).unwrap().max_abs();
                assert!(err < 1e-9, "{name} J={levels} err={err}");
                let de = (img.sq_sum() - p.sq_sum()).abs();
                assert!(de < 1e-9, "{name} J={levels} energy drift {de}");
            }
        }
    }

    #[test]
    fn replacing_with_same_bands_is_identity() {
        let fb = make_filterbank::<f64>("db2").unwrap();
        let img = random_image(4, 1, 16, 16);
        let p = decompose(&img, 2, &fb).unwrap();
        let q = replace_details(&p, 2, p.details_at(2).unwrap()).unwrap();
        let back = reconstruct(&q, &fb).unwrap();
        assert!(img.sub(&back).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn replace_validates_level_and_shape() {
        let fb = make_filterbank::<f64>("haar").unwrap();
        let img = random_image(5, 1, 16, 16);
        let p = decompose(&img, 2, &fb).unwrap();
        let wrong = DetailBands::<f64>::zeros(&[1, 16, 16]);
        assert!(replace_details(&p, 1, &wrong).is_err());
        assert!(replace_details(&p, 3, &DetailBands::zeros(&[1, 4, 4])).is_err());
        assert!(replace_details(&p, 0, &DetailBands::zeros(&[1, 8, 8])).is_err());
    }

    // Orthogonality in action: an edit of the level-j0 details moves the
    // image by exactly the coefficient distance.
    #[test]
    fn detail_edit_distance_equals_coefficient_distance() {
        let fb = make_filterbank::<f64>("db2").unwrap();
        let img = random_image(6, 3, 32, 32);
        let mut rng = prng_stream(60);
        for j0 in 1..=3 {
            let p = decompose(&img, 3, &fb).unwrap();
            let shape = p.details_at(j0).unwrap().shape().to_vec();
            let new = DetailBands {
                d1: gaussian_sample(&mut rng, &shape),
                d2: gaussian_sample(&mut rng, &shape),
                d3: gaussian_sample(&mut rng, &shape),
            };
            let delta = new.sub(p.details_at(j0).unwrap()).unwrap();
            let q = replace_details(&p, j0, &new).unwrap();
            let x2 = reconstruct(&q, &fb).unwrap();
            let image_dist = x2.sub(&img).unwrap().l2_norm();
            let coef_dist = delta.sq_sum().sqrt();
            assert!(
                (image_dist - coef_dist).abs() < 1e-9,
                "j0={j0}: {image_dist} vs {coef_dist}"
            );
        }
    }
}
