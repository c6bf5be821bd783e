use crate::error::{Error, Result};
use crate::numerics::Scalar;

/// Analysis filter pair of an orthonormal two-channel bank.
///
/// The high-pass filter is the quadrature mirror of the low-pass one,
/// `g[n] = (-1)^n h[L-1-n]`, and synthesis uses the same coefficients
/// through the adjoint placement in [`crate::wavelet::idwt1d`], so only the
/// analysis pair is stored.
#[derive(Clone, Debug)]
pub struct FilterBank<T> {
    name: String,
    h: Vec<T>,
    g: Vec<T>,
}

impl<T: Scalar> FilterBank<T> {
    pub fn new(name: &str) -> Result<Self> {
        make_filterbank(name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Low-pass analysis taps.
    pub fn h(&self) -> &[T] {
        &self.h
    }

    /// High-pass analysis taps.
    pub fn g(&self) -> &[T] {
        &self.g
    }

    /// Filter length (2 for haar, 4 for db2).
    pub fn taps(&self) -> usize {
        self.h.len()
    }
}

/// Builds the named bank. Supported: `haar`, `db2`.
pub fn make_filterbank<T: Scalar>(name: &str) -> Result<FilterBank<T>> {
    let h: Vec<f64> = match name {
        "haar" => {
            let v = 1.0 / 2f64.sqrt();
            vec![v, v]
        }
        "db2" => {
            let s3 = 3f64.sqrt();
            let den = 4.0 * 2f64.sqrt();
            vec![
                (1.0 + s3) / den,
                (3.0 + s3) / den,
                (3.0 - s3) / den,
                (1.0 - s3) / den,
            ]
        }
        other => return Err(Error::UnsupportedWavelet(other.to_string())),
    };
    let l = h.len();
    let g: Vec<f64> = (0..l)
        .map(|n| {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sign * h[l - 1 - n]
        })
        .collect();
    Ok(FilterBank {
        name: name.to_string(),
        h: h.into_iter().map(T::cast).collect(),
        g: g.into_iter().map(T::cast).collect(),
    })
}
