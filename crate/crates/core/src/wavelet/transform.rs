use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};
use crate::wavelet::pyramid::DetailBands;
use crate::wavelet::FilterBank;

/// One 2D analysis step: approximation plus the three oriented detail bands,
/// each of shape `[c, h/2, w/2]`.
#[derive(Clone, Debug)]
pub struct Subbands2D<T> {
    pub approx: Tensor<T>,
    pub details: DetailBands<T>,
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

fn check_even(len: usize, what: &str) -> Result<()> {
    if len < 2 || len % 2 != 0 {
        return Err(Error::Shape(format!(
            "{what} length must be even and at least 2, got {len}"
        )));
    }
    Ok(())
}

/// Periodized single-level analysis of one signal.
pub fn dwt1d<T: Scalar>(x: &[T], fb: &FilterBank<T>) -> Result<(Vec<T>, Vec<T>)> {
    check_even(x.len(), "signal")?;
    let mut approx = vec![T::zero(); x.len() / 2];
    let mut detail = vec![T::zero(); x.len() / 2];
    dwt1d_into(x, fb, &mut approx, &mut detail);
    Ok((approx, detail))
}

fn dwt1d_into<T: Scalar>(x: &[T], fb: &FilterBank<T>, approx: &mut [T], detail: &mut [T]) {
    let n = x.len();
    let (h, g) = (fb.h(), fb.g());
    for out_i in 0..n / 2 {
        let mut lo = T::zero();
        let mut hi = T::zero();
        for (k, (&hk, &gk)) in h.iter().zip(g).enumerate() {
            let v = x[wrap(2 * out_i as isize - k as isize, n)];
            lo += hk * v;
            hi += gk * v;
        }
        approx[out_i] = lo;
        detail[out_i] = hi;
    }
}

/// Periodized single-level synthesis, the exact adjoint of [`dwt1d`].
pub fn idwt1d<T: Scalar>(approx: &[T], detail: &[T], fb: &FilterBank<T>) -> Result<Vec<T>> {
    if approx.len() != detail.len() {
        return Err(Error::Shape(format!(
            "approx length {} != detail length {}",
            approx.len(),
            detail.len()
        )));
    }
    if approx.is_empty() {
        return Err(Error::Shape("empty subbands".into()));
    }
    let mut out = vec![T::zero(); approx.len() * 2];
    idwt1d_into(approx, detail, fb, &mut out);
    Ok(out)
}

fn idwt1d_into<T: Scalar>(approx: &[T], detail: &[T], fb: &FilterBank<T>, out: &mut [T]) {
    let n = out.len();
    out.fill(T::zero());
    let (h, g) = (fb.h(), fb.g());
    for (i, (&a, &d)) in approx.iter().zip(detail).enumerate() {
        for (k, (&hk, &gk)) in h.iter().zip(g).enumerate() {
            out[wrap(2 * i as isize - k as isize, n)] += hk * a + gk * d;
        }
    }
}

fn check_image(img: &Tensor<impl Scalar>) -> Result<(usize, usize, usize)> {
    if img.rank() != 3 {
        return Err(Error::Shape(format!(
            "expected [channels, height, width] image, got shape {:?}",
            img.shape()
        )));
    }
    let (c, h, w) = (img.shape()[0], img.shape()[1], img.shape()[2]);
    if c == 0 {
        return Err(Error::Shape("image has zero channels".into()));
    }
    check_even(h, "image height")?;
    check_even(w, "image width")?;
    Ok((c, h, w))
}

/// Single-level separable 2D analysis of a `[c, h, w]` image: rows first,
/// then columns of each half.
pub fn dwt2d<T: Scalar>(img: &Tensor<T>, fb: &FilterBank<T>) -> Result<Subbands2D<T>> {
    let (c, h, w) = check_image(img)?;
    let (hh, hw) = (h / 2, w / 2);
    let sub = [c, hh, hw];
    let mut approx = Tensor::zeros(&sub);
    let mut d1 = Tensor::zeros(&sub);
    let mut d2 = Tensor::zeros(&sub);
    let mut d3 = Tensor::zeros(&sub);

    // Row-pass scratch planes, shape [h, w/2] each.
    let mut lo = vec![T::zero(); h * hw];
    let mut hi = vec![T::zero(); h * hw];
    let mut col = vec![T::zero(); h];
    let mut ca = vec![T::zero(); hh];
    let mut cd = vec![T::zero(); hh];

    for ch in 0..c {
        let plane = img.channel(ch);
        for y in 0..h {
            let (a, d) = (&mut lo[y * hw..(y + 1) * hw], &mut hi[y * hw..(y + 1) * hw]);
            dwt1d_into(&plane[y * w..(y + 1) * w], fb, a, d);
        }
        let mut col_pass =
            |rows: &[T], low_out: &mut Tensor<T>, high_out: &mut Tensor<T>| {
                for x in 0..hw {
                    for y in 0..h {
                        col[y] = rows[y * hw + x];
                    }
                    dwt1d_into(&col, fb, &mut ca, &mut cd);
                    for y in 0..hh {
                        low_out.set3(ch, y, x, ca[y]);
                        high_out.set3(ch, y, x, cd[y]);
                    }
                }
            };
        col_pass(&lo, &mut approx, &mut d2);
        col_pass(&hi, &mut d1, &mut d3);
    }

    Ok(Subbands2D {
        approx,
        details: DetailBands { d1, d2, d3 },
    })
}

/// Single-level 2D synthesis, the adjoint of [`dwt2d`]: undoes the column
/// pass, then the row pass.
pub fn idwt2d<T: Scalar>(sb: &Subbands2D<T>, fb: &FilterBank<T>) -> Result<Tensor<T>> {
    sb.details.check_consistent()?;
    sb.approx.check_same_shape(&sb.details.d1)?;
    if sb.approx.rank() != 3 {
        return Err(Error::Shape(format!(
            "expected [channels, height, width] subbands, got shape {:?}",
            sb.approx.shape()
        )));
    }
    let (c, hh, hw) = (
        sb.approx.shape()[0],
        sb.approx.shape()[1],
        sb.approx.shape()[2],
    );
    let (h, w) = (hh * 2, hw * 2);
    let mut img = Tensor::zeros(&[c, h, w]);

    let mut lo = vec![T::zero(); h * hw];
    let mut hi = vec![T::zero(); h * hw];
    let mut ca = vec![T::zero(); hh];
    let mut cd = vec![T::zero(); hh];
    let mut col = vec![T::zero(); h];
    let mut row = vec![T::zero(); w];

    for ch in 0..c {
        let mut col_merge =
            |low_in: &Tensor<T>, high_in: &Tensor<T>, rows: &mut Vec<T>| {
                for x in 0..hw {
                    for y in 0..hh {
                        ca[y] = low_in.at3(ch, y, x);
                        cd[y] = high_in.at3(ch, y, x);
                    }
                    idwt1d_into(&ca, &cd, fb, &mut col);
                    for y in 0..h {
                        rows[y * hw + x] = col[y];
                    }
                }
            };
        col_merge(&sb.approx, &sb.details.d2, &mut lo);
        col_merge(&sb.details.d1, &sb.details.d3, &mut hi);

        let plane = img.channel_mut(ch);
        for y in 0..h {
            idwt1d_into(
                &lo[y * hw..(y + 1) * hw],
                &hi[y * hw..(y + 1) * hw],
                fb,
                &mut row,
            );
            plane[y * w..(y + 1) * w].copy_from_slice(&row);
        }
    }
    Ok(img)
}
