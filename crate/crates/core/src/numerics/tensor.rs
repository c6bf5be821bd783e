use crate::error::{Error, Result};
use crate::numerics::Scalar;

/// Dense row-major tensor. Ranks 1 through 4 are used in practice:
/// probability vectors `[k]`, images and feature maps `[c, h, w]`, and
/// convolution weights `[c_out, c_in, k, k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} wants {} elements, got {}",
                shape,
                expect,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Same data under a new shape with the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        Self::from_vec(shape, self.data.clone())
    }

    /// Element accessor for rank-3 tensors laid out `[c, h, w]`.
    #[inline]
    pub fn at3(&self, c: usize, y: usize, x: usize) -> T {
        debug_assert_eq!(self.rank(), 3);
        let (h, w) = (self.shape[1], self.shape[2]);
        debug_assert!(c < self.shape[0] && y < h && x < w);
        self.data[(c * h + y) * w + x]
    }

    #[inline]
    pub fn set3(&mut self, c: usize, y: usize, x: usize, v: T) {
        debug_assert_eq!(self.rank(), 3);
        let (h, w) = (self.shape[1], self.shape[2]);
        self.data[(c * h + y) * w + x] = v;
    }

    #[inline]
    pub fn add3(&mut self, c: usize, y: usize, x: usize, v: T) {
        debug_assert_eq!(self.rank(), 3);
        let (h, w) = (self.shape[1], self.shape[2]);
        self.data[(c * h + y) * w + x] += v;
    }

    /// Contiguous `[h, w]` plane of channel `c` in a rank-3 tensor.
    pub fn channel(&self, c: usize) -> &[T] {
        debug_assert_eq!(self.rank(), 3);
        let plane = self.shape[1] * self.shape[2];
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        debug_assert_eq!(self.rank(), 3);
        let plane = self.shape[1] * self.shape[2];
        &mut self.data[c * plane..(c + 1) * plane]
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_inplace(&mut self, mut f: impl FnMut(T) -> T) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn fill(&mut self, v: T) {
        self.data.fill(v);
    }

    /// `self += scale * other`, the accumulation primitive for gradients
    /// and optimizer updates.
    pub fn add_scaled(&mut self, other: &Self, scale: T) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        debug_assert!(!self.is_empty());
        self.sum() / T::cast(self.len() as f64)
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum())
    }

    pub fn sq_sum(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn l2_norm(&self) -> T {
        self.sq_sum().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Clamps every element into `[0, 1]`.
    pub fn clamp01(&self) -> Self {
        self.map(|v| v.max(T::zero()).min(T::one()))
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "expected shape {:?}, got {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }
}

/// Free-function form of [`Tensor::clamp01`].
pub fn clamp01<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.clamp01()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_length_mismatch() {
        let r = Tensor::from_vec(&[2, 3], vec![0.0f64; 5]);
        assert!(r.is_err());
    }

    #[test]
    fn rank3_indexing_is_row_major() {
        let t = Tensor::from_vec(&[2, 2, 3], (0..12).map(|v| v as f64).collect()).unwrap();
        assert_eq!(t.at3(0, 0, 0), 0.0);
        assert_eq!(t.at3(0, 1, 2), 5.0);
        assert_eq!(t.at3(1, 0, 1), 7.0);
        assert_eq!(t.channel(1), &[6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn elementwise_ops_check_shapes() {
        let a = Tensor::<f64>::zeros(&[2, 2]);
        let b = Tensor::<f64>::zeros(&[4]);
        assert!(a.add(&b).is_err());
        assert!(a.dot(&b).is_err());
    }

    #[test]
    fn norms_and_reductions() {
        let t = Tensor::from_vec(&[4], vec![1.0f64, -2.0, 2.0, 0.0]).unwrap();
        assert_eq!(t.sum(), 1.0);
        assert_eq!(t.sq_sum(), 9.0);
        assert_eq!(t.l2_norm(), 3.0);
        assert_eq!(t.max_abs(), 2.0);
        assert_eq!(t.mean(), 0.25);
    }

    #[test]
    fn clamp01_bounds_and_fixed_points() {
        let t = Tensor::from_vec(&[4], vec![-0.5f64, 0.25, 0.75, 1.5]).unwrap();
        let c = t.clamp01();
        assert_eq!(c.data(), &[0.0, 0.25, 0.75, 1.0]);
        assert_eq!(c.clamp01(), c);
    }
}
