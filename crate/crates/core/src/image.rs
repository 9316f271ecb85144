use std::ops::Index;

use crate::error::{check_len, Error, Result};
use crate::scalar::{self, Real};

/// Row-major image with its shape. Entries are finite by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageVector<T> {
    data: Vec<T>,
    height: usize,
    width: usize,
}

impl<T: Real> ImageVector<T> {
    pub fn new(data: Vec<T>, height: usize, width: usize) -> Result<Self> {
        check_len("image data", height * width, data.len())?;
        if !scalar::all_finite(&data) {
            return Err(Error::NonFinite("image data"));
        }
        Ok(Self {
            data,
            height,
            width,
        })
    }

    /// A `1 × n` image, convenient for plain vectors.
    pub fn from_vec(data: Vec<T>) -> Result<Self> {
        let n = data.len();
        Self::new(data, 1, n)
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            data: vec![T::zero(); height * width],
            height,
            width,
        }
    }

    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self {
            data: vec![value; height * width],
            height,
            width,
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            data,
            height,
            width,
        }
    }

    /// Builds an image with the same shape as `self` from raw data, without the finiteness scan.
    pub(crate) fn with_data(&self, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            data,
            height: self.height,
            width: self.width,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    pub fn is_finite(&self) -> bool {
        scalar::all_finite(&self.data)
    }

    pub fn norm(&self) -> T {
        scalar::norm(&self.data)
    }

    pub fn norm_sq(&self) -> T {
        scalar::norm_sq(&self.data)
    }

    pub fn dot(&self, other: &Self) -> T {
        scalar::dot(&self.data, &other.data)
    }

    pub fn dist_sq(&self, other: &Self) -> T {
        scalar::dist_sq(&self.data, &other.data)
    }

    pub fn ensure_same_shape(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context,
                expected: self.len(),
                found: other.len(),
            })
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.len(), other.len());
        self.with_data(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scaled(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn max_value(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min_value(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn cast<U: Real>(&self) -> ImageVector<U> {
        ImageVector {
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
            height: self.height,
            width: self.width,
        }
    }
}

impl<T> Index<usize> for ImageVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}
