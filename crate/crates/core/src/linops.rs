//! Linear operators `u ↦ Au` with adjoints, in dense, sparse, convolutional and trivial forms.

use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv::{self, Filter2d};
use crate::error::{check_len, invalid, Error, Result};
use crate::image::ImageVector;
use crate::scalar::{dot, Real};

/// A real linear map `Rᴺ → Rᵐ` together with its adjoint.
///
/// The `abs_*` methods apply the entrywise absolute value `|A|` of the matrix and its
/// transpose; they are what the diagonal majorizer `diag(|Aᵀ| W |A| 1)` is built from.
pub trait LinearOperator<T: Real>: Send + Sync + Debug {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// Writes `Ax` into `out` (overwriting it).
    fn forward_into(&self, x: &[T], out: &mut [T]);
    /// Writes `Aᵀy` into `out` (overwriting it).
    fn adjoint_into(&self, y: &[T], out: &mut [T]);
    fn abs_forward_into(&self, x: &[T], out: &mut [T]);
    fn abs_adjoint_into(&self, y: &[T], out: &mut [T]);

    fn forward(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.output_dim()];
        self.forward_into(x, &mut out);
        out
    }

    fn adjoint(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.input_dim()];
        self.adjoint_into(y, &mut out);
        out
    }
}

/// Checked `Ax`.
pub fn apply_forward<T: Real>(op: &dyn LinearOperator<T>, x: &ImageVector<T>) -> Result<Vec<T>> {
    check_len("operator input", op.input_dim(), x.len())?;
    Ok(op.forward(x.as_slice()))
}

/// Checked `Aᵀy`, reshaped to `shape`.
pub fn apply_adjoint<T: Real>(
    op: &dyn LinearOperator<T>,
    y: &[T],
    shape: (usize, usize),
) -> Result<ImageVector<T>> {
    check_len("operator output", op.output_dim(), y.len())?;
    check_len("adjoint shape", op.input_dim(), shape.0 * shape.1)?;
    ImageVector::new(op.adjoint(y), shape.0, shape.1)
}

/// Largest relative discrepancy `|⟨Au, v⟩ − ⟨u, Aᵀv⟩| / max(|⟨Au, v⟩|, ‖Au‖‖v‖)` over random pairs.
pub fn adjoint_mismatch<T: Real>(op: &dyn LinearOperator<T>, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let u: Vec<T> = (0..op.input_dim())
            .map(|_| T::lit(rng.gen_range(-1.0..1.0)))
            .collect();
        let v: Vec<T> = (0..op.output_dim())
            .map(|_| T::lit(rng.gen_range(-1.0..1.0)))
            .collect();
        let au = op.forward(&u);
        let atv = op.adjoint(&v);
        let lhs = dot(&au, &v).as_f64();
        let rhs = dot(&u, &atv).as_f64();
        let scale = crate::scalar::norm(&au).as_f64() * crate::scalar::norm(&v).as_f64();
        let denom = lhs.abs().max(scale).max(f64::MIN_POSITIVE);
        worst = worst.max((lhs - rhs).abs() / denom);
    }
    worst
}

#[derive(Clone, Debug)]
pub struct IdentityOperator {
    n: usize,
}

impl IdentityOperator {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl<T: Real> LinearOperator<T> for IdentityOperator {
    fn input_dim(&self) -> usize {
        self.n
    }
    fn output_dim(&self) -> usize {
        self.n
    }
    fn forward_into(&self, x: &[T], out: &mut [T]) {
        out.copy_from_slice(x);
    }
    fn adjoint_into(&self, y: &[T], out: &mut [T]) {
        out.copy_from_slice(y);
    }
    fn abs_forward_into(&self, x: &[T], out: &mut [T]) {
        out.copy_from_slice(x);
    }
    fn abs_adjoint_into(&self, y: &[T], out: &mut [T]) {
        out.copy_from_slice(y);
    }
}

/// The all-zero map `Rᴺ → Rᵐ`.
#[derive(Clone, Debug)]
pub struct ZeroOperator {
    rows: usize,
    cols: usize,
}

impl ZeroOperator {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }
}

impl<T: Real> LinearOperator<T> for ZeroOperator {
    fn input_dim(&self) -> usize {
        self.cols
    }
    fn output_dim(&self) -> usize {
        self.rows
    }
    fn forward_into(&self, _x: &[T], out: &mut [T]) {
        out.fill(T::zero());
    }
    fn adjoint_into(&self, _y: &[T], out: &mut [T]) {
        out.fill(T::zero());
    }
    fn abs_forward_into(&self, _x: &[T], out: &mut [T]) {
        out.fill(T::zero());
    }
    fn abs_adjoint_into(&self, _y: &[T], out: &mut [T]) {
        out.fill(T::zero());
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_len("dense matrix data", rows * cols, data.len())?;
        if !crate::scalar::all_finite(&data) {
            return Err(Error::NonFinite("dense matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len("dense matrix row", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Materializes any operator column by column.
    pub fn from_operator(op: &dyn LinearOperator<T>) -> Self {
        let (m, n) = (op.output_dim(), op.input_dim());
        let mut data = vec![T::zero(); m * n];
        let mut e = vec![T::zero(); n];
        let mut col = vec![T::zero(); m];
        for j in 0..n {
            e[j] = T::one();
            op.forward_into(&e, &mut col);
            e[j] = T::zero();
            for i in 0..m {
                data[i * n + j] = col[i];
            }
        }
        Self {
            rows: m,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    fn mul(&self, x: &[T], out: &mut [T], abs: bool) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(x).fold(T::zero(), |acc, (&a, &b)| {
                acc + if abs { a.abs() } else { a } * b
            });
        }
    }

    fn mul_t(&self, y: &[T], out: &mut [T], abs: bool) {
        out.fill(T::zero());
        for (i, &yi) in y.iter().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += if abs { a.abs() } else { a } * yi;
            }
        }
    }
}

impl<T: Real> LinearOperator<T> for DenseMatrix<T> {
    fn input_dim(&self) -> usize {
        self.cols
    }
    fn output_dim(&self) -> usize {
        self.rows
    }
    fn forward_into(&self, x: &[T], out: &mut [T]) {
        self.mul(x, out, false);
    }
    fn adjoint_into(&self, y: &[T], out: &mut [T]) {
        self.mul_t(y, out, false);
    }
    fn abs_forward_into(&self, x: &[T], out: &mut [T]) {
        self.mul(x, out, true);
    }
    fn abs_adjoint_into(&self, y: &[T], out: &mut [T]) {
        self.mul_t(y, out, true);
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SparseMatrix<T> {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and explicit zeros kept.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, T)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return invalid(format!(
                    "triplet ({r}, {c}) outside {rows}×{cols} matrix"
                ));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse matrix entry"));
            }
            sorted.push((r, c, v));
        }
        sorted.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    fn mul(&self, x: &[T], out: &mut [T], abs: bool) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.values[k];
                acc += if abs { v.abs() } else { v } * x[self.col_idx[k]];
            }
            *o = acc;
        }
    }

    fn mul_t(&self, y: &[T], out: &mut [T], abs: bool) {
        out.fill(T::zero());
        for (r, &yr) in y.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.values[k];
                out[self.col_idx[k]] += if abs { v.abs() } else { v } * yr;
            }
        }
    }
}

impl<T: Real> LinearOperator<T> for SparseMatrix<T> {
    fn input_dim(&self) -> usize {
        self.cols
    }
    fn output_dim(&self) -> usize {
        self.rows
    }
    fn forward_into(&self, x: &[T], out: &mut [T]) {
        self.mul(x, out, false);
    }
    fn adjoint_into(&self, y: &[T], out: &mut [T]) {
        self.mul_t(y, out, false);
    }
    fn abs_forward_into(&self, x: &[T], out: &mut [T]) {
        self.mul(x, out, true);
    }
    fn abs_adjoint_into(&self, y: &[T], out: &mut [T]) {
        self.mul_t(y, out, true);
    }
}

/// Circulant operator `x ↦ k ⊛ x` on an `h × w` image.
#[derive(Clone, Debug)]
pub struct CircularConvolution<T> {
    kernel: Filter2d<T>,
    abs_kernel: Filter2d<T>,
    height: usize,
    width: usize,
}

impl<T: Real> CircularConvolution<T> {
    pub fn new(kernel: Filter2d<T>, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return invalid("convolution image shape must be nonempty");
        }
        if !crate::scalar::all_finite(kernel.taps()) {
            return Err(Error::NonFinite("convolution kernel"));
        }
        let abs_kernel = kernel.abs();
        Ok(Self {
            kernel,
            abs_kernel,
            height,
            width,
        })
    }

    pub fn kernel(&self) -> &Filter2d<T> {
        &self.kernel
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

impl<T: Real> LinearOperator<T> for CircularConvolution<T> {
    fn input_dim(&self) -> usize {
        self.height * self.width
    }
    fn output_dim(&self) -> usize {
        self.height * self.width
    }
    fn forward_into(&self, x: &[T], out: &mut [T]) {
        out.fill(T::zero());
        conv::conv2d_accumulate(&self.kernel, x, self.height, self.width, out);
    }
    fn adjoint_into(&self, y: &[T], out: &mut [T]) {
        out.fill(T::zero());
        conv::conv2d_adjoint_accumulate(&self.kernel, y, self.height, self.width, out);
    }
    fn abs_forward_into(&self, x: &[T], out: &mut [T]) {
        out.fill(T::zero());
        conv::conv2d_accumulate(&self.abs_kernel, x, self.height, self.width, out);
    }
    fn abs_adjoint_into(&self, y: &[T], out: &mut [T]) {
        out.fill(T::zero());
        conv::conv2d_adjoint_accumulate(&self.abs_kernel, y, self.height, self.width, out);
    }
}
