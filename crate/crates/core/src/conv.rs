//! Square 2-D filters and circular convolution on row-major images.
//!
//! Tap `(a, b)` of a filter with side `p` sits at spatial offset `(a - c, b - c)` where
//! `c = (p - 1) / 2`. For odd `p` the support is symmetric about the origin and reversing
//! the taps along each dimension gives exactly the adjoint of the convolution; for even `p`
//! the reversed filter is the adjoint up to a one-pixel shift, so the adjoint is always
//! applied through [`conv2d_adjoint`] rather than by convolving with a reversed filter.

use crate::error::{check_len, invalid, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Filter2d<T> {
    side: usize,
    taps: Vec<T>,
}

impl<T: Real> Filter2d<T> {
    pub fn new(side: usize, taps: Vec<T>) -> Result<Self> {
        if side == 0 {
            return invalid("filter side must be positive");
        }
        check_len("filter taps", side * side, taps.len())?;
        Ok(Self { side, taps })
    }

    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            taps: vec![T::zero(); side * side],
        }
    }

    /// Kronecker delta placed at the filter origin.
    pub fn delta(side: usize) -> Self {
        let mut f = Self::zeros(side);
        let c = (side - 1) / 2;
        f.taps[c * side + c] = T::one();
        f
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of taps `R = side²`.
    pub fn size(&self) -> usize {
        self.taps.len()
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn taps_mut(&mut self) -> &mut [T] {
        &mut self.taps
    }

    pub fn origin(&self) -> usize {
        (self.side - 1) / 2
    }

    /// Spatial offset of tap `index`.
    pub fn offset(&self, index: usize) -> (isize, isize) {
        let c = self.origin() as isize;
        let a = (index / self.side) as isize;
        let b = (index % self.side) as isize;
        (a - c, b - c)
    }

    /// Reversal along each dimension.
    pub fn flipped(&self) -> Self {
        let mut taps = self.taps.clone();
        taps.reverse();
        Self {
            side: self.side,
            taps,
        }
    }

    pub fn abs(&self) -> Self {
        Self {
            side: self.side,
            taps: self.taps.iter().map(|t| t.abs()).collect(),
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            side: self.side,
            taps: self.taps.iter().map(|&t| t * c).collect(),
        }
    }
}

/// `out[i, j] += coef * x[(i + di) mod h, (j + dj) mod w]`.
pub(crate) fn accumulate_shifted<T: Real>(
    out: &mut [T],
    x: &[T],
    h: usize,
    w: usize,
    di: isize,
    dj: isize,
    coef: T,
) {
    let si = di.rem_euclid(h as isize) as usize;
    let sj = dj.rem_euclid(w as isize) as usize;
    for i in 0..h {
        let src_row = &x[((i + si) % h) * w..((i + si) % h + 1) * w];
        let dst_row = &mut out[i * w..(i + 1) * w];
        let split = w - sj;
        for (d, &s) in dst_row[..split].iter_mut().zip(&src_row[sj..]) {
            *d += coef * s;
        }
        for (d, &s) in dst_row[split..].iter_mut().zip(&src_row[..sj]) {
            *d += coef * s;
        }
    }
}

/// `Σ_{i,j} g[i, j] · x[(i + di) mod h, (j + dj) mod w]`.
pub(crate) fn shifted_dot<T: Real>(g: &[T], x: &[T], h: usize, w: usize, di: isize, dj: isize) -> T {
    let si = di.rem_euclid(h as isize) as usize;
    let sj = dj.rem_euclid(w as isize) as usize;
    let mut acc = T::zero();
    for i in 0..h {
        let src_row = &x[((i + si) % h) * w..((i + si) % h + 1) * w];
        let g_row = &g[i * w..(i + 1) * w];
        let split = w - sj;
        for (&a, &b) in g_row[..split].iter().zip(&src_row[sj..]) {
            acc += a * b;
        }
        for (&a, &b) in g_row[split..].iter().zip(&src_row[..sj]) {
            acc += a * b;
        }
    }
    acc
}

/// Circular convolution `h ⊛ x`, accumulated into `out`.
pub fn conv2d_accumulate<T: Real>(f: &Filter2d<T>, x: &[T], h: usize, w: usize, out: &mut [T]) {
    for (idx, &tap) in f.taps.iter().enumerate() {
        if tap == T::zero() {
            continue;
        }
        let (oa, ob) = f.offset(idx);
        accumulate_shifted(out, x, h, w, -oa, -ob, tap);
    }
}

/// Adjoint of [`conv2d_accumulate`] (circular correlation), accumulated into `out`.
pub fn conv2d_adjoint_accumulate<T: Real>(
    f: &Filter2d<T>,
    y: &[T],
    h: usize,
    w: usize,
    out: &mut [T],
) {
    for (idx, &tap) in f.taps.iter().enumerate() {
        if tap == T::zero() {
            continue;
        }
        let (oa, ob) = f.offset(idx);
        accumulate_shifted(out, y, h, w, oa, ob, tap);
    }
}

pub fn conv2d<T: Real>(f: &Filter2d<T>, x: &[T], h: usize, w: usize) -> Vec<T> {
    let mut out = vec![T::zero(); h * w];
    conv2d_accumulate(f, x, h, w, &mut out);
    out
}

pub fn conv2d_adjoint<T: Real>(f: &Filter2d<T>, y: &[T], h: usize, w: usize) -> Vec<T> {
    let mut out = vec![T::zero(); h * w];
    conv2d_adjoint_accumulate(f, y, h, w, &mut out);
    out
}

/// Gradient of `⟨g, f ⊛ x⟩` with respect to the taps of `f`, accumulated into `grad`.
pub(crate) fn conv2d_filter_grad<T: Real>(
    side: usize,
    g: &[T],
    x: &[T],
    h: usize,
    w: usize,
    grad: &mut [T],
) {
    let c = ((side - 1) / 2) as isize;
    for (idx, gr) in grad.iter_mut().enumerate() {
        let oa = (idx / side) as isize - c;
        let ob = (idx % side) as isize - c;
        *gr += shifted_dot(g, x, h, w, -oa, -ob);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::dot;

    fn lcg(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    #[test]
    fn delta_filter_is_identity() {
        let x = lcg(20, 1);
        for side in 1..5 {
            let y = conv2d(&Filter2d::delta(side), &x, 4, 5);
            assert_eq!(y, x);
        }
    }

    #[test]
    fn conv_matches_direct_definition() {
        let (h, w) = (5, 6);
        let x = lcg(h * w, 7);
        let f = Filter2d::new(3, lcg(9, 3)).unwrap();
        let y = conv2d(&f, &x, h, w);
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        let ii = (i as isize - (a as isize - 1)).rem_euclid(h as isize) as usize;
                        let jj = (j as isize - (b as isize - 1)).rem_euclid(w as isize) as usize;
                        acc += f.taps()[a * 3 + b] * x[ii * w + jj];
                    }
                }
                assert!((acc - y[i * w + j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn adjoint_identity_for_odd_and_even_sides() {
        let (h, w) = (6, 7);
        for side in 1..6 {
            let f = Filter2d::new(side, lcg(side * side, side as u64)).unwrap();
            let x = lcg(h * w, 11);
            let y = lcg(h * w, 12);
            let lhs = dot(&conv2d(&f, &x, h, w), &y);
            let rhs = dot(&x, &conv2d_adjoint(&f, &y, h, w));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn odd_flip_equals_adjoint() {
        let f = Filter2d::new(3, lcg(9, 5)).unwrap();
        let y = lcg(30, 9);
        let a = conv2d(&f.flipped(), &y, 5, 6);
        let b = conv2d_adjoint(&f, &y, 5, 6);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn filter_grad_matches_inner_product() {
        let (h, w) = (4, 5);
        let x = lcg(h * w, 21);
        let g = lcg(h * w, 22);
        let mut grad = vec![0.0; 4];
        conv2d_filter_grad(2, &g, &x, h, w, &mut grad);
        for k in 0..4 {
            let mut taps = vec![0.0; 4];
            taps[k] = 1.0;
            let f = Filter2d::new(2, taps).unwrap();
            let v = dot(&g, &conv2d(&f, &x, h, w));
            assert!((v - grad[k]).abs() < 1e-13);
        }
    }
}
