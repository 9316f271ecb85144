use std::f64::consts::PI;

use crate::conv::{conv2d, conv2d_accumulate, conv2d_adjoint_accumulate, Filter2d};
use crate::error::{invalid, Error, Result};
use crate::image::ImageVector;
use crate::prox::{soft_threshold_in_place, ThresholdVector};
use crate::scalar::{norm_sq, Real};

use super::Refiner;

/// Largest tolerated deviation from the tight-frame identity.
pub const TIGHT_FRAME_TOL: f64 = 1e-8;

/// Tied convolutional autoencoder `R(u) = Σ_k h_kᵀ T_{β_k}(h_k ⊛ u)`, where `h_kᵀ` is the
/// adjoint of convolution with `h_k` (convolution with the reversed filter).
#[derive(Clone, Debug, PartialEq)]
pub struct TiedCaolRefiner<T> {
    filters: Vec<Filter2d<T>>,
    thresholds: ThresholdVector<T>,
    tight_frame: bool,
}

impl<T: Real> TiedCaolRefiner<T> {
    /// With `require_tight_frame` the bank must satisfy `Σ_k ‖h_k ⊛ u‖² = ‖u‖²` to within
    /// [`TIGHT_FRAME_TOL`].
    pub fn new(filters: Vec<Filter2d<T>>, thresholds: ThresholdVector<T>, require_tight_frame: bool) -> Result<Self> {
        if filters.is_empty() {
            return invalid("tied CAOL refiner needs at least one filter");
        }
        crate::error::check_len("tied CAOL thresholds", filters.len(), thresholds.len())?;
        let side = filters[0].side();
        if filters.iter().any(|f| f.side() != side) {
            return invalid("tied CAOL filters must share one size");
        }
        if require_tight_frame {
            let err = tight_frame_error(&filters);
            if !(err <= TIGHT_FRAME_TOL) {
                return Err(Error::TightFrameViolation(err));
            }
        }
        Ok(Self {
            filters,
            thresholds,
            tight_frame: require_tight_frame,
        })
    }

    pub fn filters(&self) -> &[Filter2d<T>] {
        &self.filters
    }

    pub fn thresholds(&self) -> &ThresholdVector<T> {
        &self.thresholds
    }

    pub fn is_tight_frame(&self) -> bool {
        self.tight_frame
    }

    /// Sparse codes `ζ_k = T_{β_k}(h_k ⊛ u)`.
    pub fn sparse_codes(&self, u: &ImageVector<T>) -> Vec<Vec<T>> {
        let (h, w) = u.shape();
        self.filters
            .iter()
            .zip(self.thresholds.values())
            .map(|(f, &beta)| {
                let mut a = vec![T::zero(); u.len()];
                conv2d_accumulate(f, u.as_slice(), h, w, &mut a);
                soft_threshold_in_place(&mut a, beta);
                a
            })
            .collect()
    }
}

impl<T: Real> Refiner<T> for TiedCaolRefiner<T> {
    fn refine(&self, u: &ImageVector<T>) -> Result<ImageVector<T>> {
        let (h, w) = u.shape();
        let mut out = vec![T::zero(); u.len()];
        let mut a = vec![T::zero(); u.len()];
        for (f, &beta) in self.filters.iter().zip(self.thresholds.values()) {
            a.iter_mut().for_each(|v| *v = T::zero());
            conv2d_accumulate(f, u.as_slice(), h, w, &mut a);
            soft_threshold_in_place(&mut a, beta);
            conv2d_adjoint_accumulate(f, &a, h, w, &mut out);
        }
        ImageVector::new(out, h, w)
    }
}

/// Deviation of `Σ_k h_k ⋆ h_k` (summed autocorrelations) from the unit impulse, as a maximum
/// over lags. Zero exactly when `Σ_k ‖h_k ⊛ u‖² = ‖u‖²` for every image `u`, whatever its size.
pub fn tight_frame_error<T: Real>(filters: &[Filter2d<T>]) -> f64 {
    let Some(first) = filters.first() else {
        return f64::INFINITY;
    };
    let p = first.side() as isize;
    let mut worst = 0.0f64;
    for da in -(p - 1)..p {
        for db in -(p - 1)..p {
            let mut acc = 0.0;
            for f in filters {
                let t = f.taps();
                for a in 0.max(-da)..p.min(p - da) {
                    for b in 0.max(-db)..p.min(p - db) {
                        let i = (a * p + b) as usize;
                        let j = ((a + da) * p + (b + db)) as usize;
                        acc += t[i].as_f64() * t[j].as_f64();
                    }
                }
            }
            let target = if da == 0 && db == 0 { 1.0 } else { 0.0 };
            worst = worst.max((acc - target).abs());
        }
    }
    worst
}

/// Relative gap `|Σ_k ‖h_k ⊛ u‖² − ‖u‖²| / ‖u‖²` on a given image.
pub fn tf_identity_gap<T: Real>(filters: &[Filter2d<T>], u: &ImageVector<T>) -> f64 {
    let (h, w) = u.shape();
    let lhs: f64 = filters
        .iter()
        .map(|f| norm_sq(&conv2d(f, u.as_slice(), h, w)).as_f64())
        .sum();
    let rhs = u.norm_sq().as_f64();
    (lhs - rhs).abs() / rhs.max(f64::MIN_POSITIVE)
}

/// `R` filters of side `√R` built from the separable orthonormal DCT-II basis and scaled by
/// `1/√R`, which makes the bank a tight frame.
pub fn make_tf_filterbank<T: Real>(r: usize) -> Result<Vec<Filter2d<T>>> {
    let p = (r as f64).sqrt().round() as usize;
    if r == 0 || p * p != r {
        return invalid(format!("filter size {r} is not a positive perfect square"));
    }
    let basis = |k: usize, n: usize| -> f64 {
        let s = if k == 0 { (1.0 / p as f64).sqrt() } else { (2.0 / p as f64).sqrt() };
        s * (PI * (2 * n + 1) as f64 * k as f64 / (2 * p) as f64).cos()
    };
    let scale = 1.0 / (r as f64).sqrt();
    let mut bank = Vec::with_capacity(r);
    for k1 in 0..p {
        for k2 in 0..p {
            let taps = (0..r)
                .map(|idx| T::lit(scale * basis(k1, idx / p) * basis(k2, idx % p)))
                .collect();
            bank.push(Filter2d::new(p, taps)?);
        }
    }
    Ok(bank)
}

/// Random image used by the tight-frame tests.
#[cfg(test)]
pub(crate) fn random_image<T: Real>(h: usize, w: usize, seed: u64) -> ImageVector<T> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    ImageVector::from_fn(h, w, |_, _| T::lit(rng.gen_range(-1.0..1.0)))
}
