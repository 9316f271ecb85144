//! Proximal maps under diagonal majorizer metrics.

use crate::datafit::DiagonalMajorizer;
use crate::error::{check_len, invalid, Error, Result};
use crate::image::ImageVector;
use crate::scalar::Real;

/// Closed convex feasible set, separable across pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeasibleSet<T> {
    All,
    NonNegative,
    Box { lo: T, hi: T },
}

impl<T: Real> FeasibleSet<T> {
    pub fn boxed(lo: T, hi: T) -> Result<Self> {
        let set = FeasibleSet::Box { lo, hi };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FeasibleSet::Box { lo, hi } if !(lo <= hi) => {
                invalid(format!("box lower bound {lo} exceeds upper bound {hi}"))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn project_scalar(&self, v: T) -> T {
        match *self {
            FeasibleSet::All => v,
            FeasibleSet::NonNegative => v.max(T::zero()),
            FeasibleSet::Box { lo, hi } => v.max(lo).min(hi),
        }
    }

    pub fn project_in_place(&self, v: &mut [T]) {
        if matches!(self, FeasibleSet::All) {
            return;
        }
        for x in v {
            *x = self.project_scalar(*x);
        }
    }

    pub fn contains(&self, v: &[T]) -> bool {
        v.iter().all(|&x| self.project_scalar(x) == x)
    }
}

/// Nonnegative per-channel thresholds (`α_k` or `β_k`).
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdVector<T>(Vec<T>);

impl<T: Real> ThresholdVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|v| !(*v >= T::zero())) {
            return invalid("thresholds must be nonnegative");
        }
        Ok(Self(values))
    }

    pub fn uniform(k: usize, value: T) -> Result<Self> {
        Self::new(vec![value; k])
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Scalar soft-thresholding; `|u| = α` maps to zero.
#[inline]
pub fn soft_threshold_scalar<T: Real>(u: T, alpha: T) -> T {
    if u > alpha {
        u - alpha
    } else if u < -alpha {
        u + alpha
    } else {
        T::zero()
    }
}

pub fn soft_threshold<T: Real>(u: &[T], alpha: T) -> Result<Vec<T>> {
    if !(alpha >= T::zero()) {
        return invalid(format!("soft-threshold level must be nonnegative, got {alpha}"));
    }
    Ok(u.iter().map(|&v| soft_threshold_scalar(v, alpha)).collect())
}

pub(crate) fn soft_threshold_in_place<T: Real>(u: &mut [T], alpha: T) {
    for v in u {
        *v = soft_threshold_scalar(*v, alpha);
    }
}

/// `argmin_{u ∈ set} ½‖u − v‖²_M`. With a diagonal metric and a separable set this is the
/// entrywise projection, whatever the (positive) metric values are.
pub fn prox_indicator<T: Real>(
    v: &ImageVector<T>,
    metric: &DiagonalMajorizer<T>,
    set: &FeasibleSet<T>,
) -> Result<ImageVector<T>> {
    set.validate()?;
    check_len("prox metric", v.len(), metric.len())?;
    let mut out = v.clone();
    set.project_in_place(out.as_mut_slice());
    Ok(out)
}

/// `argmin_u ½‖u − z‖²_M + β‖u‖₁`, i.e. entrywise soft-thresholding at `β / M_n`.
pub fn prox_l1_metric<T: Real>(z: &[T], metric: &DiagonalMajorizer<T>, beta: T) -> Result<Vec<T>> {
    check_len("prox metric", z.len(), metric.len())?;
    if !(beta >= T::zero()) {
        return invalid("l1 weight must be nonnegative");
    }
    if !crate::scalar::all_finite(z) {
        return Err(Error::NonFinite("prox input"));
    }
    Ok(z
        .iter()
        .zip(metric.scaled_diag())
        .map(|(&zn, mn)| soft_threshold_scalar(zn, beta / mn))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(&[2.5, -0.5, 1.0], 1.0).unwrap(), vec![1.5, 0.0, 0.0]);
        assert_eq!(soft_threshold(&[2.5, -0.5, 1.0], 0.0).unwrap(), vec![2.5, -0.5, 1.0]);
        assert_eq!(soft_threshold(&[-3.0], 1.0).unwrap(), vec![-2.0]);
        assert!(soft_threshold(&[1.0], -0.1).is_err());
    }

    #[test]
    fn indicator_projection_cases() {
        let m = DiagonalMajorizer::new(vec![1.0, 5.0, 0.2], 1.0).unwrap();
        let v = ImageVector::from_vec(vec![-1.0, 0.5, 2.0]).unwrap();
        let p = prox_indicator(&v, &m, &FeasibleSet::Box { lo: 0.0, hi: 1.0 }).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 0.5, 1.0]);
        let inside = ImageVector::from_vec(vec![0.1, 0.5, 0.9]).unwrap();
        let p = prox_indicator(&inside, &m, &FeasibleSet::Box { lo: 0.0, hi: 1.0 }).unwrap();
        assert_eq!(p, inside);
        let m2 = DiagonalMajorizer::new(vec![3.0, 4.0], 1.0).unwrap();
        let v = ImageVector::from_vec(vec![-2.0, 3.0]).unwrap();
        let p = prox_indicator(&v, &m2, &FeasibleSet::NonNegative).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 3.0]);
        assert!(FeasibleSet::boxed(1.0, 0.0).is_err());
        assert!(prox_indicator(&v, &m2, &FeasibleSet::Box { lo: 1.0, hi: 0.0 }).is_err());
    }

    #[test]
    fn prox_l1_metric_cases() {
        let id = DiagonalMajorizer::new(vec![1.0], 1.0).unwrap();
        assert_eq!(prox_l1_metric(&[2.5], &id, 1.0).unwrap(), vec![1.5]);
        let two = DiagonalMajorizer::new(vec![2.0], 1.0).unwrap();
        assert_eq!(prox_l1_metric(&[2.5], &two, 1.0).unwrap(), vec![2.0]);
        assert_eq!(prox_l1_metric(&[2.5], &two, 0.0).unwrap(), vec![2.5]);
    }

    #[test]
    fn prox_l1_metric_matches_grid_search() {
        // ½·2·(u − 2.5)² + |u| on a 1e-4 grid
        let mut best = (f64::INFINITY, 0.0);
        for i in -40000..=40000 {
            let u = i as f64 * 1e-4;
            let v = (u - 2.5) * (u - 2.5) + u.abs();
            if v < best.0 {
                best = (v, u);
            }
        }
        assert!((best.1 - 2.0).abs() <= 1e-4);
    }

    proptest! {
        #[test]
        fn soft_threshold_minimizes_scalar_objective(u in -5.0f64..5.0, alpha in 0.0f64..3.0) {
            let t = soft_threshold_scalar(u, alpha);
            let obj = |s: f64| 0.5 * (s - u) * (s - u) + alpha * s.abs();
            for d in [-1e-3, 1e-3, -0.1, 0.1, -1.0, 1.0] {
                prop_assert!(obj(t) <= obj(t + d) + 1e-12);
            }
        }

        #[test]
        fn projection_is_idempotent_and_nonexpansive(
            a in proptest::collection::vec(-3.0f64..3.0, 6),
            b in proptest::collection::vec(-3.0f64..3.0, 6),
        ) {
            let m = DiagonalMajorizer::new(vec![1.5; 6], 1.0).unwrap();
            let set = FeasibleSet::Box { lo: -1.0, hi: 2.0 };
            let pa = prox_indicator(&ImageVector::from_vec(a.clone()).unwrap(), &m, &set).unwrap();
            let pb = prox_indicator(&ImageVector::from_vec(b.clone()).unwrap(), &m, &set).unwrap();
            let ppa = prox_indicator(&pa, &m, &set).unwrap();
            prop_assert_eq!(&ppa, &pa);
            let da: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
            prop_assert!(pa.dist_sq(&pb) <= da + 1e-12);
        }
    }
}
