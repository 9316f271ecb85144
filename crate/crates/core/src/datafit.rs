//! Weighted quadratic data-fit, diagonal majorizers and the MBIR objective
//! `F(x; y, z) = ½‖y − Ax‖²_W + (γ/2)‖x − z‖²`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, invalid, Error, Result};
use crate::image::ImageVector;
use crate::linops::LinearOperator;
use crate::prox::FeasibleSet;
use crate::scalar::{self, Real};

/// Relative floor applied to zero entries of the data-fit majorizer.
pub const MAJORIZER_FLOOR: f64 = 1e-8;

/// `f(x; y) = ½‖y − Ax‖²_W` with diagonal nonnegative `W`.
#[derive(Clone, Debug)]
pub struct QuadraticDataFit<T: Real> {
    op: Arc<dyn LinearOperator<T>>,
    weights: Vec<T>,
    measurements: Vec<T>,
}

impl<T: Real> QuadraticDataFit<T> {
    pub fn new(op: Arc<dyn LinearOperator<T>>, weights: Vec<T>, measurements: Vec<T>) -> Result<Self> {
        check_len("data-fit weights", op.output_dim(), weights.len())?;
        check_len("data-fit measurements", op.output_dim(), measurements.len())?;
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return invalid("data-fit weights must be finite and nonnegative");
        }
        if !scalar::all_finite(&measurements) {
            return Err(Error::NonFinite("measurements"));
        }
        Ok(Self {
            op,
            weights,
            measurements,
        })
    }

    /// Unit weights.
    pub fn unweighted(op: Arc<dyn LinearOperator<T>>, measurements: Vec<T>) -> Result<Self> {
        let w = vec![T::one(); op.output_dim()];
        Self::new(op, w, measurements)
    }

    pub fn operator(&self) -> &Arc<dyn LinearOperator<T>> {
        &self.op
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn measurements(&self) -> &[T] {
        &self.measurements
    }

    pub fn input_dim(&self) -> usize {
        self.op.input_dim()
    }

    /// Same operator and weights with different measurements.
    pub fn with_measurements(&self, measurements: Vec<T>) -> Result<Self> {
        Self::new(self.op.clone(), self.weights.clone(), measurements)
    }

    fn weighted_residual(&self, x: &[T]) -> Vec<T> {
        let mut r = self.op.forward(x);
        for ((ri, &yi), &wi) in r.iter_mut().zip(&self.measurements).zip(&self.weights) {
            *ri = wi * (*ri - yi);
        }
        r
    }

    pub fn value_slice(&self, x: &[T]) -> T {
        let ax = self.op.forward(x);
        let half = T::lit(0.5);
        ax.iter()
            .zip(&self.measurements)
            .zip(&self.weights)
            .fold(T::zero(), |acc, ((&a, &y), &w)| acc + w * (a - y) * (a - y))
            * half
    }

    pub fn value(&self, x: &ImageVector<T>) -> Result<T> {
        check_len("data-fit input", self.input_dim(), x.len())?;
        Ok(self.value_slice(x.as_slice()))
    }

    pub(crate) fn gradient_slice(&self, x: &[T]) -> Vec<T> {
        self.op.adjoint(&self.weighted_residual(x))
    }

    /// `AᵀW(Ax − y)`.
    pub fn gradient(&self, x: &ImageVector<T>) -> Result<ImageVector<T>> {
        check_len("data-fit input", self.input_dim(), x.len())?;
        Ok(x.with_data(self.gradient_slice(x.as_slice())))
    }

    /// `|Aᵀ| W |A| 1` without any flooring; positive semidefinite majorizer diagonal.
    pub fn majorizer_diag_raw(&self) -> Vec<T> {
        let ones = vec![T::one(); self.op.input_dim()];
        let mut col = vec![T::zero(); self.op.output_dim()];
        self.op.abs_forward_into(&ones, &mut col);
        for (c, &w) in col.iter_mut().zip(&self.weights) {
            *c *= w;
        }
        let mut out = vec![T::zero(); self.op.input_dim()];
        self.op.abs_adjoint_into(&col, &mut out);
        out
    }
}

/// Free-function form of [`QuadraticDataFit::gradient`].
pub fn datafit_gradient<T: Real>(f: &QuadraticDataFit<T>, x: &ImageVector<T>) -> Result<ImageVector<T>> {
    f.gradient(x)
}

/// Positive diagonal metric `M` with scale `λ ≥ 1`; the effective majorizer is `λ·M`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalMajorizer<T> {
    diag: Vec<T>,
    lambda: T,
}

impl<T: Real> DiagonalMajorizer<T> {
    pub fn new(diag: Vec<T>, lambda: T) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Empty("majorizer diagonal"));
        }
        if diag.iter().any(|d| !(*d > T::zero()) || !d.is_finite()) {
            return invalid("majorizer diagonal entries must lie in (0, ∞)");
        }
        if !(lambda >= T::one()) || !lambda.is_finite() {
            return invalid(format!("majorizer scale must be ≥ 1, got {lambda}"));
        }
        Ok(Self { diag, lambda })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            diag: vec![T::one(); n],
            lambda: T::one(),
        }
    }

    pub fn with_lambda(&self, lambda: T) -> Result<Self> {
        Self::new(self.diag.clone(), lambda)
    }

    pub fn diag(&self) -> &[T] {
        &self.diag
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Diagonal of `λ·M`.
    pub fn scaled_diag(&self) -> impl Iterator<Item = T> + '_ {
        let l = self.lambda;
        self.diag.iter().map(move |&d| l * d)
    }

    /// `m_{F,min}`.
    pub fn min_entry(&self) -> T {
        self.diag.iter().copied().fold(T::infinity(), T::min)
    }

    /// `m_{F,max}`.
    pub fn max_entry(&self) -> T {
        self.diag.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Multiplies the diagonal by `c > 0`, keeping `λ`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(self.diag.iter().map(|&d| d * c).collect(), self.lambda)
    }

    /// `σ_max − σ_min` of the diagonal (the scale `λ` is not applied).
    pub fn spread(&self) -> T {
        self.max_entry() - self.min_entry()
    }
}

/// `diag(|Aᵀ| W |A| 1)`, with exact zeros raised to `1e-8 × max entry` so that the result
/// stays positive definite when `A` has empty columns.
pub fn diag_majorizer<T: Real>(f: &QuadraticDataFit<T>) -> DiagonalMajorizer<T> {
    let mut d = f.majorizer_diag_raw();
    let max = d.iter().copied().fold(T::zero(), T::max);
    let floor = if max > T::zero() {
        T::lit(MAJORIZER_FLOOR) * max
    } else {
        T::lit(MAJORIZER_FLOOR)
    };
    for v in &mut d {
        if !(*v > T::zero()) {
            *v = floor;
        }
    }
    DiagonalMajorizer {
        diag: d,
        lambda: T::one(),
    }
}

/// `σ_max − σ_min` of a diagonal matrix.
pub fn spectral_spread<T: Real>(diag: &[T]) -> Result<T> {
    if diag.is_empty() {
        return Err(Error::Empty("spectral spread input"));
    }
    if !scalar::all_finite(diag) {
        return Err(Error::NonFinite("spectral spread input"));
    }
    let max = diag.iter().copied().fold(T::neg_infinity(), T::max);
    let min = diag.iter().copied().fold(T::infinity(), T::min);
    Ok(max - min)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpreadEstimate {
    pub sigma_max: f64,
    /// Taken as zero: imaging operators are typically rank deficient.
    pub sigma_min: f64,
    pub spread: f64,
    pub iterations: usize,
}

/// Spectral spread of `AᵀWA` through power iteration for `σ_max` (`σ_min` taken as 0).
pub fn operator_spectral_spread<T: Real>(f: &QuadraticDataFit<T>) -> SpreadEstimate {
    const ITERS: usize = 100;
    const TOL: f64 = 1e-8;
    let n = f.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| 1.0 + 0.1 * rng.gen::<f64>()).collect();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let mut sigma = 0.0;
    let mut iterations = 0;
    for it in 0..ITERS {
        iterations = it + 1;
        let vt: Vec<T> = v.iter().map(|&x| T::lit(x)).collect();
        let mut av = f.op.forward(&vt);
        for (a, &w) in av.iter_mut().zip(&f.weights) {
            *a *= w;
        }
        let w: Vec<f64> = f.op.adjoint(&av).iter().map(|x| x.as_f64()).collect();
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nw == 0.0 {
            sigma = 0.0;
            break;
        }
        let next = nw;
        v = w.into_iter().map(|x| x / nw).collect();
        let done = (next - sigma).abs() <= TOL * next;
        sigma = next;
        if done {
            break;
        }
    }
    SpreadEstimate {
        sigma_max: sigma,
        sigma_min: 0.0,
        spread: sigma,
        iterations,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MajorizationReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest `(lhs − rhs) / max(|lhs|, |rhs|)` observed (≤ 0 when the bound always held).
    pub max_violation: f64,
}

/// `f(v) + ⟨∇f(v), u − v⟩ + ½‖u − v‖²_M − f(u)`; nonnegative when `M` majorizes.
pub fn majorization_gap<T: Real>(
    f: &QuadraticDataFit<T>,
    metric: &DiagonalMajorizer<T>,
    u: &[T],
    v: &[T],
) -> Result<(f64, f64)> {
    check_len("majorization u", f.input_dim(), u.len())?;
    check_len("majorization v", f.input_dim(), v.len())?;
    check_len("majorization metric", f.input_dim(), metric.len())?;
    let fu = f.value_slice(u).as_f64();
    let fv = f.value_slice(v).as_f64();
    let g = f.gradient_slice(v);
    let mut lin = 0.0;
    let mut quad = 0.0;
    for (((&ui, &vi), gi), mi) in u.iter().zip(v).zip(&g).zip(metric.scaled_diag()) {
        let d = (ui - vi).as_f64();
        lin += gi.as_f64() * d;
        quad += mi.as_f64() * d * d;
    }
    Ok((fu, fv + lin + 0.5 * quad))
}

/// Samples random pairs and checks the quadratic upper bound at relative tolerance `1e-10`.
pub fn verify_majorization<T: Real>(
    f: &QuadraticDataFit<T>,
    metric: &DiagonalMajorizer<T>,
    trials: usize,
    seed: u64,
) -> Result<MajorizationReport> {
    if trials == 0 {
        return invalid("verify_majorization needs at least one trial");
    }
    const REL_TOL: f64 = 1e-10;
    let n = f.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut max_violation = f64::NEG_INFINITY;
    for _ in 0..trials {
        let u: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
        let v: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
        let (lhs, rhs) = majorization_gap(f, metric, &u, &v)?;
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        let rel = (lhs - rhs) / scale;
        max_violation = max_violation.max(rel);
        if rel > REL_TOL {
            violations += 1;
        }
    }
    Ok(MajorizationReport {
        trials,
        violations,
        max_violation,
    })
}

/// `F(x; y, z) = f(x; y) + (γ/2)‖x − z‖²` over a feasible set.
#[derive(Clone, Debug)]
pub struct MbirObjective<'a, T: Real> {
    pub datafit: &'a QuadraticDataFit<T>,
    pub gamma: T,
    pub anchor: ImageVector<T>,
    pub feasible: FeasibleSet<T>,
}

impl<'a, T: Real> MbirObjective<'a, T> {
    pub fn new(
        datafit: &'a QuadraticDataFit<T>,
        gamma: T,
        anchor: ImageVector<T>,
        feasible: FeasibleSet<T>,
    ) -> Result<Self> {
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return invalid(format!("γ must be positive, got {gamma}"));
        }
        check_len("objective anchor", datafit.input_dim(), anchor.len())?;
        feasible.validate()?;
        Ok(Self {
            datafit,
            gamma,
            anchor,
            feasible,
        })
    }

    pub fn value(&self, x: &ImageVector<T>) -> Result<T> {
        check_len("objective input", self.datafit.input_dim(), x.len())?;
        Ok(self.value_slice(x.as_slice()))
    }

    pub(crate) fn value_slice(&self, x: &[T]) -> T {
        self.datafit.value_slice(x)
            + T::lit(0.5) * self.gamma * scalar::dist_sq(x, self.anchor.as_slice())
    }

    pub(crate) fn gradient_slice(&self, x: &[T]) -> Vec<T> {
        let mut g = self.datafit.gradient_slice(x);
        for ((gi, &xi), &zi) in g.iter_mut().zip(x).zip(self.anchor.as_slice()) {
            *gi += self.gamma * (xi - zi);
        }
        g
    }

    /// `∇f(x; y) + γ(x − z)`.
    pub fn gradient(&self, x: &ImageVector<T>) -> Result<ImageVector<T>> {
        check_len("objective input", self.datafit.input_dim(), x.len())?;
        Ok(x.with_data(self.gradient_slice(x.as_slice())))
    }

    /// `λ·(diag(|Aᵀ|W|A|1) + γI)`. The raw data-fit diagonal is used, so `A = 0` gives the
    /// exact majorizer `λγI`.
    pub fn majorizer(&self, lambda: T) -> Result<DiagonalMajorizer<T>> {
        majorizer_for_gamma(&self.datafit.majorizer_diag_raw(), self.gamma, lambda)
    }
}

/// `λ·(diag + γI)` for a precomputed raw data-fit diagonal.
pub fn majorizer_for_gamma<T: Real>(raw: &[T], gamma: T, lambda: T) -> Result<DiagonalMajorizer<T>> {
    DiagonalMajorizer::new(raw.iter().map(|&d| d + gamma).collect(), lambda)
}

pub fn mbir_gradient<T: Real>(obj: &MbirObjective<'_, T>, x: &ImageVector<T>) -> Result<ImageVector<T>> {
    obj.gradient(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{DenseMatrix, IdentityOperator, ZeroOperator};

    fn a22() -> Arc<dyn LinearOperator<f64>> {
        Arc::new(DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap())
    }

    fn v(x: &[f64]) -> ImageVector<f64> {
        ImageVector::from_vec(x.to_vec()).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let f = QuadraticDataFit::new(a22(), vec![1.0, 2.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(f.gradient(&v(&[1.0, 1.0])).unwrap().as_slice(), &[45.0, 62.0]);

        let id = QuadraticDataFit::unweighted(Arc::new(IdentityOperator::new(2)), vec![0.0, 0.0]).unwrap();
        assert_eq!(datafit_gradient(&id, &v(&[2.0, -1.0])).unwrap().as_slice(), &[2.0, -1.0]);

        let exact = QuadraticDataFit::unweighted(a22(), vec![3.0, 7.0]).unwrap();
        assert_eq!(exact.gradient(&v(&[1.0, 1.0])).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(exact.gradient(&v(&[1.0])).is_err());
    }

    #[test]
    fn weights_must_be_nonnegative() {
        assert!(QuadraticDataFit::new(a22(), vec![1.0, -1.0], vec![0.0, 0.0]).is_err());
        assert!(QuadraticDataFit::new(a22(), vec![1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn majorizer_examples() {
        let f = QuadraticDataFit::unweighted(a22(), vec![0.0, 0.0]).unwrap();
        assert_eq!(diag_majorizer(&f).diag(), &[24.0, 34.0]);
        let id = QuadraticDataFit::unweighted(Arc::new(IdentityOperator::new(3)), vec![0.0; 3]).unwrap();
        assert_eq!(diag_majorizer(&id).diag(), &[1.0, 1.0, 1.0]);
        let zero_col = Arc::new(DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap());
        let f = QuadraticDataFit::unweighted(zero_col, vec![0.0, 0.0]).unwrap();
        let m = diag_majorizer(&f);
        assert_eq!(m.diag()[0], 5.0);
        assert_eq!(m.diag()[1], 5.0 * MAJORIZER_FLOOR);
    }

    #[test]
    fn mbir_gradient_examples() {
        let f = QuadraticDataFit::new(a22(), vec![1.0, 2.0], vec![0.0, 0.0]).unwrap();
        let obj = MbirObjective::new(&f, 1.0, v(&[0.0, 0.0]), FeasibleSet::All).unwrap();
        assert_eq!(mbir_gradient(&obj, &v(&[1.0, 1.0])).unwrap().as_slice(), &[46.0, 63.0]);

        let zero = QuadraticDataFit::unweighted(Arc::new(ZeroOperator::new(2, 2)), vec![0.0, 0.0]).unwrap();
        let obj = MbirObjective::new(&zero, 2.0, v(&[0.0, 0.0]), FeasibleSet::All).unwrap();
        assert_eq!(obj.gradient(&v(&[1.0, 1.0])).unwrap().as_slice(), &[2.0, 2.0]);

        let exact = QuadraticDataFit::unweighted(a22(), vec![3.0, 7.0]).unwrap();
        let obj = MbirObjective::new(&exact, 3.0, v(&[1.0, 1.0]), FeasibleSet::All).unwrap();
        assert_eq!(obj.gradient(&v(&[1.0, 1.0])).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(MbirObjective::new(&exact, 0.0, v(&[1.0, 1.0]), FeasibleSet::All).is_err());
    }

    #[test]
    fn spread_examples() {
        assert_eq!(spectral_spread(&[24.0, 34.0]).unwrap(), 10.0);
        assert_eq!(spectral_spread(&[3.5; 4]).unwrap(), 0.0);
        assert_eq!(spectral_spread(&[1.0, 5.0, 3.0]).unwrap(), 4.0);
        assert!(spectral_spread::<f64>(&[]).is_err());
    }

    #[test]
    fn power_iteration_on_dense() {
        // AᵀA = [[10, 14], [14, 20]] has eigenvalues 15 ± √221
        let f = QuadraticDataFit::unweighted(a22(), vec![0.0, 0.0]).unwrap();
        let est = operator_spectral_spread(&f);
        assert!((est.sigma_max - (15.0 + 221f64.sqrt())).abs() < 1e-6);
        assert_eq!(est.sigma_min, 0.0);
    }

    #[test]
    fn majorization_holds_and_is_tight_at_equal_points() {
        let f = QuadraticDataFit::new(a22(), vec![1.0, 0.5], vec![1.0, -2.0]).unwrap();
        let m = diag_majorizer(&f);
        let r = verify_majorization(&f, &m, 200, 3).unwrap();
        assert_eq!(r.violations, 0);
        let (l, rr) = majorization_gap(&f, &m, &[0.3, -0.7], &[0.3, -0.7]).unwrap();
        assert_eq!(l, rr);
        let weak = m.scaled(0.01).unwrap();
        let r = verify_majorization(&f, &weak, 200, 3).unwrap();
        assert!(r.violations > 0);
    }
}
