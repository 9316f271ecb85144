use crate::datafit::DiagonalMajorizer;
use crate::error::{check_len, invalid, Result};
use crate::scalar::Real;

/// Momentum coefficients `θ⁽ⁱ⁾`, `m⁽ⁱ⁾` and the extrapolation damping `δ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumState<T> {
    pub theta: T,
    pub m: T,
    pub delta: T,
}

impl<T: Real> MomentumState<T> {
    /// `θ⁽⁰⁾ = 1`, `m⁽⁰⁾ = 0`.
    pub fn initial(delta: T) -> Result<Self> {
        if !(delta < T::one()) || !(delta >= T::zero()) {
            return invalid(format!("δ must lie in [0, 1), got {delta}"));
        }
        Ok(Self {
            theta: T::one(),
            m: T::zero(),
            delta,
        })
    }
}

/// `θ' = (1 + √(1 + 4θ²)) / 2`, `m' = (θ − 1) / θ'`.
pub fn momentum_update<T: Real>(state: MomentumState<T>) -> MomentumState<T> {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let theta = (T::one() + (T::one() + four * state.theta * state.theta).sqrt()) / two;
    MomentumState {
        theta,
        m: (state.theta - T::one()) / theta,
        delta: state.delta,
    }
}

/// Diagonal extrapolation matrix `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtrapolationMatrix<T>(Vec<T>);

impl<T: Real> ExtrapolationMatrix<T> {
    pub fn new(diag: Vec<T>) -> Result<Self> {
        if diag.iter().any(|d| !(*d >= T::zero()) || !d.is_finite()) {
            return invalid("extrapolation entries must be finite and nonnegative");
        }
        Ok(Self(diag))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn diag(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == T::zero())
    }
}

/// Factor `(λ − 1) / (2(λ + 1))` applied in nonconvex mode.
fn nonconvex_factor<T: Real>(lambda: T) -> T {
    (lambda - T::one()) / (T::lit(2.0) * (lambda + T::one()))
}

/// `E = δ² m · M_cur^{−1/2} M_prev^{1/2}`, times `(λ − 1)/(2(λ + 1))` in nonconvex mode.
/// Uses the unscaled diagonals of both majorizers.
pub fn extrapolation_matrix<T: Real>(
    prev: &DiagonalMajorizer<T>,
    cur: &DiagonalMajorizer<T>,
    state: &MomentumState<T>,
    lambda: T,
    convex: bool,
) -> Result<ExtrapolationMatrix<T>> {
    check_len("extrapolation majorizers", prev.len(), cur.len())?;
    if !(lambda >= T::one()) {
        return invalid(format!("λ must be ≥ 1, got {lambda}"));
    }
    let mut scale = state.delta * state.delta * state.m;
    if !convex {
        scale *= nonconvex_factor(lambda);
    }
    Ok(ExtrapolationMatrix(
        prev.diag()
            .iter()
            .zip(cur.diag())
            .map(|(&p, &c)| scale * (p / c).sqrt())
            .collect(),
    ))
}

/// Checks `EᵀM_cur E ⪯ c·M_prev` entrywise with relative slack `1e-12`, where `c = δ²` (convex)
/// or `δ²(λ − 1)² / (4(λ + 1)²)` (nonconvex).
pub fn check_extrapolation_condition<T: Real>(
    e: &ExtrapolationMatrix<T>,
    prev: &DiagonalMajorizer<T>,
    cur: &DiagonalMajorizer<T>,
    delta: T,
    lambda: T,
    convex: bool,
) -> bool {
    if e.len() != prev.len() || e.len() != cur.len() {
        return false;
    }
    let delta = delta.as_f64();
    let mut bound = delta * delta;
    if !convex {
        let f = nonconvex_factor(lambda).as_f64();
        bound *= f * f;
    }
    e.diag()
        .iter()
        .zip(prev.diag())
        .zip(cur.diag())
        .all(|((&en, &p), &c)| {
            let en = en.as_f64();
            let lhs = en * c.as_f64() * en;
            let rhs = bound * p.as_f64();
            en >= 0.0 && lhs <= rhs + 1e-12 * rhs.max(lhs)
        })
}
