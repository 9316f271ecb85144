use crate::datafit::{diag_majorizer, QuadraticDataFit};
use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::training::select_gamma;

/// How the proximity weight `γ` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularization<T> {
    /// Fixed `γ > 0`.
    Gamma(T),
    /// `γ = spread(M_f) / χ`.
    Chi(T),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentumNetConfig<T> {
    pub n_iter: usize,
    /// Relaxation weight on the refiner output, in `(0, 1)`.
    pub rho: T,
    pub regularization: Regularization<T>,
    /// Extrapolation damping, `< 1`. Defaults to `1 − 1e-9`, or `1 − ε` when that would round to one.
    pub delta: T,
    /// Majorizer scale, `1` for convex objectives.
    pub lambda: T,
    pub convex: bool,
    pub extrapolate: bool,
    /// Forces `m⁽ⁱ⁾ = 0` when the majorizer is exact.
    pub sharp_majorizer: bool,
    /// Records the fixed-point residual at every iteration (one extra refiner call each).
    pub track_fixed_point: bool,
}

impl<T: Real> Default for MomentumNetConfig<T> {
    fn default() -> Self {
        Self {
            n_iter: 100,
            rho: T::lit(0.999),
            regularization: Regularization::Chi(T::lit(167.64)),
            delta: T::one() - T::lit(1e-9).max(T::epsilon()),
            lambda: T::one(),
            convex: true,
            extrapolate: true,
            sharp_majorizer: false,
            track_fixed_point: false,
        }
    }
}

impl<T: Real> MomentumNetConfig<T> {
    /// Nonconvex defaults: `λ = 1 + 1e-3`.
    pub fn nonconvex() -> Self {
        Self {
            lambda: T::one() + T::lit(1e-3),
            convex: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > T::zero() && self.rho < T::one()) {
            return invalid(format!("ρ must lie in (0, 1), got {}", self.rho));
        }
        self.validate_common()
    }

    /// Everything except `ρ`, which the BCD-Net and BPEG-M solvers do not use.
    pub fn validate_common(&self) -> Result<()> {
        if !(self.delta >= T::zero() && self.delta < T::one()) {
            return invalid(format!("δ must lie in [0, 1), got {}", self.delta));
        }
        if !(self.lambda >= T::one()) || !self.lambda.is_finite() {
            return invalid(format!("λ must be ≥ 1, got {}", self.lambda));
        }
        if self.convex && self.lambda != T::one() {
            return invalid("convex mode requires λ = 1");
        }
        match self.regularization {
            Regularization::Gamma(g) if !(g > T::zero()) || !g.is_finite() => {
                invalid(format!("γ must be positive, got {g}"))
            }
            Regularization::Chi(c) if !(c > T::zero()) || !c.is_finite() => {
                invalid(format!("χ must be positive, got {c}"))
            }
            _ => Ok(()),
        }
    }

    pub fn resolve_gamma(&self, datafit: &QuadraticDataFit<T>) -> Result<T> {
        match self.regularization {
            Regularization::Gamma(g) => Ok(g),
            Regularization::Chi(chi) => select_gamma(&diag_majorizer(datafit), chi),
        }
    }
}
