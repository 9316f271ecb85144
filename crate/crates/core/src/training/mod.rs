//! Refiner training and regularization-strength selection.

mod adam;
mod diagnose;
mod greedy;
mod patch;

pub use adam::{train_refiner, Adam, TrainConfig, TrainOutcome};
pub use diagnose::{diagnose_refiners, DiagnosticRow};
pub use greedy::{greedy_train, Architecture, GreedyTraining, TrainingSample, INITIAL_LOG_THRESHOLD};
pub use patch::{patch_loss_bound, patch_loss_bound_check, PatchBoundReport, PatchLossBound};

use crate::datafit::DiagonalMajorizer;
use crate::error::{invalid, Error, Result};
use crate::image::ImageVector;
use crate::refiner::Refiner;
use crate::scalar::Real;

/// `γ = spread(M_f) / χ`; a zero spread (scaled identity) falls back to `max(M_f) / χ`.
pub fn select_gamma<T: Real>(m_f: &DiagonalMajorizer<T>, chi: T) -> Result<T> {
    if !(chi > T::zero()) || !chi.is_finite() {
        return invalid(format!("χ must be positive, got {chi}"));
    }
    let spread = m_f.spread();
    let numerator = if spread > T::zero() { spread } else { m_f.max_entry() };
    Ok(numerator / chi)
}

/// A ground-truth image and the refiner input it should be mapped to.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair<T> {
    pub truth: ImageVector<T>,
    pub input: ImageVector<T>,
}

impl<T: Real> TrainingPair<T> {
    pub fn new(truth: ImageVector<T>, input: ImageVector<T>) -> Result<Self> {
        truth.ensure_same_shape(&input, "training pair")?;
        Ok(Self { truth, input })
    }
}

/// `(1/2S) Σ_s ‖x_s − R(x_s⁽ⁱ⁾)‖²`.
pub fn refining_loss<T: Real, R: Refiner<T> + ?Sized>(refiner: &R, pairs: &[TrainingPair<T>]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("training pairs"));
    }
    let mut total = 0.0;
    for p in pairs {
        let out = refiner.refine(&p.input)?;
        total += out.dist_sq(&p.truth).as_f64();
    }
    Ok(total / (2.0 * pairs.len() as f64))
}
