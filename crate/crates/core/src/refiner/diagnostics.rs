//! Empirical estimates of how far refiners are from being nonexpansive.

use nalgebra::DMatrix;

use crate::conv::Filter2d;
use crate::error::{invalid, Error, Result};
use crate::image::ImageVector;
use crate::scalar::Real;

use super::{Refiner, ScnnRefiner};

/// `max_{(u, v)} max(0, ‖R_next(u) − R_prev(v)‖² − ‖u − v‖²)`.
pub fn paired_epsilon<T: Real, A: Refiner<T> + ?Sized, B: Refiner<T> + ?Sized>(
    next: &A,
    prev: &B,
    pairs: &[(ImageVector<T>, ImageVector<T>)],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("refiner sample pairs"));
    }
    let mut worst = 0.0f64;
    for (u, v) in pairs {
        u.ensure_same_shape(v, "sample pair")?;
        let ru = next.refine(u)?;
        let rv = prev.refine(v)?;
        let gap = ru.dist_sq(&rv).as_f64() - u.dist_sq(v).as_f64();
        worst = worst.max(gap);
    }
    Ok(worst)
}

/// `max(0, ‖z_next − x‖² − ‖z_prev − x‖²)`.
pub fn delta_measure<T: Real>(z_next: &ImageVector<T>, z_prev: &ImageVector<T>, x: &ImageVector<T>) -> Result<f64> {
    z_next.ensure_same_shape(x, "refined image")?;
    z_prev.ensure_same_shape(x, "previous refined image")?;
    Ok((z_next.dist_sq(x).as_f64() - z_prev.dist_sq(x).as_f64()).max(0.0))
}

/// `max_{(u, v)} ‖R(u) − R(v)‖ / ‖u − v‖`.
pub fn lipschitz_estimate<T: Real, R: Refiner<T> + ?Sized>(
    refiner: &R,
    pairs: &[(ImageVector<T>, ImageVector<T>)],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("refiner sample pairs"));
    }
    let mut worst = 0.0f64;
    for (u, v) in pairs {
        u.ensure_same_shape(v, "sample pair")?;
        let d = u.dist_sq(v).as_f64().sqrt();
        if d == 0.0 {
            return invalid("Lipschitz estimate needs distinct points in every pair");
        }
        let ru = refiner.refine(u)?;
        let rv = refiner.refine(v)?;
        worst = worst.max(ru.dist_sq(&rv).as_f64().sqrt() / d);
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonexpansiveReport {
    /// Largest eigenvalue of `D̄ᵀD̄` with `D̄ = [d_1, …, d_K, δ]`.
    pub decoder_max_eig: f64,
    /// Largest eigenvalue of `ĒᵀĒ` with `Ē = [e_1, …, e_K, δ]`.
    pub encoder_max_eig: f64,
    /// `1/R`.
    pub bound: f64,
    pub passes: bool,
}

fn augmented_max_eig<T: Real>(bank: &[Filter2d<T>]) -> f64 {
    let side = bank[0].side();
    let r = side * side;
    let delta = Filter2d::<T>::delta(side);
    let cols = bank.len() + 1;
    let m = DMatrix::<f64>::from_fn(r, cols, |i, j| {
        let f = bank.get(j).unwrap_or(&delta);
        f.taps()[i].as_f64()
    });
    let gram = m.transpose() * &m;
    gram.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Sufficient condition for an sCNN to be nonexpansive: both augmented filter matrices have
/// squared spectral norm at most `1/R`.
pub fn scnn_nonexpansive_sufficient<T: Real>(refiner: &ScnnRefiner<T>) -> NonexpansiveReport {
    let bound = 1.0 / refiner.filter_size() as f64;
    let decoder_max_eig = augmented_max_eig(refiner.decoder());
    let encoder_max_eig = augmented_max_eig(refiner.encoder());
    let slack = 1.0 + 1e-12;
    NonexpansiveReport {
        decoder_max_eig,
        encoder_max_eig,
        bound,
        passes: decoder_max_eig <= bound * slack && encoder_max_eig <= bound * slack,
    }
}
