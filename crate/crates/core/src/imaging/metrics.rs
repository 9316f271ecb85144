use crate::error::{check_len, invalid, Error, Result};
use crate::image::ImageVector;
use crate::scalar::Real;

/// Mean squared error over the pixels where `roi` is true (all pixels without a mask).
pub fn mse<T: Real>(x: &ImageVector<T>, truth: &ImageVector<T>, roi: Option<&[bool]>) -> Result<f64> {
    x.ensure_same_shape(truth, "metric inputs")?;
    let mut sum = 0.0;
    let mut count = 0usize;
    match roi {
        Some(mask) => {
            check_len("ROI mask", x.len(), mask.len())?;
            for ((&a, &b), &m) in x.as_slice().iter().zip(truth.as_slice()).zip(mask) {
                if m {
                    let d = (a - b).as_f64();
                    sum += d * d;
                    count += 1;
                }
            }
        }
        None => {
            for (&a, &b) in x.as_slice().iter().zip(truth.as_slice()) {
                let d = (a - b).as_f64();
                sum += d * d;
            }
            count = x.len();
        }
    }
    if count == 0 {
        return Err(Error::Empty("metric region"));
    }
    Ok(sum / count as f64)
}

/// `(Σ_ROI (x_j − x_true_j)² / N_ROI)^{1/2}`.
pub fn rmse<T: Real>(x: &ImageVector<T>, truth: &ImageVector<T>, roi: Option<&[bool]>) -> Result<f64> {
    Ok(mse(x, truth, roi)?.sqrt())
}

/// `10 log₁₀(peak² / MSE)` in dB; `+∞` for identical images.
pub fn psnr<T: Real>(x: &ImageVector<T>, truth: &ImageVector<T>, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return invalid(format!("PSNR peak must be positive, got {peak}"));
    }
    let m = mse(x, truth, None)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}
