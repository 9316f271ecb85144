use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::conv::Filter2d;
use crate::datafit::QuadraticDataFit;
use crate::error::{check_len, invalid, Error, Result};
use crate::image::ImageVector;
use crate::linops::{CircularConvolution, LinearOperator, SparseMatrix};
use crate::scalar::Real;

/// Number of uniformly spaced parallel-beam angles over 180° that views are drawn from.
pub const TOTAL_ANGLES: usize = 180;

/// Parallel-beam geometry on an `n × n` pixel grid centered at the origin.
///
/// Detector bins share the pixel pitch and are centered on the rotation axis; sinogram rows are
/// ordered view-major (`row = view · n_detectors + bin`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CtGeometry {
    image_size: usize,
    n_views: usize,
    n_detectors: usize,
    pixel_pitch: f64,
}

impl CtGeometry {
    pub fn new(image_size: usize, n_views: usize, n_detectors: usize, pixel_pitch: f64) -> Result<Self> {
        if image_size == 0 {
            return invalid("CT image size must be positive");
        }
        if n_views == 0 || n_views > TOTAL_ANGLES {
            return invalid(format!("number of views must be in 1..={TOTAL_ANGLES}, got {n_views}"));
        }
        if !(pixel_pitch > 0.0 && pixel_pitch.is_finite()) {
            return invalid(format!("pixel pitch must be positive, got {pixel_pitch}"));
        }
        let needed = Self::min_detectors(image_size);
        if n_detectors < needed {
            return invalid(format!(
                "{n_detectors} detector bins do not cover the image diagonal (need at least {needed})"
            ));
        }
        Ok(Self {
            image_size,
            n_views,
            n_detectors,
            pixel_pitch,
        })
    }

    /// Geometry with the smallest detector that covers the image diagonal.
    pub fn covering(image_size: usize, n_views: usize, pixel_pitch: f64) -> Result<Self> {
        Self::new(image_size, n_views, Self::min_detectors(image_size), pixel_pitch)
    }

    pub fn min_detectors(image_size: usize) -> usize {
        (image_size as f64 * std::f64::consts::SQRT_2).ceil() as usize
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    pub fn n_views(&self) -> usize {
        self.n_views
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }

    pub fn n_rays(&self) -> usize {
        self.n_views * self.n_detectors
    }

    /// Indices into the 180 uniform angles, `round(j · 180 / n_views)`.
    pub fn view_indices(&self) -> Vec<usize> {
        (0..self.n_views)
            .map(|j| ((j * TOTAL_ANGLES) as f64 / self.n_views as f64).round() as usize)
            .collect()
    }

    /// View angles in radians.
    pub fn view_angles(&self) -> Vec<f64> {
        self.view_indices()
            .into_iter()
            .map(|i| (i as f64).to_radians() * (180.0 / TOTAL_ANGLES as f64))
            .collect()
    }

    /// Signed detector-bin center offsets from the rotation axis.
    pub fn detector_offsets(&self) -> Vec<f64> {
        let mid = (self.n_detectors as f64 - 1.0) / 2.0;
        (0..self.n_detectors)
            .map(|d| (d as f64 - mid) * self.pixel_pitch)
            .collect()
    }
}

/// Length of the line `{p : p·(cos φ, sin φ) = s}` inside the box `[x0, x1] × [y0, y1]`.
fn chord_length(x0: f64, x1: f64, y0: f64, y1: f64, angle: f64, s: f64) -> f64 {
    let (sin, cos) = angle.sin_cos();
    let (px, py) = (s * cos, s * sin);
    let (dx, dy) = (-sin, cos);
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for (p, d, lo, hi) in [(px, dx, x0, x1), (py, dy, y0, y1)] {
        if d.abs() < 1e-15 {
            if p < lo || p >= hi {
                return 0.0;
            }
        } else {
            let (a, b) = ((lo - p) / d, (hi - p) / d);
            t_lo = t_lo.max(a.min(b));
            t_hi = t_hi.min(a.max(b));
        }
    }
    (t_hi - t_lo).max(0.0)
}

/// Exact line-integral matrix for arbitrary rays `(angle in radians, signed offset)` through an
/// `n × n` grid of the given pitch. Row 0 of the image is the top (largest y).
pub fn radon_from_rays<T: Real>(n: usize, pixel_pitch: f64, rays: &[(f64, f64)]) -> Result<SparseMatrix<T>> {
    if n == 0 || rays.is_empty() {
        return invalid("degenerate CT geometry");
    }
    if !(pixel_pitch > 0.0) {
        return invalid(format!("pixel pitch must be positive, got {pixel_pitch}"));
    }
    let half = n as f64 / 2.0;
    let reach = pixel_pitch * std::f64::consts::FRAC_1_SQRT_2;
    let min_len = 1e-12 * pixel_pitch;
    let mut triplets = Vec::new();
    for (r, &(angle, s)) in rays.iter().enumerate() {
        let (sin, cos) = angle.sin_cos();
        for row in 0..n {
            let y1 = (half - row as f64) * pixel_pitch;
            let y0 = y1 - pixel_pitch;
            for col in 0..n {
                let x0 = (col as f64 - half) * pixel_pitch;
                let x1 = x0 + pixel_pitch;
                let center = 0.5 * (x0 + x1) * cos + 0.5 * (y0 + y1) * sin;
                if (center - s).abs() > reach {
                    continue;
                }
                let len = chord_length(x0, x1, y0, y1, angle, s);
                if len > min_len {
                    triplets.push((r, row * n + col, T::lit(len)));
                }
            }
        }
    }
    SparseMatrix::from_triplets(rays.len(), n * n, &triplets)
}

pub fn build_radon<T: Real>(geom: &CtGeometry) -> Result<SparseMatrix<T>> {
    let offsets = geom.detector_offsets();
    let rays: Vec<(f64, f64)> = geom
        .view_angles()
        .into_iter()
        .flat_map(|a| offsets.iter().map(move |&s| (a, s)))
        .collect();
    radon_from_rays(geom.image_size, geom.pixel_pitch, &rays)
}

/// Photon-count model for CT simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CtNoise {
    /// Incident photons per ray `I₀`.
    pub incident: f64,
    /// Electronic readout noise variance `σ²`.
    pub electronic_variance: f64,
    /// Skip sampling: counts are their means and `y = Ax` exactly.
    pub noiseless: bool,
}

impl Default for CtNoise {
    fn default() -> Self {
        Self {
            incident: 1e5,
            electronic_variance: 25.0,
            noiseless: false,
        }
    }
}

/// Post-log sinogram with its statistical weights and the pre-log counts.
#[derive(Clone, Debug, PartialEq)]
pub struct CtMeasurement<T> {
    pub sinogram: Vec<T>,
    pub weights: Vec<T>,
    pub counts: Vec<f64>,
}

impl<T: Real> CtMeasurement<T> {
    pub fn into_datafit(self, op: Arc<dyn LinearOperator<T>>) -> Result<QuadraticDataFit<T>> {
        QuadraticDataFit::new(op, self.weights, self.sinogram)
    }
}

/// Weight `p² / (p + σ²)` for a pre-log count `p`.
pub fn ct_weight(count: f64, electronic_variance: f64) -> f64 {
    count * count / (count + electronic_variance)
}

pub fn simulate_ct<T: Real>(
    x: &ImageVector<T>,
    op: &dyn LinearOperator<T>,
    noise: &CtNoise,
    seed: u64,
) -> Result<CtMeasurement<T>> {
    if !(noise.incident > 0.0 && noise.incident.is_finite()) {
        return invalid(format!("incident photon count must be positive, got {}", noise.incident));
    }
    if !(noise.electronic_variance >= 0.0) {
        return invalid("electronic noise variance must be nonnegative");
    }
    check_len("CT image", op.input_dim(), x.len())?;
    let line_integrals = op.forward(x.as_slice());
    let i0 = noise.incident;
    if noise.noiseless {
        let counts: Vec<f64> = line_integrals.iter().map(|l| i0 * (-l.as_f64()).exp()).collect();
        let weights = counts
            .iter()
            .map(|&p| T::lit(ct_weight(p, noise.electronic_variance)))
            .collect();
        return Ok(CtMeasurement {
            sinogram: line_integrals,
            weights,
            counts,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, noise.electronic_variance.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut counts = Vec::with_capacity(line_integrals.len());
    for l in &line_integrals {
        let mean = i0 * (-l.as_f64()).exp();
        let photons = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(&mut rng)
        } else {
            0.0
        };
        counts.push((photons + gauss.sample(&mut rng)).max(1.0));
    }
    let sinogram = counts.iter().map(|&p| T::lit((i0 / p).ln())).collect();
    let weights = counts
        .iter()
        .map(|&p| T::lit(ct_weight(p, noise.electronic_variance)))
        .collect();
    Ok(CtMeasurement {
        sinogram,
        weights,
        counts,
    })
}

/// `y = Ax + n` with i.i.d. `n ~ N(0, σ²)`; `σ = 0` gives `y = Ax` exactly.
pub fn simulate_gaussian<T: Real>(x: &ImageVector<T>, op: &dyn LinearOperator<T>, sigma: f64, seed: u64) -> Result<Vec<T>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return invalid(format!("noise standard deviation must be nonnegative, got {sigma}"));
    }
    check_len("measurement image", op.input_dim(), x.len())?;
    let mut y = op.forward(x.as_slice());
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gauss = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for v in &mut y {
            *v += T::lit(gauss.sample(&mut rng));
        }
    }
    Ok(y)
}

/// Circular blur operator for a `height × width` image.
pub fn build_blur<T: Real>(kernel: Filter2d<T>, height: usize, width: usize) -> Result<CircularConvolution<T>> {
    if !crate::scalar::all_finite(kernel.taps()) {
        return Err(Error::NonFinite("blur kernel"));
    }
    CircularConvolution::new(kernel, height, width)
}

/// Sampled isotropic Gaussian of odd side `side` and variance `variance`, normalized to unit sum.
pub fn gaussian_kernel<T: Real>(side: usize, variance: f64) -> Result<Filter2d<T>> {
    if side.is_multiple_of(2) {
        return invalid(format!("Gaussian kernel side must be odd, got {side}"));
    }
    if !(variance > 0.0) {
        return invalid("Gaussian kernel variance must be positive");
    }
    let c = (side / 2) as f64;
    let raw: Vec<f64> = (0..side * side)
        .map(|i| {
            let (a, b) = ((i / side) as f64 - c, (i % side) as f64 - c);
            (-(a * a + b * b) / (2.0 * variance)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Filter2d::new(side, raw.into_iter().map(|v| T::lit(v / total)).collect())
}

/// Normalized back-projection `AᵀWy ⊘ AᵀWA1`, clipped at zero and rescaled to `[0, 1]`.
pub fn backprojection_init<T: Real>(datafit: &QuadraticDataFit<T>, height: usize, width: usize) -> Result<ImageVector<T>> {
    let op = datafit.operator();
    check_len("back-projection image", op.input_dim(), height * width)?;
    let wy: Vec<T> = datafit
        .weights()
        .iter()
        .zip(datafit.measurements())
        .map(|(&w, &y)| w * y)
        .collect();
    let numer = op.adjoint(&wy);
    let denom = datafit.majorizer_diag_raw();
    let mut img: Vec<T> = numer
        .iter()
        .zip(&denom)
        .map(|(&a, &d)| if d > T::zero() { (a / d).max(T::zero()) } else { T::zero() })
        .collect();
    let peak = img.iter().fold(T::zero(), |m, &v| m.max(v));
    if peak > T::zero() {
        for v in &mut img {
            *v /= peak;
        }
    }
    ImageVector::new(img, height, width)
}
