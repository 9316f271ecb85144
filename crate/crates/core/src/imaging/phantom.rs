use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::image::ImageVector;
use crate::scalar::Real;

/// Smallest phantom side accepted by [`shepp_logan`] and [`random_ellipse_phantom`].
pub const MIN_PHANTOM_SIZE: usize = 16;

/// Ellipse in normalized coordinates `[−1, 1]²` (x to the right, y up).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub intensity: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub angle_deg: f64,
}

impl Ellipse {
    const fn new(intensity: f64, semi_x: f64, semi_y: f64, center_x: f64, center_y: f64, angle_deg: f64) -> Self {
        Self {
            intensity,
            semi_x,
            semi_y,
            center_x,
            center_y,
            angle_deg,
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_x).powi(2) + (v / self.semi_y).powi(2) <= 1.0
    }
}

/// Modified (high-contrast) Shepp–Logan ellipses, values in `[0, 1]`.
pub fn shepp_logan_ellipses() -> [Ellipse; 10] {
    [
        Ellipse::new(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
        Ellipse::new(-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
        Ellipse::new(-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
        Ellipse::new(-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
        Ellipse::new(0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
        Ellipse::new(0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
        Ellipse::new(0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
        Ellipse::new(0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
        Ellipse::new(0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
        Ellipse::new(0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
    ]
}

/// Samples the sum of ellipse indicators at pixel centers and clamps to `[0, 1]`.
pub fn render_ellipses<T: Real>(n: usize, ellipses: &[Ellipse]) -> ImageVector<T> {
    ImageVector::from_fn(n, n, |row, col| {
        let x = (2 * col + 1) as f64 / n as f64 - 1.0;
        let y = 1.0 - (2 * row + 1) as f64 / n as f64;
        let v: f64 = ellipses
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.intensity)
            .sum();
        T::lit(v.clamp(0.0, 1.0))
    })
}

pub fn shepp_logan<T: Real>(n: usize) -> Result<ImageVector<T>> {
    if n < MIN_PHANTOM_SIZE {
        return invalid(format!("phantom size must be at least {MIN_PHANTOM_SIZE}, got {n}"));
    }
    Ok(render_ellipses(n, &shepp_logan_ellipses()))
}

/// Shepp–Logan variant with jittered ellipse centers, sizes, orientations and interior
/// contrasts, plus one or two extra small features.
pub fn random_ellipse_phantom<T: Real>(n: usize, seed: u64) -> Result<ImageVector<T>> {
    if n < MIN_PHANTOM_SIZE {
        return invalid(format!("phantom size must be at least {MIN_PHANTOM_SIZE}, got {n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = shepp_logan_ellipses();
    let outer_scale = rng.gen_range(0.9..1.05);
    let mut ellipses: Vec<Ellipse> = base
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if i < 2 {
                let mut e = *e;
                e.semi_x *= outer_scale;
                e.semi_y *= outer_scale;
                e
            } else {
                Ellipse {
                    intensity: e.intensity * rng.gen_range(0.5..1.5),
                    semi_x: e.semi_x * rng.gen_range(0.8..1.2),
                    semi_y: e.semi_y * rng.gen_range(0.8..1.2),
                    center_x: e.center_x + rng.gen_range(-0.05..0.05),
                    center_y: e.center_y + rng.gen_range(-0.05..0.05),
                    angle_deg: e.angle_deg + rng.gen_range(-15.0..15.0),
                }
            }
        })
        .collect();
    let extra = rng.gen_range(1..=2);
    for _ in 0..extra {
        let r = rng.gen_range(0.03..0.1);
        ellipses.push(Ellipse {
            intensity: rng.gen_range(0.05..0.2),
            semi_x: r,
            semi_y: r * rng.gen_range(0.6..1.4),
            center_x: rng.gen_range(-0.35..0.35),
            center_y: rng.gen_range(-0.5..0.5),
            angle_deg: rng.gen_range(0.0..180.0),
        });
    }
    Ok(render_ellipses(n, &ellipses))
}
