//! Desk-scale forward models, phantoms, measurement simulation and image-quality metrics.

mod ct;
mod metrics;
mod phantom;

pub use ct::{
    backprojection_init, build_blur, build_radon, ct_weight, gaussian_kernel, radon_from_rays, simulate_ct, simulate_gaussian, CtGeometry,
    CtMeasurement, CtNoise, TOTAL_ANGLES,
};
pub use metrics::{mse, psnr, rmse};
pub use phantom::{random_ellipse_phantom, render_ellipses, shepp_logan, shepp_logan_ellipses, Ellipse};
