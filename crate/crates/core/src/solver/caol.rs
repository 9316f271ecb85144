use std::time::Instant;

use crate::conv::{conv2d, conv2d_adjoint_accumulate, Filter2d};
use crate::datafit::{majorizer_for_gamma, QuadraticDataFit};
use crate::error::{check_len, Error, Result};
use crate::image::ImageVector;
use crate::prox::{soft_threshold_in_place, FeasibleSet, ThresholdVector};
use crate::refiner::{delta_measure, tight_frame_error, TIGHT_FRAME_TOL};
use crate::scalar::{self, Real};

use super::config::MomentumNetConfig;
use super::momentum::{extrapolation_matrix, momentum_update, MomentumState};
use super::trace::{IterateRecord, IterateTrace, TraceStatus};

/// Two-block BPEG-M for
/// `min_{x∈𝒳, ζ} f(x; y) + γ Σ_k (½‖h_k ⊛ x − ζ_k‖² + β_k‖ζ_k‖₁)`
/// with a tight-frame filter bank.
///
/// Each pass updates the sparse codes `ζ_k = T_{β_k}(h_k ⊛ x⁽ⁱ⁾)` by their exact proximal map,
/// extrapolates, and takes a majorized projected gradient step in `x` on the full
/// objective. `γ`, `δ`, `λ`, convexity and `n_iter` come from `config`; `ρ` is not used.
/// The recorded `z` is `Σ_k h_kᵀ ζ_k`, and the recorded objective is the joint objective above.
pub fn run_caol_bpegm<T: Real>(
    config: &MomentumNetConfig<T>,
    datafit: &QuadraticDataFit<T>,
    filters: &[Filter2d<T>],
    beta: &ThresholdVector<T>,
    feasible: FeasibleSet<T>,
    x0: &ImageVector<T>,
) -> Result<IterateTrace<T>> {
    config.validate_common()?;
    feasible.validate()?;
    check_len("initial image", datafit.input_dim(), x0.len())?;
    check_len("CAOL thresholds", filters.len(), beta.len())?;
    let tf = tight_frame_error(filters);
    if !(tf <= TIGHT_FRAME_TOL) {
        return Err(Error::TightFrameViolation(tf));
    }
    let gamma = config.resolve_gamma(datafit)?;
    // under the tight-frame identity Σ_k h_kᵀh_k = I, so γI majorizes the filter term exactly
    let m = majorizer_for_gamma(&datafit.majorizer_diag_raw(), gamma, config.lambda)?;
    let (h, w) = x0.shape();
    let half = T::lit(0.5);

    let objective = |x: &[T], codes: &[Vec<T>]| -> T {
        let mut reg = T::zero();
        for ((f, code), &b) in filters.iter().zip(codes).zip(beta.values()) {
            let hx = conv2d(f, x, h, w);
            reg += half * scalar::dist_sq(&hx, code) + b * code.iter().map(|c| c.abs()).sum::<T>();
        }
        datafit.value_slice(x) + gamma * reg
    };

    let mut trace = IterateTrace::new(x0.clone(), gamma, config.n_iter);
    let mut x = x0.as_slice().to_vec();
    let mut x_prev = x.clone();
    let mut z_prev: Option<ImageVector<T>> = None;
    let mut momentum = MomentumState::initial(config.delta)?;

    for i in 0..config.n_iter {
        let start = Instant::now();
        let codes: Vec<Vec<T>> = filters
            .iter()
            .zip(beta.values())
            .map(|(f, &b)| {
                let mut a = conv2d(f, &x, h, w);
                soft_threshold_in_place(&mut a, b);
                a
            })
            .collect();

        let x_acute: Vec<T> = if config.extrapolate && !config.sharp_majorizer {
            let e = extrapolation_matrix(&m, &m, &momentum, config.lambda, config.convex)?;
            x.iter()
                .zip(&x_prev)
                .zip(e.diag())
                .map(|((&xc, &xp), &en)| xc + en * (xc - xp))
                .collect()
        } else {
            x.clone()
        };

        // ∇f(x́) + γ Σ_k h_kᵀ(h_k ⊛ x́ − ζ_k)
        let mut grad_reg = vec![T::zero(); x.len()];
        for (f, code) in filters.iter().zip(&codes) {
            let resid: Vec<T> = conv2d(f, &x_acute, h, w)
                .iter()
                .zip(code)
                .map(|(&a, &c)| a - c)
                .collect();
            conv2d_adjoint_accumulate(f, &resid, h, w, &mut grad_reg);
        }
        let grad_fit = datafit.gradient_slice(&x_acute);
        let mut next: Vec<T> = x_acute
            .iter()
            .zip(&grad_fit)
            .zip(&grad_reg)
            .zip(m.scaled_diag())
            .map(|(((&xa, &gf), &gr), mn)| xa - (gf + gamma * gr) / mn)
            .collect();
        feasible.project_in_place(&mut next);

        if !scalar::all_finite(&next) {
            trace.status = TraceStatus::NonFinite {
                iteration: i + 1,
                stage: "BPEG-M iterate",
            };
            break;
        }

        let mut z = vec![T::zero(); x.len()];
        for (f, code) in filters.iter().zip(&codes) {
            conv2d_adjoint_accumulate(f, code, h, w, &mut z);
        }
        let z = x0.with_data(z);
        let x_img = x0.with_data(x.clone());
        let delta = match &z_prev {
            Some(zp) => Some(delta_measure(&z, zp, &x_img)?),
            None => None,
        };
        let step_residual = scalar::dist_sq(&next, &x).as_f64().sqrt();
        let obj_value = objective(&next, &codes).as_f64();

        momentum = if config.sharp_majorizer {
            MomentumState {
                m: T::zero(),
                ..momentum_update(momentum)
            }
        } else {
            momentum_update(momentum)
        };
        x_prev = std::mem::replace(&mut x, next);
        z_prev = Some(z.clone());
        trace.records.push(IterateRecord {
            iteration: i + 1,
            x: x0.with_data(x.clone()),
            z,
            objective: obj_value,
            step_residual,
            fixed_point_residual: None,
            epsilon: None,
            delta,
            kappa: None,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(trace)
}
