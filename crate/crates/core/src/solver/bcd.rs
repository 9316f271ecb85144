use std::time::Instant;

use crate::datafit::{majorizer_for_gamma, DiagonalMajorizer, MbirObjective, QuadraticDataFit};
use crate::error::{check_len, invalid, Error, Result};
use crate::image::ImageVector;
use crate::prox::FeasibleSet;
use crate::refiner::{delta_measure, Refiner};
use crate::scalar::{self, Real};

use super::config::MomentumNetConfig;
use super::momentum_net::{mbir_step_raw, refiner_at};
use super::trace::{IterateRecord, IterateTrace, TraceStatus};

/// Accelerated projected gradient (FISTA) on `F` over `𝒳`, with step sizes from the diagonal
/// majorizer `diag(|Aᵀ|W|A|1) + γI`.
pub fn apg_solve<T: Real>(obj: &MbirObjective<'_, T>, x0: &ImageVector<T>, iters: usize) -> Result<ImageVector<T>> {
    let m = obj.majorizer(T::one())?;
    apg_solve_with(obj, &m, x0, iters)
}

pub(crate) fn apg_solve_with<T: Real>(
    obj: &MbirObjective<'_, T>,
    m: &DiagonalMajorizer<T>,
    x0: &ImageVector<T>,
    iters: usize,
) -> Result<ImageVector<T>> {
    if iters == 0 {
        return invalid("APG needs at least one iteration");
    }
    check_len("APG initial point", obj.datafit.input_dim(), x0.len())?;
    let mut x = x0.as_slice().to_vec();
    obj.feasible.project_in_place(&mut x);
    let mut v = x.clone();
    let mut t = T::one();
    for _ in 0..iters {
        let next = mbir_step_raw(&v, obj, m);
        let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::lit(2.0);
        let beta = (t - T::one()) / t_next;
        v = next
            .iter()
            .zip(&x)
            .map(|(&xn, &xo)| xn + beta * (xn - xo))
            .collect();
        x = next;
        t = t_next;
    }
    if !scalar::all_finite(&x) {
        return Err(Error::NonFinite("APG iterate"));
    }
    Ok(x0.with_data(x))
}

/// BCD-Net: `z⁽ⁱ⁺¹⁾ = R(x⁽ⁱ⁾)`, then `x⁽ⁱ⁺¹⁾ ≈ argmin_{x∈𝒳} F(x; y, z⁽ⁱ⁺¹⁾)` by
/// `inner_iters` APG iterations warm-started at `x⁽ⁱ⁾`. `ρ` and the extrapolation settings of
/// `config` are not used.
pub fn run_bcd_net<T: Real, R: Refiner<T>>(
    config: &MomentumNetConfig<T>,
    refiners: &[R],
    datafit: &QuadraticDataFit<T>,
    feasible: FeasibleSet<T>,
    x0: &ImageVector<T>,
    inner_iters: usize,
) -> Result<IterateTrace<T>> {
    if inner_iters == 0 {
        return invalid("BCD-Net needs at least one inner iteration");
    }
    config.validate_common()?;
    feasible.validate()?;
    check_len("initial image", datafit.input_dim(), x0.len())?;
    if config.n_iter > 0 && refiners.is_empty() {
        return Err(Error::Empty("refiner list"));
    }
    let gamma = config.resolve_gamma(datafit)?;
    let m = majorizer_for_gamma(&datafit.majorizer_diag_raw(), gamma, T::one())?;
    let mut trace = IterateTrace::new(x0.clone(), gamma, config.n_iter);
    let mut x = x0.clone();
    let mut z_prev: Option<ImageVector<T>> = None;
    for i in 0..config.n_iter {
        let start = Instant::now();
        let outcome = (|| -> Result<IterateRecord<T>> {
            let z = refiner_at(refiners, i)?.refine(&x)?;
            x.ensure_same_shape(&z, "refiner output")?;
            let obj = MbirObjective::new(datafit, gamma, z, feasible)?;
            let next = apg_solve_with(&obj, &m, &x, inner_iters)?;
            let objective = obj.value_slice(next.as_slice()).as_f64();
            let delta = match &z_prev {
                Some(zp) => Some(delta_measure(&obj.anchor, zp, &x)?),
                None => None,
            };
            Ok(IterateRecord {
                iteration: i + 1,
                step_residual: next.dist_sq(&x).as_f64().sqrt(),
                x: next,
                z: obj.anchor,
                objective,
                fixed_point_residual: None,
                epsilon: None,
                delta,
                kappa: None,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })();
        match outcome {
            Ok(rec) => {
                x = rec.x.clone();
                z_prev = Some(rec.z.clone());
                trace.records.push(rec);
            }
            Err(Error::NonFinite(stage)) => {
                trace.status = TraceStatus::NonFinite { iteration: i + 1, stage };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(trace)
}
