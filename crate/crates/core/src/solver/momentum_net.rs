use std::time::Instant;

use crate::datafit::{majorizer_for_gamma, DiagonalMajorizer, MbirObjective, QuadraticDataFit};
use crate::error::{check_len, Error, Result};
use crate::image::ImageVector;
use crate::prox::FeasibleSet;
use crate::refiner::{delta_measure, Refiner};
use crate::scalar::{self, Real};

use super::config::MomentumNetConfig;
use super::momentum::{extrapolation_matrix, momentum_update, ExtrapolationMatrix, MomentumState};
use super::trace::{IterateRecord, IterateTrace, TraceStatus};

/// `Proj_𝒳(x́ − M̃⁻¹∇F(x́; y, z))`.
pub fn mbir_step<T: Real>(
    x_acute: &ImageVector<T>,
    obj: &MbirObjective<'_, T>,
    m_tilde: &DiagonalMajorizer<T>,
) -> Result<ImageVector<T>> {
    check_len("MBIR step input", obj.datafit.input_dim(), x_acute.len())?;
    check_len("MBIR step majorizer", x_acute.len(), m_tilde.len())?;
    let out = mbir_step_raw(x_acute.as_slice(), obj, m_tilde);
    if !scalar::all_finite(&out) {
        return Err(Error::NonFinite("MBIR step"));
    }
    Ok(x_acute.with_data(out))
}

pub(crate) fn mbir_step_raw<T: Real>(x: &[T], obj: &MbirObjective<'_, T>, m_tilde: &DiagonalMajorizer<T>) -> Vec<T> {
    let g = obj.gradient_slice(x);
    let mut out: Vec<T> = x
        .iter()
        .zip(&g)
        .zip(m_tilde.scaled_diag())
        .map(|((&xi, &gi), mi)| xi - gi / mi)
        .collect();
    obj.feasible.project_in_place(&mut out);
    out
}

/// `z = (1 − ρ)x + ρR(x)`.
pub(crate) fn relaxed_refine<T: Real, R: Refiner<T> + ?Sized>(refiner: &R, x: &ImageVector<T>, rho: T) -> Result<ImageVector<T>> {
    let r = refiner.refine(x)?;
    x.ensure_same_shape(&r, "refiner output")?;
    let one_minus = T::one() - rho;
    Ok(x.zip_map(&r, |a, b| one_minus * a + rho * b))
}

/// Distance from `x` to its image under one zero-momentum iteration,
/// `‖x − Proj_𝒳(x − M̃⁻¹∇F(x; y, z̄))‖₂ / max(1, ‖x‖₂)` with `z̄ = (1 − ρ)x + ρR(x)`.
pub fn fixed_point_residual<T: Real, R: Refiner<T> + ?Sized>(
    x: &ImageVector<T>,
    refiner: &R,
    config: &MomentumNetConfig<T>,
    datafit: &QuadraticDataFit<T>,
    feasible: &FeasibleSet<T>,
    m_tilde: &DiagonalMajorizer<T>,
) -> Result<f64> {
    let gamma = config.resolve_gamma(datafit)?;
    fixed_point_residual_with_gamma(x, refiner, config.rho, gamma, datafit, feasible, m_tilde)
}

pub(crate) fn fixed_point_residual_with_gamma<T: Real, R: Refiner<T> + ?Sized>(
    x: &ImageVector<T>,
    refiner: &R,
    rho: T,
    gamma: T,
    datafit: &QuadraticDataFit<T>,
    feasible: &FeasibleSet<T>,
    m_tilde: &DiagonalMajorizer<T>,
) -> Result<f64> {
    let z = relaxed_refine(refiner, x, rho)?;
    let obj = MbirObjective::new(datafit, gamma, z, *feasible)?;
    let next = mbir_step(x, &obj, m_tilde)?;
    Ok(x.dist_sq(&next).as_f64().sqrt() / x.norm().as_f64().max(1.0))
}

/// Momentum-Net advanced one iteration at a time, so callers (e.g. greedy training) can
/// pick the refiner for each pass.
#[derive(Clone, Debug)]
pub struct MomentumNet<'a, T: Real> {
    config: MomentumNetConfig<T>,
    datafit: &'a QuadraticDataFit<T>,
    feasible: FeasibleSet<T>,
    gamma: T,
    majorizer: DiagonalMajorizer<T>,
    momentum: MomentumState<T>,
    x: ImageVector<T>,
    x_prev: ImageVector<T>,
    z_prev: Option<ImageVector<T>>,
    iteration: usize,
}

impl<'a, T: Real> MomentumNet<'a, T> {
    pub fn new(
        config: &MomentumNetConfig<T>,
        datafit: &'a QuadraticDataFit<T>,
        feasible: FeasibleSet<T>,
        x0: ImageVector<T>,
    ) -> Result<Self> {
        config.validate()?;
        feasible.validate()?;
        check_len("initial image", datafit.input_dim(), x0.len())?;
        let gamma = config.resolve_gamma(datafit)?;
        let majorizer = majorizer_for_gamma(&datafit.majorizer_diag_raw(), gamma, config.lambda)?;
        Self::with_parts(config, datafit, feasible, x0, gamma, majorizer)
    }

    /// Reuses a precomputed `γ` and majorizer `λ(M_f + γI)`.
    pub fn with_parts(
        config: &MomentumNetConfig<T>,
        datafit: &'a QuadraticDataFit<T>,
        feasible: FeasibleSet<T>,
        x0: ImageVector<T>,
        gamma: T,
        majorizer: DiagonalMajorizer<T>,
    ) -> Result<Self> {
        config.validate()?;
        check_len("majorizer", datafit.input_dim(), majorizer.len())?;
        Ok(Self {
            config: config.clone(),
            datafit,
            feasible,
            gamma,
            majorizer,
            momentum: MomentumState::initial(config.delta)?,
            x_prev: x0.clone(),
            x: x0,
            z_prev: None,
            iteration: 0,
        })
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// `M̃ = λM`.
    pub fn majorizer(&self) -> &DiagonalMajorizer<T> {
        &self.majorizer
    }

    pub fn current(&self) -> &ImageVector<T> {
        &self.x
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn momentum(&self) -> &MomentumState<T> {
        &self.momentum
    }

    fn extrapolation(&self) -> Result<Option<ExtrapolationMatrix<T>>> {
        if !self.config.extrapolate || self.config.sharp_majorizer {
            return Ok(None);
        }
        // the majorizer is iteration-invariant, so M⁽ⁱ⁾ = M⁽ⁱ⁺¹⁾
        let e = extrapolation_matrix(
            &self.majorizer,
            &self.majorizer,
            &self.momentum,
            self.config.lambda,
            self.config.convex,
        )?;
        Ok(Some(e))
    }

    /// Runs refining, extrapolation and the MBIR step. Non-finite intermediate values
    /// surface as [`Error::NonFinite`].
    pub fn step<R: Refiner<T> + ?Sized>(&mut self, refiner: &R) -> Result<IterateRecord<T>> {
        let start = Instant::now();
        let z = relaxed_refine(refiner, &self.x, self.config.rho)?;

        let x_acute = match self.extrapolation()? {
            Some(e) => {
                let data: Vec<T> = self
                    .x
                    .as_slice()
                    .iter()
                    .zip(self.x_prev.as_slice())
                    .zip(e.diag())
                    .map(|((&xc, &xp), &en)| xc + en * (xc - xp))
                    .collect();
                self.x.with_data(data)
            }
            None => self.x.clone(),
        };

        let obj = MbirObjective::new(self.datafit, self.gamma, z, self.feasible)?;
        let next = mbir_step(&x_acute, &obj, &self.majorizer)?;
        let objective = obj.value_slice(next.as_slice()).as_f64();
        if !objective.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        let z = obj.anchor;
        let step_residual = next.dist_sq(&self.x).as_f64().sqrt();
        let delta = match &self.z_prev {
            Some(zp) => Some(delta_measure(&z, zp, &self.x)?),
            None => None,
        };
        let fixed_point_residual = if self.config.track_fixed_point {
            Some(fixed_point_residual_with_gamma(
                &next,
                refiner,
                self.config.rho,
                self.gamma,
                self.datafit,
                &self.feasible,
                &self.majorizer,
            )?)
        } else {
            None
        };

        self.momentum = if self.config.sharp_majorizer {
            MomentumState {
                m: T::zero(),
                ..momentum_update(self.momentum)
            }
        } else {
            momentum_update(self.momentum)
        };
        self.x_prev = std::mem::replace(&mut self.x, next.clone());
        self.z_prev = Some(z.clone());
        self.iteration += 1;

        Ok(IterateRecord {
            iteration: self.iteration,
            x: next,
            z,
            objective,
            step_residual,
            fixed_point_residual,
            epsilon: None,
            delta,
            kappa: None,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }
}

/// Picks refiner `i` for the `i`-th pass, repeating the last one when the list is short.
pub(crate) fn refiner_at<R>(refiners: &[R], i: usize) -> Result<&R> {
    refiners
        .get(i.min(refiners.len().saturating_sub(1)))
        .ok_or(Error::Empty("refiner list"))
}

/// Runs `config.n_iter` Momentum-Net iterations from `x⁽⁻¹⁾ = x⁽⁰⁾ = x0`.
///
/// A non-finite iterate stops the run early with [`TraceStatus::NonFinite`]; the records
/// up to that point are kept.
pub fn run_momentum_net<T: Real, R: Refiner<T>>(
    config: &MomentumNetConfig<T>,
    refiners: &[R],
    datafit: &QuadraticDataFit<T>,
    feasible: FeasibleSet<T>,
    x0: &ImageVector<T>,
) -> Result<IterateTrace<T>> {
    if config.n_iter > 0 && refiners.is_empty() {
        return Err(Error::Empty("refiner list"));
    }
    let mut net = MomentumNet::new(config, datafit, feasible, x0.clone())?;
    let mut trace = IterateTrace::new(x0.clone(), net.gamma(), config.n_iter);
    for i in 0..config.n_iter {
        match net.step(refiner_at(refiners, i)?) {
            Ok(rec) => trace.records.push(rec),
            Err(Error::NonFinite(stage)) => {
                trace.status = TraceStatus::NonFinite {
                    iteration: i + 1,
                    stage,
                };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(trace)
}
