use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{refining_loss, TrainingPair};
use crate::error::{check_len, invalid, Error, Result};
use crate::refiner::{ParamGroup, ParamKind, Trainable};
use crate::scalar::Real;

/// Mini-batch optimizer schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_filters: f64,
    /// Learning rate for (log-)threshold parameters.
    pub lr_thresholds: f64,
    /// Fractional learning-rate reduction applied every 10 epochs.
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 20,
            epochs: 300,
            lr_filters: 1e-3,
            lr_thresholds: 1e-1,
            lr_decay: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return invalid("batch size must be positive");
        }
        if !(self.lr_filters >= 0.0 && self.lr_filters.is_finite())
            || !(self.lr_thresholds >= 0.0 && self.lr_thresholds.is_finite())
        {
            return invalid("learning rates must be finite and nonnegative");
        }
        if !(0.0..1.0).contains(&self.lr_decay) {
            return invalid(format!("learning-rate decay must lie in [0, 1), got {}", self.lr_decay));
        }
        Ok(())
    }

    /// Multiplier `(1 − decay)^{⌊epoch / 10⌋}`.
    pub fn lr_scale(&self, epoch: usize) -> f64 {
        (1.0 - self.lr_decay).powi((epoch / 10) as i32)
    }
}

/// Adaptive-moment optimizer state (decay rates 0.9 / 0.999, ε = 1e-8).
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    first: Vec<f64>,
    second: Vec<f64>,
    step: i32,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPSILON: f64 = 1e-8;

    pub fn new(n: usize) -> Self {
        Self {
            first: vec![0.0; n],
            second: vec![0.0; n],
            step: 0,
        }
    }

    /// One bias-corrected update; `lr[i]` is the rate for parameter `i`.
    pub fn update<T: Real>(&mut self, params: &mut [T], grad: &[T], lr: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for i in 0..params.len() {
            let g = grad[i].as_f64();
            self.first[i] = Self::BETA1 * self.first[i] + (1.0 - Self::BETA1) * g;
            self.second[i] = Self::BETA2 * self.second[i] + (1.0 - Self::BETA2) * g * g;
            let m_hat = self.first[i] / c1;
            let v_hat = self.second[i] / c2;
            let delta = lr[i] * m_hat / (v_hat.sqrt() + Self::EPSILON);
            params[i] -= T::lit(delta);
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<R> {
    pub refiner: R,
    /// Full-set refining loss after each epoch.
    pub loss_history: Vec<f64>,
}

fn per_param_rates(groups: &[ParamGroup], n: usize, config: &TrainConfig) -> Result<Vec<f64>> {
    let mut rates = vec![f64::NAN; n];
    for g in groups {
        let lr = match g.kind {
            ParamKind::Filter => config.lr_filters,
            ParamKind::Threshold => config.lr_thresholds,
        };
        rates[g.range.clone()].iter_mut().for_each(|r| *r = lr);
    }
    if rates.iter().any(|r| r.is_nan()) {
        return invalid("parameter groups do not cover every parameter");
    }
    Ok(rates)
}

/// Fits `init` to `pairs` with mini-batch Adam on the refining loss. Batches are drawn from a
/// seeded shuffle each epoch, so runs are reproducible bit for bit.
pub fn train_refiner<T: Real, R: Trainable<T>>(
    init: &R,
    pairs: &[TrainingPair<T>],
    config: &TrainConfig,
) -> Result<TrainOutcome<R>> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Empty("training pairs"));
    }
    let mut refiner = init.clone();
    let mut params = refiner.params();
    let n = params.len();
    let base_rates = per_param_rates(&refiner.param_groups(), n, config)?;
    let mut adam = Adam::new(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut grad = vec![T::zero(); n];
    let mut rates = vec![0.0; n];

    for epoch in 0..config.epochs {
        let scale = config.lr_scale(epoch);
        for (r, b) in rates.iter_mut().zip(&base_rates) {
            *r = b * scale;
        }
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let mut batch_loss = 0.0;
            for &s in batch {
                batch_loss += refiner.loss_and_grad(&pairs[s].input, &pairs[s].truth, &mut grad)?.as_f64();
            }
            let inv = T::one() / T::from_usize_lossy(batch.len());
            grad.iter_mut().for_each(|g| *g *= inv);
            if !batch_loss.is_finite() || !crate::scalar::all_finite(&grad) {
                history.push(f64::NAN);
                return Err(Error::TrainingDiverged { epoch, history });
            }
            if n > 0 {
                adam.update(&mut params, &grad, &rates);
                refiner.set_params(&params)?;
            }
        }
        let loss = refining_loss(&refiner, pairs)?;
        history.push(loss);
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch, history });
        }
    }
    check_len("trained parameters", n, refiner.params().len())?;
    Ok(TrainOutcome {
        refiner,
        loss_history: history,
    })
}
