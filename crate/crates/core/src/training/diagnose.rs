use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::TrainingSample;
use crate::error::{invalid, Result};
use crate::image::ImageVector;
use crate::prox::FeasibleSet;
use crate::refiner::{lipschitz_estimate, paired_epsilon, Refiner};
use crate::scalar::Real;
use crate::solver::{MomentumNet, MomentumNetConfig};

/// Per-iteration refiner diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticRow {
    pub iteration: usize,
    /// Empirical Lipschitz constant `κ⁽ⁱ⁾` of the refiner applied at this iteration.
    pub kappa: f64,
    /// `ε⁽ⁱ⁾` between this refiner and the previous one.
    pub epsilon: Option<f64>,
    /// Mean over samples of `Δ⁽ⁱ⁾`.
    pub delta: Option<f64>,
}

fn sample_pairs<T: Real>(
    states: &[ImageVector<T>],
    n_pairs: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(ImageVector<T>, ImageVector<T>)> {
    (0..n_pairs)
        .map(|_| {
            if states.len() >= 2 {
                let a = rng.gen_range(0..states.len());
                let mut b = rng.gen_range(0..states.len() - 1);
                if b >= a {
                    b += 1;
                }
                (states[a].clone(), states[b].clone())
            } else {
                let u = &states[0];
                let scale = (u.norm_sq().as_f64() / u.len() as f64).sqrt().max(1e-3) * 1e-2;
                let noisy = u
                    .as_slice()
                    .iter()
                    .map(|&x| x + T::lit(scale * rng.sample::<f64, _>(StandardNormal)))
                    .collect();
                let v = ImageVector::new(noisy, u.height(), u.width()).expect("shape preserved");
                (u.clone(), v)
            }
        })
        .collect()
}

/// Runs Momentum-Net on every sample for `net_config.n_iter` passes (repeating the last refiner
/// if the list is short) and reports `κ`, `ε` and `Δ` per pass. Image pairs for `κ` and `ε` are
/// drawn from the refiner inputs of that pass: two different samples when at least two exist,
/// otherwise one sample and a small Gaussian perturbation of it. With a single refiner only `κ`
/// is reported.
pub fn diagnose_refiners<T: Real, R: Refiner<T>>(
    refiners: &[R],
    samples: &[TrainingSample<T>],
    net_config: &MomentumNetConfig<T>,
    feasible: FeasibleSet<T>,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<DiagnosticRow>> {
    if refiners.is_empty() || samples.is_empty() || n_pairs == 0 {
        return invalid("diagnostics need refiners, samples and at least one pair");
    }
    let paired = refiners.len() >= 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = samples
        .iter()
        .map(|s| MomentumNet::with_parts(net_config, &s.datafit, feasible, s.init.clone(), s.gamma, s.majorizer.clone()))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(net_config.n_iter);
    for i in 0..net_config.n_iter {
        let refiner = crate::solver::momentum_net::refiner_at(refiners, i)?;
        let inputs: Vec<ImageVector<T>> = states.iter().map(|s| s.current().clone()).collect();
        let pairs = sample_pairs(&inputs, n_pairs, &mut rng);
        let kappa = lipschitz_estimate(refiner, &pairs)?;
        let epsilon = if paired && i > 0 {
            let prev = crate::solver::momentum_net::refiner_at(refiners, i - 1)?;
            Some(paired_epsilon(refiner, prev, &pairs)?)
        } else {
            None
        };
        let mut delta_sum = 0.0;
        let mut delta_count = 0usize;
        for st in &mut states {
            if let Some(d) = st.step(refiner)?.delta {
                delta_sum += d;
                delta_count += 1;
            }
        }
        let delta = (paired && delta_count > 0).then(|| delta_sum / delta_count as f64);
        rows.push(DiagnosticRow {
            iteration: i + 1,
            kappa,
            epsilon,
            delta,
        });
    }
    Ok(rows)
}
