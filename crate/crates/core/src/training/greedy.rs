use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{train_refiner, TrainConfig, TrainingPair};
use crate::conv::Filter2d;
use crate::datafit::{majorizer_for_gamma, DiagonalMajorizer, QuadraticDataFit};
use crate::error::{check_len, invalid, Result};
use crate::image::ImageVector;
use crate::prox::FeasibleSet;
use crate::refiner::{DcnnRefiner, RefinerModel, ScnnRefiner};
use crate::scalar::Real;
use crate::solver::{MomentumNet, MomentumNetConfig};

/// Initial sCNN log-threshold, `log(1e-2)`.
pub const INITIAL_LOG_THRESHOLD: f64 = -4.605_170_185_988_091;

/// Trainable refiner family plus its shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    Scnn { channels: usize, filter_side: usize, residual: bool },
    Dcnn { depth: usize, channels: usize, filter_side: usize },
}

fn kaiming_filters<T: Real>(rng: &mut ChaCha8Rng, count: usize, side: usize, fan_in: usize) -> Vec<Filter2d<T>> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    (0..count)
        .map(|_| {
            let taps = (0..side * side).map(|_| T::lit(dist.sample(rng))).collect();
            Filter2d::new(side, taps).expect("tap count matches side")
        })
        .collect()
}

impl Architecture {
    /// Fan-in-scaled uniform initialization: taps on `±√(6 / fan_in)`, where the fan-in counts
    /// every input tap feeding one output pixel.
    pub fn initialize<T: Real>(&self, seed: u64) -> Result<RefinerModel<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match *self {
            Architecture::Scnn {
                channels,
                filter_side,
                residual,
            } => {
                if channels == 0 || filter_side == 0 {
                    return invalid("sCNN architecture needs positive channels and filter size");
                }
                let r = filter_side * filter_side;
                let encoder = kaiming_filters(&mut rng, channels, filter_side, r);
                let decoder = kaiming_filters(&mut rng, channels, filter_side, channels * r);
                let log_thr = vec![T::lit(INITIAL_LOG_THRESHOLD); channels];
                Ok(ScnnRefiner::new(encoder, decoder, log_thr, residual)?.into())
            }
            Architecture::Dcnn {
                depth,
                channels,
                filter_side,
            } => {
                if depth < 2 || channels == 0 || filter_side == 0 {
                    return invalid("dCNN architecture needs depth ≥ 2 and positive channels and filter size");
                }
                let r = filter_side * filter_side;
                let layers = (0..depth)
                    .map(|l| {
                        if l == 0 {
                            kaiming_filters(&mut rng, channels, filter_side, r)
                        } else if l + 1 == depth {
                            kaiming_filters(&mut rng, channels, filter_side, channels * r)
                        } else {
                            kaiming_filters(&mut rng, channels * channels, filter_side, channels * r)
                        }
                    })
                    .collect();
                Ok(DcnnRefiner::new(layers)?.into())
            }
        }
    }
}

/// One training image with its measurement model, initial estimate and regularization.
#[derive(Clone, Debug)]
pub struct TrainingSample<T: Real> {
    pub truth: ImageVector<T>,
    pub init: ImageVector<T>,
    pub datafit: QuadraticDataFit<T>,
    /// `M̃_s = λ(M_{f_s} + γ_s I)`.
    pub majorizer: DiagonalMajorizer<T>,
    pub gamma: T,
}

impl<T: Real> TrainingSample<T> {
    /// Resolves `γ_s` and `M̃_s` the same way a reconstruction run with `config` would.
    pub fn new(
        truth: ImageVector<T>,
        init: ImageVector<T>,
        datafit: QuadraticDataFit<T>,
        config: &MomentumNetConfig<T>,
    ) -> Result<Self> {
        truth.ensure_same_shape(&init, "training sample")?;
        check_len("training sample operator", datafit.input_dim(), truth.len())?;
        let gamma = config.resolve_gamma(&datafit)?;
        let majorizer = majorizer_for_gamma(&datafit.majorizer_diag_raw(), gamma, config.lambda)?;
        Ok(Self {
            truth,
            init,
            datafit,
            majorizer,
            gamma,
        })
    }

    pub fn measurements(&self) -> &[T] {
        self.datafit.measurements()
    }
}

#[derive(Clone, Debug)]
pub struct GreedyTraining<T> {
    /// Refiner `i` is applied at Momentum-Net pass `i`.
    pub refiners: Vec<RefinerModel<T>>,
    /// Per-epoch loss history of each refiner.
    pub loss_histories: Vec<Vec<f64>>,
}

impl<T> GreedyTraining<T> {
    /// Last-epoch training loss of each refiner.
    pub fn final_losses(&self) -> Vec<f64> {
        self.loss_histories
            .iter()
            .map(|h| h.last().copied().unwrap_or(f64::NAN))
            .collect()
    }
}

/// Iteration-wise training: refiner `i` is fitted to `(x_s, x_s⁽ⁱ⁾)`, then every sample advances
/// one Momentum-Net pass with it. Refiner `i + 1` warm-starts from refiner `i`.
pub fn greedy_train<T: Real>(
    samples: &[TrainingSample<T>],
    arch: &Architecture,
    net_config: &MomentumNetConfig<T>,
    feasible: FeasibleSet<T>,
    train_config: &TrainConfig,
) -> Result<GreedyTraining<T>> {
    if net_config.n_iter == 0 {
        return invalid("greedy training needs at least one iteration");
    }
    if samples.is_empty() {
        return invalid("greedy training needs at least one sample");
    }
    let mut states = samples
        .iter()
        .map(|s| {
            MomentumNet::with_parts(
                net_config,
                &s.datafit,
                feasible,
                s.init.clone(),
                s.gamma,
                s.majorizer.clone(),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut current = arch.initialize::<T>(train_config.seed)?;
    let mut result = GreedyTraining {
        refiners: Vec::with_capacity(net_config.n_iter),
        loss_histories: Vec::with_capacity(net_config.n_iter),
    };
    for i in 0..net_config.n_iter {
        let pairs = samples
            .iter()
            .zip(&states)
            .map(|(s, st)| TrainingPair::new(s.truth.clone(), st.current().clone()))
            .collect::<Result<Vec<_>>>()?;
        let cfg = TrainConfig {
            seed: train_config.seed.wrapping_add(i as u64 + 1),
            ..train_config.clone()
        };
        let outcome = train_refiner(&current, &pairs, &cfg)?;
        for st in &mut states {
            st.step(&outcome.refiner)?;
        }
        current = outcome.refiner.clone();
        result.refiners.push(outcome.refiner);
        result.loss_histories.push(outcome.loss_history);
    }
    Ok(result)
}
