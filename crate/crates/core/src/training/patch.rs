use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainingPair;
use crate::conv::{conv2d, Filter2d};
use crate::error::{invalid, Error, Result};
use crate::image::ImageVector;
use crate::prox::soft_threshold_scalar;
use crate::refiner::ScnnRefiner;
use crate::scalar::Real;

/// Both sides of the convolutional-versus-patch loss inequality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchLossBound {
    /// `(1/2S) Σ_s ‖x̂_s − (1/R) Σ_k d_k ⊛ T_{α_k}(e_k ⊛ x_s)‖²`.
    pub convolutional: f64,
    /// `(1/2SR) Σ_s Σ_n ‖P_n x̂_s − D T_α(E P_n x_s)‖²`.
    pub patch: f64,
}

impl PatchLossBound {
    pub fn holds(&self, tol: f64) -> bool {
        self.convolutional <= self.patch + tol
    }
}

/// Evaluates both losses for the residual-predicting autoencoder with encoder `e_k`, decoder
/// `d_k` and thresholds of `refiner`; the residual target is `x̂_s = truth − input`.
///
/// Patches are `R`-pixel circular windows with stride 1, where tap `j` of the patch at pixel `n`
/// reads `x[n − offset(j)]`. In that basis the decoder column `D_{:,k}` is the reversal of `d_k`
/// (odd filter sides only).
pub fn patch_loss_bound<T: Real>(refiner: &ScnnRefiner<T>, pairs: &[TrainingPair<T>]) -> Result<PatchLossBound> {
    if pairs.is_empty() {
        return Err(Error::Empty("training pairs"));
    }
    let side = refiner.filter_side();
    if side.is_multiple_of(2) {
        return invalid("patch bound check needs odd filter sides");
    }
    let r = side * side;
    let kc = refiner.channels();
    let thresholds: Vec<f64> = refiner.thresholds().iter().map(|t| t.as_f64()).collect();
    let enc: Vec<Vec<f64>> = refiner.encoder().iter().map(|f| f.taps().iter().map(|t| t.as_f64()).collect()).collect();
    let dec_cols: Vec<Vec<f64>> = refiner
        .decoder()
        .iter()
        .map(|f| f.flipped().taps().iter().map(|t| t.as_f64()).collect())
        .collect();
    let offsets: Vec<(isize, isize)> = (0..r).map(|j| Filter2d::<f64>::zeros(side).offset(j)).collect();

    let mut conv_total = 0.0;
    let mut patch_total = 0.0;
    for p in pairs {
        let (h, w) = p.input.shape();
        let x: Vec<f64> = p.input.as_slice().iter().map(|v| v.as_f64()).collect();
        let resid: Vec<f64> = p
            .truth
            .as_slice()
            .iter()
            .zip(p.input.as_slice())
            .map(|(&t, &u)| (t - u).as_f64())
            .collect();

        let mut out = vec![0.0; h * w];
        for k in 0..kc {
            let ef = Filter2d::new(side, enc[k].clone())?;
            let mut code = conv2d(&ef, &x, h, w);
            code.iter_mut().for_each(|c| *c = soft_threshold_scalar(*c, thresholds[k]));
            let df = Filter2d::new(side, refiner.decoder()[k].taps().iter().map(|t| t.as_f64()).collect())?;
            for (o, v) in out.iter_mut().zip(conv2d(&df, &code, h, w)) {
                *o += v / r as f64;
            }
        }
        conv_total += resid.iter().zip(&out).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();

        let extract = |img: &[f64], i: usize, j: usize| -> Vec<f64> {
            offsets
                .iter()
                .map(|&(da, db)| {
                    let ii = (i as isize - da).rem_euclid(h as isize) as usize;
                    let jj = (j as isize - db).rem_euclid(w as isize) as usize;
                    img[ii * w + jj]
                })
                .collect()
        };
        for i in 0..h {
            for j in 0..w {
                let xp = extract(&x, i, j);
                let mut approx = vec![0.0; r];
                for k in 0..kc {
                    let c: f64 = enc[k].iter().zip(&xp).map(|(a, b)| a * b).sum();
                    let c = soft_threshold_scalar(c, thresholds[k]);
                    for (a, d) in approx.iter_mut().zip(&dec_cols[k]) {
                        *a += d * c;
                    }
                }
                let rp = extract(&resid, i, j);
                patch_total += rp.iter().zip(&approx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
        }
    }
    let s = pairs.len() as f64;
    Ok(PatchLossBound {
        convolutional: conv_total / (2.0 * s),
        patch: patch_total / (2.0 * s * r as f64),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchBoundReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest `convolutional − patch` seen (negative when the bound always held strictly).
    pub max_excess: f64,
}

/// Draws random filters, thresholds and image pairs and counts violations of
/// `convolutional ≤ patch + 1e-10`.
pub fn patch_loss_bound_check(
    channels: usize,
    filter_side: usize,
    image_shape: (usize, usize),
    trials: usize,
    seed: u64,
) -> Result<PatchBoundReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = image_shape;
    let r = filter_side * filter_side;
    let mut report = PatchBoundReport {
        trials,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
    };
    for _ in 0..trials {
        let filters = |rng: &mut ChaCha8Rng| -> Result<Vec<Filter2d<f64>>> {
            (0..channels)
                .map(|_| Filter2d::new(filter_side, (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect()))
                .collect()
        };
        let enc = filters(&mut rng)?;
        let dec = filters(&mut rng)?;
        let log_thr = (0..channels).map(|_| rng.gen_range(-5.0..0.5)).collect();
        let refiner = ScnnRefiner::new(enc, dec, log_thr, false)?;
        let n_pairs = rng.gen_range(1..=3);
        let pairs = (0..n_pairs)
            .map(|_| {
                let t = ImageVector::from_fn(h, w, |_, _| rng.gen_range(-1.0..1.0));
                let u = ImageVector::from_fn(h, w, |_, _| rng.gen_range(-1.0..1.0));
                TrainingPair::new(t, u)
            })
            .collect::<Result<Vec<_>>>()?;
        let b = patch_loss_bound(&refiner, &pairs)?;
        let excess = b.convolutional - b.patch;
        report.max_excess = report.max_excess.max(excess);
        if !b.holds(1e-10) {
            report.violations += 1;
        }
    }
    Ok(report)
}
