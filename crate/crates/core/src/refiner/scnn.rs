use crate::conv::{conv2d_accumulate, conv2d_adjoint, conv2d_filter_grad, Filter2d};
use crate::error::{check_len, invalid, Result};
use crate::image::ImageVector;
use crate::prox::soft_threshold_in_place;
use crate::scalar::Real;

use super::{half_sq_residual, ParamGroup, ParamKind, Refiner, Trainable};

/// Smallest threshold ever applied; `exp(α)` below this is raised to it.
pub const MIN_THRESHOLD: f64 = 1e-12;

/// Single-hidden-layer convolutional autoencoder
/// `R(u) = Σ_k d_k ⊛ T_{exp(α_k)}(e_k ⊛ u) (+ u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScnnRefiner<T> {
    encoder: Vec<Filter2d<T>>,
    decoder: Vec<Filter2d<T>>,
    log_thresholds: Vec<T>,
    residual: bool,
}

impl<T: Real> ScnnRefiner<T> {
    pub fn new(
        encoder: Vec<Filter2d<T>>,
        decoder: Vec<Filter2d<T>>,
        log_thresholds: Vec<T>,
        residual: bool,
    ) -> Result<Self> {
        if encoder.is_empty() {
            return invalid("sCNN needs at least one channel");
        }
        check_len("sCNN decoder channels", encoder.len(), decoder.len())?;
        check_len("sCNN thresholds", encoder.len(), log_thresholds.len())?;
        let side = encoder[0].side();
        if encoder.iter().chain(&decoder).any(|f| f.side() != side) {
            return invalid("sCNN filters must share one size");
        }
        if encoder
            .iter()
            .chain(&decoder)
            .any(|f| !crate::scalar::all_finite(f.taps()))
        {
            return invalid("sCNN filter taps must be finite");
        }
        if log_thresholds.iter().any(|a| a.is_nan() || *a == T::infinity()) {
            return invalid("sCNN log-thresholds must be finite or −∞");
        }
        Ok(Self {
            encoder,
            decoder,
            log_thresholds,
            residual,
        })
    }

    /// All filters zero and thresholds `exp(log_threshold)`.
    pub fn zeros(channels: usize, side: usize, log_threshold: T, residual: bool) -> Result<Self> {
        Self::new(
            vec![Filter2d::zeros(side); channels],
            vec![Filter2d::zeros(side); channels],
            vec![log_threshold; channels],
            residual,
        )
    }

    pub fn channels(&self) -> usize {
        self.encoder.len()
    }

    pub fn filter_side(&self) -> usize {
        self.encoder[0].side()
    }

    /// Taps per filter (`R`).
    pub fn filter_size(&self) -> usize {
        self.encoder[0].size()
    }

    pub fn encoder(&self) -> &[Filter2d<T>] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[Filter2d<T>] {
        &self.decoder
    }

    pub fn log_thresholds(&self) -> &[T] {
        &self.log_thresholds
    }

    pub fn residual(&self) -> bool {
        self.residual
    }

    /// Applied thresholds `max(exp(α_k), 1e-12)`.
    pub fn thresholds(&self) -> Vec<T> {
        (0..self.channels()).map(|k| self.threshold(k)).collect()
    }

    fn threshold(&self, k: usize) -> T {
        self.log_thresholds[k].exp().max(T::lit(MIN_THRESHOLD))
    }

    /// Copy with the decoder scaled by `c` (e.g. `1/R` for the patch-averaging form).
    pub fn with_decoder_scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        out.decoder = self.decoder.iter().map(|d| d.scaled(c)).collect();
        out
    }

    pub fn with_residual(&self, residual: bool) -> Self {
        let mut out = self.clone();
        out.residual = residual;
        out
    }

    /// Hidden codes `T_{exp(α_k)}(e_k ⊛ u)` for every channel.
    pub fn hidden_codes(&self, u: &ImageVector<T>) -> Vec<Vec<T>> {
        let (h, w) = u.shape();
        (0..self.channels())
            .map(|k| {
                let mut a = vec![T::zero(); u.len()];
                conv2d_accumulate(&self.encoder[k], u.as_slice(), h, w, &mut a);
                soft_threshold_in_place(&mut a, self.threshold(k));
                a
            })
            .collect()
    }
}

impl<T: Real> Refiner<T> for ScnnRefiner<T> {
    fn refine(&self, u: &ImageVector<T>) -> Result<ImageVector<T>> {
        let (h, w) = u.shape();
        let mut out = if self.residual {
            u.as_slice().to_vec()
        } else {
            vec![T::zero(); u.len()]
        };
        let mut a = vec![T::zero(); u.len()];
        for k in 0..self.channels() {
            a.iter_mut().for_each(|v| *v = T::zero());
            conv2d_accumulate(&self.encoder[k], u.as_slice(), h, w, &mut a);
            soft_threshold_in_place(&mut a, self.threshold(k));
            conv2d_accumulate(&self.decoder[k], &a, h, w, &mut out);
        }
        ImageVector::new(out, h, w)
    }
}

impl<T: Real> Trainable<T> for ScnnRefiner<T> {
    /// Layout: encoder taps, decoder taps, log-thresholds.
    fn params(&self) -> Vec<T> {
        let mut p = Vec::with_capacity(self.num_params());
        for f in self.encoder.iter().chain(&self.decoder) {
            p.extend_from_slice(f.taps());
        }
        p.extend_from_slice(&self.log_thresholds);
        p
    }

    fn set_params(&mut self, params: &[T]) -> Result<()> {
        check_len("sCNN parameters", self.num_params(), params.len())?;
        let r = self.filter_size();
        let mut chunks = params.chunks(r);
        for f in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            f.taps_mut().copy_from_slice(chunks.next().expect("length checked"));
        }
        let k = self.channels();
        self.log_thresholds.copy_from_slice(&params[params.len() - k..]);
        Ok(())
    }

    fn param_groups(&self) -> Vec<ParamGroup> {
        let nf = 2 * self.channels() * self.filter_size();
        vec![
            ParamGroup {
                kind: ParamKind::Filter,
                range: 0..nf,
            },
            ParamGroup {
                kind: ParamKind::Threshold,
                range: nf..nf + self.channels(),
            },
        ]
    }

    fn loss_and_grad(&self, input: &ImageVector<T>, truth: &ImageVector<T>, grad: &mut [T]) -> Result<T> {
        input.ensure_same_shape(truth, "training pair")?;
        check_len("gradient buffer", self.num_params(), grad.len())?;
        let (h, w) = input.shape();
        let n = input.len();
        let k_count = self.channels();
        let r = self.filter_size();
        let side = self.filter_side();

        let mut pre = Vec::with_capacity(k_count);
        let mut out = if self.residual {
            input.as_slice().to_vec()
        } else {
            vec![T::zero(); n]
        };
        for k in 0..k_count {
            let mut a = vec![T::zero(); n];
            conv2d_accumulate(&self.encoder[k], input.as_slice(), h, w, &mut a);
            let mut b = a.clone();
            soft_threshold_in_place(&mut b, self.threshold(k));
            conv2d_accumulate(&self.decoder[k], &b, h, w, &mut out);
            pre.push((a, b));
        }
        let (loss, res) = half_sq_residual(&out, truth.as_slice());

        let (enc_grad, rest) = grad.split_at_mut(k_count * r);
        let (dec_grad, thr_grad) = rest.split_at_mut(k_count * r);
        for (k, (a, b)) in pre.iter().enumerate() {
            conv2d_filter_grad(side, &res, b, h, w, &mut dec_grad[k * r..(k + 1) * r]);
            let mut g = conv2d_adjoint(&self.decoder[k], &res, h, w);
            let theta = self.threshold(k);
            let mut d_theta = T::zero();
            for (gi, &ai) in g.iter_mut().zip(a) {
                if ai > theta {
                    d_theta -= *gi;
                } else if ai < -theta {
                    d_theta += *gi;
                } else {
                    *gi = T::zero();
                }
            }
            if self.log_thresholds[k].exp() > T::lit(MIN_THRESHOLD) {
                thr_grad[k] += theta * d_theta;
            }
            conv2d_filter_grad(side, &g, input.as_slice(), h, w, &mut enc_grad[k * r..(k + 1) * r]);
        }
        Ok(loss)
    }
}
