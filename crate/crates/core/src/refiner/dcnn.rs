use crate::conv::{conv2d_accumulate, conv2d_adjoint_accumulate, conv2d_filter_grad, Filter2d};
use crate::error::{check_len, invalid, Result};
use crate::image::ImageVector;
use crate::scalar::Real;

use super::{half_sq_residual, ParamGroup, ParamKind, Refiner, Trainable};

/// Residual ReLU network `R(u) = u − Σ_k e^L_k ⊛ u^{L−1}_k` with
/// `u^1_k = ReLU(e^1_k ⊛ u)` and `u^l_k = ReLU(Σ_{k'} e^l_{k,k'} ⊛ u^{l−1}_{k'})`.
///
/// `layers[0]` and `layers[L−1]` hold `K` filters; each middle layer holds `K²` filters
/// indexed `k·K + k'` (output channel `k`, input channel `k'`).
#[derive(Clone, Debug, PartialEq)]
pub struct DcnnRefiner<T> {
    channels: usize,
    layers: Vec<Vec<Filter2d<T>>>,
}

impl<T: Real> DcnnRefiner<T> {
    pub fn new(layers: Vec<Vec<Filter2d<T>>>) -> Result<Self> {
        if layers.len() < 2 {
            return invalid(format!("dCNN needs at least 2 layers, got {}", layers.len()));
        }
        let k = layers[0].len();
        if k == 0 {
            return invalid("dCNN needs at least one channel");
        }
        let last = layers.len() - 1;
        for (l, layer) in layers.iter().enumerate() {
            let expected = if l == 0 || l == last { k } else { k * k };
            check_len("dCNN layer filters", expected, layer.len())?;
        }
        let side = layers[0][0].side();
        if layers.iter().flatten().any(|f| f.side() != side) {
            return invalid("dCNN filters must share one size");
        }
        if layers.iter().flatten().any(|f| !crate::scalar::all_finite(f.taps())) {
            return invalid("dCNN filter taps must be finite");
        }
        Ok(Self { channels: k, layers })
    }

    pub fn zeros(depth: usize, channels: usize, side: usize) -> Result<Self> {
        let layers = (0..depth)
            .map(|l| {
                let n = if l == 0 || l + 1 == depth {
                    channels
                } else {
                    channels * channels
                };
                vec![Filter2d::zeros(side); n]
            })
            .collect();
        Self::new(layers)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn filter_side(&self) -> usize {
        self.layers[0][0].side()
    }

    pub fn filter_size(&self) -> usize {
        self.layers[0][0].size()
    }

    pub fn layers(&self) -> &[Vec<Filter2d<T>>] {
        &self.layers
    }

    /// Post-ReLU feature maps of layers `1..L−1`.
    fn features(&self, u: &[T], h: usize, w: usize) -> Vec<Vec<Vec<T>>> {
        let k = self.channels;
        let n = u.len();
        let relu = |v: &mut Vec<T>| v.iter_mut().for_each(|x| *x = x.max(T::zero()));
        let mut feats = Vec::with_capacity(self.depth() - 1);
        let first: Vec<Vec<T>> = self.layers[0]
            .iter()
            .map(|f| {
                let mut a = vec![T::zero(); n];
                conv2d_accumulate(f, u, h, w, &mut a);
                relu(&mut a);
                a
            })
            .collect();
        feats.push(first);
        for layer in &self.layers[1..self.depth() - 1] {
            let prev = feats.last().expect("first layer pushed");
            let next: Vec<Vec<T>> = (0..k)
                .map(|ko| {
                    let mut a = vec![T::zero(); n];
                    for (ki, input) in prev.iter().enumerate() {
                        conv2d_accumulate(&layer[ko * k + ki], input, h, w, &mut a);
                    }
                    relu(&mut a);
                    a
                })
                .collect();
            feats.push(next);
        }
        feats
    }

    fn output(&self, u: &[T], last_feats: &[Vec<T>], h: usize, w: usize) -> Vec<T> {
        let mut acc = vec![T::zero(); u.len()];
        for (f, feat) in self.layers[self.depth() - 1].iter().zip(last_feats) {
            conv2d_accumulate(f, feat, h, w, &mut acc);
        }
        u.iter().zip(acc).map(|(&x, a)| x - a).collect()
    }
}

impl<T: Real> Refiner<T> for DcnnRefiner<T> {
    fn refine(&self, u: &ImageVector<T>) -> Result<ImageVector<T>> {
        let (h, w) = u.shape();
        let feats = self.features(u.as_slice(), h, w);
        let out = self.output(u.as_slice(), feats.last().expect("depth ≥ 2"), h, w);
        ImageVector::new(out, h, w)
    }
}

impl<T: Real> Trainable<T> for DcnnRefiner<T> {
    /// Layout: layers in order, filters in stored order, taps row-major.
    fn params(&self) -> Vec<T> {
        self.layers
            .iter()
            .flatten()
            .flat_map(|f| f.taps().iter().copied())
            .collect()
    }

    fn set_params(&mut self, params: &[T]) -> Result<()> {
        check_len("dCNN parameters", self.num_params(), params.len())?;
        let r = self.filter_size();
        for (f, chunk) in self.layers.iter_mut().flatten().zip(params.chunks(r)) {
            f.taps_mut().copy_from_slice(chunk);
        }
        Ok(())
    }

    fn param_groups(&self) -> Vec<ParamGroup> {
        let total = self.layers.iter().map(Vec::len).sum::<usize>() * self.filter_size();
        vec![ParamGroup {
            kind: ParamKind::Filter,
            range: 0..total,
        }]
    }

    fn loss_and_grad(&self, input: &ImageVector<T>, truth: &ImageVector<T>, grad: &mut [T]) -> Result<T> {
        input.ensure_same_shape(truth, "training pair")?;
        check_len("gradient buffer", self.num_params(), grad.len())?;
        let (h, w) = input.shape();
        let n = input.len();
        let k = self.channels;
        let r = self.filter_size();
        let side = self.filter_side();
        let depth = self.depth();
        let u = input.as_slice();

        let feats = self.features(u, h, w);
        let out = self.output(u, feats.last().expect("depth ≥ 2"), h, w);
        let (loss, res) = half_sq_residual(&out, truth.as_slice());
        let neg_res: Vec<T> = res.iter().map(|&v| -v).collect();

        let mut offsets = Vec::with_capacity(depth);
        let mut acc = 0;
        for layer in &self.layers {
            offsets.push(acc);
            acc += layer.len() * r;
        }

        // gradient flowing into the last feature maps
        let last = depth - 1;
        let mut g_feat: Vec<Vec<T>> = Vec::with_capacity(k);
        for (ki, f) in self.layers[last].iter().enumerate() {
            let off = offsets[last] + ki * r;
            conv2d_filter_grad(side, &neg_res, &feats[last - 1][ki], h, w, &mut grad[off..off + r]);
            let mut g = vec![T::zero(); n];
            conv2d_adjoint_accumulate(f, &neg_res, h, w, &mut g);
            g_feat.push(g);
        }

        for l in (1..last).rev() {
            for (g, f) in g_feat.iter_mut().zip(&feats[l]) {
                mask_relu(g, f);
            }
            let mut g_prev = vec![vec![T::zero(); n]; k];
            for (ko, g_out) in g_feat.iter().enumerate() {
                for ki in 0..k {
                    let idx = ko * k + ki;
                    let off = offsets[l] + idx * r;
                    conv2d_filter_grad(side, g_out, &feats[l - 1][ki], h, w, &mut grad[off..off + r]);
                    conv2d_adjoint_accumulate(&self.layers[l][idx], g_out, h, w, &mut g_prev[ki]);
                }
            }
            g_feat = g_prev;
        }

        for (ki, g) in g_feat.iter_mut().enumerate() {
            mask_relu(g, &feats[0][ki]);
            let off = ki * r;
            conv2d_filter_grad(side, g, u, h, w, &mut grad[off..off + r]);
        }
        Ok(loss)
    }
}

fn mask_relu<T: Real>(g: &mut [T], activated: &[T]) {
    for (gi, &a) in g.iter_mut().zip(activated) {
        if !(a > T::zero()) {
            *gi = T::zero();
        }
    }
}
