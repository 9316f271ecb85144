//! Image-refining maps `R(u)` applied between MBIR steps, with the parameter plumbing
//! needed to train them.

mod caol;
mod dcnn;
mod diagnostics;
mod scnn;
mod serial;

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

pub use caol::{make_tf_filterbank, tf_identity_gap, tight_frame_error, TiedCaolRefiner, TIGHT_FRAME_TOL};
pub use dcnn::DcnnRefiner;
pub use diagnostics::{
    delta_measure, lipschitz_estimate, paired_epsilon, scnn_nonexpansive_sufficient, NonexpansiveReport,
};
pub use scnn::{ScnnRefiner, MIN_THRESHOLD};
pub use serial::{read_refiner, refiner_from_text, refiner_to_text, write_refiner, FORMAT_HEADER};

use crate::conv::{conv2d, conv2d_filter_grad, Filter2d};
use crate::error::{check_len, Error, Result};
use crate::image::ImageVector;
use crate::scalar::Real;

/// A map from images to images of the same shape.
pub trait Refiner<T: Real>: Send + Sync + fmt::Debug {
    fn refine(&self, u: &ImageVector<T>) -> Result<ImageVector<T>>;
}

impl<T: Real, R: Refiner<T> + ?Sized> Refiner<T> for &R {
    fn refine(&self, u: &ImageVector<T>) -> Result<ImageVector<T>> {
        (**self).refine(u)
    }
}

impl<T: Real, R: Refiner<T> + ?Sized> Refiner<T> for Box<R> {
    fn refine(&self, u: &ImageVector<T>) -> Result<ImageVector<T>> {
        (**self).refine(u)
    }
}

impl<T: Real, R: Refiner<T> + ?Sized> Refiner<T> for Arc<R> {
    fn refine(&self, u: &ImageVector<T>) -> Result<ImageVector<T>> {
        (**self).refine(u)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IdentityRefiner;

impl<T: Real> Refiner<T> for IdentityRefiner {
    fn refine(&self, u: &ImageVector<T>) -> Result<ImageVector<T>> {
        Ok(u.clone())
    }
}

/// `u ↦ c·u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledRefiner<T>(pub T);

impl<T: Real> Refiner<T> for ScaledRefiner<T> {
    fn refine(&self, u: &ImageVector<T>) -> Result<ImageVector<T>> {
        ImageVector::new(u.as_slice().iter().map(|&v| v * self.0).collect(), u.height(), u.width())
    }
}

/// Maps every input to one fixed image.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantRefiner<T>(pub ImageVector<T>);

impl<T: Real> Refiner<T> for ConstantRefiner<T> {
    fn refine(&self, u: &ImageVector<T>) -> Result<ImageVector<T>> {
        self.0.ensure_same_shape(u, "constant refiner input")?;
        Ok(self.0.clone())
    }
}

type RefineFn<T> = dyn Fn(&ImageVector<T>) -> ImageVector<T> + Send + Sync;

/// Wraps a closure.
#[derive(Clone)]
pub struct FnRefiner<T> {
    name: String,
    f: Arc<RefineFn<T>>,
}

impl<T: Real> FnRefiner<T> {
    pub fn new(name: impl Into<String>, f: impl Fn(&ImageVector<T>) -> ImageVector<T> + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }
}

impl<T> fmt::Debug for FnRefiner<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnRefiner").field("name", &self.name).finish()
    }
}

impl<T: Real> Refiner<T> for FnRefiner<T> {
    fn refine(&self, u: &ImageVector<T>) -> Result<ImageVector<T>> {
        let out = (self.f)(u);
        u.ensure_same_shape(&out, "closure refiner output")?;
        if !out.is_finite() {
            return Err(Error::NonFinite("closure refiner output"));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Filter,
    Threshold,
}

/// A contiguous slice of the flattened parameter vector sharing one learning rate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamGroup {
    pub kind: ParamKind,
    pub range: Range<usize>,
}

/// A refiner whose parameters can be fitted to `(truth, input)` pairs.
pub trait Trainable<T: Real>: Refiner<T> + Clone {
    fn params(&self) -> Vec<T>;
    fn set_params(&mut self, params: &[T]) -> Result<()>;
    fn param_groups(&self) -> Vec<ParamGroup>;

    fn num_params(&self) -> usize {
        self.param_groups().iter().map(|g| g.range.len()).sum()
    }

    /// Returns `½‖truth − R(input)‖²` and adds its gradient with respect to the
    /// parameters to `grad`. Kinks of soft-thresholding and ReLU get subgradient 0.
    fn loss_and_grad(&self, input: &ImageVector<T>, truth: &ImageVector<T>, grad: &mut [T]) -> Result<T>;
}

pub(crate) fn half_sq_residual<T: Real>(out: &[T], truth: &[T]) -> (T, Vec<T>) {
    let r: Vec<T> = out.iter().zip(truth).map(|(&o, &t)| o - t).collect();
    let loss = T::lit(0.5) * crate::scalar::norm_sq(&r);
    (loss, r)
}

/// Single linear filter `u ↦ h ⊛ u`; with a `1 × 1` filter this is the scalar model `w·u`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvRefiner<T> {
    filter: Filter2d<T>,
}

impl<T: Real> ConvRefiner<T> {
    pub fn new(filter: Filter2d<T>) -> Self {
        Self { filter }
    }

    pub fn filter(&self) -> &Filter2d<T> {
        &self.filter
    }
}

impl<T: Real> Refiner<T> for ConvRefiner<T> {
    fn refine(&self, u: &ImageVector<T>) -> Result<ImageVector<T>> {
        let (h, w) = u.shape();
        ImageVector::new(conv2d(&self.filter, u.as_slice(), h, w), h, w)
    }
}

impl<T: Real> Trainable<T> for ConvRefiner<T> {
    fn params(&self) -> Vec<T> {
        self.filter.taps().to_vec()
    }

    fn set_params(&mut self, params: &[T]) -> Result<()> {
        check_len("conv refiner parameters", self.filter.size(), params.len())?;
        self.filter.taps_mut().copy_from_slice(params);
        Ok(())
    }

    fn param_groups(&self) -> Vec<ParamGroup> {
        vec![ParamGroup {
            kind: ParamKind::Filter,
            range: 0..self.filter.size(),
        }]
    }

    fn loss_and_grad(&self, input: &ImageVector<T>, truth: &ImageVector<T>, grad: &mut [T]) -> Result<T> {
        input.ensure_same_shape(truth, "training pair")?;
        check_len("gradient buffer", self.filter.size(), grad.len())?;
        let (h, w) = input.shape();
        let out = conv2d(&self.filter, input.as_slice(), h, w);
        let (loss, r) = half_sq_residual(&out, truth.as_slice());
        conv2d_filter_grad(self.filter.side(), &r, input.as_slice(), h, w, grad);
        Ok(loss)
    }
}

/// Any of the refiner architectures, as stored on disk and passed between stages.
#[derive(Clone, Debug, PartialEq)]
pub enum RefinerModel<T> {
    Scnn(ScnnRefiner<T>),
    Dcnn(DcnnRefiner<T>),
    TiedCaol(TiedCaolRefiner<T>),
    Conv(ConvRefiner<T>),
}

impl<T: Real> RefinerModel<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            RefinerModel::Scnn(_) => "scnn",
            RefinerModel::Dcnn(_) => "dcnn",
            RefinerModel::TiedCaol(_) => "tied-caol",
            RefinerModel::Conv(_) => "conv",
        }
    }
}

impl<T: Real> Refiner<T> for RefinerModel<T> {
    fn refine(&self, u: &ImageVector<T>) -> Result<ImageVector<T>> {
        match self {
            RefinerModel::Scnn(r) => r.refine(u),
            RefinerModel::Dcnn(r) => r.refine(u),
            RefinerModel::TiedCaol(r) => r.refine(u),
            RefinerModel::Conv(r) => r.refine(u),
        }
    }
}

/// Tied CAOL refiners keep their tight-frame filters and thresholds fixed, so they expose
/// no trainable parameters.
impl<T: Real> Trainable<T> for RefinerModel<T> {
    fn params(&self) -> Vec<T> {
        match self {
            RefinerModel::Scnn(r) => r.params(),
            RefinerModel::Dcnn(r) => r.params(),
            RefinerModel::TiedCaol(_) => Vec::new(),
            RefinerModel::Conv(r) => r.params(),
        }
    }

    fn set_params(&mut self, params: &[T]) -> Result<()> {
        match self {
            RefinerModel::Scnn(r) => r.set_params(params),
            RefinerModel::Dcnn(r) => r.set_params(params),
            RefinerModel::TiedCaol(_) => check_len("tied CAOL parameters", 0, params.len()),
            RefinerModel::Conv(r) => r.set_params(params),
        }
    }

    fn param_groups(&self) -> Vec<ParamGroup> {
        match self {
            RefinerModel::Scnn(r) => r.param_groups(),
            RefinerModel::Dcnn(r) => r.param_groups(),
            RefinerModel::TiedCaol(_) => Vec::new(),
            RefinerModel::Conv(r) => r.param_groups(),
        }
    }

    fn loss_and_grad(&self, input: &ImageVector<T>, truth: &ImageVector<T>, grad: &mut [T]) -> Result<T> {
        match self {
            RefinerModel::Scnn(r) => r.loss_and_grad(input, truth, grad),
            RefinerModel::Dcnn(r) => r.loss_and_grad(input, truth, grad),
            RefinerModel::TiedCaol(r) => {
                input.ensure_same_shape(truth, "training pair")?;
                let out = r.refine(input)?;
                Ok(half_sq_residual(out.as_slice(), truth.as_slice()).0)
            }
            RefinerModel::Conv(r) => r.loss_and_grad(input, truth, grad),
        }
    }
}

impl<T> From<ScnnRefiner<T>> for RefinerModel<T> {
    fn from(r: ScnnRefiner<T>) -> Self {
        RefinerModel::Scnn(r)
    }
}

impl<T> From<DcnnRefiner<T>> for RefinerModel<T> {
    fn from(r: DcnnRefiner<T>) -> Self {
        RefinerModel::Dcnn(r)
    }
}

impl<T> From<TiedCaolRefiner<T>> for RefinerModel<T> {
    fn from(r: TiedCaolRefiner<T>) -> Self {
        RefinerModel::TiedCaol(r)
    }
}

impl<T> From<ConvRefiner<T>> for RefinerModel<T> {
    fn from(r: ConvRefiner<T>) -> Self {
        RefinerModel::Conv(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_refiners() {
        let u = ImageVector::from_vec(vec![1.0, -2.0]).unwrap();
        assert_eq!(IdentityRefiner.refine(&u).unwrap(), u);
        assert_eq!(ScaledRefiner(2.0).refine(&u).unwrap().as_slice(), &[2.0, -4.0]);
        let c = ConstantRefiner(ImageVector::zeros(1, 2));
        assert_eq!(c.refine(&u).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(c.refine(&ImageVector::zeros(1, 3)).is_err());
        let f = FnRefiner::new("neg", |u: &ImageVector<f64>| u.scaled(-1.0));
        assert_eq!(f.refine(&u).unwrap().as_slice(), &[-1.0, 2.0]);
    }

    #[test]
    fn conv_refiner_gradient() {
        let r = ConvRefiner::new(Filter2d::new(1, vec![0.5]).unwrap());
        let u = ImageVector::from_vec(vec![1.0, 2.0]).unwrap();
        let t = ImageVector::from_vec(vec![2.0, 4.0]).unwrap();
        let mut g = vec![0.0];
        let loss: f64 = r.loss_and_grad(&u, &t, &mut g).unwrap();
        // out = (0.5, 1), residual (−1.5, −3)
        assert!((loss - 0.5 * (2.25 + 9.0)).abs() < 1e-15);
        assert!((g[0] - (-1.5 - 6.0)).abs() < 1e-15);
    }
}
