//! Momentum-accelerated iterative neural network (INN) image reconstruction.
//!
//! Each iteration relaxes the current image toward a learned refiner output, extrapolates with
//! a majorizer-weighted momentum term and takes one proximal-gradient step on a quadratic
//! data-fit plus a proximity penalty. Everything numeric is generic over [`scalar::Real`]
//! (`f32` or `f64`); the aliases below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conv;
pub mod datafit;
pub mod error;
pub mod image;
pub mod imaging;
pub mod io;
pub mod linops;
pub mod prox;
pub mod refiner;
pub mod scalar;
pub mod solver;
pub mod training;

pub use conv::Filter2d;
pub use datafit::{diag_majorizer, DiagonalMajorizer, MbirObjective, QuadraticDataFit};
pub use error::{Error, Result};
pub use image::ImageVector;
pub use linops::{CircularConvolution, DenseMatrix, LinearOperator, SparseMatrix};
pub use prox::FeasibleSet;
pub use refiner::{Refiner, RefinerModel, Trainable};
pub use scalar::Real;
pub use solver::{run_bcd_net, run_caol_bpegm, run_momentum_net, IterateTrace, MomentumNet, MomentumNetConfig};
pub use training::{greedy_train, train_refiner, TrainConfig};

pub type Image = ImageVector<f64>;
pub type Filter = Filter2d<f64>;
pub type DataFit = QuadraticDataFit<f64>;
pub type Majorizer = DiagonalMajorizer<f64>;
pub type Sparse = SparseMatrix<f64>;
pub type Dense = DenseMatrix<f64>;
pub type Blur = CircularConvolution<f64>;
pub type Feasible = FeasibleSet<f64>;
pub type Model = RefinerModel<f64>;
pub type Config = MomentumNetConfig<f64>;
pub type Trace = IterateTrace<f64>;
pub type Scnn = refiner::ScnnRefiner<f64>;
pub type Dcnn = refiner::DcnnRefiner<f64>;
pub type TiedCaol = refiner::TiedCaolRefiner<f64>;
pub type Sample = training::TrainingSample<f64>;
