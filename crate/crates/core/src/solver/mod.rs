//! Iterative reconstruction: Momentum-Net, BCD-Net with an APG inner solver, and the
//! two-block BPEG-M scheme for tight-frame convolutional regularization.

mod bcd;
mod caol;
mod config;
mod momentum;
pub(crate) mod momentum_net;
mod trace;

pub use bcd::{apg_solve, run_bcd_net};
pub use caol::run_caol_bpegm;
pub use config::{MomentumNetConfig, Regularization};
pub use momentum::{
    check_extrapolation_condition, extrapolation_matrix, momentum_update, ExtrapolationMatrix, MomentumState,
};
pub use momentum_net::{fixed_point_residual, mbir_step, run_momentum_net, MomentumNet};
pub use trace::{IterateRecord, IterateTrace, TraceStatus};
