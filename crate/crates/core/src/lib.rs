//! Time-limited H2-optimal model order reduction.
//!
//! Given a linear time-invariant system `ẋ = Ax + Bu`, `y = Cx` and a horizon
//! `τ`, find a reduced `(A_r, B_r, C_r)` of order `r` minimizing the error
//! norm `‖G − G_r‖_{H2,τ}` measured only over `[0, τ]`. Neither model has to
//! be stable.
//!
//! * [`gramians`]: time-limited Gramians, norm, transfer function.
//! * [`cost_grad`]: error-system solves, the cost and its closed-form gradients.
//! * [`reducers`]: balanced truncation and the TL-TSIA iteration as initializers.
//! * [`optimizer`]: BFGS refinement of an initial reduced model.
//! * [`verifier`]: interpolation identities and the time-domain output bound.
//! * [`io`], [`harness`]: file formats and end-to-end drivers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost_grad;
pub mod error;
pub mod gramians;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod parallel;
pub mod reducers;
pub mod verifier;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{Horizon, ReducedModel, StateSpaceModel};
pub use parallel::Execution;
