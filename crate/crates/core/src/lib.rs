//! Scalar Kalman filter, the scalar pedagogical ensemble Kalman filter
//! (SPEnKF), and the analytic machinery describing how far the ensemble
//! filter drifts from the exact one.
//!
//! The crate is organised bottom-up:
//!
//! * [`expint`]: real-order generalized exponential integrals, scaled and
//!   unscaled, plus the inverse used by the inflation solver.
//! * [`propagators`]: model products `M_i`, cumulative sums `S_i`, `B_i`,
//!   truth and synthetic observations.
//! * [`skf`]: the exact scalar filter, as a recursion and in closed form.
//! * [`spenkf`]: the ensemble filter and its inflation schedule.
//! * [`gamma_ratio`]: moments and density of `(aX+b)/(cX+d)` for Gamma `X`.
//! * [`discrepancy`]: analytic moments of the ensemble/exact gap.
//! * [`mvspenkf`]: the diagonalizable multivariate extension.
//!
//! Monte Carlo loops run through [`mc`], which splits replicates into
//! fixed-size blocks with their own RNG streams and reduces them in block
//! order, so results do not depend on the thread count.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Step-indexed loops read closer to the recursions than zipped iterators.
#![allow(clippy::needless_range_loop)]

mod dd;
pub mod discrepancy;
pub mod error;
pub mod expint;
pub mod gamma_ratio;
pub mod mc;
pub mod mvspenkf;
pub mod propagators;
pub mod rng;
pub mod skf;
pub mod spenkf;

pub use error::{Error, Result};
pub use rng::RngSpec;
