//! Wasserstein distributionally robust certificates and attacks for small
//! multilayer perceptrons.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! * [`linalg`]: dense matrices, vector norms, induced operator norms,
//!   dual-norm maximizers and projections onto norm balls.
//! * [`network`]: MLP evaluation, activation masks and input Jacobians.
//! * [`loss`]: cross-entropy and DLR-margin losses on logits.
//! * [`lp`] and [`cells`]: a dense simplex solver and the polyhedral
//!   machinery for ReLU cells and their recession cones.
//! * [`certify`]: upper/lower slopes of the worst-case loss in the transport
//!   budget, the tightness check and the worst-case distribution.
//! * [`attack`]: the Wasserstein distributional attack and a PGD baseline.
//! * [`transport`]: transport-cost accounting and a small exact OT solver.
//!
//! Everything here is a pure function of its inputs; callers that want
//! parallelism (see the `wdro` crate) fan out over the per-sample and
//! per-mask entry points.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod attack;
pub mod cells;
pub mod certify;
mod error;
pub mod linalg;
pub mod loss;
pub mod lp;
pub mod network;
pub mod transport;

pub use error::{Error, Result};
pub use linalg::{Mat, NormKind};
pub use loss::LossKind;
pub use network::{ActivationKind, BoxDomain, LabeledSample, Mask, Mlp};
