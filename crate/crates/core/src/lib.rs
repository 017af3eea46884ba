//! Norm-constrained ReLU networks.
//!
//! The crate is organised around [`ReluNet`], an explicit list of affine
//! layers, and its norm budget [`kappa`]: the output-layer operator norm
//! times the product of `max(||(A_l, b_l)||, 1)` over the hidden layers,
//! which bounds the Lipschitz constant of the network.
//!
//! * [`net`]: evaluation, norms, rescaling, truncation, JSON files.
//! * [`algebra`]: budget-aware combinators (pad, compose, concat, lincomb).
//! * [`constructions`]: explicit approximators with certified error bounds.
//! * [`probes`]: Rademacher, packing, Wasserstein and lower-bound probes.
//! * [`learn`]: backpropagation, projected/penalized training, IPM estimates.
//! * [`harness`]: config-driven sweeps with reproducible outputs.

pub mod algebra;
pub mod constructions;
pub mod error;
pub mod harness;
pub mod learn;
pub mod matrix;
pub mod net;
pub mod probes;
pub mod rng;
pub mod targets;

pub use algebra::BudgetBound;
pub use constructions::{ApproxCertificate, GridSpec, HolderSpec};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use net::{kappa, op_norm, rescale, AffineLayer, KappaReport, ReluNet};
