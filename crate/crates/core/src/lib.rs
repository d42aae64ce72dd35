//! Subspace recovery from the average gradient outer product (AGOP) of kernel
//! ridge regression on multi-index models, with Recursive Feature Machine
//! iterations and exact small-dimension oracles.
//!
//! * [`walsh`]: Fourier–Walsh analysis on `{-1, 1}^d` and the exact population AGOP.
//! * [`hermite`]: Hermite expansions of links and the latent gradient covariance.
//! * [`model`]: subspaces, targets, and dataset sampling.
//! * [`kernel`], [`krr`]: kernels with a metric and kernel ridge regression.
//! * [`agop`], [`rfm`]: AGOP diagnostics and the RFM loop.
//! * [`verify`]: numerical checks against exact oracles.
//! * [`harness`]: configuration, experiment grid, CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agop;
pub mod error;
pub mod harness;
pub mod hermite;
pub mod kernel;
pub mod krr;
pub mod linalg;
pub mod model;
pub mod rfm;
pub mod rng;
pub mod verify;
pub mod walsh;

pub use error::{Error, Result};
