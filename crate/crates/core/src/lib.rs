//! Matrix-free toolkit for imaging inverse problems.
//!
//! Measurements follow `y = N(A(x))`: a linear forward operator from
//! [`physics`] followed by a noise model from [`fidelity`]. Reconstructions
//! come from the splitting algorithms in [`optim`], the Langevin sampler in
//! [`sampling`], or non-iterative artifact removal; [`losses`] and
//! [`metrics`] score them.

pub mod error;
pub mod fft;
pub mod fidelity;
pub mod imageio;
pub mod linop;
pub mod losses;
pub mod metrics;
pub mod optim;
pub mod physics;
pub mod priors;
pub mod rng;
pub mod sampling;
pub mod tensor;
pub mod transforms;

pub use error::{Error, Result};
pub use rng::RngState;
pub use tensor::{dot, DType, Tensor};
