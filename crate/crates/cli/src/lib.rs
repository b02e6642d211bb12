//! Experiment plumbing for `invkit`: JSON configs, simulated datasets on
//! disk, and benchmark runs written to CSV.

pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod phantoms;

use invkit::linop::adjoint_test;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};

/// Trials used by [`adjoint_check`].
pub const ADJOINT_TRIALS: usize = 8;
pub const ADJOINT_TOLERANCE: f64 = 1e-10;

/// Worst relative adjoint mismatch of the operator configured in `cfg`
/// (built from the stream of sample 0).
pub fn adjoint_check(cfg: &ExperimentConfig) -> Result<f64> {
    let n = cfg.dataset.count.unwrap_or(1).max(1);
    let physics = cfg
        .physics
        .build(&cfg.dataset.shape, &mut dataset::stream(cfg.seed, dataset::Stream::Params, n, 0))
        .map_err(|e| CliError::config("physics", e.to_string()))?;
    let mut rng = dataset::stream(cfg.seed, dataset::Stream::Method, n, 0);
    Ok(adjoint_test(physics.map().as_ref(), &mut rng, ADJOINT_TRIALS)?)
}
