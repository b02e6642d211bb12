//! Variational reconstruction (`argmin_x f(y, Ax) + g(x)`) and
//! artifact-removal reconstructors.

mod algorithms;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::DataFidelity;
use crate::linop::{operator_norm, LinearMap, StopReason};
use crate::physics::Physics;
use crate::priors::{Denoiser, Prior};
use crate::rng::RngState;
use crate::tensor::Tensor;

pub use algorithms::{admm, drs, fista, pdhg, pgd};

/// Fixed seed of the power iteration behind automatic step sizes, so that
/// reconstructions do not consume the caller's random stream.
const NORM_SEED: u64 = 0x6f70_6e6f_726d;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Pgd,
    Fista,
    Admm,
    Drs,
    Pdhg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AutoTag {
    Auto,
}

/// A step size: `"auto"` in JSON, or a positive number.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "StepRepr", into = "StepRepr")]
pub enum Step {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum StepRepr {
    Tag(AutoTag),
    Value(f64),
}

impl From<StepRepr> for Step {
    fn from(r: StepRepr) -> Self {
        match r {
            StepRepr::Tag(_) => Step::Auto,
            StepRepr::Value(v) => Step::Fixed(v),
        }
    }
}

impl From<Step> for StepRepr {
    fn from(s: Step) -> Self {
        match s {
            Step::Auto => StepRepr::Tag(AutoTag::Auto),
            Step::Fixed(v) => StepRepr::Value(v),
        }
    }
}

impl Step {
    fn resolve(self, auto: impl FnOnce() -> Result<f64>, what: &str) -> Result<f64> {
        let v = match self {
            Step::Auto => auto()?,
            Step::Fixed(v) => v,
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::validation(format!("{what} must be positive and finite, got {v}")));
        }
        Ok(v)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `x₀ = Aᵀy`
    #[default]
    Adjoint,
    Zero,
}

fn default_max_iter() -> usize {
    500
}

fn default_rho() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoConfig {
    pub algorithm: Algorithm,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Gradient step (pgd, fista) or splitting step (drs; auto = 1/ρ).
    #[serde(default)]
    pub step: Step,
    /// Penalty of admm and drs.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Primal step of pdhg.
    #[serde(default)]
    pub tau: Step,
    /// Dual step of pdhg.
    #[serde(default)]
    pub sigma_dual: Step,
    /// Relative iterate change below which iteration stops.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub record_objective: bool,
    #[serde(default)]
    pub init: Init,
}

impl AlgoConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        AlgoConfig {
            algorithm,
            max_iter: default_max_iter(),
            step: Step::Auto,
            rho: default_rho(),
            tau: Step::Auto,
            sigma_dual: Step::Auto,
            tol: default_tol(),
            record_objective: false,
            init: Init::Adjoint,
        }
    }

    pub fn max_iter(mut self, n: usize) -> Self {
        self.max_iter = n;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn step(mut self, step: f64) -> Self {
        self.step = Step::Fixed(step);
        self
    }

    pub fn record_objective(mut self) -> Self {
        self.record_objective = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::validation("max_iter must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::validation(format!("tol must be non-negative, got {}", self.tol)));
        }
        if !(self.rho > 0.0) {
            return Err(Error::validation(format!("rho must be positive, got {}", self.rho)));
        }
        Ok(())
    }
}

/// The `g` term: a prior, a denoiser standing in for its prox (plug-and-play), or nothing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Regularizer {
    #[default]
    None,
    Prior(Prior),
    Denoiser {
        denoiser: Denoiser,
        #[serde(default)]
        sigma: f64,
    },
}

impl From<Prior> for Regularizer {
    fn from(p: Prior) -> Self {
        Regularizer::Prior(p)
    }
}

impl Regularizer {
    pub fn prox(&self, v: &Tensor, gamma: f64) -> Result<Tensor> {
        match self {
            Regularizer::None => Ok(v.clone()),
            Regularizer::Prior(p) => p.prox(v, gamma),
            Regularizer::Denoiser { denoiser, sigma } => denoiser.denoise(v, *sigma),
        }
    }

    /// `g(x)`; denoisers have no explicit value and contribute 0.
    pub fn eval(&self, x: &Tensor) -> Result<f64> {
        match self {
            Regularizer::Prior(p) => p.eval(x),
            _ => Ok(0.0),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceLog {
    /// `f(y, Ax_k) + g(x_k)` per iteration, when recorded.
    pub objective: Vec<f64>,
    /// Relative iterate change per iteration.
    pub changes: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: Option<StopReason>,
}

/// Largest singular value, exact for Fourier-diagonal and unitary maps.
pub fn operator_norm_estimate(a: &dyn LinearMap) -> Result<f64> {
    if let Some(d) = a.spectral_diagonal() {
        return Ok(d.max_modulus());
    }
    if a.is_unitary() {
        return Ok(1.0);
    }
    let mut rng = RngState::new(NORM_SEED);
    Ok(operator_norm(a, &mut rng, 1e-9, 2000)?.0)
}

/// Runs the algorithm named in `cfg`.
pub fn reconstruct(
    y: &Tensor,
    physics: &Physics,
    fid: &DataFidelity,
    reg: &Regularizer,
    cfg: &AlgoConfig,
) -> Result<(Tensor, ConvergenceLog)> {
    match cfg.algorithm {
        Algorithm::Pgd => pgd(y, physics, fid, reg, cfg),
        Algorithm::Fista => fista(y, physics, fid, reg, cfg),
        Algorithm::Admm => admm(y, physics, fid, reg, cfg),
        Algorithm::Drs => drs(y, physics, fid, reg, cfg),
        Algorithm::Pdhg => pdhg(y, physics, fid, reg, cfg),
    }
}

/// `x̂ = model(y, physics)`.
pub trait Reconstructor: Send + Sync {
    fn reconstruct(&self, y: &Tensor, physics: &Physics) -> Result<Tensor>;
}

impl<F> Reconstructor for F
where
    F: Fn(&Tensor, &Physics) -> Result<Tensor> + Send + Sync,
{
    fn reconstruct(&self, y: &Tensor, physics: &Physics) -> Result<Tensor> {
        self(y, physics)
    }
}

/// An iterative solver with fixed fidelity, regularizer and configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Variational {
    pub fidelity: DataFidelity,
    pub regularizer: Regularizer,
    pub config: AlgoConfig,
}

impl Reconstructor for Variational {
    fn reconstruct(&self, y: &Tensor, physics: &Physics) -> Result<Tensor> {
        Ok(reconstruct(y, physics, &self.fidelity, &self.regularizer, &self.config)?.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backprojection {
    #[default]
    Adjoint,
    Pinv,
}

/// `x̂ = D_σ(Aᵀy)` or `x̂ = D_σ(A⁺y)` (FBP for tomography).
pub fn artifact_removal(
    denoiser: &Denoiser,
    y: &Tensor,
    physics: &Physics,
    sigma: f64,
    mode: Backprojection,
) -> Result<Tensor> {
    let back = match mode {
        Backprojection::Adjoint => physics.apply_adjoint(y)?,
        Backprojection::Pinv => physics.pseudo_inverse(y)?,
    };
    denoiser.denoise(&back, sigma)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArtifactRemoval {
    pub denoiser: Denoiser,
    pub sigma: f64,
    pub mode: Backprojection,
}

impl Reconstructor for ArtifactRemoval {
    fn reconstruct(&self, y: &Tensor, physics: &Physics) -> Result<Tensor> {
        artifact_removal(&self.denoiser, y, physics, self.sigma, self.mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{self, generators};
    use crate::tensor::DType;

    #[test]
    fn step_serde() {
        let c: AlgoConfig = serde_json::from_str(r#"{"algorithm":"fista","step":"auto","tau":0.5}"#).unwrap();
        assert_eq!(c.step, Step::Auto);
        assert_eq!(c.tau, Step::Fixed(0.5));
        assert_eq!(c.max_iter, 500);
        let back: AlgoConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<AlgoConfig>(r#"{"algorithm":"fista","step":"big"}"#).is_err());
    }

    #[test]
    fn inpainting_pinv_keeps_smoothed_observations() {
        let mut rng = RngState::new(1);
        let mask = generators::bernoulli_mask(&[12, 12], 0.6, &mut rng).unwrap();
        let p = physics::make_inpainting(mask).unwrap();
        let x = Tensor::randn(&[12, 12], DType::Real64, &mut rng);
        let y = p.apply(&x).unwrap();
        let d = Denoiser::default();
        let out = artifact_removal(&d, &y, &p, 0.1, Backprojection::Pinv).unwrap();
        assert!(out.sub(&d.denoise(&y, 0.1).unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn tomography_pinv_is_filtered_backprojection() {
        let p = physics::make_tomography(physics::uniform_angles(12), &[10, 10]).unwrap();
        let mut rng = RngState::new(2);
        let y = Tensor::randn(&p.range().shape, DType::Real64, &mut rng);
        let d = Denoiser::Median;
        let out = artifact_removal(&d, &y, &p, 0.0, Backprojection::Pinv).unwrap();
        let want = d.denoise(&physics::fbp(&p, &y).unwrap(), 0.0).unwrap();
        assert_eq!(out, want);
    }

    #[test]
    fn near_identity_denoiser_returns_measurements() {
        let p = physics::make_denoising(&[6, 6]);
        let mut rng = RngState::new(3);
        let y = Tensor::randn(&[6, 6], DType::Real64, &mut rng);
        let out = artifact_removal(&Denoiser::gaussian_smoother(1e-3), &y, &p, 0.0, Backprojection::Adjoint).unwrap();
        assert!(out.sub(&y).max_abs() < 1e-12);
    }
}
