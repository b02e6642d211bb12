//! Unadjusted Langevin sampling of `p(x | y) ∝ exp(-f(y, Ax) - g(x))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::DataFidelity;
use crate::optim::{operator_norm_estimate, Step};
use crate::physics::Physics;
use crate::priors::Prior;
use crate::rng::RngState;
use crate::tensor::Tensor;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainInit {
    /// `x₀ = Aᵀy`
    #[default]
    Adjoint,
    Tensor(Tensor),
}

fn default_thinning() -> usize {
    1
}

fn default_noise_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Langevin step; auto = `0.5 / L`.
    #[serde(default)]
    pub step: Step,
    pub iterations: usize,
    /// Discarded leading iterations; default 10% of `iterations`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
    #[serde(default)]
    pub init: ChainInit,
    /// Multiplies the injected noise `√(2γ)·ε`. Only useful for testing:
    /// 0 turns the chain into gradient descent.
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
}

impl ChainConfig {
    pub fn new(iterations: usize) -> Self {
        ChainConfig {
            step: Step::Auto,
            iterations,
            burn_in: None,
            thinning: 1,
            init: ChainInit::Adjoint,
            noise_scale: 1.0,
        }
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations / 10)
    }

    fn validate(&self) -> Result<()> {
        let burn = self.burn_in();
        if self.thinning == 0 {
            return Err(Error::validation("thinning must be at least 1"));
        }
        if burn >= self.iterations {
            return Err(Error::validation(format!(
                "burn-in {burn} must be smaller than the {} iterations",
                self.iterations
            )));
        }
        if (self.iterations - burn) / self.thinning < 2 {
            return Err(Error::validation("chain must retain at least two samples"));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::validation("noise_scale must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainStats {
    pub mean: Tensor,
    /// Per-pixel unbiased variance (of the modulus deviation for complex samples).
    pub variance: Tensor,
    pub count: usize,
}

/// Single-pass (Welford) mean and variance accumulator.
#[derive(Clone, Debug, Default)]
pub struct RunningStats {
    count: usize,
    mean: Option<Tensor>,
    m2: Option<Tensor>,
}

impl RunningStats {
    pub fn new() -> Self {
        RunningStats::default()
    }

    pub fn push(&mut self, x: &Tensor) -> Result<()> {
        self.count += 1;
        match (&mut self.mean, &mut self.m2) {
            (Some(mean), Some(m2)) => {
                if mean.shape() != x.shape() {
                    return Err(Error::shape(format!(
                        "sample shape {:?} differs from {:?}",
                        x.shape(),
                        mean.shape()
                    )));
                }
                let delta = x.sub(mean);
                mean.axpy(1.0 / self.count as f64, &delta);
                let delta2 = x.sub(mean);
                // (x - μ_old)·(x - μ_new), taken as a real product per pixel.
                *m2 = m2.add(&delta.abs().mul(&delta2.abs()));
            }
            _ => {
                self.mean = Some(x.clone());
                self.m2 = Some(Tensor::zeros(x.shape(), crate::tensor::DType::Real64));
            }
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Result<ChainStats> {
        if self.count < 2 {
            return Err(Error::validation(format!(
                "chain statistics need at least two samples, got {}",
                self.count
            )));
        }
        Ok(ChainStats {
            mean: self.mean.clone().unwrap(),
            variance: self.m2.as_ref().unwrap().scale(1.0 / (self.count - 1) as f64),
            count: self.count,
        })
    }
}

pub fn chain_statistics(samples: &[Tensor]) -> Result<ChainStats> {
    let mut acc = RunningStats::new();
    for s in samples {
        acc.push(s)?;
    }
    acc.finish()
}

/// Runs ULA and returns statistics of the retained samples.
pub fn ula_sample(
    y: &Tensor,
    physics: &Physics,
    fid: &DataFidelity,
    prior: &Prior,
    cfg: &ChainConfig,
    rng: &mut RngState,
) -> Result<ChainStats> {
    ula_sample_with(y, physics, fid, prior, cfg, rng, |_, _| {})
}

/// Like [`ula_sample`], calling `on_sample(t, x_t)` for every retained sample.
pub fn ula_sample_with(
    y: &Tensor,
    physics: &Physics,
    fid: &DataFidelity,
    prior: &Prior,
    cfg: &ChainConfig,
    rng: &mut RngState,
    mut on_sample: impl FnMut(usize, &Tensor),
) -> Result<ChainStats> {
    cfg.validate()?;
    if !fid.is_smooth() {
        return Err(Error::capability(format!("ula needs a smooth fidelity, got {:?}", fid.kind)));
    }
    if !prior.is_smooth() {
        return Err(Error::capability(format!("ula needs a smooth prior, got {:?}", prior.kind)));
    }
    let norm = operator_norm_estimate(physics.map().as_ref())?;
    let lipschitz = norm * norm * fid.lipschitz(y)? + prior.grad_lipschitz()?;
    let gamma = match cfg.step {
        Step::Auto => 0.5 / lipschitz,
        Step::Fixed(g) => {
            if !(g > 0.0) || g * lipschitz >= 1.0 {
                return Err(Error::validation(format!(
                    "ula step {g} must lie in (0, 1/L) with L = {lipschitz}"
                )));
            }
            g
        }
    };
    let mut x = match &cfg.init {
        ChainInit::Adjoint => physics.apply_adjoint(y)?,
        ChainInit::Tensor(t) => {
            physics.domain().check(t, "chain init")?;
            t.clone()
        }
    };
    let noise = cfg.noise_scale * (2.0 * gamma).sqrt();
    let burn = cfg.burn_in();
    let mut acc = RunningStats::new();
    for t in 1..=cfg.iterations {
        let ax = physics.apply(&x)?;
        let mut grad = physics.apply_adjoint(&fid.grad(y, &ax)?)?;
        grad = grad.add(&prior.grad(&x)?);
        x.axpy(-gamma, &grad);
        let eps = Tensor::randn(x.shape(), x.dtype(), rng);
        if noise > 0.0 {
            x.axpy(noise, &eps);
        }
        if !x.is_finite() {
            return Err(Error::Divergence {
                iteration: t,
                reason: "Langevin chain produced non-finite values".into(),
            });
        }
        if t > burn && (t - burn) % cfg.thinning == 0 {
            acc.push(&x)?;
            on_sample(t, &x);
        }
    }
    acc.finish()
}
