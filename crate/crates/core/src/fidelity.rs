//! Noise models and data-fidelity terms.
//!
//! Poisson noise is `y = γ·Poisson(z/γ)` (variance `γz`); gamma noise is
//! multiplicative with unit mean, `z ⊙ Γ(k, 1/k)`.

use num_complex::Complex64;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::tensor::{Data, Tensor};

/// Means above this are sampled with the normal approximation.
pub const POISSON_NORMAL_THRESHOLD: f64 = 1e3;

/// Largest mean handled by one sequential-inversion pass (keeps `e^{-λ}` normal).
const INVERSION_CHUNK: f64 = 500.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    #[default]
    None,
    Gaussian {
        sigma: f64,
    },
    Poisson {
        gain: f64,
    },
    PoissonGaussian {
        gain: f64,
        sigma: f64,
    },
    Uniform {
        amplitude: f64,
    },
    Gamma {
        concentration: f64,
    },
}

/// Exact Poisson draw by sequential inversion of the CDF.
fn poisson_inversion(lambda: f64, rng: &mut RngState) -> f64 {
    let u = rng.uniform();
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0u64;
    while u > cdf {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
        // Tail mass below rounding: stop at the current count.
        if p == 0.0 && k as f64 > lambda {
            break;
        }
    }
    k as f64
}

/// Poisson(λ): inversion (split into independent chunks so `e^{-λ}` stays
/// representable) up to [`POISSON_NORMAL_THRESHOLD`], rounded normal above.
pub fn sample_poisson(lambda: f64, rng: &mut RngState) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    if lambda > POISSON_NORMAL_THRESHOLD {
        return (lambda + lambda.sqrt() * rng.normal()).round().max(0.0);
    }
    let chunks = (lambda / INVERSION_CHUNK).ceil().max(1.0);
    let part = lambda / chunks;
    (0..chunks as usize).map(|_| poisson_inversion(part, rng)).sum()
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::validation(format!("{what} out of range: {v}")));
        match *self {
            NoiseModel::None => Ok(()),
            NoiseModel::Gaussian { sigma } if !(sigma >= 0.0) => bad("sigma", sigma),
            NoiseModel::Poisson { gain } if !(gain > 0.0) => bad("gain", gain),
            NoiseModel::PoissonGaussian { gain, .. } if !(gain > 0.0) => bad("gain", gain),
            NoiseModel::PoissonGaussian { sigma, .. } if !(sigma >= 0.0) => bad("sigma", sigma),
            NoiseModel::Uniform { amplitude } if !(amplitude >= 0.0) => bad("amplitude", amplitude),
            NoiseModel::Gamma { concentration } if !(concentration > 0.0) => bad("concentration", concentration),
            _ => Ok(()),
        }
    }

    /// Gaussian standard deviation, when the model has one.
    pub fn gaussian_sigma(&self) -> Option<f64> {
        match *self {
            NoiseModel::Gaussian { sigma } | NoiseModel::PoissonGaussian { sigma, .. } => Some(sigma),
            _ => None,
        }
    }

    pub fn apply(&self, z: &Tensor, rng: &mut RngState) -> Result<Tensor> {
        self.validate()?;
        match *self {
            NoiseModel::None => Ok(z.clone()),
            NoiseModel::Gaussian { sigma } => Ok(add_gaussian(z, sigma, rng)),
            NoiseModel::Uniform { amplitude } => Ok(match z.data() {
                Data::Real(v) => Tensor::from_real(
                    z.shape().to_vec(),
                    v.iter().map(|&x| x + amplitude * (2.0 * rng.uniform() - 1.0)).collect(),
                )?,
                Data::Complex(v) => Tensor::from_complex(
                    z.shape().to_vec(),
                    v.iter()
                        .map(|&c| {
                            let re = amplitude * (2.0 * rng.uniform() - 1.0);
                            let im = amplitude * (2.0 * rng.uniform() - 1.0);
                            c + Complex64::new(re, im)
                        })
                        .collect(),
                )?,
            }),
            NoiseModel::Poisson { gain } => poisson(z, gain, rng),
            NoiseModel::PoissonGaussian { gain, sigma } => Ok(add_gaussian(&poisson(z, gain, rng)?, sigma, rng)),
            NoiseModel::Gamma { concentration } => {
                let v = nonnegative(z, "gamma noise")?;
                let dist = Gamma::new(concentration, 1.0 / concentration)
                    .map_err(|e| Error::validation(format!("gamma noise: {e}")))?;
                Tensor::from_real(z.shape().to_vec(), v.iter().map(|&x| x * dist.sample(rng)).collect())
            }
        }
    }
}

fn add_gaussian(z: &Tensor, sigma: f64, rng: &mut RngState) -> Tensor {
    if sigma == 0.0 {
        return z.clone();
    }
    let noise = Tensor::randn(z.shape(), z.dtype(), rng);
    let mut out = z.clone();
    out.axpy(sigma, &noise);
    out
}

fn nonnegative<'a>(z: &'a Tensor, what: &str) -> Result<&'a [f64]> {
    let v = z.real_values(what)?;
    if let Some(bad) = v.iter().find(|&&x| !(x >= 0.0)) {
        return Err(Error::Domain(format!("{what} needs non-negative input, found {bad}")));
    }
    Ok(v)
}

fn poisson(z: &Tensor, gain: f64, rng: &mut RngState) -> Result<Tensor> {
    let v = nonnegative(z, "poisson noise")?;
    Tensor::from_real(
        z.shape().to_vec(),
        v.iter().map(|&x| gain * sample_poisson(x / gain, rng)).collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FidelityKind {
    /// `½‖y - z‖²`
    L2,
    /// `‖y - z‖₁`
    L1,
    /// `Σ z + β - y·log(z + β)`
    PoissonNll {
        #[serde(default)]
        background: f64,
    },
}

fn default_weight() -> f64 {
    1.0
}

/// `weight · f(y, z)` for one of the [`FidelityKind`] terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataFidelity {
    #[serde(flatten)]
    pub kind: FidelityKind,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

impl DataFidelity {
    pub fn l2() -> Self {
        DataFidelity {
            kind: FidelityKind::L2,
            weight: 1.0,
        }
    }

    pub fn l1() -> Self {
        DataFidelity {
            kind: FidelityKind::L1,
            weight: 1.0,
        }
    }

    pub fn poisson_nll(background: f64) -> Self {
        DataFidelity {
            kind: FidelityKind::PoissonNll { background },
            weight: 1.0,
        }
    }

    pub fn weighted(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn is_smooth(&self) -> bool {
        match self.kind {
            FidelityKind::L2 => true,
            FidelityKind::L1 => false,
            FidelityKind::PoissonNll { background } => background > 0.0,
        }
    }

    /// Lipschitz constant of `∇_z f` for measurements `y`.
    pub fn lipschitz(&self, y: &Tensor) -> Result<f64> {
        match self.kind {
            FidelityKind::L2 => Ok(self.weight),
            FidelityKind::PoissonNll { background } if background > 0.0 => {
                let ymax = y.real_values("poisson_nll")?.iter().fold(0.0f64, |m, &v| m.max(v));
                Ok(self.weight * ymax / (background * background))
            }
            _ => Err(Error::capability(format!(
                "{:?} fidelity has no Lipschitz gradient; use a splitting method that takes its prox",
                self.kind
            ))),
        }
    }

    fn check_pair(y: &Tensor, z: &Tensor) -> Result<()> {
        if y.shape() != z.shape() {
            return Err(Error::shape(format!(
                "fidelity arguments {:?} and {:?}",
                y.shape(),
                z.shape()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, y: &Tensor, z: &Tensor) -> Result<f64> {
        Self::check_pair(y, z)?;
        let base = match self.kind {
            FidelityKind::L2 => 0.5 * y.sub(z).norm_sq(),
            FidelityKind::L1 => y.sub(z).norm_l1(),
            FidelityKind::PoissonNll { background } => {
                let (yv, zv) = (y.real_values("poisson_nll")?, z.real_values("poisson_nll")?);
                let mut total = 0.0;
                for (&yi, &zi) in yv.iter().zip(zv) {
                    let s = zi + background;
                    if yi == 0.0 && s >= 0.0 {
                        total += s;
                    } else if s > 0.0 {
                        total += s - yi * s.ln();
                    } else {
                        return Err(Error::Domain(format!("poisson_nll needs z + β > 0, got {s}")));
                    }
                }
                total
            }
        };
        Ok(self.weight * base)
    }

    pub fn grad(&self, y: &Tensor, z: &Tensor) -> Result<Tensor> {
        Self::check_pair(y, z)?;
        match self.kind {
            FidelityKind::L2 => Ok(z.sub(y).scale(self.weight)),
            FidelityKind::L1 => Err(Error::capability("l1 fidelity is not differentiable")),
            FidelityKind::PoissonNll { background } => {
                let (yv, zv) = (y.real_values("poisson_nll")?, z.real_values("poisson_nll")?);
                let g = yv
                    .iter()
                    .zip(zv)
                    .map(|(&yi, &zi)| {
                        let s = zi + background;
                        if s > 0.0 {
                            Ok(self.weight * (1.0 - yi / s))
                        } else {
                            Err(Error::Domain(format!("poisson_nll gradient needs z + β > 0, got {s}")))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Tensor::from_real(z.shape().to_vec(), g)
            }
        }
    }

    /// `argmin_z γ·f(y, z) + ½‖z - v‖²`, exact for every variant.
    pub fn prox(&self, y: &Tensor, v: &Tensor, gamma: f64) -> Result<Tensor> {
        Self::check_pair(y, v)?;
        if !(gamma > 0.0) {
            return Err(Error::validation(format!("prox step must be positive, got {gamma}")));
        }
        let g = gamma * self.weight;
        match self.kind {
            FidelityKind::L2 => {
                let mut out = v.clone();
                out.axpy(g, y);
                Ok(out.scale(1.0 / (1.0 + g)))
            }
            FidelityKind::L1 => {
                let shrunk = crate::priors::soft_threshold(&v.sub(y), g)?;
                Ok(y.add(&shrunk))
            }
            FidelityKind::PoissonNll { background } => {
                let (yv, vv) = (y.real_values("poisson_nll")?, v.real_values("poisson_nll")?);
                let out = yv
                    .iter()
                    .zip(vv)
                    .map(|(&yi, &vi)| poisson_prox_scalar(yi, vi, g, background))
                    .collect();
                Tensor::from_real(v.shape().to_vec(), out)
            }
        }
    }
}

/// Positive root of the stationarity condition `(z - v) + γ(1 - y/(z + β)) = 0`,
/// written in `s = z + β`: `s² - (v + β - γ)s - γy = 0`.
fn poisson_prox_scalar(y: f64, v: f64, gamma: f64, beta: f64) -> f64 {
    let b = v + beta - gamma;
    let disc = (b * b + 4.0 * gamma * y).sqrt();
    let s = if b >= 0.0 {
        0.5 * (b + disc)
    } else if disc - b > 0.0 {
        // Cancellation-free form of the same root.
        2.0 * gamma * y / (disc - b)
    } else {
        0.0
    };
    s - beta
}
