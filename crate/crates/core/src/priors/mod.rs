//! Regularizers `g` with value, gradient and proximal operator, plus the
//! classical denoisers used for plug-and-play and artifact removal.

mod denoisers;
mod tv;
mod wavelet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Data, Tensor};

pub use denoisers::Denoiser;
pub use tv::{tv_prox, tv_value, TV_GRAD_EPS, TV_PROX_MAX_ITER, TV_PROX_TOL};
pub use wavelet::{haar_dwt, haar_idwt};

/// `sign(v)·max(|v| - τ, 0)`; complex entries keep their phase.
pub fn soft_threshold(v: &Tensor, tau: f64) -> Result<Tensor> {
    if !(tau >= 0.0) {
        return Err(Error::validation(format!("threshold must be non-negative, got {tau}")));
    }
    Ok(match v.data() {
        Data::Real(_) => v.map_real(|x| x.signum() * (x.abs() - tau).max(0.0)),
        Data::Complex(c) => {
            let out = c
                .iter()
                .map(|&z| {
                    let r = z.norm();
                    if r <= tau {
                        Complex64::new(0.0, 0.0)
                    } else {
                        z * ((r - tau) / r)
                    }
                })
                .collect();
            Tensor::from_complex(v.shape().to_vec(), out)?
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorKind {
    /// Isotropic total variation `Σ √(|Dx|² + ε²)`.
    Tv {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
    },
    /// `‖W x‖₁` with an orthonormal Haar transform of `levels` levels.
    WaveletL1 { levels: usize },
    L1,
    /// `½‖x‖²`
    Tikhonov,
}

fn default_weight() -> f64 {
    1.0
}

/// `weight · g(x)` for one of the [`PriorKind`] regularizers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    #[serde(flatten)]
    pub kind: PriorKind,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

impl Prior {
    pub fn new(kind: PriorKind, weight: f64) -> Self {
        Prior { kind, weight }
    }

    pub fn tv(weight: f64) -> Self {
        Prior::new(PriorKind::Tv { eps: None }, weight)
    }

    pub fn wavelet_l1(levels: usize, weight: f64) -> Self {
        Prior::new(PriorKind::WaveletL1 { levels }, weight)
    }

    pub fn l1(weight: f64) -> Self {
        Prior::new(PriorKind::L1, weight)
    }

    pub fn tikhonov(weight: f64) -> Self {
        Prior::new(PriorKind::Tikhonov, weight)
    }

    pub fn eval(&self, x: &Tensor) -> Result<f64> {
        let base = match self.kind {
            PriorKind::Tv { eps } => tv_value(x, eps.unwrap_or(0.0))?,
            PriorKind::WaveletL1 { levels } => haar_dwt(x, levels)?.norm_l1(),
            PriorKind::L1 => x.norm_l1(),
            PriorKind::Tikhonov => 0.5 * x.norm_sq(),
        };
        Ok(self.weight * base)
    }

    /// Smoothing used by the TV gradient, or `None` if `g` is not differentiable.
    fn grad_eps(&self) -> Option<f64> {
        match self.kind {
            PriorKind::Tv { eps: None } => Some(TV_GRAD_EPS),
            PriorKind::Tv { eps: Some(e) } if e > 0.0 => Some(e),
            _ => None,
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self.kind, PriorKind::Tikhonov) || self.grad_eps().is_some()
    }

    pub fn grad(&self, x: &Tensor) -> Result<Tensor> {
        match self.kind {
            PriorKind::Tikhonov => Ok(x.scale(self.weight)),
            PriorKind::Tv { .. } => match self.grad_eps() {
                Some(eps) => Ok(tv::tv_grad(x, eps)?.scale(self.weight)),
                None => Err(Error::capability("tv with eps = 0 is not differentiable")),
            },
            kind => Err(Error::capability(format!("{kind:?} prior is not differentiable"))),
        }
    }

    /// Lipschitz constant of [`Prior::grad`].
    pub fn grad_lipschitz(&self) -> Result<f64> {
        match self.kind {
            PriorKind::Tikhonov => Ok(self.weight),
            PriorKind::Tv { .. } => match self.grad_eps() {
                Some(eps) => Ok(self.weight * 8.0 / eps),
                None => Err(Error::capability("tv with eps = 0 is not differentiable")),
            },
            kind => Err(Error::capability(format!("{kind:?} prior is not differentiable"))),
        }
    }

    /// `argmin_z γ·g(z) + ½‖z - v‖²`.
    pub fn prox(&self, v: &Tensor, gamma: f64) -> Result<Tensor> {
        if !(gamma > 0.0) {
            return Err(Error::validation(format!("prox step must be positive, got {gamma}")));
        }
        let g = gamma * self.weight;
        match self.kind {
            PriorKind::Tv { .. } => tv_prox(v, g, TV_PROX_MAX_ITER, TV_PROX_TOL),
            PriorKind::WaveletL1 { levels } => haar_idwt(&soft_threshold(&haar_dwt(v, levels)?, g)?, levels),
            PriorKind::L1 => soft_threshold(v, g),
            PriorKind::Tikhonov => Ok(v.scale(1.0 / (1.0 + g))),
        }
    }
}
