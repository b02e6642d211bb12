use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::tv::{tv_prox, TV_PROX_MAX_ITER, TV_PROX_TOL};
use crate::tensor::{plane_dims, Tensor};

fn default_sigma_w() -> f64 {
    1.5
}

fn default_lambda_tv() -> f64 {
    1.0
}

/// Classical denoisers `D_σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Denoiser {
    /// Normalized Gaussian window of std `sigma_w` pixels (independent of σ).
    GaussianSmoother {
        #[serde(default = "default_sigma_w")]
        sigma_w: f64,
    },
    /// TV prox with strength `γ = σ²·lambda_tv`.
    TvDenoiser {
        #[serde(default = "default_lambda_tv")]
        lambda_tv: f64,
    },
    /// 3×3 median filter.
    Median,
}

impl Default for Denoiser {
    fn default() -> Self {
        Denoiser::GaussianSmoother {
            sigma_w: default_sigma_w(),
        }
    }
}

impl Denoiser {
    pub fn gaussian_smoother(sigma_w: f64) -> Self {
        Denoiser::GaussianSmoother { sigma_w }
    }

    pub fn denoise(&self, v: &Tensor, sigma: f64) -> Result<Tensor> {
        if !(sigma >= 0.0) {
            return Err(Error::validation(format!("noise level must be non-negative, got {sigma}")));
        }
        match *self {
            Denoiser::GaussianSmoother { sigma_w } => {
                if !(sigma_w >= 0.0) {
                    return Err(Error::validation(format!("sigma_w must be non-negative, got {sigma_w}")));
                }
                v.map_parts(|p| smooth(p, sigma_w))
            }
            Denoiser::TvDenoiser { lambda_tv } => {
                if !(lambda_tv >= 0.0) {
                    return Err(Error::validation(format!("lambda_tv must be non-negative, got {lambda_tv}")));
                }
                tv_prox(v, sigma * sigma * lambda_tv, TV_PROX_MAX_ITER, TV_PROX_TOL)
            }
            Denoiser::Median => v.map_parts(median3),
        }
    }
}

fn gaussian_taps(sigma_w: f64) -> Vec<f64> {
    let r = (3.0 * sigma_w).ceil() as isize;
    let taps: Vec<f64> = (-r..=r)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma_w * sigma_w)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Separable Gaussian filter, side `2⌈3σ_w⌉ + 1`, replicate boundary.
fn smooth(x: &Tensor, sigma_w: f64) -> Result<Tensor> {
    let (_, h, w) = plane_dims(x.shape())?;
    if sigma_w == 0.0 {
        return Ok(x.clone());
    }
    let taps = gaussian_taps(sigma_w);
    let r = (taps.len() / 2) as isize;
    let clamp = |k: isize, n: usize| k.clamp(0, n as isize - 1) as usize;
    let mut out = x.as_real().unwrap().to_vec();
    let mut tmp = vec![0.0; h * w];
    for plane in out.chunks_exact_mut(h * w) {
        for i in 0..h {
            for j in 0..w {
                tmp[i * w + j] = taps
                    .iter()
                    .enumerate()
                    .map(|(t, c)| c * plane[i * w + clamp(j as isize + t as isize - r, w)])
                    .sum();
            }
        }
        for i in 0..h {
            for j in 0..w {
                plane[i * w + j] = taps
                    .iter()
                    .enumerate()
                    .map(|(t, c)| c * tmp[clamp(i as isize + t as isize - r, h) * w + j])
                    .sum();
            }
        }
    }
    Tensor::from_real(x.shape().to_vec(), out)
}

fn median3(x: &Tensor) -> Result<Tensor> {
    let (_, h, w) = plane_dims(x.shape())?;
    let src = x.as_real().unwrap();
    let mut out = vec![0.0; src.len()];
    let clamp = |k: isize, n: usize| k.clamp(0, n as isize - 1) as usize;
    for (plane, dst) in src.chunks_exact(h * w).zip(out.chunks_exact_mut(h * w)) {
        for i in 0..h {
            for j in 0..w {
                let mut win = [0.0; 9];
                for (k, slot) in win.iter_mut().enumerate() {
                    let ii = clamp(i as isize + k as isize / 3 - 1, h);
                    let jj = clamp(j as isize + k as isize % 3 - 1, w);
                    *slot = plane[ii * w + jj];
                }
                win.sort_by(f64::total_cmp);
                dst[i * w + j] = win[4];
            }
        }
    }
    Tensor::from_real(x.shape().to_vec(), out)
}
