//! Supervised and self-supervised losses `ℒ(x̂, x, y, A, R)`.
//!
//! Only [`sup_mse`] sees ground truth; the others work from measurements,
//! the physics and the reconstructor alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::Reconstructor;
use crate::physics::{generators, Physics};
use crate::rng::RngState;
use crate::tensor::{dot_re, Tensor};
use crate::transforms::Transform;

pub const DEFAULT_R2R_ALPHA: f64 = 0.5;
pub const DEFAULT_SPLIT_RATIO: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub components: BTreeMap<String, f64>,
    pub samples_used: usize,
}

impl LossValue {
    fn single(name: &str, value: f64) -> Self {
        LossValue {
            value,
            components: BTreeMap::from([(name.to_string(), value)]),
            samples_used: 1,
        }
    }
}

fn mean_sq(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("loss arguments {:?} and {:?}", a.shape(), b.shape())));
    }
    Ok(a.sub(b).norm_sq() / a.len() as f64)
}

/// Per-element mean squared error against ground truth.
pub fn sup_mse(xhat: &Tensor, x: &Tensor) -> Result<LossValue> {
    Ok(LossValue::single("mse", mean_sq(xhat, x)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SureOptions {
    /// Number of Rademacher probes for the divergence.
    pub probes: usize,
    /// Finite-difference step; default `0.01·max|y|` (at least `1e-6`).
    pub probe_step: Option<f64>,
}

impl Default for SureOptions {
    fn default() -> Self {
        SureOptions {
            probes: 1,
            probe_step: None,
        }
    }
}

/// Monte-Carlo SURE for Gaussian denoising:
/// `(1/n)‖D(y) - y‖² - σ² + (2σ²/n)·div D(y)`.
pub fn sure_gaussian(
    model: &dyn Reconstructor,
    y: &Tensor,
    physics: &Physics,
    sigma: f64,
    opts: &SureOptions,
    rng: &mut RngState,
) -> Result<LossValue> {
    if !(sigma > 0.0) {
        return Err(Error::validation(format!("sure needs sigma > 0, got {sigma}")));
    }
    if opts.probes == 0 {
        return Err(Error::validation("sure needs at least one probe"));
    }
    if physics.domain().shape != physics.range().shape {
        return Err(Error::capability(format!(
            "sure applies to denoising problems; {} maps {:?} to {:?}",
            physics.descriptor(),
            physics.domain().shape,
            physics.range().shape
        )));
    }
    let n = y.len() as f64;
    let tau = opts.probe_step.unwrap_or_else(|| (0.01 * y.max_abs()).max(1e-6));
    let dy = model.reconstruct(y, physics)?;
    let residual = mean_sq(&dy, y)?;
    let mut div = 0.0;
    for _ in 0..opts.probes {
        let b = Tensor::from_real(y.shape().to_vec(), (0..y.len()).map(|_| rng.rademacher()).collect())?;
        let mut yp = y.clone();
        yp.axpy(tau, &b);
        let diff = model.reconstruct(&yp, physics)?.sub(&dy);
        div += dot_re(&b, &diff) / tau;
    }
    div /= opts.probes as f64;
    let div_term = 2.0 * sigma * sigma * div / n;
    let noise_term = -sigma * sigma;
    Ok(LossValue {
        value: residual + noise_term + div_term,
        components: BTreeMap::from([
            ("residual".to_string(), residual),
            ("noise".to_string(), noise_term),
            ("divergence".to_string(), div_term),
        ]),
        samples_used: opts.probes,
    })
}

/// Recorrupted-to-recorrupted loss for Gaussian noise, averaged over `draws`:
/// `(1/n)‖A R(y + αw) - (y - w/α)‖²`, `w ~ N(0, σ²I)`.
pub fn r2r_gaussian(
    model: &dyn Reconstructor,
    y: &Tensor,
    physics: &Physics,
    sigma: f64,
    alpha: f64,
    draws: usize,
    rng: &mut RngState,
) -> Result<LossValue> {
    if !(alpha > 0.0) {
        return Err(Error::validation(format!("r2r needs alpha > 0, got {alpha}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::validation(format!("r2r needs sigma >= 0, got {sigma}")));
    }
    if draws == 0 {
        return Err(Error::validation("r2r needs at least one draw"));
    }
    let mut total = 0.0;
    for _ in 0..draws {
        let w = Tensor::randn(y.shape(), y.dtype(), rng).scale(sigma);
        let mut y1 = y.clone();
        y1.axpy(alpha, &w);
        let mut y2 = y.clone();
        y2.axpy(-1.0 / alpha, &w);
        let xhat = model.reconstruct(&y1, physics)?;
        total += mean_sq(&physics.apply(&xhat)?, &y2)?;
    }
    let value = total / draws as f64;
    Ok(LossValue {
        samples_used: draws,
        ..LossValue::single("r2r", value)
    })
}

/// Measurement-splitting loss for masked physics: reconstruct from a
/// Bernoulli(`q`) subset of the observed entries and score the prediction
/// on the held-out ones.
pub fn splitting_loss(
    model: &dyn Reconstructor,
    y: &Tensor,
    physics: &Physics,
    split_ratio: f64,
    rng: &mut RngState,
) -> Result<LossValue> {
    let mask = physics.mask().ok_or_else(|| {
        Error::Capability(format!(
            "splitting loss needs a pixelwise mask, {} physics has none",
            physics.descriptor()
        ))
    })?;
    let keep = generators::bernoulli_mask(mask.shape(), split_ratio, rng)?;
    let m1 = mask.mul(&keep);
    let m2 = mask.sub(&m1);
    let held_out = m2.sum().re;
    if held_out == 0.0 {
        return Err(Error::validation("empty validation split"));
    }
    let physics1 = physics.with_mask(m1.clone())?;
    let xhat = model.reconstruct(&y.mul(&m1), &physics1)?;
    let resid = physics.apply(&xhat)?.sub(y).mul(&m2);
    let value = resid.norm_sq() / held_out;
    Ok(LossValue {
        components: BTreeMap::from([
            ("splitting".to_string(), value),
            ("held_out".to_string(), held_out),
        ]),
        value,
        samples_used: 1,
    })
}

/// Equivariant-imaging loss `(1/n)‖R(A T_g R(y)) - T_g R(y)‖²`.
pub fn ei_loss(
    model: &dyn Reconstructor,
    y: &Tensor,
    physics: &Physics,
    g_sampler: impl FnOnce(&mut RngState) -> Result<Transform>,
    rng: &mut RngState,
) -> Result<LossValue> {
    let x1 = model.reconstruct(y, physics)?;
    let g = g_sampler(rng)?;
    let x2 = g.apply(&x1)?;
    let y2 = physics.apply(&x2)?;
    let x3 = model.reconstruct(&y2, physics)?;
    Ok(LossValue::single("ei", mean_sq(&x3, &x2)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics;
    use crate::tensor::DType;

    fn identity_model(y: &Tensor, _: &Physics) -> Result<Tensor> {
        Ok(y.clone())
    }

    #[test]
    fn sup_mse_examples() {
        let x = Tensor::full(&[3, 3], 0.25);
        assert_eq!(sup_mse(&x, &x).unwrap().value, 0.0);
        assert_eq!(sup_mse(&x.add_scalar(0.5), &x).unwrap().value, 0.25);
    }

    #[test]
    fn sure_closed_forms() {
        let mut rng = RngState::new(1);
        let p = physics::make_denoising(&[8, 8]);
        let y = Tensor::randn(&[8, 8], DType::Real64, &mut rng);
        let sigma = 0.3;
        let opts = SureOptions::default();
        let s = sure_gaussian(&identity_model, &y, &p, sigma, &opts, &mut rng).unwrap();
        assert!((s.value - sigma * sigma).abs() < 1e-12);

        let c = 0.5;
        let half = move |y: &Tensor, _: &Physics| Ok(y.scale(c));
        let s = sure_gaussian(&half, &y, &p, sigma, &opts, &mut rng).unwrap();
        let want = (1.0 - c) * (1.0 - c) * y.norm_sq() / 64.0 - sigma * sigma + 2.0 * sigma * sigma * c;
        assert!((s.value - want).abs() < 1e-12);
        assert!(sure_gaussian(&half, &y, &p, 0.0, &opts, &mut rng).is_err());
    }

    #[test]
    fn r2r_degenerate_and_deterministic() {
        let p = physics::make_denoising(&[6, 6]);
        let y = Tensor::full(&[6, 6], 0.4);
        let l = r2r_gaussian(&identity_model, &y, &p, 1e-8, 0.5, 1, &mut RngState::new(2)).unwrap();
        assert!(l.value < 1e-12);
        let a = r2r_gaussian(&identity_model, &y, &p, 0.1, 0.5, 3, &mut RngState::new(3)).unwrap();
        let b = r2r_gaussian(&identity_model, &y, &p, 0.1, 0.5, 3, &mut RngState::new(3)).unwrap();
        assert_eq!(a, b);
        assert!(r2r_gaussian(&identity_model, &y, &p, 0.1, 0.0, 1, &mut RngState::new(3)).is_err());
    }

    #[test]
    fn splitting_examples() {
        let mut rng = RngState::new(4);
        let mask = physics::generators::bernoulli_mask(&[8, 8], 0.7, &mut rng).unwrap();
        let p = physics::make_inpainting(mask).unwrap();
        let x = Tensor::full(&[8, 8], 0.6);
        let y = p.apply(&x).unwrap();
        let constant = |_: &Tensor, _: &Physics| Ok(Tensor::full(&[8, 8], 0.6));
        assert_eq!(splitting_loss(&constant, &y, &p, 0.9, &mut rng).unwrap().value, 0.0);
        let err = splitting_loss(&constant, &y, &p, 1.0, &mut rng).unwrap_err();
        assert!(err.to_string().contains("empty validation split"));
        let a = splitting_loss(&identity_model, &y, &p, 0.5, &mut RngState::new(5)).unwrap();
        let b = splitting_loss(&identity_model, &y, &p, 0.5, &mut RngState::new(5)).unwrap();
        assert_eq!(a, b);
        let t = physics::make_tomography(physics::uniform_angles(4), &[8, 8]).unwrap();
        let yt = t.apply(&x).unwrap();
        assert!(matches!(
            splitting_loss(&identity_model, &yt, &t, 0.5, &mut rng),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn ei_is_zero_for_identity() {
        let mut rng = RngState::new(6);
        let p = physics::make_denoising(&[6, 6]);
        let y = Tensor::randn(&[6, 6], DType::Real64, &mut rng);
        let l = ei_loss(&identity_model, &y, &p, |r| {
            crate::transforms::random_element(r, &[crate::transforms::TransformKind::Rot90], 6, 6)
        }, &mut rng)
        .unwrap();
        assert_eq!(l.value, 0.0);
    }
}
