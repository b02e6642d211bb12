//! Full-reference distortion metrics `m(x̂, x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{plane_dims, Tensor};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn default_data_range() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    #[serde(default = "default_data_range")]
    pub data_range: f64,
    /// Min-max normalize each image to [0, 1] first.
    #[serde(default)]
    pub normalize_inputs: bool,
    /// Compare magnitudes of complex images.
    #[serde(default)]
    pub complex_magnitude: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            data_range: 1.0,
            normalize_inputs: false,
            complex_magnitude: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mse,
    Mae,
    Psnr,
    Ssim,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Mae => "mae",
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
        }
    }

    pub fn eval(&self, xhat: &Tensor, x: &Tensor, cfg: &MetricConfig) -> Result<f64> {
        match self {
            Metric::Mse => {
                let (a, b) = prepare(xhat, x, cfg)?;
                mse(&a, &b)
            }
            Metric::Mae => {
                let (a, b) = prepare(xhat, x, cfg)?;
                mae(&a, &b)
            }
            Metric::Psnr => psnr(xhat, x, cfg),
            Metric::Ssim => ssim(xhat, x, cfg),
        }
    }
}

fn check_shapes(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "metric arguments have shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn min_max(t: &Tensor) -> Result<Tensor> {
    let v = t.real_values("normalization")?;
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    Ok(if span > 0.0 {
        t.map_real(|p| (p - lo) / span)
    } else {
        t.zeros_like()
    })
}

/// Applies the magnitude and normalization options of `cfg`.
pub fn prepare(xhat: &Tensor, x: &Tensor, cfg: &MetricConfig) -> Result<(Tensor, Tensor)> {
    check_shapes(xhat, x)?;
    let (mut a, mut b) = if cfg.complex_magnitude {
        (xhat.abs(), x.abs())
    } else {
        (xhat.clone(), x.clone())
    };
    if cfg.normalize_inputs {
        a = min_max(&a)?;
        b = min_max(&b)?;
    }
    Ok((a, b))
}

pub fn mse(xhat: &Tensor, x: &Tensor) -> Result<f64> {
    check_shapes(xhat, x)?;
    Ok(xhat.sub(x).norm_sq() / x.len() as f64)
}

pub fn mae(xhat: &Tensor, x: &Tensor) -> Result<f64> {
    check_shapes(xhat, x)?;
    Ok(xhat.sub(x).norm_l1() / x.len() as f64)
}

/// `10·log10(L² / mse)` in dB; `+∞` when the images are identical.
pub fn psnr(xhat: &Tensor, x: &Tensor, cfg: &MetricConfig) -> Result<f64> {
    if !(cfg.data_range > 0.0) {
        return Err(Error::validation(format!("data range must be positive, got {}", cfg.data_range)));
    }
    let (a, b) = prepare(xhat, x, cfg)?;
    let m = mse(&a, &b)?;
    Ok(if m == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (cfg.data_range * cfg.data_range / m).log10()
    })
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|k| (-(k as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of one plane with the SSIM window.
fn filter_valid(p: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            rows[i * ow + j] = g.iter().enumerate().map(|(k, c)| c * p[i * w + j + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = g.iter().enumerate().map(|(k, c)| c * rows[(i + k) * ow + j]).sum();
        }
    }
    out
}

/// Single-scale SSIM averaged over the valid region (no padding) and over
/// image planes.
pub fn ssim(xhat: &Tensor, x: &Tensor, cfg: &MetricConfig) -> Result<f64> {
    if !(cfg.data_range > 0.0) {
        return Err(Error::validation(format!("data range must be positive, got {}", cfg.data_range)));
    }
    let (a, b) = prepare(xhat, x, cfg)?;
    let (_, h, w) = plane_dims(a.shape())?;
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::validation(format!(
            "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let (av, bv) = (a.real_values("ssim")?, b.real_values("ssim")?);
    let c1 = (SSIM_K1 * cfg.data_range).powi(2);
    let c2 = (SSIM_K2 * cfg.data_range).powi(2);
    let g = gaussian_window();
    let mut total = 0.0;
    let mut count = 0usize;
    for (pa, pb) in av.chunks_exact(h * w).zip(bv.chunks_exact(h * w)) {
        let sq = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { pa.iter().zip(pb).map(|(&p, &q)| f(p, q)).collect() };
        let mu_a = filter_valid(pa, h, w, &g);
        let mu_b = filter_valid(pb, h, w, &g);
        let e_aa = filter_valid(&sq(&|p, _| p * p), h, w, &g);
        let e_bb = filter_valid(&sq(&|_, q| q * q), h, w, &g);
        let e_ab = filter_valid(&sq(&|p, q| p * q), h, w, &g);
        for k in 0..mu_a.len() {
            let (ma, mb) = (mu_a[k], mu_b[k]);
            let va = e_aa[k] - ma * ma;
            let vb = e_bb[k] - mb * mb;
            let cov = e_ab[k] - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        count += mu_a.len();
    }
    Ok(total / count as f64)
}

/// Six significant digits, `inf`/`-inf`/`nan` spelled out.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    // Rounding can bump the exponent (e.g. 999999.7 -> 1e6).
    let rounded: f64 = format!("{v:.5e}").parse().unwrap();
    let exp = if rounded.abs() >= 10f64.powi(exp + 1) { exp + 1 } else { exp };
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let s = format!("{v:.5e}");
        let (mantissa, e) = s.split_once('e').unwrap();
        format!("{}e{}", trim_zeros(mantissa.to_string()), e)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;
    use crate::tensor::DType;

    #[test]
    fn basic_values() {
        let x = Tensor::full(&[4, 4], 0.25);
        let y = x.add_scalar(0.5);
        assert_eq!(mse(&x, &x).unwrap(), 0.0);
        assert_eq!(mse(&y, &x).unwrap(), 0.25);
        assert_eq!(mae(&y, &x).unwrap(), 0.5);
        let cfg = MetricConfig::default();
        assert!((psnr(&y, &x, &cfg).unwrap() - 6.0206).abs() < 1e-4);
        assert_eq!(psnr(&x, &x, &cfg).unwrap(), f64::INFINITY);
        assert!(mse(&x, &Tensor::full(&[3], 0.0)).is_err());
    }

    #[test]
    fn psnr_scale_invariance() {
        let mut rng = RngState::new(1);
        let x = Tensor::randn(&[8, 8], DType::Real64, &mut rng);
        let y = Tensor::randn(&[8, 8], DType::Real64, &mut rng);
        let a = psnr(&y, &x, &MetricConfig::default()).unwrap();
        let cfg2 = MetricConfig {
            data_range: 2.0,
            ..Default::default()
        };
        let b = psnr(&y.scale(2.0), &x.scale(2.0), &cfg2).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ssim_identity_symmetry_and_size() {
        let mut rng = RngState::new(2);
        let a = Tensor::randn(&[16, 16], DType::Real64, &mut rng);
        let b = Tensor::randn(&[16, 16], DType::Real64, &mut rng);
        let cfg = MetricConfig::default();
        assert_eq!(ssim(&a, &a, &cfg).unwrap(), 1.0);
        assert!((ssim(&a, &b, &cfg).unwrap() - ssim(&b, &a, &cfg).unwrap()).abs() < 1e-12);
        assert!(ssim(&Tensor::full(&[10, 10], 0.0), &Tensor::full(&[10, 10], 0.0), &cfg).is_err());
    }

    #[test]
    fn inverted_pattern_has_negative_ssim() {
        let v: Vec<f64> = (0..256).map(|k| if (k / 16 + k % 16) % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let x = Tensor::from_real(vec![16, 16], v).unwrap();
        let inv = x.scale(-1.0).add_scalar(1.0);
        assert!(ssim(&inv, &x, &MetricConfig::default()).unwrap() < 0.0);
    }

    #[test]
    fn complex_magnitude_path() {
        let mut rng = RngState::new(3);
        let a = Tensor::randn(&[12, 12], DType::Complex128, &mut rng);
        let b = Tensor::randn(&[12, 12], DType::Complex128, &mut rng);
        let cfg = MetricConfig {
            complex_magnitude: true,
            ..Default::default()
        };
        let plain = MetricConfig::default();
        assert_eq!(psnr(&a, &b, &cfg).unwrap(), psnr(&a.abs(), &b.abs(), &plain).unwrap());
        assert_eq!(ssim(&a, &b, &cfg).unwrap(), ssim(&a.abs(), &b.abs(), &plain).unwrap());
    }

    #[test]
    fn formatting() {
        assert_eq!(format_value(f64::INFINITY), "inf");
        assert_eq!(format_value(6.020599913), "6.0206");
        assert_eq!(format_value(0.25), "0.25");
        assert_eq!(format_value(123456.7), "123457");
        assert_eq!(format_value(1234567.0), "1.23457e6");
        assert_eq!(format_value(0.000012345678), "1.23457e-5");
        assert_eq!(format_value(-0.5), "-0.5");
        assert_eq!(format_value(999999.7), "1e6");
        assert_eq!(format_value(0.0), "0");
    }
}
