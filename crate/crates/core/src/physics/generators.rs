//! Random and parametric generators for operator parameters.

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::tensor::{plane_dims, Tensor};

/// Sampled isotropic Gaussian, normalized to sum 1.
pub fn gaussian_kernel(sigma: f64, side: usize) -> Result<Tensor> {
    if !(sigma > 0.0) {
        return Err(Error::validation(format!("kernel sigma must be positive, got {sigma}")));
    }
    if side % 2 == 0 {
        return Err(Error::validation(format!("kernel side must be odd, got {side}")));
    }
    let c = (side / 2) as f64;
    let mut k = Vec::with_capacity(side * side);
    for a in 0..side {
        for b in 0..side {
            let r2 = (a as f64 - c).powi(2) + (b as f64 - c).powi(2);
            k.push((-r2 / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    Tensor::from_real(vec![side, side], k)
}

/// Gaussian anti-alias kernel with side `4⌈σ⌉ + 1`; a unit delta when `σ = 0`.
pub fn antialias_kernel(sigma: f64) -> Result<Tensor> {
    if sigma == 0.0 {
        return Tensor::from_real(vec![1, 1], vec![1.0]);
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::validation(format!("anti-alias sigma must be non-negative, got {sigma}")));
    }
    gaussian_kernel(sigma, 4 * sigma.ceil() as usize + 1)
}

/// Random-walk motion blur: `length` unit steps on a `(2L+1)²` grid,
/// normalized, cropped to the visited box and zero-padded to odd sides.
pub fn motion_kernel(length: usize, rng: &mut RngState) -> Result<Tensor> {
    if length == 0 {
        return Err(Error::validation("motion kernel length must be at least 1"));
    }
    let n = 2 * length + 1;
    let mut grid = vec![0.0; n * n];
    let (mut i, mut j) = (length, length);
    grid[i * n + j] += 1.0;
    for _ in 0..length {
        match rng.below(4) {
            0 => i -= 1,
            1 => i += 1,
            2 => j -= 1,
            _ => j += 1,
        }
        grid[i * n + j] += 1.0;
    }
    let rows: Vec<usize> = (0..n).filter(|&r| grid[r * n..(r + 1) * n].iter().any(|&v| v > 0.0)).collect();
    let cols: Vec<usize> = (0..n).filter(|&c| (0..n).any(|r| grid[r * n + c] > 0.0)).collect();
    let (r0, r1) = (rows[0], *rows.last().unwrap());
    let (c0, c1) = (cols[0], *cols.last().unwrap());
    let (h, w) = (r1 - r0 + 1, c1 - c0 + 1);
    let (kh, kw) = (h | 1, w | 1);
    let total: f64 = grid.iter().sum();
    let mut k = vec![0.0; kh * kw];
    for r in 0..h {
        for c in 0..w {
            k[r * kw + c] = grid[(r0 + r) * n + c0 + c] / total;
        }
    }
    Tensor::from_real(vec![kh, kw], k)
}

/// I.i.d. binary mask with `P(1) = p`.
pub fn bernoulli_mask(shape: &[usize], p: f64, rng: &mut RngState) -> Result<Tensor> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::validation(format!("mask density must lie in (0, 1], got {p}")));
    }
    let n = shape.iter().product();
    let v = (0..n).map(|_| if rng.uniform() < p { 1.0 } else { 0.0 }).collect();
    Tensor::from_real(shape.to_vec(), v)
}

/// Cartesian undersampling mask of full k-space columns.
///
/// The `⌈cW⌉` central columns are always kept; every other column is kept
/// independently with the probability that makes the expected column count
/// `W / R`.
pub fn cartesian_mri_mask(shape: &[usize], acceleration: f64, center_fraction: f64, rng: &mut RngState) -> Result<Tensor> {
    let (planes, h, w) = plane_dims(shape)?;
    if !(acceleration >= 1.0) || !acceleration.is_finite() {
        return Err(Error::validation(format!("acceleration must be >= 1, got {acceleration}")));
    }
    if !(0.0..1.0).contains(&center_fraction) {
        return Err(Error::validation(format!(
            "center fraction must lie in [0, 1), got {center_fraction}"
        )));
    }
    let target = w as f64 / acceleration;
    let wc = center_fraction * w as f64;
    if wc > target {
        return Err(Error::validation(format!(
            "center fraction {center_fraction} keeps {wc} columns, more than W/R = {target}"
        )));
    }
    let nc = wc.ceil() as usize;
    let start = w / 2 - nc / 2;
    let p = if nc >= w {
        0.0
    } else {
        ((target - nc as f64) / (w - nc) as f64).clamp(0.0, 1.0)
    };
    let cols: Vec<bool> = (0..w)
        .map(|c| (start..start + nc).contains(&c) || rng.uniform() < p)
        .collect();
    let plane: Vec<f64> = (0..h * w).map(|k| if cols[k % w] { 1.0 } else { 0.0 }).collect();
    let v = plane.iter().copied().cycle().take(planes * h * w).collect();
    Tensor::from_real(shape.to_vec(), v)
}
