use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::tensor::{plane_dims, Tensor};

fn check_levels(shape: &[usize], levels: usize) -> Result<(usize, usize)> {
    let (_, h, w) = plane_dims(shape)?;
    let block = 1usize.checked_shl(levels as u32).unwrap_or(0);
    if block == 0 || h % block != 0 || w % block != 0 {
        return Err(Error::validation(format!(
            "{levels}-level Haar transform needs sides divisible by 2^{levels}, got {h}x{w}"
        )));
    }
    Ok((h, w))
}

/// One analysis (or synthesis) step along a strided line of length `n`.
fn haar_line(buf: &mut [f64], tmp: &mut [f64], start: usize, stride: usize, n: usize, inverse: bool) {
    let half = n / 2;
    for k in 0..n {
        tmp[k] = buf[start + k * stride];
    }
    for k in 0..half {
        let idx = |m: usize| start + m * stride;
        if inverse {
            let (a, d) = (tmp[k], tmp[half + k]);
            buf[idx(2 * k)] = (a + d) * FRAC_1_SQRT_2;
            buf[idx(2 * k + 1)] = (a - d) * FRAC_1_SQRT_2;
        } else {
            let (x0, x1) = (tmp[2 * k], tmp[2 * k + 1]);
            buf[idx(k)] = (x0 + x1) * FRAC_1_SQRT_2;
            buf[idx(half + k)] = (x0 - x1) * FRAC_1_SQRT_2;
        }
    }
}

fn transform_plane(plane: &mut [f64], h: usize, w: usize, levels: usize, inverse: bool) {
    let mut tmp = vec![0.0; h.max(w)];
    let order: Vec<usize> = if inverse { (0..levels).rev().collect() } else { (0..levels).collect() };
    for level in order {
        let (lh, lw) = (h >> level, w >> level);
        if inverse {
            for j in 0..lw {
                haar_line(plane, &mut tmp, j, w, lh, true);
            }
            for i in 0..lh {
                haar_line(plane, &mut tmp, i * w, 1, lw, true);
            }
        } else {
            for i in 0..lh {
                haar_line(plane, &mut tmp, i * w, 1, lw, false);
            }
            for j in 0..lw {
                haar_line(plane, &mut tmp, j, w, lh, false);
            }
        }
    }
}

fn transform(x: &Tensor, levels: usize, inverse: bool) -> Result<Tensor> {
    let (h, w) = check_levels(x.shape(), levels)?;
    x.map_parts(|p| {
        let mut v = p.as_real().unwrap().to_vec();
        for plane in v.chunks_exact_mut(h * w) {
            transform_plane(plane, h, w, levels, inverse);
        }
        Tensor::from_real(x.shape().to_vec(), v)
    })
}

/// Orthonormal 2D Haar analysis with `levels` levels, coefficients stored
/// in place (approximation in the top-left corner).
pub fn haar_dwt(x: &Tensor, levels: usize) -> Result<Tensor> {
    transform(x, levels, false)
}

/// Inverse of [`haar_dwt`].
pub fn haar_idwt(coeffs: &Tensor, levels: usize) -> Result<Tensor> {
    transform(coeffs, levels, true)
}
