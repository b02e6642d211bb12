//! Built-in test images, so experiments need no external data.

use invkit::physics::{generators, make_blur};
use invkit::{DType, RngState, Tensor};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    /// Centred disc of radius `0.3·H`, value 1 on a 0 background.
    Disc,
    /// Piecewise-constant ellipses after the modified Shepp–Logan head.
    Shepp,
    /// Smoothed white noise rescaled to `[0, 1]`; the only random one.
    RandomSmooth,
}

pub fn disc(h: usize, w: usize) -> Tensor {
    let (ci, cj) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let r2 = (0.3 * h as f64).powi(2);
    let data = (0..h * w)
        .map(|k| {
            let (di, dj) = ((k / w) as f64 - ci, (k % w) as f64 - cj);
            if di * di + dj * dj <= r2 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Tensor::from_real(vec![h, w], data).unwrap()
}

// (intensity, semi-axis a, semi-axis b, centre x, centre y, angle in degrees)
const SHEPP: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

pub fn shepp(h: usize, w: usize) -> Tensor {
    let mut data = vec![0.0; h * w];
    for (k, v) in data.iter_mut().enumerate() {
        // Unit square [-1, 1]², y pointing up.
        let y = 1.0 - 2.0 * ((k / w) as f64 + 0.5) / h as f64;
        let x = 2.0 * ((k % w) as f64 + 0.5) / w as f64 - 1.0;
        for &(value, a, b, x0, y0, deg) in &SHEPP {
            let (s, c) = deg.to_radians().sin_cos();
            let (dx, dy) = (x - x0, y - y0);
            let u = dx * c + dy * s;
            let t = -dx * s + dy * c;
            if (u / a).powi(2) + (t / b).powi(2) <= 1.0 {
                *v += value;
            }
        }
    }
    let data = data.into_iter().map(|v: f64| v.clamp(0.0, 1.0)).collect();
    Tensor::from_real(vec![h, w], data).unwrap()
}

pub fn random_smooth(h: usize, w: usize, rng: &mut RngState) -> invkit::Result<Tensor> {
    let noise = Tensor::randn(&[h, w], DType::Real64, rng);
    let sigma = (h.min(w) as f64 / 16.0).max(0.5);
    let mut side = 4 * sigma.ceil() as usize + 1;
    let limit = h.min(w);
    if side > limit {
        side = if limit % 2 == 1 { limit } else { limit - 1 };
    }
    let smooth = make_blur(generators::gaussian_kernel(sigma, side)?, &[h, w])?.apply(&noise)?;
    let v = smooth.as_real().unwrap();
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    Ok(smooth.map_real(|x| (x - lo) / span))
}

pub fn generate(kind: PhantomKind, h: usize, w: usize, rng: &mut RngState) -> invkit::Result<Tensor> {
    match kind {
        PhantomKind::Disc => Ok(disc(h, w)),
        PhantomKind::Shepp => Ok(shepp(h, w)),
        PhantomKind::RandomSmooth => random_smooth(h, w, rng),
    }
}
