//! Isotropic total variation with forward differences and replicate
//! (Neumann) boundary.

use crate::error::{Error, Result};
use crate::tensor::{plane_dims, Tensor};

/// Smoothing used for the TV gradient when none is configured.
pub const TV_GRAD_EPS: f64 = 1e-8;
pub const TV_PROX_MAX_ITER: usize = 200;
/// Stop when the ∞-norm change of the normalized dual field drops below this.
pub const TV_PROX_TOL: f64 = 1e-5;

/// Forward differences of every plane; the last column/row difference is 0.
pub(crate) fn grad_op(x: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; x.len()];
    let mut gy = vec![0.0; x.len()];
    for (p, plane) in x.chunks_exact(h * w).enumerate() {
        let base = p * h * w;
        for i in 0..h {
            for j in 0..w {
                let k = i * w + j;
                if j + 1 < w {
                    gx[base + k] = plane[k + 1] - plane[k];
                }
                if i + 1 < h {
                    gy[base + k] = plane[k + w] - plane[k];
                }
            }
        }
    }
    (gx, gy)
}

/// Adjoint of [`grad_op`] (negative divergence).
pub(crate) fn grad_adjoint(gx: &[f64], gy: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; gx.len()];
    for p in 0..gx.len() / (h * w) {
        let base = p * h * w;
        for i in 0..h {
            for j in 0..w {
                let k = base + i * w + j;
                if j + 1 < w {
                    out[k] -= gx[k];
                    out[k + 1] += gx[k];
                }
                if i + 1 < h {
                    out[k] -= gy[k];
                    out[k + w] += gy[k];
                }
            }
        }
    }
    out
}

fn real_planes<'a>(x: &'a Tensor, what: &str) -> Result<(&'a [f64], usize, usize)> {
    let (_, h, w) = plane_dims(x.shape())?;
    Ok((x.real_values(what)?, h, w))
}

/// `Σ √(Dₓ² + Dᵧ² + ε²)`.
pub fn tv_value(x: &Tensor, eps: f64) -> Result<f64> {
    let (v, h, w) = real_planes(x, "tv")?;
    let (gx, gy) = grad_op(v, h, w);
    Ok(gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b + eps * eps).sqrt()).sum())
}

pub(crate) fn tv_grad(x: &Tensor, eps: f64) -> Result<Tensor> {
    let (v, h, w) = real_planes(x, "tv")?;
    let (mut gx, mut gy) = grad_op(v, h, w);
    for (a, b) in gx.iter_mut().zip(gy.iter_mut()) {
        let n = (*a * *a + *b * *b + eps * eps).sqrt();
        *a /= n;
        *b /= n;
    }
    Tensor::from_real(x.shape().to_vec(), grad_adjoint(&gx, &gy, h, w))
}

/// `argmin_z γ·TV(z) + ½‖z - v‖²` by accelerated projected gradient on the
/// dual (`z = v - Dᵀq`, `|q| ≤ γ` per pixel, step 1/8).
pub fn tv_prox(v: &Tensor, gamma: f64, max_iter: usize, tol: f64) -> Result<Tensor> {
    if !(gamma >= 0.0) {
        return Err(Error::validation(format!("tv prox step must be non-negative, got {gamma}")));
    }
    let (vv, h, w) = real_planes(v, "tv prox")?;
    if gamma == 0.0 {
        return Ok(v.clone());
    }
    let n = vv.len();
    let primal = |qx: &[f64], qy: &[f64]| -> Vec<f64> {
        let dt = grad_adjoint(qx, qy, h, w);
        vv.iter().zip(&dt).map(|(a, b)| a - b).collect()
    };
    let (mut px, mut py) = (vec![0.0; n], vec![0.0; n]);
    let (mut rx, mut ry) = (px.clone(), py.clone());
    let mut t = 1.0f64;
    for _ in 0..max_iter {
        let z = primal(&rx, &ry);
        let (gx, gy) = grad_op(&z, h, w);
        let mut change = 0.0f64;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        for k in 0..n {
            let mut ax = rx[k] + gx[k] / 8.0;
            let mut ay = ry[k] + gy[k] / 8.0;
            let norm = (ax * ax + ay * ay).sqrt();
            if norm > gamma {
                ax *= gamma / norm;
                ay *= gamma / norm;
            }
            let (dx, dy) = (ax - px[k], ay - py[k]);
            change = change.max(dx.abs().max(dy.abs()));
            rx[k] = ax + momentum * dx;
            ry[k] = ay + momentum * dy;
            px[k] = ax;
            py[k] = ay;
        }
        t = t_next;
        if change / gamma < tol {
            break;
        }
    }
    Tensor::from_real(v.shape().to_vec(), primal(&px, &py))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;
    use crate::tensor::DType;

    /// Plain (non-accelerated) dual projection iteration, written out
    /// independently with explicit neighbour indexing.
    fn oracle_prox(v: &[f64], h: usize, w: usize, gamma: f64, iters: usize, tol: f64) -> Vec<f64> {
        let idx = |i: usize, j: usize| i * w + j;
        let mut qx = vec![0.0; h * w];
        let mut qy = vec![0.0; h * w];
        let z_of = |qx: &[f64], qy: &[f64]| {
            let mut z = v.to_vec();
            for i in 0..h {
                for j in 0..w {
                    // div q with the matching boundary convention
                    let mut div = 0.0;
                    if j + 1 < w {
                        div += qx[idx(i, j)];
                    }
                    if j > 0 {
                        div -= qx[idx(i, j - 1)];
                    }
                    if i + 1 < h {
                        div += qy[idx(i, j)];
                    }
                    if i > 0 {
                        div -= qy[idx(i - 1, j)];
                    }
                    z[idx(i, j)] += div;
                }
            }
            z
        };
        for _ in 0..iters {
            let z = z_of(&qx, &qy);
            let mut change = 0.0f64;
            for i in 0..h {
                for j in 0..w {
                    let dx = if j + 1 < w { z[idx(i, j + 1)] - z[idx(i, j)] } else { 0.0 };
                    let dy = if i + 1 < h { z[idx(i + 1, j)] - z[idx(i, j)] } else { 0.0 };
                    let ax = qx[idx(i, j)] + dx / 8.0;
                    let ay = qy[idx(i, j)] + dy / 8.0;
                    let s = (ax.hypot(ay) / gamma).max(1.0);
                    change = change.max((ax / s - qx[idx(i, j)]).abs()).max((ay / s - qy[idx(i, j)]).abs());
                    qx[idx(i, j)] = ax / s;
                    qy[idx(i, j)] = ay / s;
                }
            }
            if change < tol {
                break;
            }
        }
        z_of(&qx, &qy)
    }

    #[test]
    fn two_point_prox() {
        let v = Tensor::from_real(vec![1, 2], vec![0.0, 2.0]).unwrap();
        let z = tv_prox(&v, 0.5, TV_PROX_MAX_ITER, TV_PROX_TOL).unwrap();
        let z = z.as_real().unwrap();
        assert!((z[0] - 0.5).abs() < 1e-6 && (z[1] - 1.5).abs() < 1e-6, "{z:?}");
    }

    #[test]
    fn constant_image_is_fixed() {
        let v = Tensor::full(&[6, 6], 0.7);
        let z = tv_prox(&v, 1.0, TV_PROX_MAX_ITER, TV_PROX_TOL).unwrap();
        assert!(z.sub(&v).max_abs() < 1e-15);
    }

    #[test]
    fn adjoint_pair() {
        let mut rng = RngState::new(1);
        let x = Tensor::randn(&[2, 5, 7], DType::Real64, &mut rng);
        let (gx, gy) = grad_op(x.as_real().unwrap(), 5, 7);
        let ux: Vec<f64> = (0..70).map(|_| rng.normal()).collect();
        let uy: Vec<f64> = (0..70).map(|_| rng.normal()).collect();
        let lhs: f64 = gx.iter().zip(&ux).chain(gy.iter().zip(&uy)).map(|(a, b)| a * b).sum();
        let dt = grad_adjoint(&ux, &uy, 5, 7);
        let rhs: f64 = x.as_real().unwrap().iter().zip(&dt).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn prox_matches_long_run_oracle() {
        let mut rng = RngState::new(2);
        for trial in 0..10 {
            let v = Tensor::randn(&[8, 8], DType::Real64, &mut rng);
            let gamma = 0.1 + 0.3 * trial as f64 / 10.0;
            let z = tv_prox(&v, gamma, TV_PROX_MAX_ITER, TV_PROX_TOL).unwrap();
            let want = oracle_prox(v.as_real().unwrap(), 8, 8, gamma, 20_000, 1e-10);
            let want = Tensor::from_real(vec![8, 8], want).unwrap();
            let rel = z.sub(&want).norm() / want.norm();
            assert!(rel <= 1e-4, "trial {trial}: rel error {rel}");
            let obj = |x: &Tensor| gamma * tv_value(x, 0.0).unwrap() + 0.5 * x.sub(&v).norm_sq();
            let gap = (obj(&z) - obj(&want)) / obj(&want);
            assert!(gap.abs() <= 1e-3, "trial {trial}: objective gap {gap}");
        }
    }

    #[test]
    fn smoothed_gradient_matches_finite_differences() {
        let mut rng = RngState::new(3);
        let x = Tensor::randn(&[4, 4], DType::Real64, &mut rng);
        let eps = 0.1;
        let g = tv_grad(&x, eps).unwrap();
        let h = 1e-6;
        for i in 0..16 {
            let mut e = vec![0.0; 16];
            e[i] = h;
            let e = Tensor::from_real(vec![4, 4], e).unwrap();
            let fd = (tv_value(&x.add(&e), eps).unwrap() - tv_value(&x.sub(&e), eps).unwrap()) / (2.0 * h);
            assert!((fd - g.as_real().unwrap()[i]).abs() < 1e-6);
        }
    }
}
