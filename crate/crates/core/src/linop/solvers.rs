//! Krylov solvers (CG, BiCGStab, LSQR) and the pseudoinverse / Tikhonov
//! helpers built on them.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft2c, ifft2c};
use crate::linop::{LinearMap, Operator, Space};
use crate::tensor::{dot, dot_re, DType, Tensor};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// The recursively updated residual is replaced by `b - Bx` this often.
const TRUE_RESIDUAL_PERIOD: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    Breakdown(String),
    ConditionLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual for CG/BiCGStab; the stopping statistic that fired for LSQR.
    pub final_residual_norm: f64,
    pub converged: bool,
    pub condition_estimate: Option<f64>,
    pub stop_reason: StopReason,
}

impl SolveReport {
    fn new(iterations: usize, residual: f64, reason: StopReason) -> Self {
        SolveReport {
            iterations,
            final_residual_norm: residual,
            converged: reason == StopReason::Converged,
            condition_estimate: None,
            stop_reason: reason,
        }
    }
}

fn check_finite(t: &Tensor, iteration: usize, what: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence {
            iteration,
            reason: format!("non-finite {what}"),
        })
    }
}

fn residual(b_op: &dyn LinearMap, b: &Tensor, x: &Tensor) -> Result<Tensor> {
    Ok(b.sub(&b_op.apply(x)?))
}

fn require_square(b_op: &dyn LinearMap, rhs: &Tensor) -> Result<()> {
    if b_op.domain().shape != b_op.range().shape {
        return Err(Error::shape(format!(
            "square operator required, got {:?} -> {:?}",
            b_op.domain().shape,
            b_op.range().shape
        )));
    }
    b_op.range().check(rhs, "right-hand side")
}

/// Conjugate gradients for a self-adjoint positive (semi)definite `B`.
pub fn cg_solve(b_op: &dyn LinearMap, b: &Tensor, tol: f64, max_iter: usize) -> Result<(Tensor, SolveReport)> {
    require_square(b_op, b)?;
    let dtype = b_op.domain().dtype.promote(b.dtype());
    let mut x = Tensor::zeros(b.shape(), dtype);
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok((x, SolveReport::new(0, 0.0, StopReason::Converged)));
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.norm_sq();
    for k in 1..=max_iter {
        let bp = b_op.apply(&p)?;
        check_finite(&bp, k, "operator output")?;
        let curvature = dot_re(&p, &bp);
        if curvature <= 0.0 {
            let rel = rr.sqrt() / bnorm;
            return Ok((x, SolveReport::new(k, rel, StopReason::Breakdown("non-positive curvature".into()))));
        }
        let alpha = rr / curvature;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &bp);
        if k % TRUE_RESIDUAL_PERIOD == 0 {
            r = residual(b_op, b, &x)?;
        }
        check_finite(&r, k, "residual")?;
        let mut rr_new = r.norm_sq();
        if rr_new.sqrt() <= tol * bnorm {
            r = residual(b_op, b, &x)?;
            rr_new = r.norm_sq();
            if rr_new.sqrt() <= tol * bnorm {
                return Ok((x, SolveReport::new(k, rr_new.sqrt() / bnorm, StopReason::Converged)));
            }
            // Drifted: restart from the true residual.
            p = r.clone();
            rr = rr_new;
            continue;
        }
        let beta = rr_new / rr;
        p = p.scale(beta);
        p.axpy(1.0, &r);
        rr = rr_new;
    }
    let rel = residual(b_op, b, &x)?.norm() / bnorm;
    let reason = if rel <= tol { StopReason::Converged } else { StopReason::MaxIterations };
    Ok((x, SolveReport::new(max_iter, rel, reason)))
}

/// Stabilized biconjugate gradients for a general square `B`.
pub fn bicgstab_solve(b_op: &dyn LinearMap, b: &Tensor, tol: f64, max_iter: usize) -> Result<(Tensor, SolveReport)> {
    require_square(b_op, b)?;
    let dtype = b_op.domain().dtype.promote(b.dtype());
    let mut x = Tensor::zeros(b.shape(), dtype);
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok((x, SolveReport::new(0, 0.0, StopReason::Converged)));
    }
    let mut r = b.clone();
    let r_hat = r.clone();
    let one = Complex64::new(1.0, 0.0);
    let (mut rho, mut alpha, mut omega) = (one, one, one);
    let mut v = Tensor::zeros(b.shape(), dtype);
    let mut p = Tensor::zeros(b.shape(), dtype);
    let tiny = f64::EPSILON * f64::EPSILON;

    for k in 1..=max_iter {
        let rho_new = dot(&r_hat, &r)?;
        if rho_new.norm() <= tiny * r_hat.norm() * r.norm().max(f64::MIN_POSITIVE) || rho_new.norm() == 0.0 {
            let rel = r.norm() / bnorm;
            return Ok((x, SolveReport::new(k, rel, StopReason::Breakdown("rho vanished".into()))));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        // p = r + beta (p - omega v)
        p.axpy_complex(-omega, &v);
        p = p.scale_complex(beta);
        p.axpy(1.0, &r);
        v = b_op.apply(&p)?;
        check_finite(&v, k, "operator output")?;
        let denom = dot(&r_hat, &v)?;
        if denom.norm() == 0.0 {
            let rel = r.norm() / bnorm;
            return Ok((x, SolveReport::new(k, rel, StopReason::Breakdown("<r0, v> vanished".into()))));
        }
        alpha = rho_new / denom;
        let mut s = r.clone();
        s.axpy_complex(-alpha, &v);
        if s.norm() <= tol * bnorm {
            x.axpy_complex(alpha, &p);
            let rel = residual(b_op, b, &x)?.norm() / bnorm;
            if rel <= tol {
                return Ok((x, SolveReport::new(k, rel, StopReason::Converged)));
            }
            r = residual(b_op, b, &x)?;
            rho = rho_new;
            continue;
        }
        let t = b_op.apply(&s)?;
        let tt = t.norm_sq();
        if tt == 0.0 {
            let rel = s.norm() / bnorm;
            return Ok((x, SolveReport::new(k, rel, StopReason::Breakdown("B s vanished".into()))));
        }
        omega = dot(&t, &s)? / tt;
        x.axpy_complex(alpha, &p);
        x.axpy_complex(omega, &s);
        r = s;
        r.axpy_complex(-omega, &t);
        if k % TRUE_RESIDUAL_PERIOD == 0 {
            r = residual(b_op, b, &x)?;
        }
        check_finite(&r, k, "residual")?;
        if r.norm() <= tol * bnorm {
            let rel = residual(b_op, b, &x)?.norm() / bnorm;
            if rel <= tol {
                return Ok((x, SolveReport::new(k, rel, StopReason::Converged)));
            }
        }
        if omega.norm() == 0.0 {
            let rel = r.norm() / bnorm;
            return Ok((x, SolveReport::new(k, rel, StopReason::Breakdown("omega vanished".into()))));
        }
        rho = rho_new;
    }
    let rel = residual(b_op, b, &x)?.norm() / bnorm;
    let reason = if rel <= tol { StopReason::Converged } else { StopReason::MaxIterations };
    Ok((x, SolveReport::new(max_iter, rel, reason)))
}

/// Givens rotation `(c, s, r)` with `[c s; -s c]·[a; b] = [r; 0]`.
fn sym_ortho(a: f64, b: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        (a.signum(), 0.0, a.abs())
    } else if a == 0.0 {
        (0.0, b.signum(), b.abs())
    } else if b.abs() > a.abs() {
        let tau = a / b;
        let s = b.signum() / (1.0 + tau * tau).sqrt();
        (s * tau, s, b / s)
    } else {
        let tau = b / a;
        let c = a.signum() / (1.0 + tau * tau).sqrt();
        (c, c * tau, a / c)
    }
}

/// LSQR for `min ‖Ax - b‖² + damping²‖x‖²` (Paige & Saunders).
///
/// `tol` serves as both `atol` and `btol`; the condition limit is `1e8`.
/// The report carries the running estimate of `‖Ā‖_F · ‖Ā⁺‖_F`.
pub fn lsqr_solve(
    a: &dyn LinearMap,
    b: &Tensor,
    tol: f64,
    max_iter: usize,
    damping: f64,
) -> Result<(Tensor, SolveReport)> {
    a.range().check(b, "right-hand side")?;
    if damping < 0.0 {
        return Err(Error::validation("damping must be non-negative"));
    }
    let (atol, btol) = (tol, tol);
    let ctol = 1e-8;
    let dtype = a.domain().dtype.promote(b.dtype());
    let mut x = Tensor::zeros(&a.domain().shape, dtype);
    let dampsq = damping * damping;

    let mut u = b.clone();
    let bnorm = u.norm();
    let mut beta = bnorm;
    if beta > 0.0 {
        u = u.scale(1.0 / beta);
    }
    let mut v = a.apply_adjoint(&u)?;
    let mut alfa = v.norm();
    if alfa > 0.0 {
        v = v.scale(1.0 / alfa);
    }
    if alfa * beta == 0.0 {
        let mut rep = SolveReport::new(0, 0.0, StopReason::Converged);
        rep.condition_estimate = Some(0.0);
        return Ok((x, rep));
    }
    let mut w = v.clone();
    let (mut rhobar, mut phibar) = (alfa, beta);
    let (mut anorm, mut ddnorm, mut res2, mut xxnorm, mut z) = (0.0f64, 0.0, 0.0, 0.0, 0.0);
    let (mut cs2, mut sn2) = (-1.0, 0.0);
    // (αᵢ, βᵢ₊₁) of the lower bidiagonal Bₖ, for the condition estimate.
    let mut bidiag: Vec<(f64, f64)> = Vec::new();

    for itn in 1..=max_iter {
        // Golub–Kahan bidiagonalization step.
        let alfa_k = alfa;
        let mut nu = a.apply(&v)?;
        nu.axpy(-alfa, &u);
        u = nu;
        beta = u.norm();
        // Accumulated even when beta vanishes, so exact early termination
        // still yields a usable norm estimate.
        anorm = (anorm * anorm + alfa * alfa + beta * beta + dampsq).sqrt();
        bidiag.push((alfa_k, beta));
        if beta > 0.0 {
            u = u.scale(1.0 / beta);
            let mut nv = a.apply_adjoint(&u)?;
            nv.axpy(-beta, &v);
            v = nv;
            alfa = v.norm();
            if alfa > 0.0 {
                v = v.scale(1.0 / alfa);
            }
        }
        check_finite(&v, itn, "bidiagonalization vector")?;

        let (rhobar1, psi) = if damping > 0.0 {
            let rhobar1 = (rhobar * rhobar + dampsq).sqrt();
            let cs1 = rhobar / rhobar1;
            let sn1 = damping / rhobar1;
            let psi = sn1 * phibar;
            phibar *= cs1;
            (rhobar1, psi)
        } else {
            (rhobar, 0.0)
        };

        let (cs, sn, rho) = sym_ortho(rhobar1, beta);
        let theta = sn * alfa;
        rhobar = -cs * alfa;
        let phi = cs * phibar;
        phibar *= sn;
        let tau = sn * phi;

        let t1 = phi / rho;
        let t2 = -theta / rho;
        ddnorm += w.norm_sq() / (rho * rho);
        x.axpy(t1, &w);
        let mut nw = v.clone();
        nw.axpy(t2, &w);
        w = nw;

        // Running estimate of ‖x‖.
        let delta = sn2 * rho;
        let gambar = -cs2 * rho;
        let rhs = phi - delta * z;
        let zbar = rhs / gambar;
        let xnorm = (xxnorm + zbar * zbar).sqrt();
        let gamma = (gambar * gambar + theta * theta).sqrt();
        cs2 = gambar / gamma;
        sn2 = theta / gamma;
        z = rhs / gamma;
        xxnorm += z * z;

        // Frobenius-norm estimate; only drives the ill-conditioning stop.
        let acond = anorm * ddnorm.sqrt();
        let res1 = phibar * phibar;
        res2 += psi * psi;
        let rnorm = (res1 + res2).sqrt();
        let arnorm = alfa * tau.abs();

        let test1 = rnorm / bnorm;
        let test2 = if rnorm > 0.0 { arnorm / (anorm * rnorm) } else { 0.0 };
        let test3 = 1.0 / acond;
        let rtol = btol + atol * anorm * xnorm / bnorm;

        let stop = if test1 <= rtol {
            Some((test1, StopReason::Converged))
        } else if test2 <= atol {
            Some((test2, StopReason::Converged))
        } else if test3 <= ctol {
            Some((test3, StopReason::ConditionLimit))
        } else if itn == max_iter {
            Some((test1.min(test2), StopReason::MaxIterations))
        } else {
            None
        };
        if let Some((stat, reason)) = stop {
            let mut rep = SolveReport::new(itn, stat, reason);
            rep.condition_estimate = Some(bidiagonal_condition(&bidiag));
            return Ok((x, rep));
        }
    }
    // max_iter == 0
    let mut rep = SolveReport::new(0, 1.0, StopReason::MaxIterations);
    rep.condition_estimate = Some(bidiagonal_condition(&bidiag));
    Ok((x, rep))
}

/// Condition number of the lower bidiagonal with diagonal `αᵢ` and
/// subdiagonal `βᵢ₊₁`, from the extreme eigenvalues of the tridiagonal `BᵀB`.
///
/// Its singular values are Ritz values of `A`, so the ratio converges to
/// `cond(A)` as the bidiagonalization exhausts the spectrum.
fn bidiagonal_condition(bidiag: &[(f64, f64)]) -> f64 {
    let k = bidiag.len();
    if k == 0 {
        return f64::NAN;
    }
    let diag: Vec<f64> = bidiag.iter().map(|&(a, b)| a * a + b * b).collect();
    let off: Vec<f64> = (0..k - 1).map(|i| bidiag[i].1 * bidiag[i + 1].0).collect();
    let (lo, hi) = tridiagonal_extremes(&diag, &off);
    if lo <= 0.0 {
        return f64::INFINITY;
    }
    (hi / lo).sqrt()
}

/// Smallest and largest eigenvalue of a symmetric tridiagonal matrix by
/// Sturm-sequence bisection.
fn tridiagonal_extremes(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let radius = |i: usize| {
        let l = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let r = if i + 1 < n { off[i].abs() } else { 0.0 };
        l + r
    };
    let mut lower = (0..n).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut upper = (0..n).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    let span = (upper - lower).max(upper.abs()).max(f64::MIN_POSITIVE);
    lower -= 1e-12 * span;
    upper += 1e-12 * span;
    // Number of eigenvalues strictly below x.
    let count_below = |x: f64| {
        let mut count = 0;
        let mut q = 1.0f64;
        for i in 0..n {
            let prev = if i > 0 { off[i - 1] * off[i - 1] / q } else { 0.0 };
            q = diag[i] - x - prev;
            if q == 0.0 {
                q = -f64::EPSILON * span;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let bisect = |target: usize| {
        let (mut a, mut b) = (lower, upper);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if count_below(mid) > target {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    (bisect(0), bisect(n - 1))
}

/// `A⁺y`: the adjoint when `A` is unitary or an orthogonal projector,
/// otherwise undamped LSQR.
pub fn pinv_apply(a: &dyn LinearMap, y: &Tensor, tol: f64, max_iter: usize) -> Result<Tensor> {
    a.range().check(y, "pseudoinverse input")?;
    if a.is_unitary() || a.is_projection() {
        return a.apply_adjoint(y);
    }
    Ok(lsqr_solve(a, y, tol, max_iter, 0.0)?.0)
}

/// `x ↦ AᵀAx + ρx`.
#[derive(Debug, Clone)]
pub struct NormalOperator {
    a: Operator,
    rho: f64,
}

impl NormalOperator {
    pub fn new(a: Operator, rho: f64) -> Self {
        NormalOperator { a, rho }
    }
}

impl LinearMap for NormalOperator {
    fn domain(&self) -> &Space {
        self.a.domain()
    }

    fn range(&self) -> &Space {
        self.a.domain()
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let mut out = self.a.apply_adjoint(&self.a.apply(x)?)?;
        out.axpy(self.rho, x);
        Ok(out)
    }

    fn apply_adjoint(&self, u: &Tensor) -> Result<Tensor> {
        self.apply(u)
    }
}

/// `argmin_x ½‖Ax - y‖² + (ρ/2)‖x - z‖²`, i.e. `(AᵀA + ρI)x = Aᵀy + ρz`.
///
/// Uses the exact frequency-domain formula when `A` exposes a spectral
/// diagonal, otherwise CG (at most [`DEFAULT_MAX_ITER`] iterations).
pub fn tikhonov_solve(a: &Operator, y: &Tensor, z: &Tensor, rho: f64, tol: f64) -> Result<Tensor> {
    if !(rho > 0.0) {
        return Err(Error::validation(format!("rho must be positive, got {rho}")));
    }
    a.domain().check(z, "tikhonov anchor")?;
    let mut rhs = a.apply_adjoint(y)?;
    rhs.axpy(rho, z);
    if let Some(diag) = a.spectral_diagonal() {
        let f = fft2c(&rhs)?;
        let values: Vec<Complex64> = f
            .as_complex()
            .unwrap()
            .iter()
            .enumerate()
            .map(|(i, v)| v / (diag.at(i).norm_sqr() + rho))
            .collect();
        let x = ifft2c(&Tensor::from_complex(rhs.shape().to_vec(), values)?)?;
        let want = a.domain().dtype.promote(y.dtype()).promote(z.dtype());
        return Ok(if want == DType::Real64 { x.real_part() } else { x });
    }
    let normal = NormalOperator::new(Arc::clone(a), rho);
    let (x, _) = cg_solve(&normal, &rhs, tol, DEFAULT_MAX_ITER)?;
    Ok(x)
}
