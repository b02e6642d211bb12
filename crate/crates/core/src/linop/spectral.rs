use crate::error::{Error, Result};
use crate::linop::solvers::{lsqr_solve, SolveReport, StopReason, DEFAULT_MAX_ITER};
use crate::linop::LinearMap;
use crate::rng::RngState;
use crate::tensor::{dot, Tensor};

fn random_unit(shape: &[usize], dtype: crate::tensor::DType, rng: &mut RngState) -> Tensor {
    let t = Tensor::randn(shape, dtype, rng);
    let n = t.norm();
    t.scale(1.0 / n)
}

/// Dot-test: max over trials of `|<Ax,u> - <x,Aᵀu>| / (‖Ax‖‖u‖ + ε)` for
/// random unit `x`, `u`.
pub fn adjoint_test(a: &dyn LinearMap, rng: &mut RngState, trials: usize) -> Result<f64> {
    if trials == 0 {
        return Err(Error::validation("adjoint_test needs at least one trial"));
    }
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x = random_unit(&a.domain().shape, a.domain().dtype, rng);
        let u = random_unit(&a.range().shape, a.range().dtype, rng);
        let ax = a.apply(&x)?;
        let atu = a.apply_adjoint(&u)?;
        let lhs = dot(&ax, &u)?;
        let rhs = dot(&x, &atu)?;
        let err = (lhs - rhs).norm() / (ax.norm() * u.norm() + f64::EPSILON);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Largest singular value by power iteration on `AᵀA`.
///
/// The eigenvalue estimate is the Rayleigh quotient `‖Ax‖²`; iteration stops
/// once successive estimates agree to relative `tol`.
pub fn operator_norm(a: &dyn LinearMap, rng: &mut RngState, tol: f64, max_iter: usize) -> Result<(f64, SolveReport)> {
    if !(tol > 0.0) {
        return Err(Error::validation("operator_norm tolerance must be positive"));
    }
    let space = a.domain();
    let mut x = random_unit(&space.shape, space.dtype, rng);
    let mut restarted = false;
    let mut lambda_prev = f64::NAN;
    let mut rel_change = f64::INFINITY;
    for k in 1..=max_iter {
        let ax = a.apply(&x)?;
        let lambda = ax.norm_sq();
        let next = a.apply_adjoint(&ax)?;
        let n = next.norm();
        if !n.is_finite() {
            return Err(Error::Divergence {
                iteration: k,
                reason: "power iteration produced non-finite values".into(),
            });
        }
        if n == 0.0 {
            if k == 1 && !restarted {
                restarted = true;
                x = random_unit(&space.shape, space.dtype, rng);
                continue;
            }
            let report = SolveReport {
                iterations: k,
                final_residual_norm: 0.0,
                converged: true,
                condition_estimate: None,
                stop_reason: StopReason::Converged,
            };
            return Ok((0.0, report));
        }
        x = next.scale(1.0 / n);
        if lambda_prev.is_finite() {
            rel_change = (lambda - lambda_prev).abs() / lambda.max(f64::MIN_POSITIVE);
            if rel_change < tol {
                let report = SolveReport {
                    iterations: k,
                    final_residual_norm: rel_change,
                    converged: true,
                    condition_estimate: None,
                    stop_reason: StopReason::Converged,
                };
                // The next Rayleigh quotient is at least as good; `n` is ‖AᵀA x‖ for unit x.
                return Ok((lambda.max(0.0).sqrt(), report));
            }
        }
        lambda_prev = lambda;
    }
    let report = SolveReport {
        iterations: max_iter,
        final_residual_norm: rel_change,
        converged: false,
        condition_estimate: None,
        stop_reason: StopReason::MaxIterations,
    };
    Ok((lambda_prev.max(0.0).sqrt(), report))
}

/// Condition-number estimate accumulated by LSQR on `min ‖Ax - y‖`.
///
/// When `y` is `None` a random right-hand side is drawn from `rng`. LSQR runs
/// with tolerance `1e-12` so the bidiagonalization explores the spectrum.
pub fn condition_estimate(a: &dyn LinearMap, y: Option<&Tensor>, rng: &mut RngState) -> Result<f64> {
    let rhs = match y {
        Some(y) => y.clone(),
        None => Tensor::randn(&a.range().shape, a.range().dtype, rng),
    };
    let (_, report) = lsqr_solve(a, &rhs, 1e-12, DEFAULT_MAX_ITER, 0.0)?;
    Ok(report.condition_estimate.unwrap_or(f64::NAN))
}
