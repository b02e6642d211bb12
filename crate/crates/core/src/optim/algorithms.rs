use crate::error::{Error, Result};
use crate::fidelity::{DataFidelity, FidelityKind};
use crate::linop::{tikhonov_solve, StopReason};
use crate::optim::{operator_norm_estimate, AlgoConfig, ConvergenceLog, Init, Regularizer};
use crate::physics::Physics;
use crate::tensor::Tensor;

/// Shared bookkeeping: initialization, stopping rule, objective recording.
struct Run<'a> {
    y: &'a Tensor,
    physics: &'a Physics,
    fid: &'a DataFidelity,
    reg: &'a Regularizer,
    cfg: &'a AlgoConfig,
    log: ConvergenceLog,
}

impl<'a> Run<'a> {
    fn new(
        y: &'a Tensor,
        physics: &'a Physics,
        fid: &'a DataFidelity,
        reg: &'a Regularizer,
        cfg: &'a AlgoConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        physics.range().check(y, "measurements")?;
        Ok(Run {
            y,
            physics,
            fid,
            reg,
            cfg,
            log: ConvergenceLog::default(),
        })
    }

    fn init(&self) -> Result<Tensor> {
        let x = self.physics.apply_adjoint(self.y)?;
        Ok(match self.cfg.init {
            Init::Adjoint => x,
            Init::Zero => x.zeros_like(),
        })
    }

    fn data_grad(&self, x: &Tensor) -> Result<Tensor> {
        let ax = self.physics.apply(x)?;
        self.physics.apply_adjoint(&self.fid.grad(self.y, &ax)?)
    }

    fn objective(&self, x: &Tensor) -> Result<f64> {
        Ok(self.fid.eval(self.y, &self.physics.apply(x)?)? + self.reg.eval(x)?)
    }

    fn require_smooth(&self, name: &str) -> Result<()> {
        if !self.fid.is_smooth() {
            return Err(Error::capability(format!(
                "{name} needs a smooth data fidelity, got {:?}; use pdhg",
                self.fid.kind
            )));
        }
        Ok(())
    }

    fn require_l2(&self, name: &str) -> Result<()> {
        if self.fid.kind != FidelityKind::L2 {
            return Err(Error::capability(format!(
                "{name} solves its data step as a least-squares problem and needs l2 fidelity, got {:?}",
                self.fid.kind
            )));
        }
        Ok(())
    }

    fn gradient_step(&self) -> Result<f64> {
        self.cfg.step.resolve(
            || {
                let norm = operator_norm_estimate(self.physics.map().as_ref())?;
                let l = norm * norm * self.fid.lipschitz(self.y)?;
                Ok(if l > 0.0 { 0.9 / l } else { 1.0 })
            },
            "step",
        )
    }

    fn inner_tol(&self) -> f64 {
        (self.cfg.tol * 1e-2).clamp(1e-12, 1e-8)
    }

    /// Records iteration `k` and reports whether to stop.
    fn step(&mut self, k: usize, x: &Tensor, change: f64) -> Result<bool> {
        if !x.is_finite() || change.is_nan() {
            return Err(Error::Divergence {
                iteration: k,
                reason: "iterate became non-finite".into(),
            });
        }
        self.log.iterations = k;
        self.log.changes.push(change);
        if self.cfg.record_objective {
            let obj = self.objective(x)?;
            self.log.objective.push(obj);
        }
        if change < self.cfg.tol {
            self.log.stop_reason = Some(StopReason::Converged);
            return Ok(true);
        }
        if k == self.cfg.max_iter {
            self.log.stop_reason = Some(StopReason::MaxIterations);
        }
        Ok(false)
    }
}

fn rel_change(new: &Tensor, old: &Tensor) -> f64 {
    new.sub(old).norm() / old.norm().max(1e-12)
}

/// Proximal gradient descent, `x ← prox_{γg}(x - γAᵀ∇f(y, Ax))`.
pub fn pgd(
    y: &Tensor,
    physics: &Physics,
    fid: &DataFidelity,
    reg: &Regularizer,
    cfg: &AlgoConfig,
) -> Result<(Tensor, ConvergenceLog)> {
    let mut run = Run::new(y, physics, fid, reg, cfg)?;
    run.require_smooth("pgd")?;
    let gamma = run.gradient_step()?;
    let mut x = run.init()?;
    for k in 1..=cfg.max_iter {
        let mut v = x.clone();
        v.axpy(-gamma, &run.data_grad(&x)?);
        let next = reg.prox(&v, gamma)?;
        let change = rel_change(&next, &x);
        x = next;
        if run.step(k, &x, change)? {
            break;
        }
    }
    Ok((x, run.log))
}

/// Accelerated proximal gradient with Nesterov momentum.
pub fn fista(
    y: &Tensor,
    physics: &Physics,
    fid: &DataFidelity,
    reg: &Regularizer,
    cfg: &AlgoConfig,
) -> Result<(Tensor, ConvergenceLog)> {
    let mut run = Run::new(y, physics, fid, reg, cfg)?;
    run.require_smooth("fista")?;
    let gamma = run.gradient_step()?;
    let mut x = run.init()?;
    let mut z = x.clone();
    let mut t = 1.0f64;
    for k in 1..=cfg.max_iter {
        let mut v = z.clone();
        v.axpy(-gamma, &run.data_grad(&z)?);
        let next = reg.prox(&v, gamma)?;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next.clone();
        z.axpy((t - 1.0) / t_next, &next.sub(&x));
        t = t_next;
        let change = rel_change(&next, &x);
        x = next;
        if run.step(k, &x, change)? {
            break;
        }
    }
    Ok((x, run.log))
}

/// ADMM on the splitting `x = v`; the x-update is an exact Tikhonov solve.
///
/// Starts from `v₀ = x₀`, `u₀ = 0`, and stops when
/// `max(‖x - v‖, ρ‖v - v_prev‖) / ‖x‖ < tol`.
pub fn admm(
    y: &Tensor,
    physics: &Physics,
    fid: &DataFidelity,
    reg: &Regularizer,
    cfg: &AlgoConfig,
) -> Result<(Tensor, ConvergenceLog)> {
    let mut run = Run::new(y, physics, fid, reg, cfg)?;
    run.require_l2("admm")?;
    let rho = cfg.rho;
    let mut v = run.init()?;
    let mut u = v.zeros_like();
    let mut x = v.clone();
    for k in 1..=cfg.max_iter {
        x = tikhonov_solve(physics.map(), y, &v.sub(&u), rho / fid.weight, run.inner_tol())?;
        let v_prev = v;
        v = reg.prox(&x.add(&u), 1.0 / rho)?;
        u = u.add(&x).sub(&v);
        let primal = x.sub(&v).norm();
        let dual = rho * v.sub(&v_prev).norm();
        let change = primal.max(dual) / x.norm().max(1e-12);
        if run.step(k, &x, change)? {
            break;
        }
    }
    Ok((x, run.log))
}

/// Douglas–Rachford splitting (relaxation 1) between `f∘A` and `g`.
///
/// The step is `cfg.step`, or `1/ρ` when automatic.
pub fn drs(
    y: &Tensor,
    physics: &Physics,
    fid: &DataFidelity,
    reg: &Regularizer,
    cfg: &AlgoConfig,
) -> Result<(Tensor, ConvergenceLog)> {
    let mut run = Run::new(y, physics, fid, reg, cfg)?;
    run.require_l2("drs")?;
    let gamma = cfg.step.resolve(|| Ok(1.0 / cfg.rho), "step")?;
    let inner_tol = run.inner_tol();
    let prox_f = |z: &Tensor| tikhonov_solve(physics.map(), y, z, 1.0 / (gamma * fid.weight), inner_tol);
    let mut z = run.init()?;
    let mut x = prox_f(&z)?;
    for k in 1..=cfg.max_iter {
        let reflected = x.scale(2.0).sub(&z);
        let v = reg.prox(&reflected, gamma)?;
        z = z.add(&v).sub(&x);
        let next = prox_f(&z)?;
        let change = rel_change(&next, &x);
        x = next;
        if run.step(k, &x, change)? {
            break;
        }
    }
    Ok((x, run.log))
}

/// Chambolle–Pock primal-dual iteration; the dual prox comes from the
/// fidelity prox through the Moreau identity, so nonsmooth `f` is allowed.
pub fn pdhg(
    y: &Tensor,
    physics: &Physics,
    fid: &DataFidelity,
    reg: &Regularizer,
    cfg: &AlgoConfig,
) -> Result<(Tensor, ConvergenceLog)> {
    let mut run = Run::new(y, physics, fid, reg, cfg)?;
    let norm = operator_norm_estimate(physics.map().as_ref())?;
    let tau = cfg.tau.resolve(|| Ok(0.99 / norm), "tau")?;
    let sigma = cfg.sigma_dual.resolve(|| Ok(0.99 / norm), "sigma_dual")?;
    if tau * sigma * norm * norm >= 1.0 {
        return Err(Error::validation(format!(
            "pdhg needs tau·sigma·‖A‖² < 1, got {}",
            tau * sigma * norm * norm
        )));
    }
    let mut x = run.init()?;
    let mut xbar = x.clone();
    let mut u = physics.range().zeros();
    for k in 1..=cfg.max_iter {
        let mut w = u.clone();
        w.axpy(sigma, &physics.apply(&xbar)?);
        u = w.sub(&fid.prox(y, &w.scale(1.0 / sigma), 1.0 / sigma)?.scale(sigma));
        let mut v = x.clone();
        v.axpy(-tau, &physics.apply_adjoint(&u)?);
        let next = reg.prox(&v, tau)?;
        xbar = next.scale(2.0).sub(&x);
        let change = rel_change(&next, &x);
        x = next;
        if run.step(k, &x, change)? {
            break;
        }
    }
    Ok((x, run.log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{reconstruct, Algorithm};
    use crate::physics::{self, generators};
    use crate::priors::{soft_threshold, Denoiser, Prior};
    use crate::rng::RngState;
    use crate::tensor::DType;

    fn noisy_image(rng: &mut RngState) -> Tensor {
        Tensor::randn(&[6, 6], DType::Real64, rng)
    }

    #[test]
    fn unregularized_identity_returns_y() {
        let mut rng = RngState::new(1);
        let y = noisy_image(&mut rng);
        let p = physics::make_denoising(&[6, 6]);
        let fid = DataFidelity::l2();
        for alg in [Algorithm::Pgd, Algorithm::Fista] {
            let (x, log) = reconstruct(&y, &p, &fid, &Regularizer::None, &AlgoConfig::new(alg)).unwrap();
            assert!(x.sub(&y).max_abs() < 1e-12);
            assert_eq!(log.iterations, 1);
        }
        let (x, _) = pdhg(&y, &p, &fid, &Regularizer::None, &AlgoConfig::new(Algorithm::Pdhg)).unwrap();
        assert!(x.sub(&y).max_abs() < 1e-5);
    }

    #[test]
    fn admm_tikhonov_fixed_point() {
        let mut rng = RngState::new(2);
        let y = noisy_image(&mut rng);
        let p = physics::make_denoising(&[6, 6]);
        let lambda = 0.7;
        let cfg = AlgoConfig::new(Algorithm::Admm).tol(1e-12).max_iter(2000);
        let (x, _) = admm(&y, &p, &DataFidelity::l2(), &Prior::tikhonov(lambda).into(), &cfg).unwrap();
        assert!(x.sub(&y.scale(1.0 / (1.0 + lambda))).max_abs() < 1e-8);
    }

    #[test]
    fn drs_l1_gives_soft_threshold() {
        let mut rng = RngState::new(3);
        let y = noisy_image(&mut rng);
        let p = physics::make_denoising(&[6, 6]);
        let lambda = 0.4;
        let cfg = AlgoConfig::new(Algorithm::Drs).tol(1e-12).max_iter(2000);
        let (x, _) = drs(&y, &p, &DataFidelity::l2(), &Prior::l1(lambda).into(), &cfg).unwrap();
        assert!(x.sub(&soft_threshold(&y, lambda).unwrap()).max_abs() < 1e-8);
    }

    #[test]
    fn pdhg_l1_inpainting_keeps_observed_entries() {
        let mut rng = RngState::new(4);
        let mask = generators::bernoulli_mask(&[8, 8], 0.5, &mut rng).unwrap();
        let p = physics::make_inpainting(mask.clone()).unwrap();
        let x = Tensor::randn(&[8, 8], DType::Real64, &mut rng);
        let y = p.apply(&x).unwrap();
        let cfg = AlgoConfig::new(Algorithm::Pdhg).tol(1e-12).max_iter(3000);
        let (xh, _) = pdhg(&y, &p, &DataFidelity::l1(), &Prior::tv(0.01).into(), &cfg).unwrap();
        let err = p.apply(&xh).unwrap().sub(&y).max_abs();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn splitting_methods_reject_non_l2() {
        let y = Tensor::full(&[4, 4], 1.0);
        let p = physics::make_denoising(&[4, 4]);
        for alg in [Algorithm::Admm, Algorithm::Drs, Algorithm::Pgd, Algorithm::Fista] {
            let r = reconstruct(&y, &p, &DataFidelity::l1(), &Regularizer::None, &AlgoConfig::new(alg));
            assert!(matches!(r, Err(Error::Capability(_))), "{alg:?}");
        }
    }

    #[test]
    fn pdhg_rejects_large_steps() {
        let y = Tensor::full(&[4, 4], 1.0);
        let p = physics::make_denoising(&[4, 4]);
        let mut cfg = AlgoConfig::new(Algorithm::Pdhg);
        cfg.tau = crate::optim::Step::Fixed(1.0);
        cfg.sigma_dual = crate::optim::Step::Fixed(1.0);
        assert!(matches!(
            pdhg(&y, &p, &DataFidelity::l2(), &Regularizer::None, &cfg),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn pgd_objective_is_monotone() {
        let mut rng = RngState::new(5);
        let p = physics::make_blur(generators::gaussian_kernel(1.0, 5).unwrap(), &[16, 16]).unwrap();
        let x = Tensor::randn(&[16, 16], DType::Real64, &mut rng);
        let y = p.apply(&x).unwrap();
        let cfg = AlgoConfig::new(Algorithm::Pgd).max_iter(100).record_objective();
        let (_, log) = pgd(&y, &p, &DataFidelity::l2(), &Prior::tv(0.05).into(), &cfg).unwrap();
        assert_eq!(log.objective.len(), log.iterations);
        for w in log.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn pnp_pgd_reaches_fixed_point() {
        let mut rng = RngState::new(6);
        let p = physics::make_denoising(&[12, 12]);
        let y = Tensor::randn(&[12, 12], DType::Real64, &mut rng);
        let reg = Regularizer::Denoiser {
            denoiser: Denoiser::default(),
            sigma: 0.1,
        };
        let cfg = AlgoConfig::new(Algorithm::Pgd).max_iter(1000);
        let (_, log) = pgd(&y, &p, &DataFidelity::l2(), &reg, &cfg).unwrap();
        assert!(*log.changes.last().unwrap() < 1e-6);
        assert_eq!(log.stop_reason, Some(StopReason::Converged));
    }
}
