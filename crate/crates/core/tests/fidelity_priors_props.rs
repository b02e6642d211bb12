use invkit::fidelity::{DataFidelity, NoiseModel};
use invkit::priors::{Denoiser, Prior};
use invkit::{DType, RngState, Tensor};
use proptest::prelude::*;

fn scalar(v: f64) -> Tensor {
    Tensor::from_real(vec![1], vec![v]).unwrap()
}

fn first(t: &Tensor) -> f64 {
    t.as_real().unwrap()[0]
}

/// Mean and variance of `samples` against analytic values, each within three
/// standard errors (the variance's from the empirical fourth moment).
fn check_moments(label: &str, samples: &[f64], mean: f64, var: f64) {
    let n = samples.len() as f64;
    let m = samples.iter().sum::<f64>() / n;
    let v = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = samples.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let se_mean = (var / n).sqrt();
    let se_var = ((m4 - v * v) / n).sqrt();
    assert!((m - mean).abs() <= 3.0 * se_mean, "{label}: mean {m} vs {mean}");
    assert!((v - var).abs() <= 3.0 * se_var, "{label}: variance {v} vs {var}");
}

#[test]
fn noise_moments_match_analytic_values() {
    let mut rng = RngState::new(11);
    let n = 100_000;
    let cases = [
        (NoiseModel::Gaussian { sigma: 0.3 }, 2.0, 0.09),
        (NoiseModel::Poisson { gain: 0.5 }, 3.0, 1.5),
        (NoiseModel::Poisson { gain: 1.0 }, 700.0, 700.0),
        (NoiseModel::Poisson { gain: 2.0 }, 5000.0, 10000.0),
        (NoiseModel::PoissonGaussian { gain: 0.25, sigma: 0.2 }, 1.0, 0.25 + 0.04),
        (NoiseModel::Uniform { amplitude: 0.5 }, -1.0, 0.25 / 3.0),
        (NoiseModel::Gamma { concentration: 4.0 }, 2.0, 1.0),
    ];
    for (model, z, var) in cases {
        let y = model.apply(&Tensor::full(&[n], z), &mut rng).unwrap();
        check_moments(&format!("{model:?}"), y.as_real().unwrap(), z, var);
    }
}

#[test]
fn gaussian_noise_on_constant_image() {
    let mut rng = RngState::new(12);
    let model = NoiseModel::Gaussian { sigma: 0.1 };
    let x = Tensor::full(&[64, 64], 0.5);
    let draws = 100;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..draws {
        for &v in model.apply(&x, &mut rng).unwrap().as_real().unwrap() {
            sum += v;
            sq += v * v;
        }
    }
    let total = (64 * 64 * draws) as f64;
    let mean = sum / total;
    let var = sq / total - mean * mean;
    assert!((mean - 0.5).abs() <= 3.0 * 0.1 / total.sqrt());
    assert!((var - 0.01).abs() <= 0.001);
}

fn optimality_residual(fid: &DataFidelity, y: f64, v: f64, gamma: f64) -> f64 {
    let z = first(&fid.prox(&scalar(y), &scalar(v), gamma).unwrap());
    match fid.kind {
        invkit::fidelity::FidelityKind::L2 => (gamma * (z - y) + z - v).abs(),
        invkit::fidelity::FidelityKind::L1 => {
            if z == y {
                ((z - v).abs() - gamma).max(0.0)
            } else {
                (gamma * (z - y).signum() + z - v).abs()
            }
        }
        invkit::fidelity::FidelityKind::PoissonNll { background } => (gamma * (1.0 - y / (z + background)) + z - v).abs(),
    }
}

#[test]
fn fidelity_prox_optimality_on_random_triples() {
    let mut rng = RngState::new(13);
    for _ in 0..100 {
        let y = 3.0 * rng.uniform();
        let v = 4.0 * rng.normal();
        let gamma = 0.01 + 2.0 * rng.uniform();
        let beta = rng.uniform();
        for fid in [DataFidelity::l2(), DataFidelity::l1(), DataFidelity::poisson_nll(0.0), DataFidelity::poisson_nll(beta)] {
            let r = optimality_residual(&fid, y, v, gamma);
            assert!(r <= 1e-8, "{fid:?} y={y} v={v} γ={gamma}: residual {r}");
        }
    }
}

#[test]
fn poisson_prox_closed_form_roots() {
    let fid = DataFidelity::poisson_nll(0.0);
    assert!((first(&fid.prox(&scalar(1.0), &scalar(1.0), 1.0).unwrap()) - 1.0).abs() <= 1e-12);
    let root = (5f64.sqrt() - 1.0) / 2.0;
    assert!((first(&fid.prox(&scalar(1.0), &scalar(0.0), 1.0).unwrap()) - root).abs() <= 1e-12);
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = RngState::new(14);
    let y = Tensor::randn(&[6], DType::Real64, &mut rng).abs();
    let z = Tensor::randn(&[6], DType::Real64, &mut rng).abs().add_scalar(0.5);
    for fid in [DataFidelity::l2(), DataFidelity::poisson_nll(0.2), DataFidelity::l2().weighted(2.5)] {
        let g = fid.grad(&y, &z).unwrap();
        let h = 1e-5;
        for i in 0..6 {
            let mut zp = z.clone();
            zp.as_real_mut().unwrap()[i] += h;
            let mut zm = z.clone();
            zm.as_real_mut().unwrap()[i] -= h;
            let fd = (fid.eval(&y, &zp).unwrap() - fid.eval(&y, &zm).unwrap()) / (2.0 * h);
            let gi = g.as_real().unwrap()[i];
            assert!((fd - gi).abs() <= 1e-6 * gi.abs().max(1.0), "{fid:?}[{i}]: {fd} vs {gi}");
        }
    }

    let tik = Prior::tikhonov(1.0);
    let x = Tensor::randn(&[5], DType::Real64, &mut rng);
    let g = tik.grad(&x).unwrap();
    for i in 0..5 {
        let h = 1e-4;
        let mut xp = x.clone();
        xp.as_real_mut().unwrap()[i] += h;
        let mut xm = x.clone();
        xm.as_real_mut().unwrap()[i] -= h;
        let fd = (tik.eval(&xp).unwrap() - tik.eval(&xm).unwrap()) / (2.0 * h);
        assert!((fd - g.as_real().unwrap()[i]).abs() <= 1e-8);
    }
}

#[test]
fn wavelet_prox_beats_random_perturbations() {
    let mut rng = RngState::new(15);
    let prior = Prior::wavelet_l1(2, 1.0);
    let v = Tensor::randn(&[16, 16], DType::Real64, &mut rng);
    let gamma = 0.4;
    let objective = |z: &Tensor| gamma * prior.eval(z).unwrap() + 0.5 * z.sub(&v).norm_sq();
    let z = prior.prox(&v, gamma).unwrap();
    let best = objective(&z);
    assert!(best <= objective(&v) && best <= objective(&v.zeros_like()));
    for _ in 0..200 {
        let delta = Tensor::randn(&[16, 16], DType::Real64, &mut rng).scale(1e-3);
        assert!(best <= objective(&z.add(&delta)) + 1e-14);
    }
}

#[test]
fn denoisers_commute_with_constant_shifts() {
    let mut rng = RngState::new(16);
    let v = Tensor::randn(&[12, 12], DType::Real64, &mut rng);
    let c = 0.73;
    for d in [Denoiser::gaussian_smoother(1.5), Denoiser::TvDenoiser { lambda_tv: 1.0 }, Denoiser::Median] {
        let a = d.denoise(&v.add_scalar(c), 0.3).unwrap();
        let b = d.denoise(&v, 0.3).unwrap().add_scalar(c);
        assert!(a.sub(&b).max_abs() <= 1e-6, "{d:?}: {}", a.sub(&b).max_abs());
    }
}

#[test]
fn narrow_smoother_approaches_identity() {
    let mut rng = RngState::new(17);
    let v = Tensor::randn(&[8, 8], DType::Real64, &mut rng);
    let out = Denoiser::gaussian_smoother(1e-3).denoise(&v, 0.0).unwrap();
    assert!(out.sub(&v).max_abs() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fidelity_proxes_are_nonexpansive(seed in any::<u64>(), gamma in 0.01f64..5.0) {
        let mut rng = RngState::new(seed);
        let y = Tensor::randn(&[10], DType::Real64, &mut rng).abs();
        let v1 = Tensor::randn(&[10], DType::Real64, &mut rng);
        let v2 = Tensor::randn(&[10], DType::Real64, &mut rng);
        for fid in [DataFidelity::l2(), DataFidelity::l1(), DataFidelity::poisson_nll(0.3)] {
            let d = fid.prox(&y, &v1, gamma).unwrap().sub(&fid.prox(&y, &v2, gamma).unwrap()).norm();
            prop_assert!(d <= v1.sub(&v2).norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn prior_values_are_nonnegative(seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let x = Tensor::randn(&[8, 8], DType::Real64, &mut rng);
        for p in [Prior::tv(1.0), Prior::wavelet_l1(3, 1.0), Prior::l1(0.5), Prior::tikhonov(2.0)] {
            prop_assert!(p.eval(&x).unwrap() >= 0.0);
        }
    }
}
