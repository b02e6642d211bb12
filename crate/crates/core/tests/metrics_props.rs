use invkit::metrics::{mae, mse, psnr, ssim, MetricConfig};
use invkit::{DType, RngState, Tensor};
use num_complex::Complex64;
use proptest::prelude::*;

/// Direct SSIM: for each valid window position, weighted means first, then
/// weighted central moments in a second pass.
fn ssim_two_pass(a: &[f64], b: &[f64], h: usize, w: usize, range: f64) -> f64 {
    let n = 11;
    let sigma = 1.5f64;
    let mut win = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            win[i * n + j] = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
        }
    }
    let s: f64 = win.iter().sum();
    win.iter_mut().for_each(|v| *v /= s);
    let (c1, c2) = ((0.01 * range).powi(2), (0.03 * range).powi(2));
    let mut total = 0.0;
    let mut count = 0;
    for i0 in 0..=h - n {
        for j0 in 0..=w - n {
            let at = |img: &[f64], i: usize, j: usize| img[(i0 + i) * w + j0 + j];
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    ma += win[i * n + j] * at(a, i, j);
                    mb += win[i * n + j] * at(b, i, j);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let (da, db) = (at(a, i, j) - ma, at(b, i, j) - mb);
                    va += win[i * n + j] * da * da;
                    vb += win[i * n + j] * db * db;
                    cov += win[i * n + j] * da * db;
                }
            }
            total += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

fn uniform_image(h: usize, w: usize, rng: &mut RngState) -> Tensor {
    Tensor::from_real(vec![h, w], (0..h * w).map(|_| rng.uniform()).collect()).unwrap()
}

#[test]
fn ssim_matches_two_pass_reference() {
    let mut rng = RngState::new(1);
    let cfg = MetricConfig::default();
    for _ in 0..5 {
        let a = uniform_image(32, 32, &mut rng);
        let noise = Tensor::randn(&[32, 32], DType::Real64, &mut rng).scale(0.2);
        let b = a.add(&noise);
        let want = ssim_two_pass(a.as_real().unwrap(), b.as_real().unwrap(), 32, 32, 1.0);
        let got = ssim(&a, &b, &cfg).unwrap();
        assert!((got - want).abs() <= 1e-6, "{got} vs {want}");
    }
}

#[test]
fn ssim_of_inverted_pattern_is_negative() {
    let data = (0..32 * 32).map(|k| if (k / 32 + k % 32) % 2 == 0 { 1.0 } else { 0.0 }).collect();
    let x = Tensor::from_real(vec![32, 32], data).unwrap();
    let inv = x.scale(-1.0).add_scalar(1.0);
    assert!(ssim(&inv, &x, &MetricConfig::default()).unwrap() < 0.0);
}

#[test]
fn metric_examples() {
    let x = Tensor::full(&[16, 16], 0.25);
    let y = x.add_scalar(0.5);
    let cfg = MetricConfig::default();
    assert!((psnr(&y, &x, &cfg).unwrap() - 6.0206).abs() <= 1e-4);
    assert_eq!(psnr(&x, &x, &cfg).unwrap(), f64::INFINITY);
    assert_eq!(mse(&y, &x).unwrap(), 0.25);
    assert_eq!(mae(&y, &x).unwrap(), 0.5);
    let wide = MetricConfig { data_range: 2.0, ..cfg };
    let a = psnr(&y.scale(2.0), &x.scale(2.0), &wide).unwrap();
    assert!((a - psnr(&y, &x, &cfg).unwrap()).abs() <= 1e-12);
}

#[test]
fn complex_inputs_use_magnitude() {
    let mut rng = RngState::new(2);
    let a = Tensor::randn(&[16, 16], DType::Complex128, &mut rng);
    let b = Tensor::randn(&[16, 16], DType::Complex128, &mut rng);
    let cfg = MetricConfig {
        complex_magnitude: true,
        data_range: 4.0,
        ..MetricConfig::default()
    };
    assert_eq!(psnr(&a, &b, &cfg).unwrap(), psnr(&a.abs(), &b.abs(), &cfg).unwrap());
    assert_eq!(ssim(&a, &b, &cfg).unwrap(), ssim(&a.abs(), &b.abs(), &cfg).unwrap());
    let unit = Tensor::from_complex(vec![1], vec![Complex64::new(0.6, 0.8)]).unwrap();
    let one = Tensor::full(&[1], 1.0);
    assert_eq!(psnr(&unit, &one, &cfg).unwrap(), f64::INFINITY);
}

#[test]
fn mse_and_mae_match_direct_sums() {
    let mut rng = RngState::new(3);
    let a = Tensor::randn(&[7, 9], DType::Real64, &mut rng);
    let b = Tensor::randn(&[7, 9], DType::Real64, &mut rng);
    let (av, bv) = (a.as_real().unwrap(), b.as_real().unwrap());
    let mut sq = 0.0;
    let mut ab = 0.0;
    for k in 0..av.len() {
        sq += (av[k] - bv[k]) * (av[k] - bv[k]);
        ab += (av[k] - bv[k]).abs();
    }
    assert!((mse(&a, &b).unwrap() - sq / 63.0).abs() <= 1e-14);
    assert!((mae(&a, &b).unwrap() - ab / 63.0).abs() <= 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ssim_is_symmetric_and_reflexive(seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let a = uniform_image(16, 20, &mut rng);
        let b = uniform_image(16, 20, &mut rng);
        let cfg = MetricConfig::default();
        prop_assert_eq!(ssim(&a, &a, &cfg).unwrap(), 1.0);
        prop_assert!((ssim(&a, &b, &cfg).unwrap() - ssim(&b, &a, &cfg).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn psnr_decreases_with_error(seed in any::<u64>(), s1 in 0.01f64..1.0, factor in 1.01f64..4.0) {
        let mut rng = RngState::new(seed);
        let x = uniform_image(8, 8, &mut rng);
        let e = Tensor::randn(&[8, 8], DType::Real64, &mut rng);
        let cfg = MetricConfig::default();
        let near = psnr(&x.add(&e.scale(s1)), &x, &cfg).unwrap();
        let far = psnr(&x.add(&e.scale(s1 * factor)), &x, &cfg).unwrap();
        prop_assert!(far < near);
    }
}
