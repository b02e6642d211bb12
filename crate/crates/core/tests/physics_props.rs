use invkit::fidelity::NoiseModel;
use invkit::linop::{adjoint_test, operator_norm};
use invkit::metrics::{psnr, MetricConfig};
use invkit::physics::{self, generators, Physics, PhysicsParams};
use invkit::{DType, RngState, Tensor};

fn disc(h: usize) -> Tensor {
    let c = (h as f64 - 1.0) / 2.0;
    let r = 0.3 * h as f64;
    let data = (0..h * h)
        .map(|k| {
            let (i, j) = ((k / h) as f64, (k % h) as f64);
            if (i - c).powi(2) + (j - c).powi(2) <= r * r {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Tensor::from_real(vec![h, h], data).unwrap()
}

fn all_physics(rng: &mut RngState) -> Vec<Physics> {
    let s = [16, 16];
    vec![
        physics::make_denoising(&s),
        physics::make_inpainting(generators::bernoulli_mask(&s, 0.5, rng).unwrap()).unwrap(),
        physics::make_blur(generators::motion_kernel(4, rng).unwrap(), &s).unwrap(),
        physics::make_downsampling(2, 1.0, &s).unwrap(),
        physics::make_mri(generators::cartesian_mri_mask(&s, 4.0, 0.125, rng).unwrap()).unwrap(),
        physics::make_tomography(physics::uniform_angles(12), &s).unwrap(),
        physics::make_compressed_sensing_with_shape(64, &s, rng).unwrap(),
    ]
}

#[test]
fn every_operator_passes_dot_test() {
    let mut rng = RngState::new(1);
    for p in all_physics(&mut rng) {
        let err = adjoint_test(p.map().as_ref(), &mut rng, 20).unwrap();
        assert!(err <= 1e-10, "{}: {err}", p.descriptor());
    }
}

#[test]
fn rebuilt_physics_agree_on_random_inputs() {
    let mut rng = RngState::new(2);
    for p in all_physics(&mut rng) {
        let json = serde_json::to_string(&p.spec()).unwrap();
        let q = Physics::from_spec(serde_json::from_str(&json).unwrap()).unwrap();
        let x = Tensor::randn(&p.domain().shape, p.domain().dtype, &mut rng);
        let diff = p.apply(&x).unwrap().sub(&q.apply(&x).unwrap()).max_abs();
        assert!(diff <= 1e-12, "{}: {diff}", p.descriptor());
    }
}

#[test]
fn zero_noise_forward_is_exact_apply() {
    let mut rng = RngState::new(3);
    for p in all_physics(&mut rng) {
        let p = p.with_noise(NoiseModel::Gaussian { sigma: 0.0 }).unwrap();
        let x = Tensor::randn(&p.domain().shape, p.domain().dtype, &mut rng);
        assert_eq!(p.forward(&x, &mut rng).unwrap(), p.apply(&x).unwrap());
    }
}

#[test]
fn fourier_diagonal_norms_match_spectrum() {
    let mut rng = RngState::new(4);
    let full = Tensor::full(&[16, 16], 1.0);
    for p in [
        physics::make_blur(generators::gaussian_kernel(1.5, 7).unwrap(), &[16, 16]).unwrap(),
        physics::make_blur(generators::motion_kernel(5, &mut rng).unwrap(), &[16, 16]).unwrap(),
        physics::make_mri(full.clone()).unwrap(),
    ] {
        let diag = p.map().spectral_diagonal().unwrap();
        let (s, _) = operator_norm(p.map().as_ref(), &mut rng, 1e-14, 20000).unwrap();
        assert!((s - diag.max_modulus()).abs() <= 1e-6, "{}: {s}", p.descriptor());
    }
}

#[test]
fn mri_normal_operator_is_projection() {
    let mut rng = RngState::new(5);
    let mask = generators::cartesian_mri_mask(&[16, 16], 4.0, 0.125, &mut rng).unwrap();
    let p = physics::make_mri(mask).unwrap();
    let x = Tensor::randn(&[16, 16], DType::Complex128, &mut rng);
    let once = p.apply_adjoint(&p.apply(&x).unwrap()).unwrap();
    let twice = p.apply_adjoint(&p.apply(&once).unwrap()).unwrap();
    assert!(twice.sub(&once).max_abs() <= 1e-10);
}

#[test]
fn sinogram_mass_matches_image_mass() {
    let mut rng = RngState::new(6);
    let h = 24;
    let p = physics::make_tomography(physics::uniform_angles(30), &[h, h]).unwrap();
    let x = Tensor::randn(&[h, h], DType::Real64, &mut rng).abs();
    let y = p.apply(&x).unwrap();
    let det = physics::detector_count(h);
    let total = x.sum().re;
    for row in y.as_real().unwrap().chunks_exact(det) {
        let mass: f64 = row.iter().sum();
        assert!((mass - total).abs() <= 1e-8 * total.max(1.0));
    }
}

#[test]
fn fbp_beats_normalized_backprojection() {
    let h = 128;
    let x = disc(h);
    let p = physics::make_tomography(physics::uniform_angles(180), &[h, h]).unwrap();
    let y = p.apply(&x).unwrap();
    let cfg = MetricConfig::default();
    let rec = physics::fbp(&p, &y).unwrap();
    let bp = p.apply_adjoint(&y).unwrap();
    let vals = bp.as_real().unwrap();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bp = bp.map_real(|v| (v - lo) / (hi - lo));
    let (a, b) = (psnr(&rec, &x, &cfg).unwrap(), psnr(&bp, &x, &cfg).unwrap());
    assert!(a - b >= 5.0, "fbp {a:.2} dB vs backprojection {b:.2} dB");
}

#[test]
fn cs_columns_have_unit_mean_square_norm() {
    let mut rng = RngState::new(7);
    let p = physics::make_compressed_sensing(200, 100, &mut rng).unwrap();
    let PhysicsParams::CompressedSensing { matrix, m, n, .. } = p.params() else {
        panic!("wrong params");
    };
    let mut mean = 0.0;
    for j in 0..*n {
        mean += (0..*m).map(|i| matrix[i * n + j].powi(2)).sum::<f64>();
    }
    mean /= *n as f64;
    assert!((mean - 1.0).abs() <= 0.1, "{mean}");
}

#[test]
fn cartesian_mask_column_count_is_on_target() {
    let mut rng = RngState::new(8);
    let (w, r, c) = (64usize, 4.0, 0.08);
    let nc = (c * w as f64).ceil();
    let p = (w as f64 / r - nc) / (w as f64 - nc);
    let draws = 100;
    let mut total = 0.0;
    for _ in 0..draws {
        let mask = generators::cartesian_mri_mask(&[32, w], r, c, &mut rng).unwrap();
        let first_row = &mask.as_real().unwrap()[..w];
        total += first_row.iter().sum::<f64>();
    }
    let mean = total / draws as f64;
    let sd = ((w as f64 - nc) * p * (1.0 - p) / draws as f64).sqrt();
    assert!((mean - w as f64 / r).abs() <= 3.0 * sd, "mean {mean}, sd {sd}");
}

#[test]
fn downsampling_dot_test_and_constants() {
    let mut rng = RngState::new(9);
    let p = physics::make_downsampling(4, 1.5, &[32, 32]).unwrap();
    assert!(adjoint_test(p.map().as_ref(), &mut rng, 20).unwrap() <= 1e-10);
    let y = p.apply(&Tensor::full(&[32, 32], 0.7)).unwrap();
    assert_eq!(y.shape(), &[8, 8]);
    assert!(y.add_scalar(-0.7).max_abs() <= 1e-12);
}
