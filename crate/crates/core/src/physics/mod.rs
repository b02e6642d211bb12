//! Forward operators `A_ξ` together with their parameters `ξ` and a noise
//! model, so that `y = N(A_ξ(x))`.

mod convolution;
pub mod generators;
mod mri;
mod tomography;

use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::NoiseModel;
use crate::linop::{compose, pinv_apply, DiagonalMap, IdentityMap, MatrixMap, Operator, Space, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::rng::RngState;
use crate::tensor::Tensor;

pub use convolution::{BlurMap, SubsampleMap};
pub use mri::MriMap;
pub use tomography::{detector_count, RadonMap};

/// Operator parameters `ξ`, tagged by the operator's descriptor string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "descriptor", rename_all = "snake_case")]
pub enum PhysicsParams {
    Denoising {
        shape: Vec<usize>,
    },
    Inpainting {
        mask: Tensor,
    },
    Blur {
        kernel: Tensor,
        shape: Vec<usize>,
    },
    Downsampling {
        factor: usize,
        /// Standard deviation of the Gaussian anti-alias filter (0 disables it).
        antialias: f64,
        shape: Vec<usize>,
    },
    Mri {
        mask: Tensor,
    },
    Tomography {
        /// Projection angles in degrees.
        angles: Vec<f64>,
        shape: Vec<usize>,
    },
    CompressedSensing {
        m: usize,
        n: usize,
        seed: u64,
        shape: Vec<usize>,
        /// Row-major `m × n`, entries `~ N(0, 1/m)` drawn from `seed`.
        matrix: Vec<f64>,
    },
}

impl PhysicsParams {
    pub fn descriptor(&self) -> &'static str {
        match self {
            PhysicsParams::Denoising { .. } => "denoising",
            PhysicsParams::Inpainting { .. } => "inpainting",
            PhysicsParams::Blur { .. } => "blur",
            PhysicsParams::Downsampling { .. } => "downsampling",
            PhysicsParams::Mri { .. } => "mri",
            PhysicsParams::Tomography { .. } => "tomography",
            PhysicsParams::CompressedSensing { .. } => "compressed_sensing",
        }
    }
}

/// Serializable form of a [`Physics`]: parameters plus noise model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicsSpec {
    #[serde(flatten)]
    pub params: PhysicsParams,
    #[serde(default)]
    pub noise: NoiseModel,
}

#[derive(Clone, Debug)]
pub struct Physics {
    map: Operator,
    params: PhysicsParams,
    noise: NoiseModel,
}

pub(crate) fn binary_values<'a>(mask: &'a Tensor, what: &str) -> Result<&'a [f64]> {
    let v = mask.real_values(what)?;
    if let Some(bad) = v.iter().find(|&&m| m != 0.0 && m != 1.0) {
        return Err(Error::validation(format!("{what} must be binary, found {bad}")));
    }
    Ok(v)
}

fn gaussian_matrix(m: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngState::new(seed);
    let scale = 1.0 / (m as f64).sqrt();
    (0..m * n).map(|_| scale * rng.normal()).collect()
}

impl Physics {
    /// Builds the operator described by `params`.
    pub fn new(params: PhysicsParams, noise: NoiseModel) -> Result<Self> {
        noise.validate()?;
        let map: Operator = match &params {
            PhysicsParams::Denoising { shape } => Arc::new(IdentityMap::new(Space::real(shape.clone()))),
            PhysicsParams::Inpainting { mask } => {
                let m = binary_values(mask, "inpainting mask")?;
                Arc::new(DiagonalMap::new(Space::real(mask.shape().to_vec()), m.to_vec())?)
            }
            PhysicsParams::Blur { kernel, shape } => Arc::new(BlurMap::new(kernel, shape)?),
            PhysicsParams::Downsampling {
                factor,
                antialias,
                shape,
            } => {
                let sub: Operator = Arc::new(SubsampleMap::new(*factor, shape)?);
                let blur: Operator = Arc::new(BlurMap::new(&generators::antialias_kernel(*antialias)?, shape)?);
                compose(sub, blur)?
            }
            PhysicsParams::Mri { mask } => Arc::new(MriMap::new(mask)?),
            PhysicsParams::Tomography { angles, shape } => Arc::new(RadonMap::new(angles, shape)?),
            PhysicsParams::CompressedSensing {
                m,
                n,
                shape,
                matrix,
                ..
            } => Arc::new(MatrixMap::with_shapes(*m, *n, matrix.clone(), shape.clone(), vec![*m])?),
        };
        Ok(Physics { map, params, noise })
    }

    pub fn from_spec(spec: PhysicsSpec) -> Result<Self> {
        Physics::new(spec.params, spec.noise)
    }

    pub fn spec(&self) -> PhysicsSpec {
        PhysicsSpec {
            params: self.params.clone(),
            noise: self.noise.clone(),
        }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Result<Self> {
        noise.validate()?;
        self.noise = noise;
        Ok(self)
    }

    pub fn map(&self) -> &Operator {
        &self.map
    }

    pub fn params(&self) -> &PhysicsParams {
        &self.params
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn descriptor(&self) -> &'static str {
        self.params.descriptor()
    }

    pub fn domain(&self) -> &Space {
        self.map.domain()
    }

    pub fn range(&self) -> &Space {
        self.map.range()
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.map.apply(x)
    }

    pub fn apply_adjoint(&self, u: &Tensor) -> Result<Tensor> {
        self.map.apply_adjoint(u)
    }

    /// `y = N(A(x))`.
    pub fn forward(&self, x: &Tensor, rng: &mut RngState) -> Result<Tensor> {
        self.noise.apply(&self.map.apply(x)?, rng)
    }

    /// FBP for tomography, the adjoint where it is already the
    /// pseudo-inverse, least squares otherwise.
    pub fn pseudo_inverse(&self, y: &Tensor) -> Result<Tensor> {
        match &self.params {
            PhysicsParams::Tomography { .. } => fbp(self, y),
            PhysicsParams::Mri { .. } => self.map.apply_adjoint(y),
            _ => pinv_apply(self.map.as_ref(), y, DEFAULT_TOL, DEFAULT_MAX_ITER),
        }
    }

    /// Pixelwise sampling mask, for operators that have one.
    pub fn mask(&self) -> Option<&Tensor> {
        match &self.params {
            PhysicsParams::Inpainting { mask } | PhysicsParams::Mri { mask } => Some(mask),
            _ => None,
        }
    }

    /// Same operator family with a different sampling mask.
    pub fn with_mask(&self, mask: Tensor) -> Result<Self> {
        let params = match &self.params {
            PhysicsParams::Inpainting { .. } => PhysicsParams::Inpainting { mask },
            PhysicsParams::Mri { .. } => PhysicsParams::Mri { mask },
            other => {
                return Err(Error::capability(format!(
                    "{} physics has no pixelwise mask",
                    other.descriptor()
                )))
            }
        };
        Physics::new(params, self.noise.clone())
    }
}

pub fn make_denoising(shape: &[usize]) -> Physics {
    Physics::new(
        PhysicsParams::Denoising { shape: shape.to_vec() },
        NoiseModel::None,
    )
    .expect("identity physics is always valid")
}

pub fn make_inpainting(mask: Tensor) -> Result<Physics> {
    Physics::new(PhysicsParams::Inpainting { mask }, NoiseModel::None)
}

pub fn make_blur(kernel: Tensor, shape: &[usize]) -> Result<Physics> {
    Physics::new(
        PhysicsParams::Blur {
            kernel,
            shape: shape.to_vec(),
        },
        NoiseModel::None,
    )
}

pub fn make_downsampling(factor: usize, antialias: f64, shape: &[usize]) -> Result<Physics> {
    Physics::new(
        PhysicsParams::Downsampling {
            factor,
            antialias,
            shape: shape.to_vec(),
        },
        NoiseModel::None,
    )
}

pub fn make_mri(mask: Tensor) -> Result<Physics> {
    Physics::new(PhysicsParams::Mri { mask }, NoiseModel::None)
}

pub fn make_tomography(angles: Vec<f64>, shape: &[usize]) -> Result<Physics> {
    Physics::new(
        PhysicsParams::Tomography {
            angles,
            shape: shape.to_vec(),
        },
        NoiseModel::None,
    )
}

/// `m × n` Gaussian sensing matrix acting on flat vectors.
pub fn make_compressed_sensing(m: usize, n: usize, rng: &mut RngState) -> Result<Physics> {
    make_compressed_sensing_with_shape(m, &[n], rng)
}

/// Gaussian sensing matrix acting on the flattened `shape`.
pub fn make_compressed_sensing_with_shape(m: usize, shape: &[usize], rng: &mut RngState) -> Result<Physics> {
    let n: usize = shape.iter().product();
    if m == 0 || n == 0 {
        return Err(Error::validation(format!("compressed sensing needs m, n >= 1, got {m}, {n}")));
    }
    let seed = rng.next_u64();
    Physics::new(
        PhysicsParams::CompressedSensing {
            m,
            n,
            seed,
            shape: shape.to_vec(),
            matrix: gaussian_matrix(m, n, seed),
        },
        NoiseModel::None,
    )
}

/// `n_angles` angles evenly covering `[0°, 180°)`.
pub fn uniform_angles(n_angles: usize) -> Vec<f64> {
    (0..n_angles).map(|k| k as f64 * 180.0 / n_angles as f64).collect()
}

/// Filtered backprojection for tomography physics.
pub fn fbp(physics: &Physics, y: &Tensor) -> Result<Tensor> {
    match physics.params() {
        PhysicsParams::Tomography { angles, shape } => RadonMap::new(angles, shape)?.fbp(y),
        other => Err(Error::capability(format!("fbp needs tomography physics, got {}", other.descriptor()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{adjoint_test, operator_norm};
    use crate::tensor::DType;

    fn all_physics(rng: &mut RngState) -> Vec<Physics> {
        let mask = generators::bernoulli_mask(&[12, 12], 0.5, rng).unwrap();
        vec![
            make_denoising(&[12, 12]),
            make_inpainting(mask).unwrap(),
            make_blur(generators::motion_kernel(4, rng).unwrap(), &[12, 12]).unwrap(),
            make_downsampling(2, 1.0, &[3, 12, 12]).unwrap(),
            make_mri(generators::cartesian_mri_mask(&[12, 12], 3.0, 0.1, rng).unwrap()).unwrap(),
            make_tomography(uniform_angles(9), &[12, 12]).unwrap(),
            make_compressed_sensing_with_shape(40, &[12, 12], rng).unwrap(),
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
    fn rebuilding_from_json_reproduces_the_map() {
        let mut rng = RngState::new(2);
        for p in all_physics(&mut rng) {
            let json = serde_json::to_string(&p.spec()).unwrap();
            let q = Physics::from_spec(serde_json::from_str(&json).unwrap()).unwrap();
            assert_eq!(q.descriptor(), p.descriptor());
            let x = Tensor::randn(&p.domain().shape, p.domain().dtype, &mut rng);
            let d = p.apply(&x).unwrap().sub(&q.apply(&x).unwrap()).max_abs();
            assert!(d <= 1e-12, "{}: {d}", p.descriptor());
        }
    }

    #[test]
    fn noiseless_forward_is_apply() {
        let mut rng = RngState::new(3);
        for p in all_physics(&mut rng) {
            let x = Tensor::randn(&p.domain().shape, p.domain().dtype, &mut rng);
            assert_eq!(p.forward(&x, &mut rng).unwrap(), p.apply(&x).unwrap());
        }
    }

    #[test]
    fn identity_examples() {
        let mut rng = RngState::new(4);
        let p = make_denoising(&[5, 5]);
        let (s, _) = operator_norm(p.map().as_ref(), &mut rng, 1e-10, 100).unwrap();
        assert!((s - 1.0).abs() < 1e-9);
        assert!(p.map().is_unitary());

        let delta = Tensor::from_real(vec![3, 3], vec![0., 0., 0., 0., 1., 0., 0., 0., 0.]).unwrap();
        let blur = make_blur(delta, &[6, 6]).unwrap();
        let x = Tensor::randn(&[6, 6], DType::Real64, &mut rng);
        assert!(blur.apply(&x).unwrap().sub(&x).max_abs() < 1e-12);

        let down = make_downsampling(1, 0.0, &[6, 6]).unwrap();
        assert!(down.apply(&x).unwrap().sub(&x).max_abs() < 1e-12);
    }

    #[test]
    fn constants_pass_through_normalized_filters() {
        let c = Tensor::full(&[16, 16], 0.3);
        let blur = make_blur(generators::gaussian_kernel(2.0, 9).unwrap(), &[16, 16]).unwrap();
        assert!(blur.apply(&c).unwrap().add_scalar(-0.3).max_abs() < 1e-12);
        let down = make_downsampling(4, 1.5, &[16, 16]).unwrap();
        let y = down.apply(&c).unwrap();
        assert_eq!(y.shape(), &[4, 4]);
        assert!(y.add_scalar(-0.3).max_abs() < 1e-12);
        assert!(make_downsampling(3, 1.0, &[16, 16]).is_err());
    }

    #[test]
    fn inpainting_examples() {
        let mut rng = RngState::new(5);
        let mask = generators::bernoulli_mask(&[32, 32], 0.3, &mut rng).unwrap();
        let p = make_inpainting(mask.clone()).unwrap();
        assert!(p.map().is_projection());
        let y = p.apply(&Tensor::full(&[32, 32], 1.0)).unwrap();
        let nonzero = y.as_real().unwrap().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nonzero as f64, mask.sum().re);
        let bad = Tensor::from_real(vec![2], vec![1.0, 0.5]).unwrap();
        assert!(matches!(make_inpainting(bad), Err(Error::Validation(_))));
    }

    #[test]
    fn mri_examples() {
        let mut rng = RngState::new(6);
        let full = make_mri(Tensor::full(&[8, 8], 1.0)).unwrap();
        let x = Tensor::randn(&[8, 8], DType::Complex128, &mut rng);
        assert!((full.apply(&x).unwrap().norm() - x.norm()).abs() < 1e-12);
        let zero = make_mri(Tensor::full(&[8, 8], 0.0)).unwrap();
        assert_eq!(zero.apply(&x).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn fourier_norm_matches_spectral_diagonal() {
        let mut rng = RngState::new(7);
        let blur = make_blur(generators::gaussian_kernel(1.0, 5).unwrap(), &[16, 16]).unwrap();
        let full = make_mri(Tensor::full(&[8, 8], 1.0)).unwrap();
        for p in [blur, full] {
            let d = p.map().spectral_diagonal().unwrap().max_modulus();
            let (s, _) = operator_norm(p.map().as_ref(), &mut rng, 1e-13, 5000).unwrap();
            assert!((s - d).abs() <= 1e-6, "{s} vs {d}");
        }
    }

    #[test]
    fn compressed_sensing_is_seed_deterministic() {
        let a = make_compressed_sensing(20, 30, &mut RngState::new(9)).unwrap();
        let b = make_compressed_sensing(20, 30, &mut RngState::new(9)).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn mask_swap_is_limited_to_masked_physics() {
        let p = make_inpainting(Tensor::full(&[4, 4], 1.0)).unwrap();
        let q = p.with_mask(Tensor::full(&[4, 4], 0.0)).unwrap();
        assert_eq!(q.apply(&Tensor::full(&[4, 4], 1.0)).unwrap().max_abs(), 0.0);
        let t = make_tomography(uniform_angles(3), &[4, 4]).unwrap();
        assert!(matches!(t.with_mask(Tensor::full(&[4, 4], 1.0)), Err(Error::Capability(_))));
        assert!(fbp(&p, &Tensor::full(&[4, 4], 1.0)).is_err());
    }
}
