use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft2c, ifft2c};
use crate::linop::{LinearMap, Space, SpectralDiagonal};
use crate::tensor::{plane_dims, Tensor};

/// Single-coil Cartesian MRI: `x ↦ m ⊙ fft2c(x)`.
#[derive(Clone, Debug)]
pub struct MriMap {
    space: Space,
    diag: SpectralDiagonal,
    full: bool,
}

impl MriMap {
    /// `mask` has the image shape and binary entries.
    pub fn new(mask: &Tensor) -> Result<Self> {
        let (_, h, w) = plane_dims(mask.shape())?;
        let m = super::binary_values(mask, "k-space mask")?;
        Ok(MriMap {
            space: Space::complex(mask.shape().to_vec()),
            full: m.iter().all(|&v| v == 1.0),
            diag: SpectralDiagonal {
                height: h,
                width: w,
                values: m.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            },
        })
    }

    fn check(&self, t: &Tensor, what: &str) -> Result<()> {
        self.space.check(t, what)?;
        if !t.is_complex() {
            return Err(Error::Dtype(format!(
                "{what} expects a complex image; promote it with Tensor::to_complex first"
            )));
        }
        Ok(())
    }
}

impl LinearMap for MriMap {
    fn domain(&self) -> &Space {
        &self.space
    }

    fn range(&self) -> &Space {
        &self.space
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x, "mri")?;
        self.diag.multiply(&fft2c(x)?, false)
    }

    fn apply_adjoint(&self, u: &Tensor) -> Result<Tensor> {
        self.check(u, "mri adjoint")?;
        ifft2c(&self.diag.multiply(u, false)?)
    }

    fn is_unitary(&self) -> bool {
        self.full
    }

    fn spectral_diagonal(&self) -> Option<&SpectralDiagonal> {
        Some(&self.diag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;
    use crate::tensor::DType;

    #[test]
    fn real_input_asks_for_promotion() {
        let mri = MriMap::new(&Tensor::full(&[4, 4], 1.0)).unwrap();
        let err = mri.apply(&Tensor::full(&[4, 4], 1.0)).unwrap_err();
        assert!(matches!(err, Error::Dtype(ref m) if m.contains("complex")));
    }

    #[test]
    fn normal_operator_is_a_projection() {
        let mut rng = RngState::new(3);
        let mask: Vec<f64> = (0..64).map(|_| if rng.uniform() < 0.4 { 1.0 } else { 0.0 }).collect();
        let mri = MriMap::new(&Tensor::from_real(vec![8, 8], mask).unwrap()).unwrap();
        let x = Tensor::randn(&[8, 8], DType::Complex128, &mut rng);
        let p = mri.apply_adjoint(&mri.apply(&x).unwrap()).unwrap();
        let pp = mri.apply_adjoint(&mri.apply(&p).unwrap()).unwrap();
        assert!(pp.sub(&p).max_abs() < 1e-10);
    }
}
