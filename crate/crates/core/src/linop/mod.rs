//! Matrix-free linear operators.
//!
//! A [`LinearMap`] only knows how to apply itself and its adjoint. Operators
//! are shared as [`Operator`] (`Arc<dyn LinearMap>`) and combined with
//! [`compose`], [`add_scaled`] and [`stack`].

mod algebra;
mod maps;
mod solvers;
mod spectral;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{DType, Tensor};

pub use algebra::{add_scaled, compose, stack, Composed, ScaledSum, Stacked};
pub use maps::{DiagonalMap, IdentityMap, MatrixMap};
pub use solvers::{
    bicgstab_solve, cg_solve, lsqr_solve, pinv_apply, tikhonov_solve, NormalOperator, SolveReport, StopReason,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub use spectral::{adjoint_test, condition_estimate, operator_norm};

/// Shape and element type of an operator's domain or range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Space {
    pub shape: Vec<usize>,
    pub dtype: DType,
}

impl Space {
    pub fn new(shape: impl Into<Vec<usize>>, dtype: DType) -> Self {
        Space {
            shape: shape.into(),
            dtype,
        }
    }

    pub fn real(shape: impl Into<Vec<usize>>) -> Self {
        Space::new(shape, DType::Real64)
    }

    pub fn complex(shape: impl Into<Vec<usize>>) -> Self {
        Space::new(shape, DType::Complex128)
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn zeros(&self) -> Tensor {
        Tensor::zeros(&self.shape, self.dtype)
    }

    pub(crate) fn check(&self, t: &Tensor, what: &str) -> Result<()> {
        if t.shape() != self.shape.as_slice() {
            return Err(Error::shape(format!(
                "{what}: expected shape {:?}, got {:?}",
                self.shape,
                t.shape()
            )));
        }
        Ok(())
    }
}

/// Frequency-domain description of a Fourier-diagonal operator: `AᵀA =
/// ifft2c ∘ diag(|d|²) ∘ fft2c` on every image plane, with `d` stored in
/// the centered frequency layout of [`crate::fft::fft2c`].
///
/// `values` holds either one `height × width` plane, shared by every image
/// plane, or one entry per element of the whole tensor; in both cases the
/// diagonal entry for flat index `i` is `values[i % values.len()]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDiagonal {
    pub height: usize,
    pub width: usize,
    pub values: Vec<Complex64>,
}

impl SpectralDiagonal {
    pub fn at(&self, i: usize) -> Complex64 {
        self.values[i % self.values.len()]
    }

    /// Multiplies a centered spectrum by the diagonal (or its conjugate).
    pub fn multiply(&self, spectrum: &Tensor, conjugate: bool) -> Result<Tensor> {
        let c = spectrum.to_complex();
        let v = c.as_complex().unwrap();
        if v.len() % self.values.len() != 0 {
            return Err(Error::shape(format!(
                "spectral diagonal of {} entries cannot act on {:?}",
                self.values.len(),
                spectrum.shape()
            )));
        }
        let out = v
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let d = self.at(i);
                z * if conjugate { d.conj() } else { d }
            })
            .collect();
        Tensor::from_complex(spectrum.shape().to_vec(), out)
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().fold(0.0, |m, d| m.max(d.norm()))
    }
}

pub trait LinearMap: Send + Sync + fmt::Debug {
    fn domain(&self) -> &Space;

    fn range(&self) -> &Space;

    fn apply(&self, x: &Tensor) -> Result<Tensor>;

    fn apply_adjoint(&self, u: &Tensor) -> Result<Tensor>;

    /// `AᵀA = I` and `AAᵀ = I`.
    fn is_unitary(&self) -> bool {
        false
    }

    /// `A` is an orthogonal projector (`A = Aᵀ = A²`).
    fn is_projection(&self) -> bool {
        false
    }

    fn spectral_diagonal(&self) -> Option<&SpectralDiagonal> {
        None
    }

    /// Shapes of the range blocks; a single block unless the map is stacked.
    fn range_blocks(&self) -> Vec<Vec<usize>> {
        vec![self.range().shape.clone()]
    }
}

pub type Operator = Arc<dyn LinearMap>;
