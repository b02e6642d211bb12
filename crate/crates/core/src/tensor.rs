//! Dense real/complex tensors in row-major order.
//!
//! Images are `[C, H, W]` (or plain `[H, W]`); every 2D operator acts on the
//! two trailing axes and treats the leading axes as a batch of planes.
//! Elementwise arithmetic panics on shape mismatch, like `ndarray`; the
//! fallible entry points (`dot`, constructors) return [`Error::Shape`].

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DType {
    Real64,
    Complex128,
}

impl DType {
    /// Dtype able to hold values of both operands.
    pub fn promote(self, other: DType) -> DType {
        if self == DType::Complex128 || other == DType::Complex128 {
            DType::Complex128
        } else {
            DType::Real64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Data {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct Tensor {
    shape: Vec<usize>,
    data: Data,
}

/// Serialized layout: complex values are interleaved `re, im` pairs.
#[derive(Serialize, Deserialize)]
struct TensorRepr {
    shape: Vec<usize>,
    dtype: DType,
    data: Vec<f64>,
}

impl From<Tensor> for TensorRepr {
    fn from(t: Tensor) -> Self {
        let dtype = t.dtype();
        let data = match t.data {
            Data::Real(v) => v,
            Data::Complex(v) => v.iter().flat_map(|c| [c.re, c.im]).collect(),
        };
        TensorRepr {
            shape: t.shape,
            dtype,
            data,
        }
    }
}

impl TryFrom<TensorRepr> for Tensor {
    type Error = Error;

    fn try_from(r: TensorRepr) -> Result<Self> {
        match r.dtype {
            DType::Real64 => Tensor::from_real(r.shape, r.data),
            DType::Complex128 => {
                if r.data.len() % 2 != 0 {
                    return Err(Error::shape("complex payload has odd length"));
                }
                let values = r
                    .data
                    .chunks_exact(2)
                    .map(|p| Complex64::new(p[0], p[1]))
                    .collect();
                Tensor::from_complex(r.shape, values)
            }
        }
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    if shape.is_empty() || shape.iter().any(|&d| d == 0) {
        return Err(Error::shape(format!(
            "shape {shape:?} must have at least one axis and positive extents"
        )));
    }
    if numel(shape) != len {
        return Err(Error::shape(format!(
            "shape {shape:?} holds {} values but buffer has {len}",
            numel(shape)
        )));
    }
    Ok(())
}

impl Tensor {
    pub fn from_real(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_shape(&shape, data.len())?;
        Ok(Tensor {
            shape,
            data: Data::Real(data),
        })
    }

    pub fn from_complex(shape: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        check_shape(&shape, data.len())?;
        Ok(Tensor {
            shape,
            data: Data::Complex(data),
        })
    }

    pub fn zeros(shape: &[usize], dtype: DType) -> Self {
        let n = numel(shape);
        let data = match dtype {
            DType::Real64 => Data::Real(vec![0.0; n]),
            DType::Complex128 => Data::Complex(vec![Complex64::new(0.0, 0.0); n]),
        };
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: Data::Real(vec![value; numel(shape)]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Tensor::zeros(&self.shape, self.dtype())
    }

    /// I.i.d. standard normal entries; complex tensors draw real and
    /// imaginary parts independently.
    pub fn randn(shape: &[usize], dtype: DType, rng: &mut RngState) -> Self {
        let n = numel(shape);
        let data = match dtype {
            DType::Real64 => Data::Real((0..n).map(|_| StandardNormal.sample(rng)).collect()),
            DType::Complex128 => Data::Complex(
                (0..n)
                    .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
                    .collect(),
            ),
        };
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        match &self.data {
            Data::Real(v) => v.len(),
            Data::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self.data {
            Data::Real(_) => DType::Real64,
            Data::Complex(_) => DType::Complex128,
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.data, Data::Complex(_))
    }

    pub fn data(&self) -> &Data {
        &self.data
    }

    pub fn into_data(self) -> Data {
        self.data
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match &self.data {
            Data::Real(v) => Some(v),
            Data::Complex(_) => None,
        }
    }

    pub fn as_real_mut(&mut self) -> Option<&mut [f64]> {
        match &mut self.data {
            Data::Real(v) => Some(v),
            Data::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&[Complex64]> {
        match &self.data {
            Data::Complex(v) => Some(v),
            Data::Real(_) => None,
        }
    }

    /// Real buffer, or a dtype error naming `what`.
    pub fn real_values(&self, what: &str) -> Result<&[f64]> {
        self.as_real()
            .ok_or_else(|| Error::Dtype(format!("{what} requires a real tensor")))
    }

    /// Element `i` viewed as complex (zero imaginary part for real tensors).
    pub fn get_complex(&self, i: usize) -> Complex64 {
        match &self.data {
            Data::Real(v) => Complex64::new(v[i], 0.0),
            Data::Complex(v) => v[i],
        }
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        check_shape(&shape, self.len())?;
        self.shape = shape;
        Ok(self)
    }

    pub fn to_complex(&self) -> Tensor {
        match &self.data {
            Data::Complex(_) => self.clone(),
            Data::Real(v) => Tensor {
                shape: self.shape.clone(),
                data: Data::Complex(v.iter().map(|&r| Complex64::new(r, 0.0)).collect()),
            },
        }
    }

    pub fn to_dtype(&self, dtype: DType) -> Tensor {
        match dtype {
            DType::Complex128 => self.to_complex(),
            DType::Real64 => self.real_part(),
        }
    }

    pub fn real_part(&self) -> Tensor {
        match &self.data {
            Data::Real(_) => self.clone(),
            Data::Complex(v) => Tensor {
                shape: self.shape.clone(),
                data: Data::Real(v.iter().map(|c| c.re).collect()),
            },
        }
    }

    pub fn imag_part(&self) -> Tensor {
        match &self.data {
            Data::Real(v) => Tensor {
                shape: self.shape.clone(),
                data: Data::Real(vec![0.0; v.len()]),
            },
            Data::Complex(v) => Tensor {
                shape: self.shape.clone(),
                data: Data::Real(v.iter().map(|c| c.im).collect()),
            },
        }
    }

    /// Builds a complex tensor from real and imaginary parts of equal shape.
    pub fn from_parts(re: &Tensor, im: &Tensor) -> Result<Tensor> {
        if re.shape != im.shape {
            return Err(Error::shape(format!(
                "real part {:?} vs imaginary part {:?}",
                re.shape, im.shape
            )));
        }
        let r = re.real_values("real part")?;
        let i = im.real_values("imaginary part")?;
        Tensor::from_complex(
            re.shape.clone(),
            r.iter().zip(i).map(|(&a, &b)| Complex64::new(a, b)).collect(),
        )
    }

    /// Elementwise modulus.
    pub fn abs(&self) -> Tensor {
        let v = match &self.data {
            Data::Real(v) => v.iter().map(|x| x.abs()).collect(),
            Data::Complex(v) => v.iter().map(|c| c.norm()).collect(),
        };
        Tensor {
            shape: self.shape.clone(),
            data: Data::Real(v),
        }
    }

    pub fn conj(&self) -> Tensor {
        match &self.data {
            Data::Real(_) => self.clone(),
            Data::Complex(v) => Tensor {
                shape: self.shape.clone(),
                data: Data::Complex(v.iter().map(|c| c.conj()).collect()),
            },
        }
    }

    pub fn map_real(&self, f: impl Fn(f64) -> f64) -> Tensor {
        let v = match &self.data {
            Data::Real(v) => Data::Real(v.iter().map(|&x| f(x)).collect()),
            Data::Complex(v) => Data::Complex(v.iter().map(|c| Complex64::new(f(c.re), f(c.im))).collect()),
        };
        Tensor {
            shape: self.shape.clone(),
            data: v,
        }
    }

    fn assert_same_shape(&self, other: &Tensor, op: &str) {
        assert_eq!(
            self.shape, other.shape,
            "{op}: shape mismatch {:?} vs {:?}",
            self.shape, other.shape
        );
    }

    /// Elementwise combination with dtype promotion.
    pub fn zip_with(
        &self,
        other: &Tensor,
        fr: impl Fn(f64, f64) -> f64,
        fc: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Tensor {
        self.assert_same_shape(other, "zip_with");
        let data = match (&self.data, &other.data) {
            (Data::Real(a), Data::Real(b)) => Data::Real(a.iter().zip(b).map(|(&x, &y)| fr(x, y)).collect()),
            _ => Data::Complex(
                (0..self.len())
                    .map(|i| fc(self.get_complex(i), other.get_complex(i)))
                    .collect(),
            ),
        };
        Tensor {
            shape: self.shape.clone(),
            data,
        }
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        self.zip_with(other, |a, b| a + b, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.zip_with(other, |a, b| a - b, |a, b| a - b)
    }

    /// Hadamard product.
    pub fn mul(&self, other: &Tensor) -> Tensor {
        self.zip_with(other, |a, b| a * b, |a, b| a * b)
    }

    pub fn scale(&self, alpha: f64) -> Tensor {
        self.map_real(|x| alpha * x)
    }

    pub fn scale_complex(&self, alpha: Complex64) -> Tensor {
        if alpha.im == 0.0 {
            return self.scale(alpha.re);
        }
        let c = self.to_complex();
        let Data::Complex(v) = c.data else { unreachable!() };
        Tensor {
            shape: c.shape,
            data: Data::Complex(v.into_iter().map(|z| alpha * z).collect()),
        }
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        match &self.data {
            Data::Real(v) => Tensor {
                shape: self.shape.clone(),
                data: Data::Real(v.iter().map(|&x| x + c).collect()),
            },
            Data::Complex(v) => Tensor {
                shape: self.shape.clone(),
                data: Data::Complex(v.iter().map(|&z| z + c).collect()),
            },
        }
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &Tensor) {
        self.assert_same_shape(x, "axpy");
        match (&mut self.data, &x.data) {
            (Data::Real(a), Data::Real(b)) => a.iter_mut().zip(b).for_each(|(p, &q)| *p += alpha * q),
            (Data::Complex(a), _) => a
                .iter_mut()
                .enumerate()
                .for_each(|(i, p)| *p += alpha * x.get_complex(i)),
            (Data::Real(_), Data::Complex(_)) => {
                let mut c = self.to_complex();
                c.axpy(alpha, x);
                *self = c;
            }
        }
    }

    /// `self += alpha * x` with a complex coefficient; stays real when both
    /// `self` and `x` are real and `alpha` has no imaginary part.
    pub fn axpy_complex(&mut self, alpha: Complex64, x: &Tensor) {
        if alpha.im == 0.0 {
            return self.axpy(alpha.re, x);
        }
        self.assert_same_shape(x, "axpy");
        let mut c = self.to_complex();
        if let Data::Complex(a) = &mut c.data {
            a.iter_mut()
                .enumerate()
                .for_each(|(i, p)| *p += alpha * x.get_complex(i));
        }
        *self = c;
    }

    pub fn norm_sq(&self) -> f64 {
        match &self.data {
            Data::Real(v) => v.iter().map(|x| x * x).sum(),
            Data::Complex(v) => v.iter().map(|c| c.norm_sqr()).sum(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_l1(&self) -> f64 {
        match &self.data {
            Data::Real(v) => v.iter().map(|x| x.abs()).sum(),
            Data::Complex(v) => v.iter().map(|c| c.norm()).sum(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.data {
            Data::Real(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Data::Complex(v) => v.iter().fold(0.0, |m, c| m.max(c.norm())),
        }
    }

    pub fn sum(&self) -> Complex64 {
        match &self.data {
            Data::Real(v) => Complex64::new(v.iter().sum(), 0.0),
            Data::Complex(v) => v.iter().sum(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.data {
            Data::Real(v) => v.iter().all(|x| x.is_finite()),
            Data::Complex(v) => v.iter().all(|c| c.re.is_finite() && c.im.is_finite()),
        }
    }

    /// Splits the shape into `(planes, H, W)` over the two trailing axes.
    pub fn plane_dims(&self) -> Result<(usize, usize, usize)> {
        plane_dims(&self.shape)
    }

    /// Flat concatenation of the buffers (promoting to complex if any part is).
    pub fn concat(parts: &[&Tensor]) -> Tensor {
        let total = parts.iter().map(|t| t.len()).sum();
        let data = if parts.iter().any(|t| t.is_complex()) {
            let mut v = Vec::with_capacity(total);
            for t in parts {
                v.extend((0..t.len()).map(|i| t.get_complex(i)));
            }
            Data::Complex(v)
        } else {
            let mut v = Vec::with_capacity(total);
            for t in parts {
                v.extend_from_slice(t.as_real().expect("checked real"));
            }
            Data::Real(v)
        };
        Tensor {
            shape: vec![total],
            data,
        }
    }

    /// Inverse of [`Tensor::concat`]: cuts the flat buffer into blocks of the given shapes.
    pub fn split(&self, shapes: &[Vec<usize>]) -> Result<Vec<Tensor>> {
        let total: usize = shapes.iter().map(|s| numel(s)).sum();
        if total != self.len() {
            return Err(Error::shape(format!(
                "cannot split {} values into blocks {shapes:?}",
                self.len()
            )));
        }
        let mut offset = 0;
        let mut out = Vec::with_capacity(shapes.len());
        for s in shapes {
            let n = numel(s);
            let data = match &self.data {
                Data::Real(v) => Data::Real(v[offset..offset + n].to_vec()),
                Data::Complex(v) => Data::Complex(v[offset..offset + n].to_vec()),
            };
            out.push(Tensor {
                shape: s.clone(),
                data,
            });
            offset += n;
        }
        Ok(out)
    }

    /// Applies a real-linear map to the real and imaginary parts separately.
    pub(crate) fn map_parts(&self, f: impl Fn(&Tensor) -> Result<Tensor>) -> Result<Tensor> {
        if self.is_complex() {
            let re = f(&self.real_part())?;
            let im = f(&self.imag_part())?;
            Tensor::from_parts(&re, &im)
        } else {
            f(self)
        }
    }
}

/// `(planes, H, W)` for a shape with at least two axes.
pub fn plane_dims(shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return Err(Error::shape(format!(
            "expected at least two trailing image axes, got shape {shape:?}"
        )));
    }
    let h = shape[shape.len() - 2];
    let w = shape[shape.len() - 1];
    Ok((numel(&shape[..shape.len() - 2]), h, w))
}

/// Inner product `Σ conj(a_i)·b_i`.
pub fn dot(a: &Tensor, b: &Tensor) -> Result<Complex64> {
    if a.shape != b.shape {
        return Err(Error::shape(format!(
            "dot of shapes {:?} and {:?}",
            a.shape, b.shape
        )));
    }
    Ok(match (&a.data, &b.data) {
        (Data::Real(x), Data::Real(y)) => Complex64::new(x.iter().zip(y).map(|(p, q)| p * q).sum(), 0.0),
        _ => (0..a.len())
            .map(|i| a.get_complex(i).conj() * b.get_complex(i))
            .sum(),
    })
}

/// Real part of [`dot`], for callers that already checked shapes.
pub(crate) fn dot_re(a: &Tensor, b: &Tensor) -> f64 {
    dot(a, b).expect("dot_re: shape mismatch").re
}
