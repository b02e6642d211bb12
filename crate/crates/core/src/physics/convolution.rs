use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{dft2_plane, fft2c, ifft2c, roll_plane};
use crate::linop::{LinearMap, Space, SpectralDiagonal};
use crate::tensor::{plane_dims, Tensor};

/// Circular 2D convolution with a small odd-sided kernel, applied as a
/// pointwise product in the centered Fourier domain.
#[derive(Clone, Debug)]
pub struct BlurMap {
    space: Space,
    diag: SpectralDiagonal,
}

impl BlurMap {
    pub fn new(kernel: &Tensor, shape: &[usize]) -> Result<Self> {
        let (_, h, w) = plane_dims(shape)?;
        let (kh, kw) = kernel_dims(kernel)?;
        if kh > h || kw > w {
            return Err(Error::validation(format!(
                "kernel {kh}x{kw} does not fit in a {h}x{w} image"
            )));
        }
        let k = kernel.real_values("blur kernel")?;
        let (ca, cb) = (kh / 2, kw / 2);
        // Zero-padded kernel with its center moved to the origin.
        let mut k0 = vec![Complex64::new(0.0, 0.0); h * w];
        for a in 0..kh {
            for b in 0..kw {
                let i = (a + h - ca) % h;
                let j = (b + w - cb) % w;
                k0[i * w + j] += k[a * kw + b];
            }
        }
        dft2_plane(&mut k0, h, w, false);
        let values = roll_plane(&k0, h, w, h / 2, w / 2);
        Ok(BlurMap {
            space: Space::real(shape.to_vec()),
            diag: SpectralDiagonal {
                height: h,
                width: w,
                values,
            },
        })
    }

    fn filter(&self, x: &Tensor, conjugate: bool) -> Result<Tensor> {
        self.space.check(x, "blur")?;
        let out = ifft2c(&self.diag.multiply(&fft2c(x)?, conjugate)?)?;
        Ok(if x.is_complex() { out } else { out.real_part() })
    }
}

pub(crate) fn kernel_dims(kernel: &Tensor) -> Result<(usize, usize)> {
    let &[kh, kw] = kernel.shape() else {
        return Err(Error::shape(format!("kernel must be 2-D, got {:?}", kernel.shape())));
    };
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::validation(format!("kernel sides must be odd, got {kh}x{kw}")));
    }
    Ok((kh, kw))
}

impl LinearMap for BlurMap {
    fn domain(&self) -> &Space {
        &self.space
    }

    fn range(&self) -> &Space {
        &self.space
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.filter(x, false)
    }

    fn apply_adjoint(&self, u: &Tensor) -> Result<Tensor> {
        self.filter(u, true)
    }

    fn spectral_diagonal(&self) -> Option<&SpectralDiagonal> {
        Some(&self.diag)
    }
}

/// Keeps every `factor`-th pixel of each plane, starting at index 0.
#[derive(Clone, Debug)]
pub struct SubsampleMap {
    factor: usize,
    domain: Space,
    range: Space,
}

impl SubsampleMap {
    pub fn new(factor: usize, shape: &[usize]) -> Result<Self> {
        let (_, h, w) = plane_dims(shape)?;
        if factor == 0 || h % factor != 0 || w % factor != 0 {
            return Err(Error::validation(format!(
                "downsampling factor {factor} must divide the image size {h}x{w}"
            )));
        }
        let mut out = shape.to_vec();
        let n = out.len();
        out[n - 2] = h / factor;
        out[n - 1] = w / factor;
        Ok(SubsampleMap {
            factor,
            domain: Space::real(shape.to_vec()),
            range: Space::real(out),
        })
    }
}

impl LinearMap for SubsampleMap {
    fn domain(&self) -> &Space {
        &self.domain
    }

    fn range(&self) -> &Space {
        &self.range
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.domain.check(x, "subsample")?;
        let (_, h, w) = plane_dims(&self.domain.shape)?;
        let s = self.factor;
        x.map_parts(|p| {
            let v = p.as_real().unwrap();
            let mut out = Vec::with_capacity(self.range.numel());
            for plane in v.chunks_exact(h * w) {
                for i in (0..h).step_by(s) {
                    out.extend(plane[i * w..(i + 1) * w].iter().step_by(s));
                }
            }
            Tensor::from_real(self.range.shape.clone(), out)
        })
    }

    fn apply_adjoint(&self, u: &Tensor) -> Result<Tensor> {
        self.range.check(u, "subsample adjoint")?;
        let (_, h, w) = plane_dims(&self.domain.shape)?;
        let (ws, s) = (w / self.factor, self.factor);
        u.map_parts(|p| {
            let v = p.as_real().unwrap();
            let mut out = vec![0.0; self.domain.numel()];
            for (plane, small) in out.chunks_exact_mut(h * w).zip(v.chunks_exact(ws * (h / s))) {
                for (k, &val) in small.iter().enumerate() {
                    plane[(k / ws) * s * w + (k % ws) * s] = val;
                }
            }
            Tensor::from_real(self.domain.shape.clone(), out)
        })
    }

    fn is_projection(&self) -> bool {
        self.factor == 1
    }

    fn is_unitary(&self) -> bool {
        self.factor == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::adjoint_test;
    use crate::rng::RngState;
    use crate::tensor::DType;

    /// Direct spatial circular convolution, `y[i][j] = Σ k[a][b] x[i-a+ca][j-b+cb]`.
    fn direct_conv(x: &[f64], h: usize, w: usize, k: &[f64], kh: usize, kw: usize) -> Vec<f64> {
        let mut y = vec![0.0; h * w];
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0;
                for a in 0..kh {
                    for b in 0..kw {
                        let si = (i as isize - a as isize + (kh / 2) as isize).rem_euclid(h as isize) as usize;
                        let sj = (j as isize - b as isize + (kw / 2) as isize).rem_euclid(w as isize) as usize;
                        acc += k[a * kw + b] * x[si * w + sj];
                    }
                }
                y[i * w + j] = acc;
            }
        }
        y
    }

    /// Direct circular correlation, the transpose of `direct_conv`.
    fn direct_corr(u: &[f64], h: usize, w: usize, k: &[f64], kh: usize, kw: usize) -> Vec<f64> {
        let mut x = vec![0.0; h * w];
        for i in 0..h {
            for j in 0..w {
                for a in 0..kh {
                    for b in 0..kw {
                        let si = (i as isize - a as isize + (kh / 2) as isize).rem_euclid(h as isize) as usize;
                        let sj = (j as isize - b as isize + (kw / 2) as isize).rem_euclid(w as isize) as usize;
                        x[si * w + sj] += k[a * kw + b] * u[i * w + j];
                    }
                }
            }
        }
        x
    }

    #[test]
    fn matches_direct_convolution_and_correlation() {
        let mut rng = RngState::new(7);
        let (kh, kw) = (3, 5);
        let k: Vec<f64> = (0..kh * kw).map(|_| rng.normal()).collect();
        let kernel = Tensor::from_real(vec![kh, kw], k.clone()).unwrap();
        let blur = BlurMap::new(&kernel, &[8, 8]).unwrap();
        let x = Tensor::randn(&[8, 8], DType::Real64, &mut rng);
        let y = blur.apply(&x).unwrap();
        let want = direct_conv(x.as_real().unwrap(), 8, 8, &k, kh, kw);
        for (a, b) in y.as_real().unwrap().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        let u = Tensor::randn(&[8, 8], DType::Real64, &mut rng);
        let xt = blur.apply_adjoint(&u).unwrap();
        let want = direct_corr(u.as_real().unwrap(), 8, 8, &k, kh, kw);
        for (a, b) in xt.as_real().unwrap().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn even_kernel_is_rejected() {
        let k = Tensor::full(&[2, 3], 1.0 / 6.0);
        assert!(matches!(BlurMap::new(&k, &[8, 8]), Err(Error::Validation(_))));
        let k = Tensor::full(&[9, 9], 1.0);
        assert!(matches!(BlurMap::new(&k, &[8, 8]), Err(Error::Validation(_))));
    }

    #[test]
    fn subsample_keeps_top_left_grid() {
        let x = Tensor::from_real(vec![4, 4], (0..16).map(f64::from).collect()).unwrap();
        let s = SubsampleMap::new(2, &[4, 4]).unwrap();
        assert_eq!(s.apply(&x).unwrap().as_real().unwrap(), &[0.0, 2.0, 8.0, 10.0]);
        let mut rng = RngState::new(1);
        let s = SubsampleMap::new(3, &[2, 6, 9]).unwrap();
        assert!(adjoint_test(&s, &mut rng, 10).unwrap() < 1e-14);
        assert!(SubsampleMap::new(3, &[8, 8]).is_err());
    }
}
