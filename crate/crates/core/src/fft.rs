//! Centered, orthonormal 2D DFT over the two trailing axes.
//!
//! `fft2c = fftshift ∘ DFT ∘ ifftshift`, scaled by `1/sqrt(H·W)`, so the zero
//! frequency sits at `(H/2, W/2)` and the transform is unitary.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::Result;
use crate::tensor::{plane_dims, Data, Tensor};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

/// In-place 1D FFT of every contiguous chunk of length `n` (unnormalized).
pub(crate) fn fft_rows(buf: &mut [Complex64], n: usize, inverse: bool) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let fft = if inverse { p.plan_fft_inverse(n) } else { p.plan_fft_forward(n) };
        fft.process(buf);
    });
}

/// Circular roll of one `h × w` plane: `out[(i+sy) % h][(j+sx) % w] = in[i][j]`.
pub(crate) fn roll_plane(plane: &[Complex64], h: usize, w: usize, sy: usize, sx: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for i in 0..h {
        let oi = (i + sy) % h;
        for j in 0..w {
            out[oi * w + (j + sx) % w] = plane[i * w + j];
        }
    }
    out
}

/// Unnormalized, uncentered 2D DFT of one plane.
pub(crate) fn dft2_plane(plane: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    fft_rows(plane, w, inverse);
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for j in 0..w {
        for i in 0..h {
            col[i] = plane[i * w + j];
        }
        fft_rows(&mut col, h, inverse);
        for i in 0..h {
            plane[i * w + j] = col[i];
        }
    }
}

fn centered(t: &Tensor, dir: Direction) -> Result<Tensor> {
    let (planes, h, w) = plane_dims(t.shape())?;
    let c = t.to_complex();
    let Data::Complex(src) = c.into_data() else { unreachable!() };
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let mut out = Vec::with_capacity(src.len());
    for plane in src.chunks_exact(h * w) {
        // ifftshift rolls by -(n/2), fftshift by +(n/2).
        let mut p = roll_plane(plane, h, w, h - h / 2, w - w / 2);
        dft2_plane(&mut p, h, w, dir == Direction::Inverse);
        let p = roll_plane(&p, h, w, h / 2, w / 2);
        out.extend(p.into_iter().map(|z| z * scale));
    }
    debug_assert_eq!(out.len(), planes * h * w);
    Tensor::from_complex(t.shape().to_vec(), out)
}

/// Centered orthonormal forward transform; real inputs are promoted.
pub fn fft2c(t: &Tensor) -> Result<Tensor> {
    centered(t, Direction::Forward)
}

/// Inverse of [`fft2c`].
pub fn ifft2c(t: &Tensor) -> Result<Tensor> {
    centered(t, Direction::Inverse)
}
