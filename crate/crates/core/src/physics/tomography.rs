use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::fft_rows;
use crate::linop::{LinearMap, Space};
use crate::tensor::{plane_dims, Tensor};

/// `⌈H·√2⌉`, bumped to the next odd number.
pub fn detector_count(h: usize) -> usize {
    let d = (h as f64 * std::f64::consts::SQRT_2).ceil() as usize;
    if d % 2 == 0 {
        d + 1
    } else {
        d
    }
}

/// Pixel-driven 2D parallel-beam Radon transform.
///
/// Each pixel center is projected onto the detector axis of every angle and
/// its value split linearly between the two neighbouring bins; the adjoint
/// scatters back with the same weights.
#[derive(Clone, Debug)]
pub struct RadonMap {
    size: usize,
    detectors: usize,
    trig: Vec<(f64, f64)>,
    domain: Space,
    range: Space,
}

impl RadonMap {
    pub fn new(angles_deg: &[f64], shape: &[usize]) -> Result<Self> {
        let (_, h, w) = plane_dims(shape)?;
        if h != w {
            return Err(Error::validation(format!("tomography needs a square image, got {h}x{w}")));
        }
        if angles_deg.is_empty() {
            return Err(Error::validation("tomography needs at least one angle"));
        }
        if let Some(a) = angles_deg.iter().find(|a| !a.is_finite()) {
            return Err(Error::validation(format!("non-finite projection angle {a}")));
        }
        let detectors = detector_count(h);
        let mut range = shape[..shape.len() - 2].to_vec();
        range.extend([angles_deg.len(), detectors]);
        Ok(RadonMap {
            size: h,
            detectors,
            trig: angles_deg
                .iter()
                .map(|a| {
                    let t = a.to_radians();
                    (t.cos(), t.sin())
                })
                .collect(),
            domain: Space::real(shape.to_vec()),
            range: Space::real(range),
        })
    }

    pub fn detectors(&self) -> usize {
        self.detectors
    }

    pub fn n_angles(&self) -> usize {
        self.trig.len()
    }

    /// Calls `f(pixel, bin, weight)` for every nonzero interpolation weight of one angle.
    fn for_each_weight(&self, angle: usize, mut f: impl FnMut(usize, usize, f64)) {
        let n = self.size;
        let (c, s) = self.trig[angle];
        let half = (n as f64 - 1.0) / 2.0;
        let offset = (self.detectors as f64 - 1.0) / 2.0;
        for i in 0..n {
            let yc = half - i as f64;
            for j in 0..n {
                let xc = j as f64 - half;
                let p = xc * c + yc * s + offset;
                let lo = p.floor();
                let frac = p - lo;
                let lo = lo as isize;
                let pix = i * n + j;
                if lo >= 0 && (lo as usize) < self.detectors {
                    f(pix, lo as usize, 1.0 - frac);
                }
                if frac > 0.0 && lo + 1 >= 0 && ((lo + 1) as usize) < self.detectors {
                    f(pix, (lo + 1) as usize, frac);
                }
            }
        }
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        let plane = self.size * self.size;
        let row = self.detectors;
        let per_plane = self.n_angles() * row;
        let mut out = vec![0.0; x.len() / plane * per_plane];
        for (img, sino) in x.chunks_exact(plane).zip(out.chunks_exact_mut(per_plane)) {
            for a in 0..self.n_angles() {
                let bins = &mut sino[a * row..(a + 1) * row];
                self.for_each_weight(a, |pix, bin, wgt| bins[bin] += wgt * img[pix]);
            }
        }
        out
    }

    fn backproject(&self, u: &[f64]) -> Vec<f64> {
        let plane = self.size * self.size;
        let row = self.detectors;
        let per_plane = self.n_angles() * row;
        let mut out = vec![0.0; u.len() / per_plane * plane];
        for (sino, img) in u.chunks_exact(per_plane).zip(out.chunks_exact_mut(plane)) {
            for a in 0..self.n_angles() {
                let bins = &sino[a * row..(a + 1) * row];
                self.for_each_weight(a, |pix, bin, wgt| img[pix] += wgt * bins[bin]);
            }
        }
        out
    }

    /// Filtered backprojection: ramp filter per projection, backprojection,
    /// scale `π / (2·n_angles)`.
    pub fn fbp(&self, y: &Tensor) -> Result<Tensor> {
        self.range.check(y, "fbp")?;
        let filtered = y.map_parts(|p| {
            Tensor::from_real(self.range.shape.clone(), ramp_filter(p.as_real().unwrap(), self.detectors))
        })?;
        let x = self.apply_adjoint(&filtered)?;
        Ok(x.scale(PI / (2.0 * self.n_angles() as f64)))
    }
}

/// Ram-Lak filtering of every length-`d` row, via zero-padded FFT
/// convolution with the band-limited spatial kernel (scaled so the
/// response is 1 at Nyquist).
fn ramp_filter(rows: &[f64], d: usize) -> Vec<f64> {
    let n = (2 * d).next_power_of_two();
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    for (k, hk) in h.iter_mut().enumerate() {
        let m = if k <= n / 2 { k as isize } else { k as isize - n as isize };
        let v = if m == 0 {
            0.25
        } else if m % 2 != 0 {
            -1.0 / (PI * PI * (m * m) as f64)
        } else {
            0.0
        };
        *hk = Complex64::new(2.0 * v, 0.0);
    }
    fft_rows(&mut h, n, false);
    let mut out = Vec::with_capacity(rows.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for row in rows.chunks_exact(d) {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (b, &r) in buf.iter_mut().zip(row) {
            b.re = r;
        }
        fft_rows(&mut buf, n, false);
        for (b, hk) in buf.iter_mut().zip(&h) {
            *b *= hk;
        }
        fft_rows(&mut buf, n, true);
        out.extend(buf[..d].iter().map(|b| b.re / n as f64));
    }
    out
}

impl LinearMap for RadonMap {
    fn domain(&self) -> &Space {
        &self.domain
    }

    fn range(&self) -> &Space {
        &self.range
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.domain.check(x, "tomography")?;
        x.map_parts(|p| Tensor::from_real(self.range.shape.clone(), self.project(p.as_real().unwrap())))
    }

    fn apply_adjoint(&self, u: &Tensor) -> Result<Tensor> {
        self.range.check(u, "tomography adjoint")?;
        u.map_parts(|p| Tensor::from_real(self.domain.shape.clone(), self.backproject(p.as_real().unwrap())))
    }
}
