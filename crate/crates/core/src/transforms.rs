//! Exact pixel-permutation transforms: rotations by multiples of 90°,
//! flips and circular shifts, composed as `shift ∘ flip ∘ rot`.
//!
//! The linear part acts on doubled, centred pixel coordinates
//! `(2i - (H-1), 2j - (W-1))` as a signed permutation matrix, so elements
//! compose and invert without knowing the image size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::tensor::{plane_dims, Data, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Shift,
    Rot90,
    Flip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipAxis {
    /// Mirror left-right.
    H,
    /// Mirror top-bottom.
    V,
}

type Mat = [[i64; 2]; 2];

const ID: Mat = [[1, 0], [0, 1]];
/// Counter-clockwise quarter turn on (row, col) coordinates.
const ROT: Mat = [[0, -1], [1, 0]];
const FLIP_H: Mat = [[1, 0], [0, -1]];

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let mut out = [[0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn matvec(a: &Mat, v: [i64; 2]) -> [i64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn rot_pow(k: u8) -> Mat {
    (0..k % 4).fold(ID, |m, _| matmul(&ROT, &m))
}

/// `x ↦ S_shift(F^flip(R^rot x))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transform {
    /// Counter-clockwise quarter turns, `0..4`.
    pub rot: u8,
    /// Left-right mirror applied after the rotation.
    pub flip: bool,
    /// Circular shift `(dy, dx)` applied last.
    pub shift: (i64, i64),
}

impl Default for Transform {
    fn default() -> Self {
        Transform::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Transform {
            rot: 0,
            flip: false,
            shift: (0, 0),
        }
    }

    pub fn rot90(k: u8) -> Self {
        Transform {
            rot: k % 4,
            ..Transform::identity()
        }
    }

    pub fn flip(axis: FlipAxis) -> Self {
        match axis {
            FlipAxis::H => Transform {
                flip: true,
                ..Transform::identity()
            },
            // Top-bottom mirror = left-right mirror after a half turn.
            FlipAxis::V => Transform {
                rot: 2,
                flip: true,
                shift: (0, 0),
            },
        }
    }

    pub fn shift(dy: i64, dx: i64) -> Self {
        Transform {
            shift: (dy, dx),
            ..Transform::identity()
        }
    }

    pub fn is_identity(&self) -> bool {
        self.matrix() == ID && self.shift == (0, 0)
    }

    fn matrix(&self) -> Mat {
        let r = rot_pow(self.rot);
        if self.flip {
            matmul(&FLIP_H, &r)
        } else {
            r
        }
    }

    fn from_parts(m: Mat, shift: (i64, i64)) -> Self {
        let (flip, r) = if m[0][0] * m[1][1] - m[0][1] * m[1][0] < 0 {
            (true, matmul(&FLIP_H, &m))
        } else {
            (false, m)
        };
        let rot = (0..4).find(|&k| rot_pow(k) == r).expect("signed permutation");
        Transform { rot, flip, shift }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Transform) -> Transform {
        let m = matmul(&self.matrix(), &other.matrix());
        let s = matvec(&self.matrix(), [other.shift.0, other.shift.1]);
        Transform::from_parts(m, (s[0] + self.shift.0, s[1] + self.shift.1))
    }

    pub fn invert(&self) -> Transform {
        let m = self.matrix();
        // Signed permutations are orthogonal: the inverse is the transpose.
        let mt = [[m[0][0], m[1][0]], [m[0][1], m[1][1]]];
        let s = matvec(&mt, [self.shift.0, self.shift.1]);
        Transform::from_parts(mt, (-s[0], -s[1]))
    }

    /// Destination flat index within a plane for every source pixel.
    fn permutation(&self, h: usize, w: usize) -> Result<Vec<usize>> {
        if self.rot % 2 == 1 && h != w {
            return Err(Error::shape(format!(
                "a quarter-turn rotation needs a square image, got {h}x{w}"
            )));
        }
        let m = self.matrix();
        let (hi, wi) = (h as i64, w as i64);
        let mut dest = Vec::with_capacity(h * w);
        for i in 0..hi {
            for j in 0..wi {
                let c = matvec(&m, [2 * i - (hi - 1), 2 * j - (wi - 1)]);
                let di = ((c[0] + hi - 1) / 2 + self.shift.0).rem_euclid(hi);
                let dj = ((c[1] + wi - 1) / 2 + self.shift.1).rem_euclid(wi);
                dest.push((di * wi + dj) as usize);
            }
        }
        Ok(dest)
    }

    /// `T_g x` on every image plane.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let (_, h, w) = plane_dims(x.shape())?;
        let dest = self.permutation(h, w)?;
        let plane = h * w;
        fn scatter<T: Copy + Default>(src: &[T], dest: &[usize], plane: usize) -> Vec<T> {
            let mut out = vec![T::default(); src.len()];
            for (o, s) in out.chunks_exact_mut(plane).zip(src.chunks_exact(plane)) {
                for (k, &d) in dest.iter().enumerate() {
                    o[d] = s[k];
                }
            }
            out
        }
        match x.data() {
            Data::Real(v) => Tensor::from_real(x.shape().to_vec(), scatter(v, &dest, plane)),
            Data::Complex(v) => Tensor::from_complex(x.shape().to_vec(), scatter(v, &dest, plane)),
        }
    }
}

/// Uniform draw over the enabled components: `rot ∈ {0..3}` (only the half
/// turns when the image is not square), `flip ∈ {no, yes}`, shifts uniform
/// over the image dimensions.
pub fn random_element(rng: &mut RngState, kinds: &[TransformKind], height: usize, width: usize) -> Result<Transform> {
    if kinds.is_empty() {
        return Err(Error::validation("no transform kinds enabled"));
    }
    if height == 0 || width == 0 {
        return Err(Error::validation("image dimensions must be positive"));
    }
    let mut g = Transform::identity();
    if kinds.contains(&TransformKind::Rot90) {
        g.rot = if height == width {
            rng.below(4) as u8
        } else {
            2 * rng.below(2) as u8
        };
    }
    if kinds.contains(&TransformKind::Flip) {
        g.flip = rng.below(2) == 1;
    }
    if kinds.contains(&TransformKind::Shift) {
        g.shift = (rng.below(height) as i64, rng.below(width) as i64);
    }
    Ok(g)
}
