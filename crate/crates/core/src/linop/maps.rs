use crate::error::{Error, Result};
use crate::linop::{LinearMap, Space};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct IdentityMap {
    space: Space,
}

impl IdentityMap {
    pub fn new(space: Space) -> Self {
        IdentityMap { space }
    }
}

impl LinearMap for IdentityMap {
    fn domain(&self) -> &Space {
        &self.space
    }

    fn range(&self) -> &Space {
        &self.space
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.space.check(x, "identity")?;
        Ok(x.clone())
    }

    fn apply_adjoint(&self, u: &Tensor) -> Result<Tensor> {
        self.apply(u)
    }

    fn is_unitary(&self) -> bool {
        true
    }

    fn is_projection(&self) -> bool {
        true
    }
}

/// Elementwise multiplication by fixed real weights.
#[derive(Clone, Debug)]
pub struct DiagonalMap {
    space: Space,
    weights: Tensor,
    projection: bool,
}

impl DiagonalMap {
    pub fn new(space: Space, weights: Vec<f64>) -> Result<Self> {
        let weights = Tensor::from_real(space.shape.clone(), weights)?;
        let projection = weights
            .as_real()
            .unwrap()
            .iter()
            .all(|&w| w == 0.0 || w == 1.0);
        Ok(DiagonalMap {
            space,
            weights,
            projection,
        })
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }
}

impl LinearMap for DiagonalMap {
    fn domain(&self) -> &Space {
        &self.space
    }

    fn range(&self) -> &Space {
        &self.space
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.space.check(x, "diagonal")?;
        Ok(x.mul(&self.weights))
    }

    fn apply_adjoint(&self, u: &Tensor) -> Result<Tensor> {
        self.apply(u)
    }

    fn is_projection(&self) -> bool {
        self.projection
    }
}

/// Dense real matrix acting on the flattened domain.
#[derive(Clone, Debug)]
pub struct MatrixMap {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    domain: Space,
    range: Space,
}

impl MatrixMap {
    /// `entries` is row-major `rows × cols`; domain `[cols]`, range `[rows]`.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        MatrixMap::with_shapes(rows, cols, entries, vec![cols], vec![rows])
    }

    pub fn with_shapes(
        rows: usize,
        cols: usize,
        entries: Vec<f64>,
        domain_shape: Vec<usize>,
        range_shape: Vec<usize>,
    ) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::shape(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        let domain = Space::real(domain_shape);
        let range = Space::real(range_shape);
        if domain.numel() != cols || range.numel() != rows {
            return Err(Error::shape(format!(
                "matrix {rows}x{cols} cannot map {:?} to {:?}",
                domain.shape, range.shape
            )));
        }
        Ok(MatrixMap {
            rows,
            cols,
            entries,
            domain,
            range,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.entries
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn matvec_t(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &ui) in self.entries.chunks_exact(self.cols).zip(u) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * ui;
            }
        }
        out
    }
}

impl LinearMap for MatrixMap {
    fn domain(&self) -> &Space {
        &self.domain
    }

    fn range(&self) -> &Space {
        &self.range
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.domain.check(x, "matrix")?;
        x.map_parts(|p| Tensor::from_real(self.range.shape.clone(), self.matvec(p.as_real().unwrap())))
    }

    fn apply_adjoint(&self, u: &Tensor) -> Result<Tensor> {
        self.range.check(u, "matrix adjoint")?;
        u.map_parts(|p| Tensor::from_real(self.domain.shape.clone(), self.matvec_t(p.as_real().unwrap())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_products() {
        let a = MatrixMap::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let x = Tensor::from_real(vec![3], vec![1.0, 0.0, -1.0]).unwrap();
        assert_eq!(a.apply(&x).unwrap().as_real().unwrap(), &[-2.0, -2.0]);
        let u = Tensor::from_real(vec![2], vec![1.0, 1.0]).unwrap();
        assert_eq!(a.apply_adjoint(&u).unwrap().as_real().unwrap(), &[5.0, 7.0, 9.0]);
    }

    #[test]
    fn binary_diagonal_is_projection() {
        let d = DiagonalMap::new(Space::real([3]), vec![1.0, 0.0, 1.0]).unwrap();
        assert!(d.is_projection());
        let d = DiagonalMap::new(Space::real([3]), vec![1.0, 2.0, 1.0]).unwrap();
        assert!(!d.is_projection());
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let id = IdentityMap::new(Space::real([2, 2]));
        assert!(id.apply(&Tensor::full(&[4], 1.0)).is_err());
    }
}
