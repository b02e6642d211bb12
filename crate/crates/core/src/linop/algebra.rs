use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linop::{LinearMap, Operator, Space};
use crate::tensor::Tensor;

/// `x ↦ outer(inner(x))`.
#[derive(Debug, Clone)]
pub struct Composed {
    outer: Operator,
    inner: Operator,
}

/// Composition `A ∘ B`; requires `B.range = A.domain`.
pub fn compose(a: Operator, b: Operator) -> Result<Operator> {
    if a.domain().shape != b.range().shape {
        return Err(Error::Composition {
            inner: b.range().shape.clone(),
            outer: a.domain().shape.clone(),
        });
    }
    Ok(Arc::new(Composed { outer: a, inner: b }))
}

impl LinearMap for Composed {
    fn domain(&self) -> &Space {
        self.inner.domain()
    }

    fn range(&self) -> &Space {
        self.outer.range()
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.outer.apply(&self.inner.apply(x)?)
    }

    fn apply_adjoint(&self, u: &Tensor) -> Result<Tensor> {
        self.inner.apply_adjoint(&self.outer.apply_adjoint(u)?)
    }

    fn is_unitary(&self) -> bool {
        self.outer.is_unitary() && self.inner.is_unitary()
    }

    fn range_blocks(&self) -> Vec<Vec<usize>> {
        self.outer.range_blocks()
    }
}

/// `x ↦ αA(x) + βB(x)`.
#[derive(Debug, Clone)]
pub struct ScaledSum {
    alpha: f64,
    a: Operator,
    beta: f64,
    b: Operator,
    domain: Space,
    range: Space,
}

pub fn add_scaled(alpha: f64, a: Operator, beta: f64, b: Operator) -> Result<Operator> {
    if a.domain().shape != b.domain().shape || a.range().shape != b.range().shape {
        return Err(Error::shape(format!(
            "cannot add maps {:?}->{:?} and {:?}->{:?}",
            a.domain().shape,
            a.range().shape,
            b.domain().shape,
            b.range().shape
        )));
    }
    let domain = Space::new(a.domain().shape.clone(), a.domain().dtype.promote(b.domain().dtype));
    let range = Space::new(a.range().shape.clone(), a.range().dtype.promote(b.range().dtype));
    Ok(Arc::new(ScaledSum {
        alpha,
        a,
        beta,
        b,
        domain,
        range,
    }))
}

impl LinearMap for ScaledSum {
    fn domain(&self) -> &Space {
        &self.domain
    }

    fn range(&self) -> &Space {
        &self.range
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let mut out = self.a.apply(x)?.scale(self.alpha);
        out.axpy(self.beta, &self.b.apply(x)?);
        Ok(out)
    }

    fn apply_adjoint(&self, u: &Tensor) -> Result<Tensor> {
        let mut out = self.a.apply_adjoint(u)?.scale(self.alpha);
        out.axpy(self.beta, &self.b.apply_adjoint(u)?);
        Ok(out)
    }
}

/// `x ↦ (A(x), B(x))`, with the two outputs concatenated into one flat range.
#[derive(Debug, Clone)]
pub struct Stacked {
    a: Operator,
    b: Operator,
    range: Space,
}

pub fn stack(a: Operator, b: Operator) -> Result<Operator> {
    if a.domain().shape != b.domain().shape {
        return Err(Error::shape(format!(
            "cannot stack maps with domains {:?} and {:?}",
            a.domain().shape,
            b.domain().shape
        )));
    }
    let range = Space::new(
        [a.range().numel() + b.range().numel()],
        a.range().dtype.promote(b.range().dtype),
    );
    Ok(Arc::new(Stacked { a, b, range }))
}

impl LinearMap for Stacked {
    fn domain(&self) -> &Space {
        self.a.domain()
    }

    fn range(&self) -> &Space {
        &self.range
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let ya = self.a.apply(x)?;
        let yb = self.b.apply(x)?;
        Ok(Tensor::concat(&[&ya, &yb]))
    }

    fn apply_adjoint(&self, u: &Tensor) -> Result<Tensor> {
        self.range.check(u, "stacked adjoint")?;
        let blocks = u.split(&self.range_blocks())?;
        Ok(self.a.apply_adjoint(&blocks[0])?.add(&self.b.apply_adjoint(&blocks[1])?))
    }

    fn range_blocks(&self) -> Vec<Vec<usize>> {
        vec![self.a.range().shape.clone(), self.b.range().shape.clone()]
    }
}
