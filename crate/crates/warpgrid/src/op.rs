//! Common interface for the acquisition-model operators.
//!
//! Everything the solver consumes — plain warps, per-state SENSE operators,
//! stacked multi-state models — implements [`LinearOperator`] over a flat
//! complex range, so solvers and self-tests are written once against the
//! trait.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{inner, norm2, ComplexGrid, Space};
use crate::igrid::ImageGridder;

/// A linear map from images on a fixed Cartesian grid to a flat complex
/// vector, with an exact adjoint.
pub trait LinearOperator: Sync {
    /// Shape of the image domain.
    fn domain_shape(&self) -> &[usize];

    /// Flattened length of the range.
    fn range_len(&self) -> usize;

    fn forward(&self, x: &ComplexGrid) -> Result<Vec<Complex64>>;

    fn adjoint(&self, y: &[Complex64]) -> Result<ComplexGrid>;

    /// `Aᴴ(A x)`.
    fn normal(&self, x: &ComplexGrid) -> Result<ComplexGrid> {
        let y = self.forward(x)?;
        self.adjoint(&y)
    }
}

/// Identity on a grid; the degenerate model used by solver tests.
#[derive(Clone, Debug)]
pub struct IdentityOp {
    shape: Vec<usize>,
}

impl IdentityOp {
    pub fn new(shape: &[usize]) -> Self {
        IdentityOp {
            shape: shape.to_vec(),
        }
    }
}

impl LinearOperator for IdentityOp {
    fn domain_shape(&self) -> &[usize] {
        &self.shape
    }

    fn range_len(&self) -> usize {
        self.shape.iter().product()
    }

    fn forward(&self, x: &ComplexGrid) -> Result<Vec<Complex64>> {
        if x.shape() != self.shape.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                got: x.shape().to_vec(),
            });
        }
        Ok(x.data().to_vec())
    }

    fn adjoint(&self, y: &[Complex64]) -> Result<ComplexGrid> {
        ComplexGrid::new(self.shape.clone(), Space::Image, y.to_vec())
    }
}

impl LinearOperator for ImageGridder {
    fn domain_shape(&self) -> &[usize] {
        self.plan().grid_shape()
    }

    fn range_len(&self) -> usize {
        self.plan().grid_shape().iter().product()
    }

    fn forward(&self, x: &ComplexGrid) -> Result<Vec<Complex64>> {
        Ok(self.warp(x)?.into_data())
    }

    fn adjoint(&self, y: &[Complex64]) -> Result<ComplexGrid> {
        let grid = ComplexGrid::new(self.domain_shape().to_vec(), Space::Image, y.to_vec())?;
        self.warp_adjoint(&grid)
    }
}

/// Acquisition convention for a bare gridder: forward samples k-space from an
/// image (Type-2), adjoint grids samples back (Type-1).
impl LinearOperator for crate::kgrid::KSpaceGridder {
    fn domain_shape(&self) -> &[usize] {
        self.plan().grid_shape()
    }

    fn range_len(&self) -> usize {
        self.sample_count()
    }

    fn forward(&self, x: &ComplexGrid) -> Result<Vec<Complex64>> {
        self.to_samples(x)
    }

    fn adjoint(&self, y: &[Complex64]) -> Result<ComplexGrid> {
        self.to_image(y)
    }
}

/// Worst relative adjoint discrepancy `|<Ax,y> - <x,Aᴴy>| / (|Ax| |y|)` over
/// seeded random trials.
pub fn adjoint_discrepancy(op: &dyn LinearOperator, trials: usize, seed: u64) -> Result<f64> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = op.domain_shape().to_vec();
    let n: usize = shape.iter().product();
    let m = op.range_len();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x_data: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let y: Vec<Complex64> = (0..m)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let x = ComplexGrid::new(shape.clone(), Space::Image, x_data)?;
        let ax = op.forward(&x)?;
        let ahy = op.adjoint(&y)?;
        let lhs = inner(&ax, &y);
        let rhs = inner(x.data(), ahy.data());
        let denom = norm2(&ax) * norm2(&y);
        if denom > 0.0 {
            worst = worst.max((lhs - rhs).norm() / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::igrid::DisplacementField;
    use crate::kernel::KernelSpec;
    use crate::plan::make_plan;

    #[test]
    fn identity_is_self_adjoint() {
        let op = IdentityOp::new(&[8, 8]);
        let d = adjoint_discrepancy(&op, 5, 1).unwrap();
        assert!(d < 1e-15);
    }

    #[test]
    fn warp_operator_satisfies_trait_contract() {
        let plan = make_plan(&[16, 16], &KernelSpec::default()).unwrap();
        let g = ImageGridder::new(plan, DisplacementField::zeros(&[16, 16])).unwrap();
        assert_eq!(g.domain_shape(), &[16, 16]);
        assert_eq!(g.range_len(), 256);
        let d = adjoint_discrepancy(&g, 5, 2).unwrap();
        assert!(d < 1e-12, "discrepancy {d}");
    }
}
