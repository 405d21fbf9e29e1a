//! k-space gridding: the Type-1 (non-Cartesian samples to image) and Type-2
//! (image to non-Cartesian samples) transforms as an exact forward-adjoint
//! pair.
//!
//! Density-compensation weights are part of the operator on both sides of the
//! pair (spread premultiplies, gather postmultiplies), which keeps the two
//! directions exactly adjoint while approximating the density-corrected
//! non-uniform DFT.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{crop_center, fft_unitary, zero_pad, ComplexGrid, Direction, Space};
use crate::plan::{gather_points, spread_points, GriddingPlan, TapTable};

/// Gridding operator bound to a fixed trajectory.
#[derive(Clone, Debug)]
pub struct KSpaceGridder {
    plan: Arc<GriddingPlan>,
    taps: TapTable,
    weights: Vec<f64>,
}

impl KSpaceGridder {
    /// `coords` holds one center-relative k-space coordinate tuple per sample
    /// (cycles per field of view); `weights` the per-sample density weights.
    pub fn new(plan: Arc<GriddingPlan>, coords: &[f64], weights: Vec<f64>) -> Result<Self> {
        let dim = plan.dim();
        if coords.len() != weights.len() * dim {
            return Err(Error::LengthMismatch {
                expected: weights.len() * dim,
                got: coords.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("density weights must be finite and >= 0"));
        }
        let positions = plan.oversampled_positions(coords)?;
        let taps = plan.compute_taps(&positions);
        Ok(KSpaceGridder {
            plan,
            taps,
            weights,
        })
    }

    pub fn plan(&self) -> &Arc<GriddingPlan> {
        &self.plan
    }

    pub fn sample_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check_samples(&self, samples: &[Complex64]) -> Result<()> {
        if samples.len() != self.sample_count() {
            return Err(Error::LengthMismatch {
                expected: self.sample_count(),
                got: samples.len(),
            });
        }
        Ok(())
    }

    /// Projection core: density-weight each sample and spread it onto the
    /// oversampled k-space grid.
    pub fn spread(&self, samples: &[Complex64]) -> Result<ComplexGrid> {
        self.check_samples(samples)?;
        let weighted: Vec<Complex64> = samples
            .iter()
            .zip(&self.weights)
            .map(|(s, &w)| s * w)
            .collect();
        let mut out = ComplexGrid::zeros(self.plan.oversampled_shape(), Space::KSpace);
        spread_points(&self.plan, &self.taps, &weighted, out.data_mut());
        Ok(out)
    }

    /// Backprojection core: gather from the oversampled k-space grid at each
    /// trajectory point, then density-weight. Exact adjoint of [`Self::spread`].
    pub fn gather(&self, grid: &ComplexGrid) -> Result<Vec<Complex64>> {
        if grid.shape() != self.plan.oversampled_shape() {
            return Err(Error::ShapeMismatch {
                expected: self.plan.oversampled_shape().to_vec(),
                got: grid.shape().to_vec(),
            });
        }
        let mut out = vec![Complex64::ZERO; self.sample_count()];
        gather_points(&self.plan, &self.taps, grid.data(), &mut out);
        for (o, &w) in out.iter_mut().zip(&self.weights) {
            *o *= w;
        }
        Ok(out)
    }

    /// Full Type-1 transform: spread, inverse FFT, crop, deapodize.
    /// Approximates the unitary inverse non-uniform DFT of the weighted
    /// samples.
    pub fn to_image(&self, samples: &[Complex64]) -> Result<ComplexGrid> {
        let spread = self.spread(samples)?;
        let image_os = fft_unitary(&spread, Direction::Inverse)?;
        let mut image = crop_center(&image_os, self.plan.grid_shape())?;
        let scale = self.plan.chain_scale();
        for (v, &d) in image.data_mut().iter_mut().zip(self.plan.deapod_image()) {
            *v *= d * scale;
        }
        Ok(image.retagged(Space::Image))
    }

    /// Full Type-2 transform: deapodize (conjugate weights), zero-pad,
    /// forward FFT, gather. Exact adjoint of [`Self::to_image`].
    pub fn to_samples(&self, image: &ComplexGrid) -> Result<Vec<Complex64>> {
        if image.shape() != self.plan.grid_shape() {
            return Err(Error::ShapeMismatch {
                expected: self.plan.grid_shape().to_vec(),
                got: image.shape().to_vec(),
            });
        }
        let mut pre = image.clone();
        let scale = self.plan.chain_scale();
        // the deapodization table is real, so its conjugate is itself
        for (v, &d) in pre.data_mut().iter_mut().zip(self.plan.deapod_image()) {
            *v *= d * scale;
        }
        let padded = zero_pad(&pre, self.plan.oversampled_shape())?;
        let kspace = fft_unitary(&padded.retagged(Space::Image), Direction::Forward)?;
        self.gather(&kspace)
    }
}
