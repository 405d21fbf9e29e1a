//! Image-space gridding: a nonrigid warp computed with NUFFT machinery, as an
//! exact forward-adjoint operator pair.
//!
//! The warped image's voxel locations `r + d[r]` are treated as a set of
//! non-Cartesian points on the input image's grid. The forward operator
//! gathers the band-limited (periodic Dirichlet) interpolant of the input at
//! those points; the adjoint scatters with the same kernel taps and undoes
//! the kernel weighting in k-space. Both directions share one tap table, so
//! the pair is adjoint to machine precision for any kernel.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{coords_of, crop_center, fft_unitary, zero_pad, ComplexGrid, Direction, Space};
use crate::plan::{gather_points, spread_points, GriddingPlan, TapTable};

/// Per-voxel offset vectors defining a nonrigid transform, pull-style: the
/// warped image at voxel `r` reads the input at `r + d[r]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    shape: Vec<usize>,
    /// Component-major: `offsets[ax * nvox + voxel]`, in voxel units.
    offsets: Vec<f64>,
}

impl DisplacementField {
    pub fn new(shape: Vec<usize>, offsets: Vec<f64>) -> Result<Self> {
        let nvox: usize = shape.iter().product();
        if shape.is_empty() || nvox == 0 {
            return Err(Error::invalid("displacement field needs a non-empty shape"));
        }
        if offsets.len() != nvox * shape.len() {
            return Err(Error::LengthMismatch {
                expected: nvox * shape.len(),
                got: offsets.len(),
            });
        }
        if offsets.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("displacement field has non-finite entries"));
        }
        Ok(DisplacementField { shape, offsets })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let nvox: usize = shape.iter().product();
        DisplacementField {
            shape: shape.to_vec(),
            offsets: vec![0.0; nvox * shape.len()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn voxels(&self) -> usize {
        self.offsets.len() / self.shape.len()
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn component(&self, ax: usize) -> &[f64] {
        let n = self.voxels();
        &self.offsets[ax * n..(ax + 1) * n]
    }

    /// The field with every offset negated (the naive inverse of a warp).
    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// The field with every offset multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        DisplacementField {
            shape: self.shape.clone(),
            offsets: self.offsets.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.offsets.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.offsets.iter().all(|v| *v == 0.0)
    }
}

/// Nonrigid warp operator for one displacement field. Warped coordinates and
/// kernel taps are precomputed at construction since fields are reapplied
/// many times inside iterative solvers.
#[derive(Clone, Debug)]
pub struct ImageGridder {
    plan: Arc<GriddingPlan>,
    field: DisplacementField,
    taps: TapTable,
}

impl ImageGridder {
    pub fn new(plan: Arc<GriddingPlan>, field: DisplacementField) -> Result<Self> {
        if field.shape() != plan.grid_shape() {
            return Err(Error::ShapeMismatch {
                expected: plan.grid_shape().to_vec(),
                got: field.shape().to_vec(),
            });
        }
        let dim = plan.dim();
        let nvox = field.voxels();
        let shape = plan.grid_shape();
        let mut coords = Vec::with_capacity(nvox * dim);
        for v in 0..nvox {
            let r = coords_of(v, shape);
            for ax in 0..dim {
                let center = shape[ax] as f64 / 2.0;
                coords.push(r[ax] as f64 - center + field.component(ax)[v]);
            }
        }
        let positions = plan.oversampled_positions(&coords)?;
        let taps = plan.compute_taps(&positions);
        Ok(ImageGridder { plan, field, taps })
    }

    pub fn identity(plan: Arc<GriddingPlan>) -> Result<Self> {
        let field = DisplacementField::zeros(plan.grid_shape());
        ImageGridder::new(plan, field)
    }

    pub fn plan(&self) -> &Arc<GriddingPlan> {
        &self.plan
    }

    pub fn field(&self) -> &DisplacementField {
        &self.field
    }

    fn check_image(&self, image: &ComplexGrid) -> Result<()> {
        if image.shape() != self.plan.grid_shape() {
            return Err(Error::ShapeMismatch {
                expected: self.plan.grid_shape().to_vec(),
                got: image.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Apply the warp: forward FFT, conjugate k-space kernel correction,
    /// zero-pad, inverse FFT to the oversampled image, gather at each warped
    /// coordinate. Output voxel `r` holds the interpolant at `r + d[r]`.
    pub fn warp(&self, image: &ComplexGrid) -> Result<ComplexGrid> {
        self.check_image(image)?;
        let mut spectrum = fft_unitary(image, Direction::Forward)?;
        let scale = self.plan.chain_scale();
        // real deapodization table: conjugate is itself
        for (v, &d) in spectrum
            .data_mut()
            .iter_mut()
            .zip(self.plan.deapod_kspace())
        {
            *v *= d * scale;
        }
        let padded = zero_pad(&spectrum, self.plan.oversampled_shape())?;
        let image_os = fft_unitary(&padded, Direction::Inverse)?;
        let mut out = vec![Complex64::ZERO; self.field.voxels()];
        gather_points(&self.plan, &self.taps, image_os.data(), &mut out);
        ComplexGrid::new(self.plan.grid_shape().to_vec(), Space::Image, out)
    }

    /// Exact adjoint of [`Self::warp`]: scatter each voxel value to the
    /// oversampled image grid at its warped coordinate, forward FFT, crop,
    /// k-space kernel correction, inverse FFT.
    pub fn warp_adjoint(&self, warped: &ComplexGrid) -> Result<ComplexGrid> {
        self.check_image(warped)?;
        let mut os = ComplexGrid::zeros(self.plan.oversampled_shape(), Space::Image);
        spread_points(&self.plan, &self.taps, warped.data(), os.data_mut());
        let spectrum_os = fft_unitary(&os, Direction::Forward)?;
        let mut spectrum = crop_center(&spectrum_os, self.plan.grid_shape())?;
        let scale = self.plan.chain_scale();
        for (v, &d) in spectrum
            .data_mut()
            .iter_mut()
            .zip(self.plan.deapod_kspace())
        {
            *v *= d * scale;
        }
        fft_unitary(&spectrum, Direction::Inverse)
    }
}

/// Interpolation rule for the direct warp reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarpMethod {
    Nearest,
    Linear,
}

/// Direct per-voxel interpolation at `r + d[r]` with periodic wrap; the
/// plain-resampling reference the gridded warp is compared against.
pub fn warp_direct(
    image: &ComplexGrid,
    field: &DisplacementField,
    method: WarpMethod,
) -> Result<ComplexGrid> {
    if image.shape() != field.shape() {
        return Err(Error::ShapeMismatch {
            expected: field.shape().to_vec(),
            got: image.shape().to_vec(),
        });
    }
    let shape = image.shape();
    let dim = shape.len();
    let strides = crate::grid::strides(shape);
    let nvox = image.len();
    let mut out = vec![Complex64::ZERO; nvox];
    let mut src = vec![0.0f64; dim];
    for (v, o) in out.iter_mut().enumerate() {
        let r = coords_of(v, shape);
        for ax in 0..dim {
            src[ax] = (r[ax] as f64 + field.component(ax)[v]).rem_euclid(shape[ax] as f64);
        }
        *o = match method {
            WarpMethod::Nearest => {
                let mut flat = 0usize;
                for ax in 0..dim {
                    let n = shape[ax];
                    let idx = (src[ax].round() as usize) % n;
                    flat += idx * strides[ax];
                }
                image.data()[flat]
            }
            WarpMethod::Linear => {
                let mut acc = Complex64::ZERO;
                for corner in 0..(1usize << dim) {
                    let mut w = 1.0;
                    let mut flat = 0usize;
                    for ax in 0..dim {
                        let n = shape[ax];
                        let base = src[ax].floor();
                        let frac = src[ax] - base;
                        let hi = (corner >> ax) & 1 == 1;
                        w *= if hi { frac } else { 1.0 - frac };
                        let idx = (base as usize + usize::from(hi)) % n;
                        flat += idx * strides[ax];
                    }
                    acc += image.data()[flat] * w;
                }
                acc
            }
        };
    }
    ComplexGrid::new(shape.to_vec(), Space::Image, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner, norm2, nrmse};
    use crate::kernel::KernelSpec;
    use crate::plan::make_plan;
    use crate::testutil::{random_grid, random_values};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn smooth_field(shape: &[usize], amplitude: f64, seed: u64) -> DisplacementField {
        // sum of a few gaussian bumps per component, bounded by `amplitude`
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = shape.len();
        let nvox: usize = shape.iter().product();
        let mut offsets = vec![0.0; dim * nvox];
        for ax in 0..dim {
            let cx: Vec<f64> = (0..dim)
                .map(|a| shape[a] as f64 * (0.3 + 0.4 * rng.random::<f64>()))
                .collect();
            let amp = amplitude * (2.0 * rng.random::<f64>() - 1.0);
            let radius = shape[0] as f64 * 0.2;
            for v in 0..nvox {
                let r = coords_of(v, shape);
                let mut d2 = 0.0;
                for a in 0..dim {
                    let mut dr = (r[a] as f64 - cx[a]).abs();
                    dr = dr.min(shape[a] as f64 - dr);
                    d2 += dr * dr;
                }
                offsets[ax * nvox + v] += amp * (-d2 / (2.0 * radius * radius)).exp();
            }
        }
        DisplacementField::new(shape.to_vec(), offsets).unwrap()
    }

    fn gridder(shape: &[usize], field: DisplacementField) -> ImageGridder {
        let plan = make_plan(shape, &KernelSpec::default()).unwrap();
        ImageGridder::new(plan, field).unwrap()
    }

    /// Periodic band-limited interpolation by direct NDFT sums; the model the
    /// warp operator approximates.
    fn dirichlet_warp(image: &ComplexGrid, field: &DisplacementField) -> Vec<Complex64> {
        let shape = image.shape();
        let dim = shape.len();
        let total = image.len();
        // centered unitary DFT by direct summation
        let mut spectrum = vec![Complex64::ZERO; total];
        for (kflat, s) in spectrum.iter_mut().enumerate() {
            let k = coords_of(kflat, shape);
            let mut acc = Complex64::ZERO;
            for (xflat, &v) in image.data().iter().enumerate() {
                let x = coords_of(xflat, shape);
                let mut phase = 0.0;
                for ax in 0..dim {
                    let kc = k[ax] as f64 - shape[ax] as f64 / 2.0;
                    let xc = x[ax] as f64 - shape[ax] as f64 / 2.0;
                    phase -= 2.0 * std::f64::consts::PI * kc * xc / shape[ax] as f64;
                }
                acc += v * Complex64::from_polar(1.0, phase);
            }
            *s = acc / (total as f64).sqrt();
        }
        // evaluate the interpolant at each warped point
        let mut out = vec![Complex64::ZERO; total];
        for (v, o) in out.iter_mut().enumerate() {
            let r = coords_of(v, shape);
            let mut acc = Complex64::ZERO;
            for (kflat, s) in spectrum.iter().enumerate() {
                let k = coords_of(kflat, shape);
                let mut phase = 0.0;
                for ax in 0..dim {
                    let kc = k[ax] as f64 - shape[ax] as f64 / 2.0;
                    let y = r[ax] as f64 + field.component(ax)[v] - shape[ax] as f64 / 2.0;
                    phase += 2.0 * std::f64::consts::PI * kc * y / shape[ax] as f64;
                }
                acc += s * Complex64::from_polar(1.0, phase);
            }
            *o = acc / (total as f64).sqrt();
        }
        out
    }

    #[test]
    fn zero_field_warp_is_identity_within_nufft_tolerance() {
        let shape = [16usize, 16];
        let image = random_grid(&shape, Space::Image, 201);
        let g = gridder(&shape, DisplacementField::zeros(&shape));
        let out = g.warp(&image).unwrap();
        let err = nrmse(out.data(), image.data());
        assert!(err < 1e-3, "identity warp error {err}");
        let back = g.warp_adjoint(&image).unwrap();
        let err = nrmse(back.data(), image.data());
        assert!(err < 1e-3, "identity adjoint error {err}");
    }

    #[test]
    fn integer_shift_field_matches_circular_shift() {
        let shape = [16usize, 16];
        let image = random_grid(&shape, Space::Image, 211);
        let nvox = 256;
        let mut offsets = vec![0.0; 2 * nvox];
        offsets[..nvox].iter_mut().for_each(|v| *v = 3.0);
        let field = DisplacementField::new(shape.to_vec(), offsets).unwrap();
        let g = gridder(&shape, field);
        let out = g.warp(&image).unwrap();
        // pull-style: out[r] = image[r + 3 along axis 0]
        let mut expected = ComplexGrid::zeros(&shape, Space::Image);
        for x in 0..16 {
            for y in 0..16 {
                expected.data_mut()[x * 16 + y] = image.data()[((x + 3) % 16) * 16 + y];
            }
        }
        let err = nrmse(out.data(), expected.data());
        assert!(err < 1e-3, "shift warp error {err}");
    }

    #[test]
    fn random_smooth_field_matches_dirichlet_interpolation() {
        let shape = [32usize, 32];
        let image = random_grid(&shape, Space::Image, 221);
        let field = smooth_field(&shape, 3.0, 222);
        let g = gridder(&shape, field.clone());
        let got = g.warp(&image).unwrap();
        let want = dirichlet_warp(&image, &field);
        let err = nrmse(got.data(), &want);
        assert!(err < 1e-3, "warp vs dirichlet oracle {err}");
    }

    #[test]
    fn warp_pair_is_exactly_adjoint() {
        for shape in [vec![32usize, 32], vec![16, 16, 16]] {
            let field = smooth_field(&shape, 4.0, 231);
            let g = gridder(&shape, field);
            let x = random_grid(&shape, Space::Image, 232);
            let y = random_grid(&shape, Space::Image, 233);
            let ax = g.warp(&x).unwrap();
            let ahy = g.warp_adjoint(&y).unwrap();
            let lhs = inner(ax.data(), y.data());
            let rhs = inner(x.data(), ahy.data());
            let rel = (lhs - rhs).norm() / (norm2(ax.data()) * norm2(y.data()));
            assert!(rel < 1e-12, "adjoint discrepancy {rel} for {shape:?}");
        }
    }

    #[test]
    fn dense_materialization_adjoint_is_conjugate_transpose() {
        let shape = [8usize, 8];
        let n = 64usize;
        let field = smooth_field(&shape, 2.0, 241);
        let g = gridder(&shape, field);
        let mut forward = vec![vec![Complex64::ZERO; n]; n]; // [row][col]
        for col in 0..n {
            let mut e = ComplexGrid::zeros(&shape, Space::Image);
            e.data_mut()[col] = Complex64::new(1.0, 0.0);
            let out = g.warp(&e).unwrap();
            for row in 0..n {
                forward[row][col] = out.data()[row];
            }
        }
        // adjoint columns
        for col in 0..n {
            let mut e = ComplexGrid::zeros(&shape, Space::Image);
            e.data_mut()[col] = Complex64::new(1.0, 0.0);
            let out = g.warp_adjoint(&e).unwrap();
            for row in 0..n {
                let want = forward[col][row].conj();
                assert!(
                    (out.data()[row] - want).norm() < 1e-12,
                    "entry ({row},{col}) mismatch"
                );
            }
        }
        // matrix application matches the operator
        let x = random_values(n, 242);
        let xg = ComplexGrid::new(shape.to_vec(), Space::Image, x.clone()).unwrap();
        let got = g.warp(&xg).unwrap();
        for row in 0..n {
            let want: Complex64 = (0..n).map(|c| forward[row][c] * x[c]).sum();
            assert!((got.data()[row] - want).norm() < 1e-10);
        }
    }

    #[test]
    fn negated_field_does_not_invert_the_warp() {
        // guards against treating -d as the inverse transform
        let shape = [32usize, 32];
        let image = {
            // band-limited test image so the residual is a warp-model effect,
            // not interpolation noise
            let g = random_grid(&shape, Space::Image, 251);
            let mut spec = fft_unitary(&g, Direction::Forward).unwrap();
            for (flat, v) in spec.data_mut().iter_mut().enumerate() {
                let c = coords_of(flat, &shape);
                let kx = c[0] as f64 - 16.0;
                let ky = c[1] as f64 - 16.0;
                *v *= (-(kx * kx + ky * ky) / 32.0).exp();
            }
            fft_unitary(&spec, Direction::Inverse).unwrap()
        };
        let field = smooth_field(&shape, 4.0, 252);
        let fwd = gridder(&shape, field.clone());
        let bwd = gridder(&shape, field.negated());
        let roundtrip = bwd.warp(&fwd.warp(&image).unwrap()).unwrap();
        let err = nrmse(roundtrip.data(), image.data());
        assert!(
            err > 1e-2,
            "negated-field roundtrip unexpectedly close to identity: {err}"
        );
    }

    #[test]
    fn warp_operators_are_linear() {
        let shape = [16usize, 16];
        let field = smooth_field(&shape, 2.5, 261);
        let g = gridder(&shape, field);
        let a = random_grid(&shape, Space::Image, 262);
        let b = random_grid(&shape, Space::Image, 263);
        let alpha = Complex64::new(1.3, -0.4);
        let beta = Complex64::new(-0.2, 0.9);
        let mut combo = ComplexGrid::zeros(&shape, Space::Image);
        for i in 0..combo.len() {
            combo.data_mut()[i] = alpha * a.data()[i] + beta * b.data()[i];
        }
        let lhs = g.warp(&combo).unwrap();
        let ga = g.warp(&a).unwrap();
        let gb = g.warp(&b).unwrap();
        let mut rhs = ComplexGrid::zeros(&shape, Space::Image);
        for i in 0..rhs.len() {
            rhs.data_mut()[i] = alpha * ga.data()[i] + beta * gb.data()[i];
        }
        assert!(nrmse(lhs.data(), rhs.data()) < 1e-13);
    }

    #[test]
    fn direct_warp_zero_field_is_bit_exact_identity() {
        let shape = [16usize, 16];
        let image = random_grid(&shape, Space::Image, 271);
        let field = DisplacementField::zeros(&shape);
        for method in [WarpMethod::Nearest, WarpMethod::Linear] {
            let out = warp_direct(&image, &field, method).unwrap();
            assert_eq!(out.data(), image.data());
        }
    }

    #[test]
    fn direct_warp_integer_shift_nearest_is_exact_circular_shift() {
        let shape = [16usize, 16];
        let image = random_grid(&shape, Space::Image, 281);
        let nvox = 256;
        let mut offsets = vec![0.0; 2 * nvox];
        offsets[nvox..].iter_mut().for_each(|v| *v = -2.0);
        let field = DisplacementField::new(shape.to_vec(), offsets).unwrap();
        let out = warp_direct(&image, &field, WarpMethod::Nearest).unwrap();
        for x in 0..16 {
            for y in 0..16 {
                assert_eq!(
                    out.data()[x * 16 + y],
                    image.data()[x * 16 + (y + 16 - 2) % 16]
                );
            }
        }
    }

    #[test]
    fn field_validation() {
        assert!(DisplacementField::new(vec![4, 4], vec![0.0; 31]).is_err());
        assert!(DisplacementField::new(vec![4, 4], vec![f64::INFINITY; 32]).is_err());
        let f = DisplacementField::zeros(&[4, 4]);
        assert!(f.is_zero());
        assert_eq!(f.negated(), f);
    }
}
