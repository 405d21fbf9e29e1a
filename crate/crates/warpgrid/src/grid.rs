//! Cartesian grid container and the Fourier/padding primitives shared by the
//! gridding operators.
//!
//! Conventions fixed here and relied on everywhere else:
//!
//! * grids are row-major with per-axis even sample counts for anything that
//!   passes through an FFT; the image/k-space center sits at index `n/2`,
//! * `fft_unitary` is DC-centered and scaled by `1/sqrt(total)` in both
//!   directions, so forward and inverse are mutual adjoints,
//! * non-Cartesian coordinates are expressed relative to the grid center
//!   (0 = DC / image center), in units of one grid cell.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which domain a grid's samples live in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Image,
    KSpace,
}

impl Space {
    fn flipped(self) -> Space {
        match self {
            Space::Image => Space::KSpace,
            Space::KSpace => Space::Image,
        }
    }
}

/// Transform direction for [`fft_unitary`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Complex samples on a Cartesian grid (image or k-space).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGrid {
    shape: Vec<usize>,
    data: Vec<Complex64>,
    space: Space,
}

impl ComplexGrid {
    pub fn new(shape: Vec<usize>, space: Space, data: Vec<Complex64>) -> Result<Self> {
        validate_shape(&shape)?;
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: data.len(),
            });
        }
        Ok(ComplexGrid { shape, data, space })
    }

    pub fn zeros(shape: &[usize], space: Space) -> Self {
        let n: usize = shape.iter().product();
        ComplexGrid {
            shape: shape.to_vec(),
            data: vec![Complex64::ZERO; n],
            space,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// Same samples, retagged to the other domain (used when an operator's
    /// output convention differs from its compute domain).
    pub fn retagged(mut self, space: Space) -> Self {
        self.space = space;
        self
    }

    /// Elementwise product with another grid of the same shape.
    pub fn pointwise_mul(&self, other: &ComplexGrid) -> Result<ComplexGrid> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Ok(ComplexGrid {
            shape: self.shape.clone(),
            data,
            space: self.space,
        })
    }

    /// Elementwise product with the conjugate of another grid.
    pub fn pointwise_mul_conj(&self, other: &ComplexGrid) -> Result<ComplexGrid> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .collect();
        Ok(ComplexGrid {
            shape: self.shape.clone(),
            data,
            space: self.space,
        })
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn add_assign(&mut self, other: &ComplexGrid) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &ComplexGrid) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                got: other.shape.clone(),
            });
        }
        Ok(())
    }
}

/// Paired off-grid coordinates and complex values (k-space trajectory samples
/// or warped voxel targets). Coordinates are center-relative, one entry of
/// `dim` components per sample.
#[derive(Clone, Debug)]
pub struct NonCartesianSet {
    dim: usize,
    coords: Vec<f64>,
    values: Vec<Complex64>,
}

impl NonCartesianSet {
    pub fn new(dim: usize, coords: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("NonCartesianSet dimensionality must be >= 1"));
        }
        if coords.len() != values.len() * dim {
            return Err(Error::LengthMismatch {
                expected: values.len() * dim,
                got: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite coordinate in NonCartesianSet"));
        }
        Ok(NonCartesianSet { dim, coords, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
}

fn validate_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::invalid("grid shape must have at least one axis"));
    }
    if shape.iter().any(|&n| n < 1) {
        return Err(Error::invalid("grid shape entries must be >= 1"));
    }
    Ok(())
}

fn check_even(shape: &[usize]) -> Result<()> {
    if shape.iter().any(|&n| n % 2 != 0) {
        return Err(Error::invalid(format!(
            "FFT-bearing grids need even per-axis counts, got {shape:?}"
        )));
    }
    Ok(())
}

/// Row-major strides for a shape.
pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Decompose a flat row-major index into per-axis coordinates.
pub(crate) fn coords_of(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let st = strides(shape);
    let mut c = vec![0usize; shape.len()];
    for (i, &s) in st.iter().enumerate() {
        c[i] = flat / s;
        flat %= s;
    }
    c
}

/// Unitary DC-centered discrete Fourier transform.
///
/// Both directions carry the `1/sqrt(total)` factor, so `Inverse` is the exact
/// adjoint (and inverse) of `Forward`. DC sits at index `n/2` on every axis in
/// both domains.
pub fn fft_unitary(grid: &ComplexGrid, direction: Direction) -> Result<ComplexGrid> {
    check_even(grid.shape())?;
    let mut data = grid.data.clone();
    fft_unitary_in_place(&mut data, grid.shape(), direction);
    Ok(ComplexGrid {
        shape: grid.shape.clone(),
        data,
        space: grid.space.flipped(),
    })
}

pub(crate) fn fft_unitary_in_place(data: &mut [Complex64], shape: &[usize], direction: Direction) {
    let mut planner = FftPlanner::new();
    let dir = match direction {
        Direction::Forward => FftDirection::Forward,
        Direction::Inverse => FftDirection::Inverse,
    };
    let total = data.len();
    for axis in 0..shape.len() {
        let n = shape[axis];
        let fft = planner.plan_fft(n, dir);
        let mut buf = vec![Complex64::ZERO; n];
        let mut scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = total / (n * inner);
        let half = n / 2;
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * inner + i;
                // half-rotation before and after the FFT realizes the
                // DC-centered convention for even n
                for j in 0..n {
                    buf[j] = data[base + ((j + half) % n) * inner];
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for j in 0..n {
                    data[base + j * inner] = buf[(j + half) % n];
                }
            }
        }
    }
    let scale = 1.0 / (total as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Embed `grid` centered in a larger grid of `target_shape`, zero elsewhere.
/// Mutually adjoint with [`crop_center`], and `crop(pad(x)) == x` exactly.
pub fn zero_pad(grid: &ComplexGrid, target_shape: &[usize]) -> Result<ComplexGrid> {
    check_even(grid.shape())?;
    check_even(target_shape)?;
    if target_shape.len() != grid.dim()
        || target_shape
            .iter()
            .zip(grid.shape())
            .any(|(&t, &s)| t < s)
    {
        return Err(Error::ShapeMismatch {
            expected: grid.shape.clone(),
            got: target_shape.to_vec(),
        });
    }
    let offsets: Vec<usize> = target_shape
        .iter()
        .zip(grid.shape())
        .map(|(&t, &s)| (t - s) / 2)
        .collect();
    let tstrides = strides(target_shape);
    let mut out = ComplexGrid::zeros(target_shape, grid.space);
    for (flat, &v) in grid.data.iter().enumerate() {
        let c = coords_of(flat, grid.shape());
        let tflat: usize = c
            .iter()
            .zip(&offsets)
            .zip(&tstrides)
            .map(|((&ci, &off), &st)| (ci + off) * st)
            .sum();
        out.data[tflat] = v;
    }
    Ok(out)
}

/// Extract the centered block of `target_shape` from a larger grid.
pub fn crop_center(grid: &ComplexGrid, target_shape: &[usize]) -> Result<ComplexGrid> {
    check_even(grid.shape())?;
    check_even(target_shape)?;
    if target_shape.len() != grid.dim()
        || target_shape
            .iter()
            .zip(grid.shape())
            .any(|(&t, &s)| t > s)
    {
        return Err(Error::ShapeMismatch {
            expected: grid.shape.clone(),
            got: target_shape.to_vec(),
        });
    }
    let offsets: Vec<usize> = grid
        .shape()
        .iter()
        .zip(target_shape)
        .map(|(&s, &t)| (s - t) / 2)
        .collect();
    let sstrides = strides(grid.shape());
    let n: usize = target_shape.iter().product();
    let mut data = Vec::with_capacity(n);
    for flat in 0..n {
        let c = coords_of(flat, target_shape);
        let sflat: usize = c
            .iter()
            .zip(&offsets)
            .zip(&sstrides)
            .map(|((&ci, &off), &st)| (ci + off) * st)
            .sum();
        data.push(grid.data[sflat]);
    }
    Ok(ComplexGrid {
        shape: target_shape.to_vec(),
        data,
        space: grid.space,
    })
}

/// Shift image content by `shift` voxels (possibly fractional) via a linear
/// phase in k-space: the output equals the periodic band-limited interpolant
/// of the input evaluated at `x - shift`.
pub fn fourier_shift(grid: &ComplexGrid, shift: &[f64]) -> Result<ComplexGrid> {
    if shift.len() != grid.dim() {
        return Err(Error::LengthMismatch {
            expected: grid.dim(),
            got: shift.len(),
        });
    }
    let mut spec = fft_unitary(grid, Direction::Forward)?;
    let shape = grid.shape().to_vec();
    for (flat, v) in spec.data_mut().iter_mut().enumerate() {
        let c = coords_of(flat, &shape);
        let mut phase = 0.0;
        for ax in 0..shape.len() {
            let k = c[ax] as f64 - shape[ax] as f64 / 2.0;
            phase -= 2.0 * std::f64::consts::PI * k * shift[ax] / shape[ax] as f64;
        }
        *v *= Complex64::from_polar(1.0, phase);
    }
    fft_unitary(&spec, Direction::Inverse)
}

/// `sum_i a_i * conj(b_i)`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Euclidean norm.
pub fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Root-mean-square error normalized by the reference norm.
pub fn nrmse(x: &[Complex64], reference: &[Complex64]) -> f64 {
    assert_eq!(x.len(), reference.len());
    let diff: f64 = x
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    diff.sqrt() / norm2(reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_grid;

    #[test]
    fn delta_at_center_transforms_to_flat_spectrum() {
        let shape = [8usize, 8];
        let mut g = ComplexGrid::zeros(&shape, Space::Image);
        let center = 4 * 8 + 4;
        g.data_mut()[center] = Complex64::new(1.0, 0.0);
        let f = fft_unitary(&g, Direction::Forward).unwrap();
        let expected = 1.0 / 8.0;
        for v in f.data() {
            assert!((v.re - expected).abs() < 1e-14);
            assert!(v.im.abs() < 1e-14);
        }
        assert_eq!(f.space(), Space::KSpace);
    }

    #[test]
    fn forward_then_inverse_is_identity() {
        for shape in [vec![64usize], vec![16, 32], vec![8, 8, 8]] {
            let g = random_grid(&shape, Space::Image, 7);
            let roundtrip =
                fft_unitary(&fft_unitary(&g, Direction::Forward).unwrap(), Direction::Inverse)
                    .unwrap();
            let err = nrmse(roundtrip.data(), g.data());
            assert!(err < 1e-13, "roundtrip error {err} for {shape:?}");
        }
    }

    #[test]
    fn transform_preserves_energy() {
        let g = random_grid(&[32, 32], Space::Image, 11);
        let f = fft_unitary(&g, Direction::Forward).unwrap();
        let before = norm2(g.data());
        let after = norm2(f.data());
        assert!((before - after).abs() / before < 1e-13);
    }

    #[test]
    fn unitarity_inner_products_to_64_cubed() {
        for shape in [vec![64usize], vec![64, 64], vec![64, 64, 64]] {
            let a = random_grid(&shape, Space::Image, 3);
            let b = random_grid(&shape, Space::Image, 4);
            let fa = fft_unitary(&a, Direction::Forward).unwrap();
            let fb = fft_unitary(&b, Direction::Forward).unwrap();
            let lhs = inner(fa.data(), fb.data());
            let rhs = inner(a.data(), b.data());
            let denom = norm2(a.data()) * norm2(b.data());
            assert!(
                (lhs - rhs).norm() / denom < 1e-13,
                "unitarity violated for {shape:?}"
            );
        }
    }

    #[test]
    fn odd_shapes_are_rejected() {
        let g = ComplexGrid::zeros(&[5, 4], Space::Image);
        assert!(fft_unitary(&g, Direction::Forward).is_err());
    }

    #[test]
    fn pad_then_crop_is_identity_bit_exact() {
        let g = random_grid(&[8, 8], Space::KSpace, 21);
        let padded = zero_pad(&g, &[16, 16]).unwrap();
        let cropped = crop_center(&padded, &[8, 8]).unwrap();
        assert_eq!(cropped.data(), g.data());
    }

    #[test]
    fn pad_of_zero_grid_is_zero() {
        let g = ComplexGrid::zeros(&[4, 4], Space::Image);
        let padded = zero_pad(&g, &[8, 8]).unwrap();
        assert!(padded.data().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn pad_and_crop_are_adjoint() {
        let x = random_grid(&[8, 8], Space::Image, 31);
        let y = random_grid(&[16, 16], Space::Image, 32);
        let lhs = inner(zero_pad(&x, &[16, 16]).unwrap().data(), y.data());
        let rhs = inner(x.data(), crop_center(&y, &[8, 8]).unwrap().data());
        let denom = norm2(x.data()) * norm2(y.data());
        assert!((lhs - rhs).norm() / denom < 1e-14);
    }

    #[test]
    fn pad_shape_mismatch_is_rejected() {
        let g = ComplexGrid::zeros(&[8, 8], Space::Image);
        assert!(zero_pad(&g, &[4, 16]).is_err());
        assert!(crop_center(&g, &[16, 4]).is_err());
        assert!(zero_pad(&g, &[16]).is_err());
    }

    #[test]
    fn fourier_shift_by_integer_matches_circular_shift() {
        let g = random_grid(&[16, 16], Space::Image, 41);
        let shifted = fourier_shift(&g, &[3.0, 0.0]).unwrap();
        // m_new[x] = m_old[x - 3] along the first axis, periodic
        let mut expected = ComplexGrid::zeros(&[16, 16], Space::Image);
        for x in 0..16 {
            for y in 0..16 {
                expected.data_mut()[x * 16 + y] = g.data()[((x + 16 - 3) % 16) * 16 + y];
            }
        }
        assert!(nrmse(shifted.data(), expected.data()) < 1e-12);
    }

    #[test]
    fn grid_constructor_validates_lengths() {
        assert!(ComplexGrid::new(vec![4, 4], Space::Image, vec![Complex64::ZERO; 15]).is_err());
        assert!(ComplexGrid::new(vec![0], Space::Image, vec![]).is_err());
        assert!(NonCartesianSet::new(2, vec![0.0; 6], vec![Complex64::ZERO; 3]).is_ok());
        assert!(NonCartesianSet::new(2, vec![0.0; 5], vec![Complex64::ZERO; 3]).is_err());
        assert!(NonCartesianSet::new(2, vec![f64::NAN, 0.0], vec![Complex64::ZERO; 1]).is_err());
    }
}
