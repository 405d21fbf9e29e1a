//! Orthonormal multi-level Haar transform used as the sparsifying operator.

use num_complex::Complex64;

use crate::error::{Error, Result};

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Separable multi-level Haar decomposition. Orthonormal: the inverse is the
/// exact adjoint and energy is preserved.
#[derive(Clone, Copy, Debug)]
pub struct HaarWavelet {
    levels: usize,
}

impl HaarWavelet {
    pub fn new(levels: usize) -> Result<Self> {
        if levels < 1 {
            return Err(Error::invalid("wavelet levels must be >= 1"));
        }
        Ok(HaarWavelet { levels })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn check_shape(&self, shape: &[usize]) -> Result<()> {
        let div = 1usize << self.levels;
        if shape.iter().any(|&n| n % div != 0 || n / div == 0) {
            return Err(Error::invalid(format!(
                "shape {shape:?} not divisible by 2^{} per axis",
                self.levels
            )));
        }
        Ok(())
    }

    /// Decompose; coefficients use the in-place block layout (approximation
    /// block in the low-index corner at every level).
    pub fn forward(&self, data: &[Complex64], shape: &[usize]) -> Result<Vec<Complex64>> {
        self.check_shape(shape)?;
        let mut out = data.to_vec();
        let mut extents = shape.to_vec();
        for _ in 0..self.levels {
            for ax in 0..shape.len() {
                haar_axis_forward(&mut out, shape, &extents, ax);
            }
            for e in &mut extents {
                *e /= 2;
            }
        }
        Ok(out)
    }

    /// Reconstruct; exact inverse (and adjoint) of [`Self::forward`].
    pub fn inverse(&self, coeffs: &[Complex64], shape: &[usize]) -> Result<Vec<Complex64>> {
        self.check_shape(shape)?;
        let mut out = coeffs.to_vec();
        let div = 1usize << self.levels;
        let mut extents: Vec<usize> = shape.iter().map(|&n| n / div).collect();
        for _ in 0..self.levels {
            for e in &mut extents {
                *e *= 2;
            }
            for ax in (0..shape.len()).rev() {
                haar_axis_inverse(&mut out, shape, &extents, ax);
            }
        }
        Ok(out)
    }
}

fn for_each_lane(
    shape: &[usize],
    extents: &[usize],
    ax: usize,
    mut f: impl FnMut(usize, usize),
) {
    // visit every lane along `ax` inside the active corner block
    let strides = crate::grid::strides(shape);
    let dim = shape.len();
    let mut counters = vec![0usize; dim];
    'lanes: loop {
        let base: usize = counters.iter().zip(&strides).map(|(c, s)| c * s).sum();
        f(base, strides[ax]);
        // odometer over the non-transformed axes, last axis fastest
        let mut a = dim;
        loop {
            if a == 0 {
                break 'lanes;
            }
            a -= 1;
            if a == ax {
                continue;
            }
            counters[a] += 1;
            if counters[a] < extents[a] {
                continue 'lanes;
            }
            counters[a] = 0;
        }
    }
}

fn haar_axis_forward(data: &mut [Complex64], shape: &[usize], extents: &[usize], ax: usize) {
    let n = extents[ax];
    let half = n / 2;
    let mut buf = vec![Complex64::ZERO; n];
    for_each_lane(shape, extents, ax, |base, stride| {
        for i in 0..half {
            let a = data[base + 2 * i * stride];
            let b = data[base + (2 * i + 1) * stride];
            buf[i] = (a + b) * SQRT_HALF;
            buf[half + i] = (a - b) * SQRT_HALF;
        }
        for (i, v) in buf.iter().enumerate() {
            data[base + i * stride] = *v;
        }
    });
}

fn haar_axis_inverse(data: &mut [Complex64], shape: &[usize], extents: &[usize], ax: usize) {
    let n = extents[ax];
    let half = n / 2;
    let mut buf = vec![Complex64::ZERO; n];
    for_each_lane(shape, extents, ax, |base, stride| {
        for i in 0..half {
            let lo = data[base + i * stride];
            let hi = data[base + (half + i) * stride];
            buf[2 * i] = (lo + hi) * SQRT_HALF;
            buf[2 * i + 1] = (lo - hi) * SQRT_HALF;
        }
        for (i, v) in buf.iter().enumerate() {
            data[base + i * stride] = *v;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{norm2, nrmse};
    use crate::testutil::random_values;

    #[test]
    fn constant_image_concentrates_into_single_scaling_coefficient() {
        let n = 16usize;
        let data = vec![Complex64::new(3.0, 0.0); n * n];
        let w = HaarWavelet::new(2).unwrap();
        let coeffs = w.forward(&data, &[n, n]).unwrap();
        // approximation corner after 2 levels is 4x4; the constant lands on
        // it uniformly and every detail coefficient is zero
        let total_energy: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        let approx_energy: f64 = (0..4)
            .flat_map(|x| (0..4).map(move |y| (x, y)))
            .map(|(x, y)| coeffs[x * n + y].norm_sqr())
            .sum();
        assert!((total_energy - approx_energy).abs() < 1e-12 * total_energy);
        for (flat, c) in coeffs.iter().enumerate() {
            let (x, y) = (flat / n, flat % n);
            if x >= 4 || y >= 4 {
                assert!(c.norm() < 1e-13, "detail coefficient {flat} not zero");
            }
        }
    }

    #[test]
    fn roundtrip_is_identity() {
        let data = random_values(32 * 32, 301);
        let w = HaarWavelet::new(3).unwrap();
        let coeffs = w.forward(&data, &[32, 32]).unwrap();
        let back = w.inverse(&coeffs, &[32, 32]).unwrap();
        assert!(nrmse(&back, &data) < 1e-13);
    }

    #[test]
    fn transform_preserves_energy() {
        for shape in [vec![64usize], vec![16, 32], vec![8, 8, 8]] {
            let n: usize = shape.iter().product();
            let data = random_values(n, 311);
            let w = HaarWavelet::new(2).unwrap();
            let coeffs = w.forward(&data, &shape).unwrap();
            let a = norm2(&data);
            let b = norm2(&coeffs);
            assert!((a - b).abs() / a < 1e-13, "energy drift for {shape:?}");
        }
    }

    #[test]
    fn incompatible_levels_are_rejected() {
        let w = HaarWavelet::new(3).unwrap();
        assert!(w.forward(&random_values(12, 1), &[12]).is_err());
        assert!(HaarWavelet::new(0).is_err());
    }
}
