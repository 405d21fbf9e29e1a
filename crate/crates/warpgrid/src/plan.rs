//! Precomputed gridding state: oversampled-grid bookkeeping, deapodization
//! weights, and the kernel scatter/gather cores shared by both gridding
//! directions.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{coords_of, fft_unitary_in_place, strides, Direction};
use crate::kernel::{kernel_eval, KernelSpec};

/// Shared per-grid gridding state.
///
/// `deapod_image` holds `1/c[x]` (reciprocal inverse transform of the
/// tabulated kernel) and `deapod_kspace` holds `1/C[k]` (reciprocal forward
/// transform), both on the nominal grid. They are computed numerically from
/// the same kernel table the cores evaluate, so forward and adjoint chains
/// share one exact weight array.
#[derive(Clone, Debug)]
pub struct GriddingPlan {
    kernel: KernelSpec,
    grid_shape: Vec<usize>,
    oversampled_shape: Vec<usize>,
    os_strides: Vec<usize>,
    deapod_image: Vec<f64>,
    deapod_kspace: Vec<f64>,
    /// Applied once per full gridding chain so that the composite operator
    /// approximates the unitary non-uniform DFT.
    chain_scale: f64,
}

pub fn make_plan(grid_shape: &[usize], kernel: &KernelSpec) -> Result<Arc<GriddingPlan>> {
    kernel.validate()?;
    if grid_shape.is_empty() || grid_shape.len() > 3 {
        return Err(Error::invalid("gridding supports 1 to 3 axes"));
    }
    let mut oversampled_shape = Vec::with_capacity(grid_shape.len());
    for &n in grid_shape {
        if n < 2 || n % 2 != 0 {
            return Err(Error::invalid(format!(
                "grid axes must be even and >= 2, got {grid_shape:?}"
            )));
        }
        let g = (kernel.oversampling * n as f64).round() as usize;
        if g % 2 != 0 || g < n {
            return Err(Error::invalid(format!(
                "oversampled axis round({} * {n}) = {g} must be even and >= {n}",
                kernel.oversampling
            )));
        }
        oversampled_shape.push(g);
    }
    if (kernel.width + 1) as f64 > *oversampled_shape.iter().min().unwrap() as f64 {
        return Err(Error::invalid(
            "kernel support exceeds the oversampled grid extent",
        ));
    }

    // Per-axis kernel transforms: tabulate the kernel finely over the
    // zero-padded oversampled axis, transform, crop the centered nominal
    // extent. The fine subsampling keeps tabulation aliases ~1e-7 below the
    // transform itself.
    let mut axis_image = Vec::new();
    let mut axis_kspace = Vec::new();
    for (ax, &g) in oversampled_shape.iter().enumerate() {
        let n = grid_shape[ax];
        let tab = tabulate_kernel(kernel, g, KERNEL_SUBSAMPLING);
        axis_image.push(transform_and_crop(&tab, n, KERNEL_SUBSAMPLING, Direction::Inverse)?);
        axis_kspace.push(transform_and_crop(&tab, n, KERNEL_SUBSAMPLING, Direction::Forward)?);
    }

    let total: usize = grid_shape.iter().product();
    let mut deapod_image = Vec::with_capacity(total);
    let mut deapod_kspace = Vec::with_capacity(total);
    for flat in 0..total {
        let c = coords_of(flat, grid_shape);
        let mut ci = 1.0;
        let mut ck = 1.0;
        for (ax, &coord) in c.iter().enumerate() {
            ci *= axis_image[ax][coord];
            ck *= axis_kspace[ax][coord];
        }
        for (value, out) in [(ci, &mut deapod_image), (ck, &mut deapod_kspace)] {
            if !(value > 1e-12) || !value.is_finite() {
                return Err(Error::DeapodizationUnderflow { index: flat, value });
            }
            out.push(1.0 / value);
        }
    }

    let os_strides = strides(&oversampled_shape);
    Ok(Arc::new(GriddingPlan {
        kernel: *kernel,
        grid_shape: grid_shape.to_vec(),
        oversampled_shape,
        os_strides,
        deapod_image,
        deapod_kspace,
        chain_scale: 1.0 / (total as f64).sqrt(),
    }))
}

pub(crate) const KERNEL_SUBSAMPLING: usize = 32;

fn tabulate_kernel(kernel: &KernelSpec, g: usize, q: usize) -> Vec<Complex64> {
    let len = g * q;
    let mut tab = vec![Complex64::ZERO; len];
    let half = kernel.half_width();
    let center = (len / 2) as i64;
    let t0 = (-half * q as f64).ceil() as i64;
    let t1 = (half * q as f64).floor() as i64;
    for t in t0..=t1 {
        let idx = (center + t).rem_euclid(len as i64) as usize;
        tab[idx] += Complex64::new(kernel_eval(kernel, t as f64 / q as f64), 0.0);
    }
    tab
}

fn transform_and_crop(
    tab: &[Complex64],
    n: usize,
    q: usize,
    direction: Direction,
) -> Result<Vec<f64>> {
    let len = tab.len();
    let mut data = tab.to_vec();
    fft_unitary_in_place(&mut data, &[len], direction);
    // the fine tabulation scales the transform by sqrt(q) relative to the
    // unit-spacing convention the gridding chains expect
    let scale = 1.0 / (q as f64).sqrt();
    let offset = len / 2 - n / 2;
    let mut out = Vec::with_capacity(n);
    for v in &data[offset..offset + n] {
        // real even-symmetric table -> real transform
        if v.im.abs() > 1e-12 * v.re.abs().max(1.0) {
            return Err(Error::invalid(
                "kernel transform unexpectedly complex; kernel table not symmetric",
            ));
        }
        out.push(v.re * scale);
    }
    Ok(out)
}

impl GriddingPlan {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn grid_shape(&self) -> &[usize] {
        &self.grid_shape
    }

    pub fn oversampled_shape(&self) -> &[usize] {
        &self.oversampled_shape
    }

    pub fn deapod_image(&self) -> &[f64] {
        &self.deapod_image
    }

    pub fn deapod_kspace(&self) -> &[f64] {
        &self.deapod_kspace
    }

    pub(crate) fn chain_scale(&self) -> f64 {
        self.chain_scale
    }

    pub fn dim(&self) -> usize {
        self.grid_shape.len()
    }

    pub fn oversampled_len(&self) -> usize {
        self.oversampled_shape.iter().product()
    }

    /// Map center-relative coordinates (one `dim`-tuple per point, in nominal
    /// grid units) to positions on the oversampled grid, folded periodically
    /// into `[0, G)`.
    pub(crate) fn oversampled_positions(&self, coords: &[f64]) -> Result<Vec<f64>> {
        let dim = self.dim();
        if coords.len() % dim != 0 {
            return Err(Error::invalid("coordinate list length not divisible by dim"));
        }
        let mut out = Vec::with_capacity(coords.len());
        for chunk in coords.chunks_exact(dim) {
            for (ax, &c) in chunk.iter().enumerate() {
                if !c.is_finite() {
                    return Err(Error::invalid("non-finite coordinate"));
                }
                let g = self.oversampled_shape[ax] as f64;
                let ratio = g / self.grid_shape[ax] as f64;
                out.push((c * ratio + g / 2.0).rem_euclid(g));
            }
        }
        Ok(out)
    }

    /// Precompute folded tap indices and kernel weights for a fixed point set.
    pub(crate) fn compute_taps(&self, positions: &[f64]) -> TapTable {
        let dim = self.dim();
        let count = positions.len() / dim;
        let half = self.kernel.half_width();
        let mut offsets = Vec::with_capacity(count * dim + 1);
        offsets.push(0u32);
        let mut idx = Vec::new();
        let mut w = Vec::new();
        for s in 0..count {
            for ax in 0..dim {
                let p = positions[s * dim + ax];
                let g = self.oversampled_shape[ax] as i64;
                let t0 = (p - half).ceil() as i64;
                let t1 = (p + half).floor() as i64;
                for t in t0..=t1 {
                    idx.push(t.rem_euclid(g) as u32);
                    w.push(kernel_eval(&self.kernel, t as f64 - p));
                }
                offsets.push(idx.len() as u32);
            }
        }
        TapTable {
            dim,
            count,
            offsets,
            idx,
            w,
        }
    }
}

/// Precomputed kernel taps for a fixed set of non-Cartesian points.
#[derive(Clone, Debug)]
pub(crate) struct TapTable {
    dim: usize,
    count: usize,
    offsets: Vec<u32>,
    idx: Vec<u32>,
    w: Vec<f64>,
}

impl TapTable {
    fn axis_run(&self, sample: usize, ax: usize) -> (&[u32], &[f64]) {
        let k = sample * self.dim + ax;
        let a = self.offsets[k] as usize;
        let b = self.offsets[k + 1] as usize;
        (&self.idx[a..b], &self.w[a..b])
    }
}

/// Kernel scatter: deposit each value onto the oversampled grid around its
/// point. Accumulation runs in sample-index order (bit-reproducible).
pub(crate) fn spread_points(
    plan: &GriddingPlan,
    taps: &TapTable,
    values: &[Complex64],
    out: &mut [Complex64],
) {
    debug_assert_eq!(values.len(), taps.count);
    debug_assert_eq!(out.len(), plan.oversampled_len());
    let st = &plan.os_strides;
    for (s, &v) in values.iter().enumerate() {
        match taps.dim {
            1 => {
                let (ix, wx) = taps.axis_run(s, 0);
                for (i, &gi) in ix.iter().enumerate() {
                    out[gi as usize] += v * wx[i];
                }
            }
            2 => {
                let (ix, wx) = taps.axis_run(s, 0);
                let (iy, wy) = taps.axis_run(s, 1);
                for (i, &gx) in ix.iter().enumerate() {
                    let base = gx as usize * st[0];
                    let vx = v * wx[i];
                    for (j, &gy) in iy.iter().enumerate() {
                        out[base + gy as usize] += vx * wy[j];
                    }
                }
            }
            3 => {
                let (ix, wx) = taps.axis_run(s, 0);
                let (iy, wy) = taps.axis_run(s, 1);
                let (iz, wz) = taps.axis_run(s, 2);
                for (i, &gx) in ix.iter().enumerate() {
                    let bx = gx as usize * st[0];
                    let vx = v * wx[i];
                    for (j, &gy) in iy.iter().enumerate() {
                        let by = bx + gy as usize * st[1];
                        let vy = vx * wy[j];
                        for (k, &gz) in iz.iter().enumerate() {
                            out[by + gz as usize] += vy * wz[k];
                        }
                    }
                }
            }
            _ => unreachable!("plans are limited to 3 axes"),
        }
    }
}

/// Kernel gather: exact adjoint of [`spread_points`] (same taps, same
/// weights, read instead of accumulate).
pub(crate) fn gather_points(
    plan: &GriddingPlan,
    taps: &TapTable,
    grid: &[Complex64],
    out: &mut [Complex64],
) {
    debug_assert_eq!(grid.len(), plan.oversampled_len());
    debug_assert_eq!(out.len(), taps.count);
    let st = &plan.os_strides;
    for (s, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::ZERO;
        match taps.dim {
            1 => {
                let (ix, wx) = taps.axis_run(s, 0);
                for (i, &gi) in ix.iter().enumerate() {
                    acc += grid[gi as usize] * wx[i];
                }
            }
            2 => {
                let (ix, wx) = taps.axis_run(s, 0);
                let (iy, wy) = taps.axis_run(s, 1);
                for (i, &gx) in ix.iter().enumerate() {
                    let base = gx as usize * st[0];
                    let mut row = Complex64::ZERO;
                    for (j, &gy) in iy.iter().enumerate() {
                        row += grid[base + gy as usize] * wy[j];
                    }
                    acc += row * wx[i];
                }
            }
            3 => {
                let (ix, wx) = taps.axis_run(s, 0);
                let (iy, wy) = taps.axis_run(s, 1);
                let (iz, wz) = taps.axis_run(s, 2);
                for (i, &gx) in ix.iter().enumerate() {
                    let bx = gx as usize * st[0];
                    let mut plane = Complex64::ZERO;
                    for (j, &gy) in iy.iter().enumerate() {
                        let by = bx + gy as usize * st[1];
                        let mut row = Complex64::ZERO;
                        for (k, &gz) in iz.iter().enumerate() {
                            row += grid[by + gz as usize] * wz[k];
                        }
                        plane += row * wy[j];
                    }
                    acc += plane * wx[i];
                }
            }
            _ => unreachable!(),
        }
        *o = acc;
    }
}
