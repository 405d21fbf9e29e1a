//! Desk-scale synthetic data: phantoms, smooth displacement fields, coil
//! maps, golden-angle radial trajectories, and multi-state motion-corrupted
//! multi-coil k-space acquisitions. Data synthesis reuses the gridding and
//! warp operators rather than reimplementing them.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    coords_of, crop_center, fft_unitary, fourier_shift, ComplexGrid, Direction, NonCartesianSet,
    Space,
};
use crate::igrid::{DisplacementField, ImageGridder};
use crate::kernel::KernelSpec;
use crate::kgrid::KSpaceGridder;
use crate::motion::MotionEstimate;
use crate::plan::make_plan;
use crate::sense::{CoilBlock, CoilSet};

/// One additive ellipse (2D) or ellipsoid (3D). Rotation is applied in the
/// first two axes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ellipse {
    pub center: Vec<f64>,
    pub semi_axes: Vec<f64>,
    #[serde(default)]
    pub rotation: f64,
    pub intensity: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub shape: Vec<usize>,
    pub ellipses: Vec<Ellipse>,
    /// Optional Gaussian blur (spatial sigma, voxels) applied in k-space;
    /// yields a band-limited phantom.
    #[serde(default)]
    pub smooth_sigma: Option<f64>,
    /// Minimum distance from any support voxel to the grid edge
    /// (periodic-boundary safety for kernels and warps).
    #[serde(default)]
    pub edge_margin: usize,
}

pub fn make_phantom(spec: &PhantomSpec) -> Result<ComplexGrid> {
    let shape = &spec.shape;
    let dim = shape.len();
    if dim < 1 || dim > 3 {
        return Err(Error::invalid("phantoms support 1 to 3 axes"));
    }
    for e in &spec.ellipses {
        if e.center.len() != dim || e.semi_axes.len() != dim {
            return Err(Error::invalid("ellipse dimensionality mismatch"));
        }
        if e.semi_axes.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::invalid("ellipse semi-axes must be positive"));
        }
    }
    let n: usize = shape.iter().product();
    let mut data = vec![Complex64::ZERO; n];
    let (sin_r, cos_r): (Vec<f64>, Vec<f64>) = spec
        .ellipses
        .iter()
        .map(|e| e.rotation.sin_cos())
        .unzip();
    for (flat, v) in data.iter_mut().enumerate() {
        let r = coords_of(flat, shape);
        for (ei, e) in spec.ellipses.iter().enumerate() {
            let mut rel: Vec<f64> = (0..dim).map(|ax| r[ax] as f64 - e.center[ax]).collect();
            if dim >= 2 {
                let (x, y) = (rel[0], rel[1]);
                rel[0] = cos_r[ei] * x + sin_r[ei] * y;
                rel[1] = -sin_r[ei] * x + cos_r[ei] * y;
            }
            let q: f64 = rel
                .iter()
                .zip(&e.semi_axes)
                .map(|(d, a)| (d / a) * (d / a))
                .sum();
            if q <= 1.0 {
                *v += e.intensity;
            }
        }
    }

    let max_mag = data.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    if max_mag > 1.2 {
        return Err(Error::invalid(format!(
            "phantom magnitude {max_mag:.3} exceeds 1.2"
        )));
    }
    if spec.edge_margin > 0 {
        for (flat, v) in data.iter().enumerate() {
            if v.norm() > 0.0 {
                let r = coords_of(flat, shape);
                for ax in 0..dim {
                    let dist = r[ax].min(shape[ax] - 1 - r[ax]);
                    if dist < spec.edge_margin {
                        return Err(Error::invalid(format!(
                            "phantom support within {} voxels of the grid edge (margin {})",
                            dist, spec.edge_margin
                        )));
                    }
                }
            }
        }
    }

    let mut grid = ComplexGrid::new(shape.clone(), Space::Image, data)?;
    if let Some(sigma) = spec.smooth_sigma {
        if sigma > 0.0 {
            let mut spectrum = fft_unitary(&grid, Direction::Forward)?;
            let shape = grid.shape().to_vec();
            for (flat, v) in spectrum.data_mut().iter_mut().enumerate() {
                let k = coords_of(flat, &shape);
                let mut q = 0.0;
                for ax in 0..dim {
                    let kc = (k[ax] as f64 - shape[ax] as f64 / 2.0) / shape[ax] as f64;
                    q += kc * kc;
                }
                *v *= (-2.0 * std::f64::consts::PI.powi(2) * sigma * sigma * q).exp();
            }
            grid = fft_unitary(&spectrum, Direction::Inverse)?;
        }
    }
    Ok(grid)
}

/// Gaussian displacement bump, truncated to zero outside 3 radii.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianBump {
    pub center: Vec<f64>,
    /// Per-axis peak displacement, voxels.
    pub amplitude: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub shape: Vec<usize>,
    pub bumps: Vec<GaussianBump>,
    /// Smoothness floor: bump radii are clamped up to this value.
    #[serde(default)]
    pub min_radius: f64,
}

pub fn make_field(spec: &FieldSpec) -> Result<DisplacementField> {
    let dim = spec.shape.len();
    for b in &spec.bumps {
        if b.center.len() != dim || b.amplitude.len() != dim {
            return Err(Error::invalid("bump dimensionality mismatch"));
        }
        if !(b.radius > 0.0) {
            return Err(Error::invalid("bump radius must be positive"));
        }
    }
    let nvox: usize = spec.shape.iter().product();
    let mut offsets = vec![0.0f64; dim * nvox];
    let floor = (-4.5f64).exp();
    for b in &spec.bumps {
        let radius = b.radius.max(spec.min_radius);
        let cutoff2 = (3.0 * radius) * (3.0 * radius);
        for v in 0..nvox {
            let r = coords_of(v, &spec.shape);
            let d2: f64 = (0..dim)
                .map(|ax| {
                    let d = r[ax] as f64 - b.center[ax];
                    d * d
                })
                .sum();
            if d2 >= cutoff2 {
                continue;
            }
            // rescaled so the profile reaches exactly zero at 3 radii
            let g = ((-d2 / (2.0 * radius * radius)).exp() - floor) / (1.0 - floor);
            if g <= 0.0 {
                continue;
            }
            for ax in 0..dim {
                offsets[ax * nvox + v] += b.amplitude[ax] * g;
            }
        }
    }
    DisplacementField::new(spec.shape.clone(), offsets)
}

/// Smooth complex coil profiles: Gaussian magnitude lobes centered on a ring
/// around the object with gentle per-coil phase ramps.
pub fn make_coils(shape: &[usize], count: usize, smoothness: f64, seed: u64) -> Result<CoilSet> {
    if count < 1 {
        return Err(Error::invalid("coil count must be >= 1"));
    }
    if !(smoothness > 0.0) {
        return Err(Error::invalid("coil smoothness must be positive"));
    }
    let dim = shape.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nvox: usize = shape.iter().product();
    let min_n = *shape.iter().min().unwrap() as f64;
    let sigma = smoothness * min_n;
    let mut maps = Vec::with_capacity(count);
    for c in 0..count {
        let angle = 2.0 * std::f64::consts::PI * c as f64 / count as f64
            + 0.2 * (rng.random::<f64>() - 0.5);
        let ring = 0.45 * min_n;
        let mut center: Vec<f64> = shape.iter().map(|&n| n as f64 / 2.0).collect();
        match dim {
            1 => center[0] += if c % 2 == 0 { ring } else { -ring },
            _ => {
                center[0] += ring * angle.cos();
                center[1] += ring * angle.sin();
            }
        }
        let phase0 = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let ramp: Vec<f64> = (0..dim).map(|_| 0.6 * (rng.random::<f64>() - 0.5)).collect();
        let mut data = Vec::with_capacity(nvox);
        for flat in 0..nvox {
            let r = coords_of(flat, shape);
            let mut d2 = 0.0;
            let mut phase = phase0;
            for ax in 0..dim {
                let d = r[ax] as f64 - center[ax];
                d2 += d * d;
                phase += 2.0 * std::f64::consts::PI * ramp[ax]
                    * (r[ax] as f64 - shape[ax] as f64 / 2.0)
                    / shape[ax] as f64;
            }
            let mag = (-d2 / (2.0 * sigma * sigma)).exp();
            data.push(Complex64::from_polar(mag, phase));
        }
        maps.push(ComplexGrid::new(shape.to_vec(), Space::Image, data)?);
    }
    CoilSet::new(maps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Radial2d,
    Radial3d,
}

/// Master sampling pattern plus its partition into per-heartbeat interleaves.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dim: usize,
    /// Center-relative coordinates, `dim` per sample (cycles per FOV).
    pub coords: Vec<f64>,
    pub weights: Vec<f64>,
    /// Master sample indices per heartbeat; disjoint, union covers all.
    pub heartbeat_samples: Vec<Vec<usize>>,
    pub spoke_count: usize,
    pub samples_per_spoke: usize,
}

impl Trajectory {
    pub fn sample_count(&self) -> usize {
        self.weights.len()
    }

    pub fn heartbeat_coords(&self, h: usize) -> Vec<f64> {
        self.heartbeat_samples[h]
            .iter()
            .flat_map(|&s| self.coords[s * self.dim..(s + 1) * self.dim].iter().copied())
            .collect()
    }

    pub fn heartbeat_weights(&self, h: usize) -> Vec<f64> {
        self.heartbeat_samples[h].iter().map(|&s| self.weights[s]).collect()
    }
}

/// Radial spokes through the k-space origin at explicit 2D angles, with
/// ramp density weights and the half-pixel analytic weight at the center.
pub fn radial_spokes_2d(
    angles: &[f64],
    samples_per_spoke: usize,
    grid_shape: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if grid_shape.len() != 2 {
        return Err(Error::invalid("radial_spokes_2d needs a 2D grid"));
    }
    if samples_per_spoke < 3 || samples_per_spoke % 2 == 0 {
        return Err(Error::invalid("samples per spoke must be odd and >= 3"));
    }
    let n = grid_shape[0].min(grid_shape[1]) as f64;
    let m = samples_per_spoke;
    let dk = n / (m - 1) as f64;
    let n_spokes = angles.len() as f64;
    let mut coords = Vec::with_capacity(angles.len() * m * 2);
    let mut weights = Vec::with_capacity(angles.len() * m);
    for &theta in angles {
        let (s, c) = theta.sin_cos();
        for t in 0..m {
            let kr = (t as f64 - (m - 1) as f64 / 2.0) * dk;
            coords.push(kr * c);
            coords.push(kr * s);
            weights.push(if kr == 0.0 {
                std::f64::consts::PI * (dk / 2.0) * (dk / 2.0) / n_spokes
            } else {
                std::f64::consts::PI * kr.abs() * dk / n_spokes
            });
        }
    }
    Ok((coords, weights))
}

fn radial_spokes_3d(
    directions: &[[f64; 3]],
    samples_per_spoke: usize,
    grid_shape: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if grid_shape.len() != 3 {
        return Err(Error::invalid("3D radial needs a 3D grid"));
    }
    if samples_per_spoke < 3 || samples_per_spoke % 2 == 0 {
        return Err(Error::invalid("samples per spoke must be odd and >= 3"));
    }
    let n = *grid_shape.iter().min().unwrap() as f64;
    let m = samples_per_spoke;
    let dk = n / (m - 1) as f64;
    let n_spokes = directions.len() as f64;
    let mut coords = Vec::with_capacity(directions.len() * m * 3);
    let mut weights = Vec::with_capacity(directions.len() * m);
    for d in directions {
        for t in 0..m {
            let kr = (t as f64 - (m - 1) as f64 / 2.0) * dk;
            coords.push(kr * d[0]);
            coords.push(kr * d[1]);
            coords.push(kr * d[2]);
            weights.push(if kr == 0.0 {
                std::f64::consts::PI * dk.powi(3) / (6.0 * n_spokes)
            } else {
                2.0 * std::f64::consts::PI * kr * kr * dk / n_spokes
            });
        }
    }
    Ok((coords, weights))
}

/// Golden-angle-ordered radial pattern partitioned so heartbeat `j` takes
/// spokes `{j, j+H, j+2H, ...}`: each heartbeat's subset spreads over
/// k-space.
pub fn make_trajectory(
    kind: TrajectoryKind,
    grid_shape: &[usize],
    heartbeats: usize,
    interleaves_per_heartbeat: usize,
    samples_per_spoke: usize,
) -> Result<Trajectory> {
    if heartbeats < 1 || interleaves_per_heartbeat < 1 {
        return Err(Error::invalid("need at least one heartbeat and interleave"));
    }
    let total_spokes = heartbeats * interleaves_per_heartbeat;
    let (dim, coords, weights) = match kind {
        TrajectoryKind::Radial2d => {
            let golden = std::f64::consts::PI / ((1.0 + 5.0f64.sqrt()) / 2.0);
            let angles: Vec<f64> = (0..total_spokes)
                .map(|i| (i as f64 * golden) % std::f64::consts::PI)
                .collect();
            let (c, w) = radial_spokes_2d(&angles, samples_per_spoke, grid_shape)?;
            (2, c, w)
        }
        TrajectoryKind::Radial3d => {
            // 3D golden means give near-uniform direction coverage
            let (b1, b2) = (0.465_571_231_876_768, 0.682_327_803_828_019);
            let dirs: Vec<[f64; 3]> = (0..total_spokes)
                .map(|i| {
                    let z = 1.0 - 2.0 * ((i as f64 * b1) % 1.0);
                    let az = 2.0 * std::f64::consts::PI * ((i as f64 * b2) % 1.0);
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    [rho * az.cos(), rho * az.sin(), z]
                })
                .collect();
            let (c, w) = radial_spokes_3d(&dirs, samples_per_spoke, grid_shape)?;
            (3, c, w)
        }
    };
    if grid_shape.len() != dim {
        return Err(Error::invalid("trajectory kind does not match grid dimensionality"));
    }
    let mut heartbeat_samples = Vec::with_capacity(heartbeats);
    for h in 0..heartbeats {
        let mut idx = Vec::with_capacity(interleaves_per_heartbeat * samples_per_spoke);
        let mut spoke = h;
        while spoke < total_spokes {
            let start = spoke * samples_per_spoke;
            idx.extend(start..start + samples_per_spoke);
            spoke += heartbeats;
        }
        heartbeat_samples.push(idx);
    }
    Ok(Trajectory {
        dim,
        coords,
        weights,
        heartbeat_samples,
        spoke_count: total_spokes,
        samples_per_spoke,
    })
}

/// Full description of a synthetic segmented acquisition.
#[derive(Clone, Debug)]
pub struct AcquisitionSpec {
    pub heartbeats: usize,
    pub interleaves_per_heartbeat: usize,
    pub trajectory: TrajectoryKind,
    pub samples_per_spoke: usize,
    pub nav_shape: Vec<usize>,
    pub bins: usize,
    /// Per-heartbeat object translation, voxels.
    pub true_shifts: Vec<Vec<f64>>,
    /// Per-heartbeat respiratory bin.
    pub true_labels: Vec<usize>,
    /// Per-bin warp of the reference object; the reference bin's field is
    /// identically zero.
    pub bin_fields: Vec<DisplacementField>,
    pub reference_bin: usize,
    /// Complex noise level relative to the object's DC magnitude.
    pub noise_sigma: f64,
    pub coil_count: usize,
    pub coil_smoothness: f64,
}

impl AcquisitionSpec {
    pub fn validate(&self, grid_shape: &[usize]) -> Result<()> {
        if self.true_shifts.len() != self.heartbeats || self.true_labels.len() != self.heartbeats
        {
            return Err(Error::invalid(
                "per-heartbeat shifts/labels must match heartbeat count",
            ));
        }
        if self.bins < 1 || self.bin_fields.len() != self.bins {
            return Err(Error::invalid("need one displacement field per bin"));
        }
        if self.reference_bin >= self.bins {
            return Err(Error::invalid("reference bin out of range"));
        }
        if !self.bin_fields[self.reference_bin].is_zero() {
            return Err(Error::invalid("reference bin field must be identically zero"));
        }
        if self.true_labels.iter().any(|&l| l >= self.bins) {
            return Err(Error::invalid("heartbeat label out of range"));
        }
        for f in &self.bin_fields {
            if f.shape() != grid_shape {
                return Err(Error::ShapeMismatch {
                    expected: grid_shape.to_vec(),
                    got: f.shape().to_vec(),
                });
            }
        }
        if self.true_shifts.iter().any(|s| s.len() != grid_shape.len()) {
            return Err(Error::invalid("shift dimensionality mismatch"));
        }
        if self.nav_shape.len() != grid_shape.len()
            || self
                .nav_shape
                .iter()
                .zip(grid_shape)
                .any(|(&nv, &n)| nv > n || nv % 2 != 0 || nv == 0)
        {
            return Err(Error::invalid("nav grid must be even and no larger than the grid"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise sigma must be >= 0"));
        }
        if self.coil_count < 1 {
            return Err(Error::invalid("coil count must be >= 1"));
        }
        Ok(())
    }
}

/// Ground truth retained from the generator for validation.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub estimate: MotionEstimate,
    pub labels: Vec<usize>,
    pub bin_fields: Vec<DisplacementField>,
    pub reference_bin: usize,
}

/// Simulated segmented acquisition: per-heartbeat multi-coil sample blocks
/// plus per-heartbeat navigator images.
#[derive(Clone, Debug)]
pub struct Acquisition {
    pub trajectory: Trajectory,
    /// `blocks[heartbeat][coil][sample]`.
    pub blocks: Vec<CoilBlock>,
    pub navs: Vec<ComplexGrid>,
    pub coils: CoilSet,
    pub truth: GroundTruth,
}

fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    // Box-Muller; u clamped away from zero
    let u = rng.random::<f64>().max(1e-300);
    let v = rng.random::<f64>();
    let r = (-2.0 * u.ln()).sqrt();
    let (s, c) = (2.0 * std::f64::consts::PI * v).sin_cos();
    (r * c, r * s)
}

fn add_complex_noise(data: &mut [Complex64], sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma <= 0.0 {
        return;
    }
    for v in data.iter_mut() {
        let (a, b) = gaussian_pair(rng);
        *v += Complex64::new(sigma * a, sigma * b);
    }
}

fn heartbeat_rng(seed: u64, heartbeat: usize) -> ChaCha8Rng {
    // deterministic per-heartbeat substream
    let mixed = seed ^ (0x9e37_79b9_7f4a_7c15u64).wrapping_mul(heartbeat as u64 + 1);
    ChaCha8Rng::seed_from_u64(mixed)
}

pub fn simulate_acquisition(
    phantom: &ComplexGrid,
    spec: &AcquisitionSpec,
    kernel: &KernelSpec,
    seed: u64,
) -> Result<Acquisition> {
    spec.validate(phantom.shape())?;
    let shape = phantom.shape().to_vec();
    let plan = make_plan(&shape, kernel)?;
    let trajectory = make_trajectory(
        spec.trajectory,
        &shape,
        spec.heartbeats,
        spec.interleaves_per_heartbeat,
        spec.samples_per_spoke,
    )?;

    let coils = make_coils(&shape, spec.coil_count, spec.coil_smoothness, seed)?;
    let rss = coils.rss();
    let weak = phantom
        .data()
        .iter()
        .zip(&rss)
        .any(|(v, &r)| v.norm() > 1e-6 && r < 0.1);
    if weak {
        return Err(Error::invalid(
            "coil root-sum-of-squares below 0.1 over the phantom support",
        ));
    }

    // per-bin warped objects and their raw full-trajectory samples, reused
    // across heartbeats (unit weights: quadrature weights are a
    // reconstruction-side input, not part of the acquisition)
    let full_gridder = KSpaceGridder::new(
        plan.clone(),
        &trajectory.coords,
        vec![1.0; trajectory.sample_count()],
    )?;
    let mut bin_objects = Vec::with_capacity(spec.bins);
    for field in &spec.bin_fields {
        if field.is_zero() {
            bin_objects.push(phantom.clone());
        } else {
            let warp = ImageGridder::new(plan.clone(), field.clone())?;
            bin_objects.push(warp.warp(phantom)?);
        }
    }
    let bin_samples: Result<Vec<CoilBlock>> = bin_objects
        .par_iter()
        .map(|object| {
            (0..coils.count())
                .map(|c| {
                    let sensed = object.pointwise_mul(coils.map(c))?;
                    full_gridder.to_samples(&sensed)
                })
                .collect::<crate::error::Result<Vec<_>>>()
                .map_err(Into::into)
        })
        .collect();
    let bin_samples = bin_samples?;

    let dc_mag = phantom.data().iter().sum::<Complex64>().norm()
        / (phantom.len() as f64).sqrt();
    let sigma = spec.noise_sigma * dc_mag;

    let results: Result<Vec<(CoilBlock, ComplexGrid)>> = (0..spec.heartbeats)
        .into_par_iter()
        .map(|h| {
            let bin = spec.true_labels[h];
            let shift = &spec.true_shifts[h];
            let coords = trajectory.heartbeat_coords(h);
            let mut rng = heartbeat_rng(seed, h);
            let mut block = Vec::with_capacity(coils.count());
            for c in 0..coils.count() {
                // a translated object multiplies every non-Cartesian sample
                // by the exact linear phase at its k-space location
                let subset: Vec<Complex64> = trajectory.heartbeat_samples[h]
                    .iter()
                    .map(|&s| bin_samples[bin][c][s])
                    .collect();
                let set = NonCartesianSet::new(trajectory.dim, coords.clone(), subset)?;
                let mut y = crate::motion::apply_phase_shift(&set, shift, phantom.shape())?;
                add_complex_noise(&mut y, sigma, &mut rng);
                block.push(y);
            }
            // navigator: fully-sampled low-resolution view of the moved
            // object
            let object = if shift.iter().all(|s| *s == 0.0) {
                bin_objects[bin].clone()
            } else {
                fourier_shift(&bin_objects[bin], shift)?
            };
            let mut navk = crop_center(&fft_unitary(&object, Direction::Forward)?, &spec.nav_shape)?;
            add_complex_noise(navk.data_mut(), sigma, &mut rng);
            let nav = fft_unitary(&navk, Direction::Inverse)?;
            Ok((block, nav))
        })
        .collect();
    let results = results?;

    let mut blocks = Vec::with_capacity(spec.heartbeats);
    let mut navs = Vec::with_capacity(spec.heartbeats);
    for (b, n) in results {
        blocks.push(b);
        navs.push(n);
    }

    // ground truth relative to heartbeat 0
    let ref_shift = spec.true_shifts[0].clone();
    let rel_shifts: Vec<Vec<f64>> = spec
        .true_shifts
        .iter()
        .map(|s| s.iter().zip(&ref_shift).map(|(a, b)| a - b).collect())
        .collect();
    let estimate = MotionEstimate::new(rel_shifts, 0)?;

    Ok(Acquisition {
        trajectory,
        blocks,
        navs,
        coils,
        truth: GroundTruth {
            estimate,
            labels: spec.true_labels.clone(),
            bin_fields: spec.bin_fields.clone(),
            reference_bin: spec.reference_bin,
        },
    })
}

/// Deterministic per-heartbeat motion program: bin 0 sits at zero shift with
/// reduced jitter (the quiet reference phase), other bins at well-separated
/// shift levels. Heartbeat 0 lands in bin 0 with exactly zero shift.
pub fn motion_program(
    heartbeats: usize,
    bins: usize,
    dim: usize,
    level_scale: f64,
    jitter: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shifts = Vec::with_capacity(heartbeats);
    let mut labels = Vec::with_capacity(heartbeats);
    for h in 0..heartbeats {
        let b = h % bins;
        labels.push(b);
        if h == 0 {
            shifts.push(vec![0.0; dim]);
            continue;
        }
        let mut s = Vec::with_capacity(dim);
        // the quiet (end-expiration-like) phase gets markedly less jitter so
        // the least-variance reference selection has real contrast
        let sigma = if b == 0 { 0.25 * jitter } else { jitter };
        for ax in 0..dim {
            let level = if b == 0 {
                0.0
            } else {
                let phase = 1.7 * b as f64 + 0.9 * ax as f64;
                level_scale * phase.sin().signum() * (0.6 + 0.4 * phase.cos().abs())
            };
            s.push(level + sigma * (rng.random::<f64>() - 0.5));
        }
        shifts.push(s);
    }
    (shifts, labels)
}
