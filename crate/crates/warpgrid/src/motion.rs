//! Translational motion estimation from low-resolution navigator images,
//! linear-phase k-space correction, and respiratory-phase binning by k-means.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{coords_of, fft_unitary, ComplexGrid, Direction, NonCartesianSet, Space};

/// Per-heartbeat shift vectors (voxel units) relative to the reference
/// heartbeat, whose own shift is exactly zero.
#[derive(Clone, Debug)]
pub struct MotionEstimate {
    shifts: Vec<Vec<f64>>,
    reference_index: usize,
}

impl MotionEstimate {
    pub fn new(shifts: Vec<Vec<f64>>, reference_index: usize) -> Result<Self> {
        if shifts.is_empty() || reference_index >= shifts.len() {
            return Err(Error::invalid("reference index out of range"));
        }
        let dim = shifts[0].len();
        if shifts.iter().any(|s| s.len() != dim) {
            return Err(Error::invalid("inconsistent shift dimensionality"));
        }
        if shifts[reference_index].iter().any(|v| *v != 0.0) {
            return Err(Error::invalid("reference heartbeat shift must be zero"));
        }
        Ok(MotionEstimate {
            shifts,
            reference_index,
        })
    }

    pub fn shifts(&self) -> &[Vec<f64>] {
        &self.shifts
    }

    pub fn shift(&self, heartbeat: usize) -> &[f64] {
        &self.shifts[heartbeat]
    }

    pub fn reference_index(&self) -> usize {
        self.reference_index
    }

    pub fn heartbeats(&self) -> usize {
        self.shifts.len()
    }

    pub fn dim(&self) -> usize {
        self.shifts[0].len()
    }
}

/// Estimate the translation of `nav` relative to `reference` by the peak of
/// their magnitude cross-correlation (computed via Fourier products), refined
/// to subvoxel precision with a separable 3-point parabolic fit.
///
/// Positive shift means the content of `nav` sits at `reference` position
/// plus the shift. A degenerate flat correlation returns zero.
pub fn estimate_translation(reference: &ComplexGrid, nav: &ComplexGrid) -> Result<Vec<f64>> {
    if reference.shape() != nav.shape() {
        return Err(Error::ShapeMismatch {
            expected: reference.shape().to_vec(),
            got: nav.shape().to_vec(),
        });
    }
    let shape = reference.shape().to_vec();
    let mag = |g: &ComplexGrid| {
        ComplexGrid::new(
            shape.clone(),
            Space::Image,
            g.data()
                .iter()
                .map(|v| Complex64::new(v.norm(), 0.0))
                .collect(),
        )
        .expect("same shape")
    };
    let fa = fft_unitary(&mag(reference), Direction::Forward)?;
    let fb = fft_unitary(&mag(nav), Direction::Forward)?;
    let cross = fb.pointwise_mul_conj(&fa)?;
    let corr = fft_unitary(&cross, Direction::Inverse)?;
    let mags: Vec<f64> = corr.data().iter().map(|v| v.norm()).collect();

    let max = mags.iter().cloned().fold(0.0f64, f64::max);
    let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    if max <= 0.0 || (max - min) <= 1e-12 * max {
        return Ok(vec![0.0; shape.len()]);
    }
    let peak_flat = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite correlation"))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let peak = coords_of(peak_flat, &shape);

    let strides = crate::grid::strides(&shape);
    let mut shift = Vec::with_capacity(shape.len());
    for ax in 0..shape.len() {
        let n = shape[ax];
        let at = |idx: usize| {
            let mut flat = peak_flat;
            flat -= peak[ax] * strides[ax];
            flat += (idx % n) * strides[ax];
            mags[flat]
        };
        let c0 = at(peak[ax]);
        let cm = at((peak[ax] + n - 1) % n);
        let cp = at((peak[ax] + 1) % n);
        let denom = cm - 2.0 * c0 + cp;
        let delta = if denom.abs() > 1e-12 * c0.max(1e-300) {
            (0.5 * (cm - cp) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let raw = peak[ax] as f64 + delta - n as f64 / 2.0;
        // fold into [-n/2, n/2)
        let folded = (raw + n as f64 / 2.0).rem_euclid(n as f64) - n as f64 / 2.0;
        shift.push(folded);
    }
    Ok(shift)
}

/// Multiply each sample by `exp(-2 pi i k . shift / N)`, the linear phase
/// that moves the encoded object by `+shift` voxels. Correcting measured data
/// for an estimated object shift therefore applies the negated shift.
pub fn apply_phase_shift(
    samples: &NonCartesianSet,
    shift: &[f64],
    grid_shape: &[usize],
) -> Result<Vec<Complex64>> {
    let dim = samples.dim();
    if shift.len() != dim || grid_shape.len() != dim {
        return Err(Error::LengthMismatch {
            expected: dim,
            got: shift.len(),
        });
    }
    if shift.iter().all(|s| *s == 0.0) {
        return Ok(samples.values().to_vec());
    }
    let coords = samples.coords();
    let mut out = Vec::with_capacity(samples.count());
    for (s, &v) in samples.values().iter().enumerate() {
        let mut phase = 0.0;
        for ax in 0..dim {
            phase -= 2.0 * std::f64::consts::PI * coords[s * dim + ax] * shift[ax]
                / grid_shape[ax] as f64;
        }
        out.push(v * Complex64::from_polar(1.0, phase));
    }
    Ok(out)
}

/// Respiratory-phase assignment of heartbeats.
#[derive(Clone, Debug)]
pub struct RespiratoryBins {
    pub labels: Vec<usize>,
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Bin with the least within-bin shift variance (end-expiration proxy).
    pub reference_bin: usize,
}

impl RespiratoryBins {
    pub fn bin_members(&self, bin: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == bin).then_some(i))
            .collect()
    }
}

fn d2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lloyd_once(points: &[Vec<f64>], k: usize, seed: u64) -> (Vec<usize>, Vec<Vec<f64>>, f64) {
    let n = points.len();
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    while centroids.len() < k {
        let dist: Vec<f64> = points
            .iter()
            .map(|p| {
                centroids
                    .iter()
                    .map(|c| d2(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = dist.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut r = rng.random::<f64>() * total;
        let mut chosen = n - 1;
        for (i, &w) in dist.iter().enumerate() {
            if r < w {
                chosen = i;
                break;
            }
            r -= w;
        }
        centroids.push(points[chosen].clone());
    }

    // Lloyd sweeps to the assignment fixpoint (at most 100)
    let mut labels = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = d2(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&labels)
                .filter_map(|(p, &l)| (l == c).then_some(p))
                .collect();
            if members.is_empty() {
                continue;
            }
            for ax in 0..dim {
                centroid[ax] = members.iter().map(|p| p[ax]).sum::<f64>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }

    let objective: f64 = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| d2(p, &centroids[l]))
        .sum();
    (labels, centroids, objective)
}

/// Lloyd's k-means over the shift vectors with seeded k-means++
/// initialization, run to an assignment fixpoint (at most 100 sweeps).
/// Restarted from several derived seeds, keeping the lowest within-cluster
/// objective; deterministic for a fixed seed.
pub fn kmeans_bin(estimate: &MotionEstimate, k: usize, seed: u64) -> Result<RespiratoryBins> {
    let points = estimate.shifts();
    let n = points.len();
    if k < 1 || k > n {
        return Err(Error::invalid(format!(
            "k = {k} out of range for {n} heartbeats"
        )));
    }
    let mut distinct: Vec<&Vec<f64>> = points.iter().collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite shifts"));
    distinct.dedup_by(|a, b| a == b);
    if k > distinct.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds {} distinct shift vectors",
            distinct.len()
        )));
    }

    let mut best: Option<(Vec<usize>, Vec<Vec<f64>>, f64)> = None;
    for restart in 0..8u64 {
        let run_seed = seed ^ restart.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let candidate = lloyd_once(points, k, run_seed);
        if best.as_ref().map_or(true, |b| candidate.2 < b.2) {
            best = Some(candidate);
        }
    }
    let (labels, centroids, _) = best.expect("at least one restart runs");

    // reference bin: least within-bin variance, ties to the larger bin
    let mut reference_bin = 0usize;
    let mut best = (f64::INFINITY, 0usize);
    for c in 0..k {
        let members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == c).then_some(i))
            .collect();
        if members.is_empty() {
            continue;
        }
        let var: f64 = members
            .iter()
            .map(|&i| d2(&points[i], &centroids[c]))
            .sum::<f64>()
            / members.len() as f64;
        if var < best.0 || (var == best.0 && members.len() > best.1) {
            best = (var, members.len());
            reference_bin = c;
        }
    }

    Ok(RespiratoryBins {
        labels,
        k,
        centroids,
        reference_bin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::nrmse;
    use crate::testutil::random_grid;

    fn smooth_test_image(n: usize, seed: u64) -> ComplexGrid {
        // low-pass a random grid so correlation peaks are well shaped
        let g = random_grid(&[n, n], Space::Image, seed);
        let mut spec = fft_unitary(&g, Direction::Forward).unwrap();
        for (flat, v) in spec.data_mut().iter_mut().enumerate() {
            let c = coords_of(flat, &[n, n]);
            let kx = c[0] as f64 - n as f64 / 2.0;
            let ky = c[1] as f64 - n as f64 / 2.0;
            *v *= (-(kx * kx + ky * ky) / (n as f64)).exp();
        }
        fft_unitary(&spec, Direction::Inverse).unwrap()
    }

    #[test]
    fn identical_images_give_exactly_zero_shift() {
        let img = smooth_test_image(16, 501);
        let shift = estimate_translation(&img, &img).unwrap();
        assert!(shift.iter().all(|s| *s == 0.0), "{shift:?}");
    }

    #[test]
    fn integer_circular_shift_is_recovered_exactly() {
        let img = smooth_test_image(16, 511);
        // nav[x, y] = img[x - 2, y]: content moved +2 along axis 0
        let mut nav = ComplexGrid::zeros(&[16, 16], Space::Image);
        for x in 0..16 {
            for y in 0..16 {
                nav.data_mut()[x * 16 + y] = img.data()[((x + 16 - 2) % 16) * 16 + y];
            }
        }
        let shift = estimate_translation(&img, &nav).unwrap();
        assert!((shift[0] - 2.0).abs() < 1e-9, "{shift:?}");
        assert!(shift[1].abs() < 1e-9, "{shift:?}");

        // exhaustive integer-shift correlation oracle agrees
        let mut best = (f64::NEG_INFINITY, (0i64, 0i64));
        for sx in -8i64..8 {
            for sy in -8i64..8 {
                let mut corr = 0.0;
                for x in 0..16usize {
                    for y in 0..16usize {
                        let xx = ((x as i64 + sx).rem_euclid(16)) as usize;
                        let yy = ((y as i64 + sy).rem_euclid(16)) as usize;
                        corr += img.data()[x * 16 + y].norm() * nav.data()[xx * 16 + yy].norm();
                    }
                }
                if corr > best.0 {
                    best = (corr, (sx, sy));
                }
            }
        }
        assert_eq!(best.1, (2, 0));
    }

    #[test]
    fn antisymmetric_at_integer_shifts() {
        let img = smooth_test_image(16, 521);
        let mut nav = ComplexGrid::zeros(&[16, 16], Space::Image);
        for x in 0..16 {
            for y in 0..16 {
                nav.data_mut()[x * 16 + y] = img.data()[((x + 16 - 3) % 16) * 16 + (y + 1) % 16];
            }
        }
        let ab = estimate_translation(&img, &nav).unwrap();
        let ba = estimate_translation(&nav, &img).unwrap();
        for (a, b) in ab.iter().zip(&ba) {
            assert!((a + b).abs() < 1e-9, "{ab:?} vs {ba:?}");
        }
    }

    #[test]
    fn fractional_fourier_shift_recovered_within_tenth_voxel() {
        let img = smooth_test_image(32, 531);
        let shifted = crate::grid::fourier_shift(&img, &[1.5, -1.5]).unwrap();
        let shift = estimate_translation(&img, &shifted).unwrap();
        assert!((shift[0] - 1.5).abs() < 0.1, "{shift:?}");
        assert!((shift[1] + 1.5).abs() < 0.1, "{shift:?}");
    }

    #[test]
    fn flat_correlation_returns_zero() {
        let a = ComplexGrid::new(
            vec![8, 8],
            Space::Image,
            vec![Complex64::new(1.0, 0.0); 64],
        )
        .unwrap();
        let shift = estimate_translation(&a, &a).unwrap();
        assert!(shift.iter().all(|s| *s == 0.0));
    }

    fn sample_set(n: usize, seed: u64) -> NonCartesianSet {
        let coords = crate::testutil::random_coords(n, 2, 14.0, seed);
        let values = crate::testutil::random_values(n, seed + 1);
        NonCartesianSet::new(2, coords, values).unwrap()
    }

    #[test]
    fn zero_phase_shift_is_bit_exact_identity() {
        let set = sample_set(40, 541);
        let out = apply_phase_shift(&set, &[0.0, 0.0], &[16, 16]).unwrap();
        assert_eq!(out, set.values());
    }

    #[test]
    fn phase_shift_and_its_negation_cancel() {
        let set = sample_set(40, 551);
        let shifted = apply_phase_shift(&set, &[1.3, -2.7], &[16, 16]).unwrap();
        let set2 = NonCartesianSet::new(2, set.coords().to_vec(), shifted).unwrap();
        let back = apply_phase_shift(&set2, &[-1.3, 2.7], &[16, 16]).unwrap();
        assert!(nrmse(&back, set.values()) < 1e-13);
    }

    #[test]
    fn phase_shift_preserves_magnitudes() {
        let set = sample_set(40, 561);
        let out = apply_phase_shift(&set, &[0.8, 0.4], &[16, 16]).unwrap();
        for (a, b) in out.iter().zip(set.values()) {
            assert!((a.norm() - b.norm()).abs() <= 1e-15 * b.norm());
        }
    }

    fn cluster_fixture(seed: u64) -> (MotionEstimate, Vec<usize>) {
        // 4 well-separated clusters: separation >= 10x spread; cluster 0 is
        // the quiet (least-variance) one, mirroring end-expiration
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 12.0], [-11.0, -9.0]];
        let mut shifts = Vec::new();
        let mut truth = Vec::new();
        shifts.push(vec![0.0, 0.0]); // reference heartbeat
        truth.push(0usize);
        for h in 1..40 {
            let c = h % 4;
            truth.push(c);
            let spread = if c == 0 { 0.1 } else { 0.5 };
            shifts.push(vec![
                centers[c][0] + spread * (rng.random::<f64>() - 0.5),
                centers[c][1] + spread * (rng.random::<f64>() - 0.5),
            ]);
        }
        (MotionEstimate::new(shifts, 0).unwrap(), truth)
    }

    fn labels_match_up_to_permutation(a: &[usize], b: &[usize], k: usize) -> bool {
        let mut map = vec![None; k];
        for (&x, &y) in a.iter().zip(b) {
            match map[x] {
                None => map[x] = Some(y),
                Some(m) if m == y => {}
                _ => return false,
            }
        }
        let mut seen = vec![false; k];
        for m in map.into_iter().flatten() {
            if seen[m] {
                return false;
            }
            seen[m] = true;
        }
        true
    }

    #[test]
    fn single_cluster_k1() {
        let shifts = vec![vec![0.0, 0.0]; 6];
        let est = MotionEstimate::new(shifts, 0).unwrap();
        let bins = kmeans_bin(&est, 1, 9).unwrap();
        assert_eq!(bins.k, 1);
        assert!(bins.labels.iter().all(|&l| l == 0));
        assert_eq!(bins.centroids[0], vec![0.0, 0.0]);
    }

    #[test]
    fn four_well_separated_clusters_recovered_exactly() {
        let (est, truth) = cluster_fixture(571);
        let bins = kmeans_bin(&est, 4, 7).unwrap();
        assert!(labels_match_up_to_permutation(&truth, &bins.labels, 4));
        // the tight cluster around zero is the reference
        assert_eq!(bins.labels[0], bins.reference_bin);
    }

    #[test]
    fn binning_is_deterministic_under_fixed_seed() {
        let (est, _) = cluster_fixture(581);
        let a = kmeans_bin(&est, 4, 42).unwrap();
        let b = kmeans_bin(&est, 4, 42).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.reference_bin, b.reference_bin);
    }

    #[test]
    fn binning_is_order_invariant_up_to_relabeling() {
        let (est, _) = cluster_fixture(591);
        let bins = kmeans_bin(&est, 4, 11).unwrap();
        // reverse the heartbeat order (keeping a zero reference at index 0)
        let mut reversed: Vec<Vec<f64>> = est.shifts().to_vec();
        reversed[1..].reverse();
        let est2 = MotionEstimate::new(reversed, 0).unwrap();
        let bins2 = kmeans_bin(&est2, 4, 11).unwrap();
        let mut relabeled = bins2.labels.clone();
        relabeled[1..].reverse();
        assert!(labels_match_up_to_permutation(&bins.labels, &relabeled, 4));
    }

    #[test]
    fn k_larger_than_distinct_points_is_rejected() {
        let shifts = vec![vec![1.0, 1.0]; 5];
        let est = MotionEstimate::new(
            vec![vec![0.0, 0.0]]
                .into_iter()
                .chain(shifts)
                .collect(),
            0,
        )
        .unwrap();
        assert!(kmeans_bin(&est, 3, 1).is_err());
        assert!(kmeans_bin(&est, 2, 1).is_ok());
    }

    #[test]
    fn motion_estimate_requires_zero_reference() {
        assert!(MotionEstimate::new(vec![vec![0.1, 0.0], vec![1.0, 1.0]], 0).is_err());
        assert!(MotionEstimate::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], 0).is_ok());
    }
}
