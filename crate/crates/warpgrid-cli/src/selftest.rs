//! Numerical self-test: adjoint identities, NDFT oracles, transform
//! invariants. Prints one line per named check and reports the worst
//! discrepancy observed for each.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use warpgrid::sim::{make_coils, make_field, FieldSpec, GaussianBump};
use warpgrid::*;

pub struct CheckResult {
    pub name: &'static str,
    pub worst: f64,
    pub tol: f64,
}

impl CheckResult {
    pub fn pass(&self) -> bool {
        self.worst.is_finite() && self.worst < self.tol
    }
}

fn random_values(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

fn random_coords(count: usize, dim: usize, extent: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count * dim)
        .map(|_| (rng.random::<f64>() - 0.5) * extent)
        .collect()
}

fn random_grid(shape: &[usize], seed: u64) -> ComplexGrid {
    let n: usize = shape.iter().product();
    ComplexGrid::new(shape.to_vec(), Space::Image, random_values(n, seed)).unwrap()
}

fn bump_field(shape: &[usize], amplitude: f64) -> DisplacementField {
    make_field(&FieldSpec {
        shape: shape.to_vec(),
        bumps: vec![GaussianBump {
            center: shape.iter().map(|&n| n as f64 * 0.55).collect(),
            amplitude: (0..shape.len())
                .map(|ax| amplitude * if ax % 2 == 0 { 1.0 } else { -0.8 })
                .collect(),
            radius: shape[0] as f64 * 0.2,
        }],
        min_radius: 0.0,
    })
    .expect("valid field spec")
}

fn dims() -> Vec<Vec<usize>> {
    vec![vec![64], vec![32, 32], vec![16, 16, 16]]
}

fn direct_inverse_ndft(
    grid_shape: &[usize],
    coords: &[f64],
    weights: &[f64],
    samples: &[Complex64],
) -> Vec<Complex64> {
    let dim = grid_shape.len();
    let total: usize = grid_shape.iter().product();
    let scale = 1.0 / (total as f64).sqrt();
    let strides: Vec<usize> = (0..dim)
        .map(|ax| grid_shape[ax + 1..].iter().product())
        .collect();
    (0..total)
        .map(|flat| {
            let mut acc = Complex64::ZERO;
            for (s, &v) in samples.iter().enumerate() {
                let mut phase = 0.0;
                for ax in 0..dim {
                    let x = (flat / strides[ax]) % grid_shape[ax];
                    let xc = x as f64 - grid_shape[ax] as f64 / 2.0;
                    phase += 2.0 * std::f64::consts::PI * coords[s * dim + ax] * xc
                        / grid_shape[ax] as f64;
                }
                acc += v * weights[s] * Complex64::from_polar(1.0, phase);
            }
            acc * scale
        })
        .collect()
}

/// A gridder whose adjoint side reads from taps computed for a slightly
/// perturbed first trajectory point. Used by the fault-injection hook to
/// prove the adjoint checks have teeth.
struct TapFaultGridder {
    forward: KSpaceGridder,
    adjoint: KSpaceGridder,
}

impl LinearOperator for TapFaultGridder {
    fn domain_shape(&self) -> &[usize] {
        self.forward.plan().grid_shape()
    }

    fn range_len(&self) -> usize {
        self.forward.sample_count()
    }

    fn forward(&self, x: &ComplexGrid) -> warpgrid::Result<Vec<Complex64>> {
        self.forward.to_samples(x)
    }

    fn adjoint(&self, y: &[Complex64]) -> warpgrid::Result<ComplexGrid> {
        self.adjoint.to_image(y)
    }
}

pub fn run_selftest(inject_fault: bool) -> Vec<CheckResult> {
    let mut results = Vec::new();

    // unitary FFT: round trip and energy
    let mut worst: f64 = 0.0;
    for shape in dims() {
        let g = random_grid(&shape, 1001);
        let f = fft_unitary(&g, Direction::Forward).unwrap();
        let back = fft_unitary(&f, Direction::Inverse).unwrap();
        worst = worst.max(nrmse(back.data(), g.data()));
        worst = worst.max((norm2(f.data()) - norm2(g.data())).abs() / norm2(g.data()));
    }
    results.push(CheckResult {
        name: "fft_unitarity",
        worst,
        tol: 1e-13,
    });

    // zero-pad / crop adjoint identity
    let mut worst: f64 = 0.0;
    for shape in [vec![16usize, 16], vec![8, 8, 8]] {
        let big: Vec<usize> = shape.iter().map(|&n| n * 2).collect();
        let x = random_grid(&shape, 1011);
        let y = random_grid(&big, 1012);
        let lhs = inner(zero_pad(&x, &big).unwrap().data(), y.data());
        let rhs = inner(x.data(), crop_center(&y, &shape).unwrap().data());
        worst = worst.max((lhs - rhs).norm() / (norm2(x.data()) * norm2(y.data())));
    }
    results.push(CheckResult {
        name: "pad_crop_adjoint",
        worst,
        tol: 1e-14,
    });

    // k-space gridding adjoint across dimensions (fault hook lives here)
    let mut worst: f64 = 0.0;
    for shape in dims() {
        let plan = make_plan(&shape, &KernelSpec::default()).unwrap();
        let count = 100;
        let coords = random_coords(count, shape.len(), shape[0] as f64 - 2.0, 1021);
        let weights = vec![1.0; count];
        let clean = KSpaceGridder::new(plan.clone(), &coords, weights.clone()).unwrap();
        let d = if inject_fault {
            let mut bad_coords = coords.clone();
            bad_coords[0] += 0.3;
            let bad = KSpaceGridder::new(plan, &bad_coords, weights).unwrap();
            let op = TapFaultGridder {
                forward: clean,
                adjoint: bad,
            };
            adjoint_discrepancy(&op, 10, 1022).unwrap()
        } else {
            adjoint_discrepancy(&clean, 10, 1022).unwrap()
        };
        worst = worst.max(d);
    }
    results.push(CheckResult {
        name: "kgrid_adjoint",
        worst,
        tol: 1e-12,
    });

    // gridding against the direct NDFT oracle, both directions
    let n = 16usize;
    let count = 120;
    let coords = random_coords(count, 2, n as f64 - 2.0, 1031);
    let weights = vec![1.0 / count as f64; count];
    let plan = make_plan(&[n, n], &KernelSpec::default()).unwrap();
    let gridder = KSpaceGridder::new(plan.clone(), &coords, weights.clone()).unwrap();
    let samples = random_values(count, 1032);
    let got = gridder.to_image(&samples).unwrap();
    let want = direct_inverse_ndft(&[n, n], &coords, &weights, &samples);
    let wmax = want.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let worst = got
        .data()
        .iter()
        .zip(&want)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0f64, f64::max)
        / wmax;
    results.push(CheckResult {
        name: "kgrid_ndft_forward",
        worst,
        tol: 1e-3,
    });

    let image = random_grid(&[n, n], 1033);
    let got = gridder.to_samples(&image).unwrap();
    // adjoint of the oracle: per-sample weighted forward NDFT
    let want: Vec<Complex64> = (0..count)
        .map(|s| {
            let mut acc = Complex64::ZERO;
            for (flat, v) in image.data().iter().enumerate() {
                let x = flat / n;
                let y = flat % n;
                let phase = -2.0 * std::f64::consts::PI / n as f64
                    * (coords[s * 2] * (x as f64 - 8.0) + coords[s * 2 + 1] * (y as f64 - 8.0));
                acc += v * Complex64::from_polar(1.0, phase);
            }
            acc * weights[s] / n as f64
        })
        .collect();
    let wmax = want.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let worst = got
        .iter()
        .zip(&want)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0f64, f64::max)
        / wmax;
    results.push(CheckResult {
        name: "kgrid_ndft_inverse",
        worst,
        tol: 1e-3,
    });

    // image-space gridding: adjointness and the zero-field identity
    let mut worst: f64 = 0.0;
    for shape in [vec![32usize, 32], vec![16, 16, 16]] {
        let plan = make_plan(&shape, &KernelSpec::default()).unwrap();
        let warp = ImageGridder::new(plan, bump_field(&shape, 3.0)).unwrap();
        worst = worst.max(adjoint_discrepancy(&warp, 10, 1041).unwrap());
    }
    results.push(CheckResult {
        name: "igrid_adjoint",
        worst,
        tol: 1e-12,
    });

    let shape = [32usize, 32];
    let plan = make_plan(&shape, &KernelSpec::default()).unwrap();
    let identity_warp = ImageGridder::identity(plan.clone()).unwrap();
    let x = random_grid(&shape, 1051);
    let warped = identity_warp.warp(&x).unwrap();
    results.push(CheckResult {
        name: "igrid_identity",
        worst: nrmse(warped.data(), x.data()),
        tol: 1e-3,
    });

    // SENSE and stacked adjointness, and positive semidefiniteness of the
    // stacked normal operator
    let coils = make_coils(&shape, 3, 0.6, 1061).unwrap();
    let states: Vec<NonrigidSenseOp> = (0..3)
        .map(|j| {
            let field = if j == 0 {
                DisplacementField::zeros(&shape)
            } else {
                bump_field(&shape, 1.0 + j as f64)
            };
            let warp = ImageGridder::new(plan.clone(), field).unwrap();
            let count = 40 + 10 * j;
            let coords = random_coords(count, 2, 30.0, 1062 + j as u64);
            let gridder =
                KSpaceGridder::new(plan.clone(), &coords, vec![1.0; count]).unwrap();
            NonrigidSenseOp::new(warp, coils.clone(), gridder).unwrap()
        })
        .collect();
    let single = states[0].clone();
    results.push(CheckResult {
        name: "sense_adjoint",
        worst: adjoint_discrepancy(&single, 10, 1071).unwrap(),
        tol: 1e-12,
    });
    let model = StackedSenseModel::from_states(states).unwrap();
    results.push(CheckResult {
        name: "stacked_adjoint",
        worst: adjoint_discrepancy(&model, 10, 1072).unwrap(),
        tol: 1e-12,
    });

    let mut worst: f64 = 0.0;
    for trial in 0..5 {
        let x = random_grid(&shape, 1081 + trial);
        let nx = model.normal(&x).unwrap();
        let quad = inner(nx.data(), x.data()).re;
        let scale = norm2(x.data()).powi(2);
        worst = worst.max((-quad / scale).max(0.0));
    }
    results.push(CheckResult {
        name: "normal_op_psd",
        worst,
        tol: 1e-12,
    });

    // wavelet round trip and energy preservation
    let w = HaarWavelet::new(3).unwrap();
    let data = random_values(32 * 32, 1091);
    let coeffs = w.forward(&data, &[32, 32]).unwrap();
    let back = w.inverse(&coeffs, &[32, 32]).unwrap();
    results.push(CheckResult {
        name: "wavelet_roundtrip",
        worst: nrmse(&back, &data),
        tol: 1e-13,
    });
    results.push(CheckResult {
        name: "wavelet_parseval",
        worst: (norm2(&coeffs) - norm2(&data)).abs() / norm2(&data),
        tol: 1e-13,
    });

    results
}

/// Print the per-check report; true iff everything passed.
pub fn report(results: &[CheckResult]) -> bool {
    let mut all_pass = true;
    for r in results {
        let status = if r.pass() { "PASS" } else { "FAIL" };
        println!("{status} {name:<20} worst={worst:.3e} (tol {tol:.1e})",
            name = r.name,
            worst = r.worst,
            tol = r.tol
        );
        all_pass &= r.pass();
    }
    all_pass
}
