//! Cross-module adjointness of the full operator family across 1D, 2D and 3D
//! grids, on random complex inputs.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use warpgrid::sim::{make_coils, make_field, FieldSpec, GaussianBump};
use warpgrid::*;

fn random_coords(count: usize, dim: usize, extent: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count * dim)
        .map(|_| (rng.random::<f64>() - 0.5) * extent)
        .collect()
}

fn random_weights(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random::<f64>() + 0.05).collect()
}

fn smooth_field(shape: &[usize], amplitude: f64, seed: u64) -> DisplacementField {
    let dim = shape.len();
    make_field(&FieldSpec {
        shape: shape.to_vec(),
        bumps: vec![GaussianBump {
            center: shape
                .iter()
                .map(|&n| n as f64 / 2.0 + (seed % 5) as f64 - 2.0)
                .collect(),
            amplitude: (0..dim)
                .map(|ax| amplitude * if ax % 2 == 0 { 0.9 } else { -0.7 })
                .collect(),
            radius: shape[0] as f64 * 0.2,
        }],
        min_radius: 0.0,
    })
    .unwrap()
}

fn dims() -> Vec<Vec<usize>> {
    vec![vec![64], vec![32, 32], vec![16, 16, 16]]
}

#[test]
fn kgrid_pair_is_adjoint_across_dimensions() {
    for shape in dims() {
        let plan = make_plan(&shape, &KernelSpec::default()).unwrap();
        let count = 120;
        let coords = random_coords(count, shape.len(), shape[0] as f64 - 2.0, 11);
        let g = KSpaceGridder::new(plan, &coords, random_weights(count, 12)).unwrap();
        let d = adjoint_discrepancy(&g, 20, 13).unwrap();
        assert!(d < 1e-12, "kgrid {shape:?}: {d}");
    }
}

#[test]
fn igrid_pair_is_adjoint_across_dimensions() {
    for shape in dims() {
        let plan = make_plan(&shape, &KernelSpec::default()).unwrap();
        let field = smooth_field(&shape, 3.5, 21);
        let g = ImageGridder::new(plan, field).unwrap();
        let d = adjoint_discrepancy(&g, 20, 22).unwrap();
        assert!(d < 1e-12, "igrid {shape:?}: {d}");
    }
}

#[test]
fn sense_pair_is_adjoint_across_dimensions() {
    for shape in dims() {
        let plan = make_plan(&shape, &KernelSpec::default()).unwrap();
        let coils = make_coils(&shape, 2, 0.6, 31).unwrap();
        let warp = ImageGridder::new(plan.clone(), smooth_field(&shape, 2.0, 32)).unwrap();
        let coords = random_coords(60, shape.len(), shape[0] as f64 - 2.0, 33);
        let gridder = KSpaceGridder::new(plan, &coords, random_weights(60, 34)).unwrap();
        let op = NonrigidSenseOp::new(warp, coils, gridder).unwrap();
        let d = adjoint_discrepancy(&op, 20, 35).unwrap();
        assert!(d < 1e-12, "sense {shape:?}: {d}");
    }
}

#[test]
fn three_state_stack_is_adjoint_across_dimensions() {
    for shape in dims() {
        let plan = make_plan(&shape, &KernelSpec::default()).unwrap();
        let coils = make_coils(&shape, 2, 0.6, 41).unwrap();
        let states: Vec<NonrigidSenseOp> = (0..3)
            .map(|j| {
                let field = if j == 0 {
                    DisplacementField::zeros(&shape)
                } else {
                    smooth_field(&shape, 1.0 + j as f64, 42 + j as u64)
                };
                let warp = ImageGridder::new(plan.clone(), field).unwrap();
                let coords =
                    random_coords(40 + 8 * j, shape.len(), shape[0] as f64 - 2.0, 50 + j as u64);
                let gridder = KSpaceGridder::new(
                    plan.clone(),
                    &coords,
                    random_weights(40 + 8 * j, 60 + j as u64),
                )
                .unwrap();
                NonrigidSenseOp::new(warp, coils.clone(), gridder).unwrap()
            })
            .collect();
        let model = StackedSenseModel::from_states(states).unwrap();
        let d = adjoint_discrepancy(&model, 20, 70).unwrap();
        assert!(d < 1e-12, "stacked {shape:?}: {d}");
    }
}

#[test]
fn single_threaded_applications_are_bit_reproducible() {
    let shape = [32usize, 32];
    let plan = make_plan(&shape, &KernelSpec::default()).unwrap();
    let coords = random_coords(100, 2, 30.0, 81);
    let g = KSpaceGridder::new(plan, &coords, random_weights(100, 82)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(83);
    let samples: Vec<Complex64> = (0..100)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let a = g.to_image(&samples).unwrap();
    let b = g.to_image(&samples).unwrap();
    assert_eq!(a.data(), b.data());
}
