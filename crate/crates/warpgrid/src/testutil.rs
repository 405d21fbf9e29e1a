//! Seeded random data helpers shared by the unit tests.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::grid::{ComplexGrid, Space};

pub(crate) fn random_values(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

pub(crate) fn random_grid(shape: &[usize], space: Space, seed: u64) -> ComplexGrid {
    let n: usize = shape.iter().product();
    ComplexGrid::new(shape.to_vec(), space, random_values(n, seed)).unwrap()
}

pub(crate) fn random_coords(count: usize, dim: usize, extent: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count * dim)
        .map(|_| (rng.random::<f64>() - 0.5) * extent)
        .collect()
}

pub(crate) fn random_weights(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random::<f64>() + 0.05).collect()
}
