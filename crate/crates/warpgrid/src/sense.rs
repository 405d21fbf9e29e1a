//! Nonrigid SENSE acquisition operators: warp, coil-sensitivity multiply, and
//! inverse k-space gridding chained per motion state, plus their vertical
//! stacking into one multi-state model.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, Space};
use crate::igrid::ImageGridder;
use crate::kgrid::KSpaceGridder;
use crate::op::LinearOperator;

/// Per-coil sample vectors for one state.
pub type CoilBlock = Vec<Vec<Complex64>>;

/// Coil sensitivity maps, all on the nominal grid.
#[derive(Clone, Debug)]
pub struct CoilSet {
    maps: Vec<ComplexGrid>,
}

impl CoilSet {
    pub fn new(maps: Vec<ComplexGrid>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::invalid("coil set needs at least one map"));
        }
        let shape = maps[0].shape().to_vec();
        for m in &maps {
            if m.shape() != shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    expected: shape,
                    got: m.shape().to_vec(),
                });
            }
        }
        Ok(CoilSet { maps })
    }

    /// Single all-ones coil (degenerate, for single-channel models).
    pub fn uniform(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        let ones = ComplexGrid::new(
            shape.to_vec(),
            Space::Image,
            vec![Complex64::new(1.0, 0.0); n],
        )
        .expect("shape/data consistent by construction");
        CoilSet { maps: vec![ones] }
    }

    pub fn count(&self) -> usize {
        self.maps.len()
    }

    pub fn shape(&self) -> &[usize] {
        self.maps[0].shape()
    }

    pub fn map(&self, coil: usize) -> &ComplexGrid {
        &self.maps[coil]
    }

    pub fn maps(&self) -> &[ComplexGrid] {
        &self.maps
    }

    /// Root-sum-of-squares magnitude per voxel.
    pub fn rss(&self) -> Vec<f64> {
        let n = self.maps[0].len();
        let mut out = vec![0.0; n];
        for m in &self.maps {
            for (o, v) in out.iter_mut().zip(m.data()) {
                *o += v.norm_sqr();
            }
        }
        for o in &mut out {
            *o = o.sqrt();
        }
        out
    }
}

/// Acquisition operator for one motion state: `y_c = G(S_c . T x)` per coil.
#[derive(Clone, Debug)]
pub struct NonrigidSenseOp {
    warp: ImageGridder,
    coils: CoilSet,
    gridder: KSpaceGridder,
}

impl NonrigidSenseOp {
    pub fn new(warp: ImageGridder, coils: CoilSet, gridder: KSpaceGridder) -> Result<Self> {
        let shape = warp.plan().grid_shape();
        if coils.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                got: coils.shape().to_vec(),
            });
        }
        if gridder.plan().grid_shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                got: gridder.plan().grid_shape().to_vec(),
            });
        }
        Ok(NonrigidSenseOp {
            warp,
            coils,
            gridder,
        })
    }

    pub fn coils(&self) -> &CoilSet {
        &self.coils
    }

    pub fn gridder(&self) -> &KSpaceGridder {
        &self.gridder
    }

    pub fn warp_op(&self) -> &ImageGridder {
        &self.warp
    }

    pub fn sample_count(&self) -> usize {
        self.gridder.sample_count()
    }

    pub fn grid_shape(&self) -> &[usize] {
        self.warp.plan().grid_shape()
    }

    /// Forward model: warp once, then per coil multiply by the sensitivity
    /// map and sample k-space.
    pub fn forward_blocks(&self, x: &ComplexGrid) -> Result<CoilBlock> {
        let warped = self.warp.warp(x)?;
        self.coils
            .maps()
            .par_iter()
            .map(|s| {
                let weighted = warped.pointwise_mul(s)?;
                self.gridder.to_samples(&weighted)
            })
            .collect()
    }

    /// Adjoint model: grid each coil's data back, multiply by the conjugate
    /// map, sum over coils, then apply the adjoint warp.
    pub fn adjoint_blocks(&self, blocks: &[Vec<Complex64>]) -> Result<ComplexGrid> {
        if blocks.len() != self.coils.count() {
            return Err(Error::LengthMismatch {
                expected: self.coils.count(),
                got: blocks.len(),
            });
        }
        let per_coil: Vec<ComplexGrid> = self
            .coils
            .maps()
            .par_iter()
            .zip(blocks.par_iter())
            .map(|(s, y)| {
                let img = self.gridder.to_image(y)?;
                img.pointwise_mul_conj(s)
            })
            .collect::<Result<_>>()?;
        let mut acc = ComplexGrid::zeros(self.grid_shape(), Space::Image);
        for img in &per_coil {
            acc.add_assign(img)?;
        }
        self.warp.warp_adjoint(&acc)
    }
}

impl LinearOperator for NonrigidSenseOp {
    fn domain_shape(&self) -> &[usize] {
        self.grid_shape()
    }

    fn range_len(&self) -> usize {
        self.coils.count() * self.sample_count()
    }

    fn forward(&self, x: &ComplexGrid) -> Result<Vec<Complex64>> {
        let blocks = self.forward_blocks(x)?;
        Ok(blocks.concat())
    }

    fn adjoint(&self, y: &[Complex64]) -> Result<ComplexGrid> {
        if y.len() != self.range_len() {
            return Err(Error::LengthMismatch {
                expected: self.range_len(),
                got: y.len(),
            });
        }
        let blocks: CoilBlock = y
            .chunks(self.sample_count())
            .map(|c| c.to_vec())
            .collect();
        self.adjoint_blocks(&blocks)
    }
}

/// Ordered per-state operators with their matching data blocks; the stacked
/// acquisition model over all motion states.
#[derive(Clone, Debug)]
pub struct StackedSenseModel {
    states: Vec<NonrigidSenseOp>,
    data: Vec<CoilBlock>,
}

impl StackedSenseModel {
    pub fn new(states: Vec<NonrigidSenseOp>, data: Vec<CoilBlock>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("stacked model needs at least one state"));
        }
        if states.len() != data.len() {
            return Err(Error::LengthMismatch {
                expected: states.len(),
                got: data.len(),
            });
        }
        let shape = states[0].grid_shape().to_vec();
        for (op, block) in states.iter().zip(&data) {
            if op.grid_shape() != shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    expected: shape,
                    got: op.grid_shape().to_vec(),
                });
            }
            if block.len() != op.coils().count() {
                return Err(Error::LengthMismatch {
                    expected: op.coils().count(),
                    got: block.len(),
                });
            }
            for coil in block {
                if coil.len() != op.sample_count() {
                    return Err(Error::LengthMismatch {
                        expected: op.sample_count(),
                        got: coil.len(),
                    });
                }
            }
        }
        Ok(StackedSenseModel { states, data })
    }

    /// Model without measured data, for operator-only use.
    pub fn from_states(states: Vec<NonrigidSenseOp>) -> Result<Self> {
        let data = states
            .iter()
            .map(|s| vec![vec![Complex64::ZERO; s.sample_count()]; s.coils().count()])
            .collect();
        StackedSenseModel::new(states, data)
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, j: usize) -> &NonrigidSenseOp {
        &self.states[j]
    }

    pub fn data(&self) -> &[CoilBlock] {
        &self.data
    }

    /// The stacked measurement vector in the operator's range order.
    pub fn stacked_data(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.range_len());
        for block in &self.data {
            for coil in block {
                out.extend_from_slice(coil);
            }
        }
        out
    }

    pub fn forward_states(&self, x: &ComplexGrid) -> Result<Vec<CoilBlock>> {
        self.states
            .par_iter()
            .map(|op| op.forward_blocks(x))
            .collect()
    }

    pub fn adjoint_states(&self, blocks: &[CoilBlock]) -> Result<ComplexGrid> {
        if blocks.len() != self.states.len() {
            return Err(Error::LengthMismatch {
                expected: self.states.len(),
                got: blocks.len(),
            });
        }
        let per_state: Vec<ComplexGrid> = self
            .states
            .par_iter()
            .zip(blocks.par_iter())
            .map(|(op, b)| op.adjoint_blocks(b))
            .collect::<Result<_>>()?;
        let mut acc = ComplexGrid::zeros(self.states[0].grid_shape(), Space::Image);
        for img in &per_state {
            acc.add_assign(img)?;
        }
        Ok(acc)
    }
}

impl LinearOperator for StackedSenseModel {
    fn domain_shape(&self) -> &[usize] {
        self.states[0].grid_shape()
    }

    fn range_len(&self) -> usize {
        self.states.iter().map(|s| s.range_len()).sum()
    }

    fn forward(&self, x: &ComplexGrid) -> Result<Vec<Complex64>> {
        let blocks = self.forward_states(x)?;
        let mut out = Vec::with_capacity(self.range_len());
        for block in blocks {
            for coil in block {
                out.extend_from_slice(&coil);
            }
        }
        Ok(out)
    }

    fn adjoint(&self, y: &[Complex64]) -> Result<ComplexGrid> {
        if y.len() != self.range_len() {
            return Err(Error::LengthMismatch {
                expected: self.range_len(),
                got: y.len(),
            });
        }
        let mut blocks = Vec::with_capacity(self.states.len());
        let mut cursor = 0usize;
        for op in &self.states {
            let mut block = Vec::with_capacity(op.coils().count());
            for _ in 0..op.coils().count() {
                block.push(y[cursor..cursor + op.sample_count()].to_vec());
                cursor += op.sample_count();
            }
            blocks.push(block);
        }
        self.adjoint_states(&blocks)
    }
}
