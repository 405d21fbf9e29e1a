//! Gridding-based linear operators for motion-corrected MR image
//! reconstruction.
//!
//! The crate provides the two gridding directions in k-space (non-uniform FFT
//! and its exact adjoint), the analogous image-space gridding pair that
//! applies a nonrigid warp and its exact adjoint, SENSE-style multi-coil
//! acquisition operators built from those pieces, a wavelet-regularized FISTA
//! solver, translational motion estimation with respiratory binning, and a
//! synthetic multi-state acquisition simulator for end-to-end experiments.
//!
//! All operators are immutable after construction and their applications are
//! pure functions, so they can be shared freely across threads. Internal
//! parallelism only ever splits work across independent outputs (coils,
//! states, heartbeats), which keeps results bit-identical for any thread
//! count.

pub mod error;
pub mod grid;
pub mod igrid;
pub mod kernel;
pub mod kgrid;
pub mod motion;
pub mod op;
pub mod plan;
pub mod sense;
pub mod sim;
pub mod solver;
pub mod wavelet;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use grid::{
    crop_center, fft_unitary, fourier_shift, inner, norm2, nrmse, zero_pad, ComplexGrid,
    Direction, NonCartesianSet, Space,
};
pub use igrid::{warp_direct, DisplacementField, ImageGridder, WarpMethod};
pub use kernel::{beatty_beta, bessel_i0, kernel_eval, KernelSpec};
pub use kgrid::KSpaceGridder;
pub use motion::{
    apply_phase_shift, estimate_translation, kmeans_bin, MotionEstimate, RespiratoryBins,
};
pub use op::{adjoint_discrepancy, IdentityOp, LinearOperator};
pub use plan::{make_plan, GriddingPlan};
pub use sense::{CoilSet, NonrigidSenseOp, StackedSenseModel};
pub use solver::{fista, power_iteration, soft_threshold, SolveReport, SolverConfig, StepSize};
pub use wavelet::HaarWavelet;
