//! Experiment driver and file formats for the warpgrid operators.
//!
//! The binary exposes the two headline experiments (`invert-warp`, `recon`),
//! a numerical `selftest`, and file-based single-operator commands (`warp`,
//! `grid`, `export-png`).

pub mod config;
pub mod files;
pub mod imageio;
pub mod invert_warp;
pub mod recon;
pub mod selftest;

/// Error marker for numerical failures (exit code 2), as opposed to
/// validation/IO problems (exit code 1).
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "numerical failure: {}", self.0)
    }
}

impl std::error::Error for NumericalFailure {}

/// Exit code for an error chain: 2 for numerical failures and solver
/// divergence, 1 for everything else (validation, IO, parsing).
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<NumericalFailure>().is_some() {
        return 2;
    }
    if let Some(w) = err.downcast_ref::<warpgrid::Error>() {
        if matches!(w, warpgrid::Error::SolverDiverged { .. }) {
            return 2;
        }
    }
    1
}
