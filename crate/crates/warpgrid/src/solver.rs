//! Wavelet-regularized FISTA for the acquisition models:
//! `argmin_x |y - Ax|^2 + lambda |W x|_1`.

use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm2, ComplexGrid, Space};
use crate::op::LinearOperator;
use crate::wavelet::HaarWavelet;

/// Gradient step size: a power-iteration estimate or an explicit value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    Auto,
    Fixed(f64),
}

impl Serialize for StepSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StepSize::Auto => s.serialize_str("auto"),
            StepSize::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for StepSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(StepSize::Fixed(v)),
            Raw::Text(t) if t == "auto" => Ok(StepSize::Auto),
            Raw::Text(t) => Err(de::Error::custom(format!(
                "step_size must be a number or \"auto\", got {t:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda: f64,
    pub max_iters: usize,
    #[serde(default = "default_step")]
    pub step_size: StepSize,
    #[serde(default = "default_levels")]
    pub wavelet_levels: usize,
    #[serde(default)]
    pub tol: Option<f64>,
}

fn default_step() -> StepSize {
    StepSize::Auto
}

fn default_levels() -> usize {
    3
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 1e-6,
            max_iters: 400,
            step_size: StepSize::Auto,
            wavelet_levels: 3,
            tol: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite and >= 0"));
        }
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if let StepSize::Fixed(s) = self.step_size {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::invalid("explicit step size must be positive"));
            }
        }
        if self.wavelet_levels < 1 {
            return Err(Error::invalid("wavelet_levels must be >= 1"));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(Error::invalid("tol must be positive when given"));
            }
        }
        Ok(())
    }
}

/// Per-solve diagnostics.
#[derive(Clone, Debug)]
pub struct SolveReport {
    /// `|y - Ax|^2 + lambda |W x|_1` after each iteration.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub final_relative_change: f64,
    pub step_size: f64,
}

/// Complex soft-thresholding: shrink the magnitude by `t`, clip at zero,
/// preserve the phase. The proximal map of `t * |.|_1`.
pub fn soft_threshold(coeffs: &mut [Complex64], t: f64) {
    assert!(t >= 0.0, "threshold must be non-negative");
    if t == 0.0 {
        return;
    }
    for v in coeffs.iter_mut() {
        let mag = v.norm();
        *v = if mag <= t {
            Complex64::ZERO
        } else {
            *v * ((mag - t) / mag)
        };
    }
}

/// Largest eigenvalue of `AᴴA` by power iteration with a seeded start.
pub fn power_iteration(op: &dyn LinearOperator, iters: usize, seed: u64) -> Result<f64> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let shape = op.domain_shape().to_vec();
    let n: usize = shape.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let mut v = ComplexGrid::new(shape.clone(), Space::Image, data)?;
    let mut lambda = 0.0;
    for _ in 0..iters {
        let nv = norm2(v.data());
        if nv == 0.0 {
            return Ok(0.0);
        }
        v.scale(1.0 / nv);
        let w = op.normal(&v)?;
        lambda = crate::grid::inner(w.data(), v.data()).re;
        v = w;
    }
    Ok(lambda.max(0.0))
}

/// Plain FISTA (Beck-Teboulle momentum, no restart) with the proximal step in
/// the wavelet domain, minimizing `|y - Ax|^2 + lambda |W x|_1`.
///
/// Internally the data term is handled as `(1/2)|y - Ax|^2` with the
/// regularizer scaled to `lambda/2`, which leaves the minimizer unchanged and
/// makes the automatic step `0.9 / lambda_max(AᴴA)` satisfy the standard
/// majorization bound.
pub fn fista(
    op: &dyn LinearOperator,
    y: &[Complex64],
    config: &SolverConfig,
) -> Result<(ComplexGrid, SolveReport)> {
    config.validate()?;
    if y.len() != op.range_len() {
        return Err(Error::LengthMismatch {
            expected: op.range_len(),
            got: y.len(),
        });
    }
    let shape = op.domain_shape().to_vec();
    let wavelet = HaarWavelet::new(config.wavelet_levels)?;
    wavelet.check_shape(&shape)?;

    let step = match config.step_size {
        StepSize::Fixed(s) => s,
        StepSize::Auto => {
            let lam = power_iteration(op, 30, 0x9d5a_77ee)?;
            if lam <= 0.0 {
                return Err(Error::invalid(
                    "power iteration found a zero operator; cannot pick a step size",
                ));
            }
            0.9 / lam
        }
    };

    let n: usize = shape.iter().product();
    let mut x = ComplexGrid::zeros(&shape, Space::Image);
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut trace = Vec::with_capacity(config.max_iters);
    let mut rel_change = f64::INFINITY;
    let mut iterations = 0usize;

    for it in 1..=config.max_iters {
        // gradient step at the momentum point
        let mut residual = op.forward(&z)?;
        for (r, yv) in residual.iter_mut().zip(y) {
            *r -= yv;
        }
        let grad = op.adjoint(&residual)?;
        let mut v = z.clone();
        for (vi, gi) in v.data_mut().iter_mut().zip(grad.data()) {
            *vi -= step * gi;
        }

        // proximal step in the wavelet domain (lambda/2 matches the halved
        // data term, so the minimized objective is the reported one)
        let mut coeffs = wavelet.forward(v.data(), &shape)?;
        soft_threshold(&mut coeffs, 0.5 * step * config.lambda);
        let l1: f64 = coeffs.iter().map(|c| c.norm()).sum();
        let x_new =
            ComplexGrid::new(shape.clone(), Space::Image, wavelet.inverse(&coeffs, &shape)?)?;

        // objective at the new iterate
        let fit = op.forward(&x_new)?;
        let data_term: f64 = fit
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let objective = data_term + config.lambda * l1;
        iterations = it;
        trace.push(objective);
        if !objective.is_finite() {
            return Err(Error::SolverDiverged {
                iteration: it,
                trace,
            });
        }

        let diff: f64 = x_new
            .data()
            .iter()
            .zip(x.data())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let denom = norm2(x_new.data()).max(1e-300);
        rel_change = diff / denom;

        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_new;
        let mut z_new = x_new.clone();
        for i in 0..n {
            let d = x_new.data()[i] - x.data()[i];
            z_new.data_mut()[i] += momentum * d;
        }
        x = x_new;
        z = z_new;
        t = t_new;

        if let Some(tol) = config.tol {
            if rel_change < tol {
                break;
            }
        }
    }

    let report = SolveReport {
        objective_trace: trace,
        iterations_run: iterations,
        final_relative_change: rel_change,
        step_size: step,
    };
    Ok((x, report))
}
