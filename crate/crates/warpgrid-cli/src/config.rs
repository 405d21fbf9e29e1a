//! Experiment configuration: one structured-text document covering the
//! phantom, the displacement field, the kernel, the acquisition, the solver,
//! seeds and the output directory. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use warpgrid::sim::{Ellipse, FieldSpec, GaussianBump, PhantomSpec, TrajectoryKind};
use warpgrid::{KernelSpec, SolverConfig, StepSize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    #[serde(default)]
    pub kernel: KernelSpec,
    pub phantom: PhantomSection,
    pub field: FieldSection,
    pub solver: SolverConfig,
    #[serde(default)]
    pub acquisition: AcquisitionSection,
    #[serde(default)]
    pub motion: MotionSection,
    #[serde(default)]
    pub seeds: SeedsSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub ingest: IngestSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSection {
    pub ellipses: Vec<Ellipse>,
    #[serde(default)]
    pub smooth_sigma: Option<f64>,
    #[serde(default)]
    pub edge_margin: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub bumps: Vec<GaussianBump>,
    #[serde(default)]
    pub min_radius: f64,
    /// Seeded jitter applied to bump centers (voxels) and amplitudes
    /// (relative), so different seeds exercise different smooth fields.
    #[serde(default)]
    pub center_jitter: f64,
    #[serde(default)]
    pub amplitude_jitter: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSection {
    pub heartbeats: usize,
    pub interleaves_per_heartbeat: usize,
    pub trajectory: TrajectoryKind,
    /// 0 means "choose from the grid": 2N+1 samples per spoke.
    #[serde(default)]
    pub samples_per_spoke: usize,
    #[serde(default = "default_nav_divisor")]
    pub nav_divisor: usize,
    pub bins: usize,
    pub noise_sigma: f64,
    pub coil_count: usize,
    pub coil_smoothness: f64,
}

fn default_nav_divisor() -> usize {
    4
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        AcquisitionSection {
            heartbeats: 40,
            interleaves_per_heartbeat: 18,
            trajectory: TrajectoryKind::Radial2d,
            samples_per_spoke: 0,
            nav_divisor: 4,
            bins: 4,
            noise_sigma: 0.003,
            coil_count: 4,
            coil_smoothness: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSection {
    /// Scale of the per-bin translational shift levels, voxels.
    pub shift_scale: f64,
    /// Within-bin shift jitter, voxels.
    pub jitter: f64,
    /// Per-bin scaling of the base displacement field; entry 0 (the
    /// reference bin) must be 0.
    pub bin_field_scales: Vec<f64>,
}

impl Default for MotionSection {
    fn default() -> Self {
        MotionSection {
            shift_scale: 2.5,
            jitter: 0.12,
            bin_field_scales: vec![0.0, 1.0, -0.7, 0.5],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsSection {
    pub master: u64,
}

impl Default for SeedsSection {
    fn default() -> Self {
        SeedsSection { master: 1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    /// Optional externally computed per-bin displacement fields.
    #[serde(default)]
    pub fields_file: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.shape.is_empty() || self.grid.shape.len() > 3 {
            bail!("grid shape must have 1 to 3 axes");
        }
        if self.grid.shape.iter().any(|&n| n < 8 || n % 2 != 0) {
            bail!("grid axes must be even and >= 8");
        }
        self.kernel.validate()?;
        self.solver.validate()?;
        let div = 1usize << self.solver.wavelet_levels;
        if self.grid.shape.iter().any(|&n| n % div != 0) {
            bail!(
                "grid shape {:?} is not divisible by 2^{} (wavelet levels)",
                self.grid.shape,
                self.solver.wavelet_levels
            );
        }
        if self.motion.bin_field_scales.len() < self.acquisition.bins {
            bail!(
                "need at least {} bin field scales, got {}",
                self.acquisition.bins,
                self.motion.bin_field_scales.len()
            );
        }
        if self.motion.bin_field_scales[0] != 0.0 {
            bail!("bin_field_scales[0] is the reference bin and must be 0");
        }
        if let Some(path) = &self.ingest.fields_file {
            if !path.exists() {
                bail!("ingest fields file {} does not exist", path.display());
            }
        }
        Ok(())
    }

    pub fn phantom_spec(&self) -> PhantomSpec {
        PhantomSpec {
            shape: self.grid.shape.clone(),
            ellipses: self.phantom.ellipses.clone(),
            smooth_sigma: self.phantom.smooth_sigma,
            edge_margin: self.phantom.edge_margin,
        }
    }

    /// Field spec with the seeded jitter applied.
    pub fn field_spec(&self, seed: u64) -> FieldSpec {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f1e_55ed);
        let bumps = self
            .field
            .bumps
            .iter()
            .map(|b| GaussianBump {
                center: b
                    .center
                    .iter()
                    .map(|c| c + self.field.center_jitter * (rng.random::<f64>() - 0.5) * 2.0)
                    .collect(),
                amplitude: b
                    .amplitude
                    .iter()
                    .map(|a| {
                        a * (1.0 + self.field.amplitude_jitter * (rng.random::<f64>() - 0.5) * 2.0)
                    })
                    .collect(),
                radius: b.radius,
            })
            .collect();
        FieldSpec {
            shape: self.grid.shape.clone(),
            bumps,
            min_radius: self.field.min_radius,
        }
    }

    pub fn samples_per_spoke(&self) -> usize {
        if self.acquisition.samples_per_spoke > 0 {
            self.acquisition.samples_per_spoke
        } else {
            2 * self.grid.shape.iter().min().copied().unwrap_or(32) + 1
        }
    }

    pub fn nav_shape(&self) -> Vec<usize> {
        let div = self.acquisition.nav_divisor.max(1);
        self.grid
            .shape
            .iter()
            .map(|&n| (n / div).max(4).next_multiple_of(2))
            .collect()
    }

    /// Built-in defaults for the warp-inversion experiment.
    pub fn invert_warp_defaults() -> Self {
        ExperimentConfig {
            grid: GridSection {
                shape: vec![128, 128],
            },
            kernel: KernelSpec::default(),
            phantom: PhantomSection {
                ellipses: vec![
                    Ellipse {
                        center: vec![64.0, 64.0],
                        semi_axes: vec![40.0, 30.0],
                        rotation: 0.35,
                        intensity: 0.55,
                    },
                    Ellipse {
                        center: vec![58.0, 62.0],
                        semi_axes: vec![24.0, 16.0],
                        rotation: -0.2,
                        intensity: 0.25,
                    },
                    Ellipse {
                        center: vec![76.0, 72.0],
                        semi_axes: vec![7.0, 9.0],
                        rotation: 0.0,
                        intensity: 0.35,
                    },
                    Ellipse {
                        center: vec![52.0, 84.0],
                        semi_axes: vec![5.0, 4.0],
                        rotation: 0.6,
                        intensity: -0.3,
                    },
                ],
                smooth_sigma: Some(1.2),
                edge_margin: 12,
            },
            field: FieldSection {
                bumps: vec![
                    GaussianBump {
                        center: vec![56.0, 70.0],
                        amplitude: vec![5.0, -3.5],
                        radius: 17.0,
                    },
                    GaussianBump {
                        center: vec![78.0, 55.0],
                        amplitude: vec![-3.0, 4.0],
                        radius: 13.0,
                    },
                ],
                min_radius: 0.0,
                center_jitter: 3.0,
                amplitude_jitter: 0.2,
            },
            solver: SolverConfig {
                lambda: 1e-6,
                max_iters: 400,
                step_size: StepSize::Auto,
                wavelet_levels: 4,
                tol: None,
            },
            acquisition: AcquisitionSection::default(),
            motion: MotionSection::default(),
            seeds: SeedsSection::default(),
            output: OutputSection::default(),
            ingest: IngestSection::default(),
        }
    }

    /// Built-in defaults for the motion-corrected reconstruction experiment.
    pub fn recon_defaults() -> Self {
        let mut config = Self::invert_warp_defaults();
        config.grid.shape = vec![64, 64];
        config.phantom = PhantomSection {
            ellipses: vec![
                Ellipse {
                    center: vec![32.0, 32.0],
                    semi_axes: vec![20.0, 15.0],
                    rotation: 0.35,
                    intensity: 0.55,
                },
                Ellipse {
                    center: vec![29.0, 31.0],
                    semi_axes: vec![12.0, 8.0],
                    rotation: -0.2,
                    intensity: 0.25,
                },
                Ellipse {
                    center: vec![38.0, 36.0],
                    semi_axes: vec![3.5, 4.5],
                    rotation: 0.0,
                    intensity: 0.35,
                },
                Ellipse {
                    center: vec![26.0, 42.0],
                    semi_axes: vec![2.5, 2.0],
                    rotation: 0.6,
                    intensity: -0.3,
                },
            ],
            smooth_sigma: Some(0.8),
            edge_margin: 12,
        };
        config.field = FieldSection {
            bumps: vec![
                GaussianBump {
                    center: vec![28.0, 35.0],
                    amplitude: vec![4.0, -2.8],
                    radius: 8.5,
                },
                GaussianBump {
                    center: vec![39.0, 27.0],
                    amplitude: vec![-2.2, 3.0],
                    radius: 6.5,
                },
            ],
            min_radius: 0.0,
            center_jitter: 1.5,
            amplitude_jitter: 0.2,
        };
        config.solver = SolverConfig {
            lambda: 1e-6,
            max_iters: 60,
            step_size: StepSize::Auto,
            wavelet_levels: 4,
            tol: None,
        };
        config
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::invert_warp_defaults().validate().unwrap();
        ExperimentConfig::recon_defaults().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = toml::to_string(&ExperimentConfig::recon_defaults()).unwrap();
        let with_typo = format!("{text}\n[solver_extra]\nx = 1\n");
        assert!(toml::from_str::<ExperimentConfig>(&with_typo).is_err());
        let with_typo = text.replace("lambda", "lamda");
        assert!(toml::from_str::<ExperimentConfig>(&with_typo).is_err());
    }

    #[test]
    fn config_roundtrips_through_toml() {
        let config = ExperimentConfig::recon_defaults();
        let text = toml::to_string(&config).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.grid.shape, config.grid.shape);
        assert_eq!(back.solver.max_iters, config.solver.max_iters);
        assert_eq!(back.motion.bin_field_scales, config.motion.bin_field_scales);
    }

    #[test]
    fn missing_ingest_file_fails_validation() {
        let mut config = ExperimentConfig::recon_defaults();
        config.ingest.fields_file = Some(PathBuf::from("/nonexistent/fields.df"));
        assert!(config.validate().is_err());
    }

    #[test]
    fn step_size_parses_from_text_and_number() {
        let text = toml::to_string(&ExperimentConfig::recon_defaults()).unwrap();
        assert!(text.contains("step_size = \"auto\""));
        let replaced = text.replace("step_size = \"auto\"", "step_size = 0.25");
        let config: ExperimentConfig = toml::from_str(&replaced).unwrap();
        assert_eq!(config.solver.step_size, StepSize::Fixed(0.25));
    }
}
