use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use warpgrid::{
    make_plan, ImageGridder, KSpaceGridder, KernelSpec, NonCartesianSet, WarpMethod,
};
use warpgrid_cli::config::ExperimentConfig;
use warpgrid_cli::{config, files, imageio, invert_warp, recon, selftest, NumericalFailure};

#[derive(Parser)]
#[command(
    name = "warpgrid",
    about = "Gridding-based warp operators and motion-corrected MR reconstruction experiments",
    version
)]
struct Cli {
    /// Worker threads for internal parallelism (0 = all cores). The
    /// WARPGRID_THREADS environment variable overrides this flag.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the numerical self-test suite (adjoint identities, oracles).
    Selftest {
        /// Deliberately corrupt one kernel tap to prove the checks fail.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Warp-inversion experiment: naive negated-field inversion vs the
    /// iterative solve with the exact forward-adjoint warp pair.
    InvertWarp(ExperimentArgs),
    /// Motion-corrected reconstruction experiment: uncorrected vs
    /// translational-only vs nonrigid.
    Recon(ExperimentArgs),
    /// Apply a warp (or its adjoint) to an image file.
    Warp {
        /// Input complex-grid file.
        #[arg(long)]
        image: PathBuf,
        /// Displacement-field stack file.
        #[arg(long)]
        field: PathBuf,
        /// Bin index within the field stack.
        #[arg(long, default_value_t = 0)]
        bin: usize,
        /// Output complex-grid file.
        #[arg(long)]
        out: PathBuf,
        /// Apply the adjoint instead of the forward warp.
        #[arg(long)]
        adjoint: bool,
        #[arg(long, value_enum, default_value_t = WarpKind::Gridding)]
        method: WarpKind,
        #[command(flatten)]
        kernel: KernelArgs,
    },
    /// Grid between an image file and a non-Cartesian sample file.
    Grid {
        #[arg(long, value_enum)]
        direction: GridDirection,
        /// Sample-set file: coordinates (and weights) always; values when
        /// gridding to an image.
        #[arg(long)]
        samples: PathBuf,
        /// Input image (required when gridding to samples).
        #[arg(long)]
        image: Option<PathBuf>,
        /// Grid shape when no input image is given, e.g. "64,64".
        #[arg(long)]
        shape: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
    },
    /// Export a complex-grid file as an 8-bit grayscale PNG.
    ExportPng {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration (structured text); defaults are built in.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for metrics, traces and images.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WarpKind {
    Gridding,
    Nearest,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridDirection {
    ToImage,
    ToSamples,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, default_value_t = 4)]
    width: usize,
    #[arg(long, default_value_t = 2.0)]
    oversampling: f64,
}

impl KernelArgs {
    fn spec(&self) -> Result<KernelSpec> {
        Ok(KernelSpec::new(self.width, self.oversampling)?)
    }
}

fn load_config(args: &ExperimentArgs, defaults: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => config::ExperimentConfig::load(path)?,
        None => defaults,
    };
    if let Some(seed) = args.seed {
        config.seeds.master = seed;
    }
    Ok(config)
}

fn out_dir(args: &ExperimentArgs, config: &ExperimentConfig) -> Option<PathBuf> {
    args.out.clone().or_else(|| config.output.dir.clone())
}

fn parse_shape(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .with_context(|| format!("bad shape component {t:?}"))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Selftest { inject_fault } => {
            let results = selftest::run_selftest(inject_fault);
            let all_pass = selftest::report(&results);
            if !all_pass {
                bail!(NumericalFailure("self-test checks failed".into()));
            }
            Ok(())
        }
        Command::InvertWarp(args) => {
            let config = load_config(&args, ExperimentConfig::invert_warp_defaults())?;
            let dir = out_dir(&args, &config);
            let metrics = invert_warp::run(&config, dir.as_deref())?;
            print!("{}", metrics.to_key_values());
            if !metrics.nrmse_iterative.is_finite() || !metrics.nrmse_naive.is_finite() {
                bail!(NumericalFailure("non-finite reconstruction error".into()));
            }
            Ok(())
        }
        Command::Recon(args) => {
            let config = load_config(&args, ExperimentConfig::recon_defaults())?;
            let dir = out_dir(&args, &config);
            let metrics = recon::run(&config, dir.as_deref())?;
            print!("{}", metrics.to_key_values());
            if !metrics.nrmse_nonrigid.is_finite() {
                bail!(NumericalFailure("non-finite reconstruction error".into()));
            }
            Ok(())
        }
        Command::Warp {
            image,
            field,
            bin,
            out,
            adjoint,
            method,
            kernel,
        } => {
            let input = files::read_grid(&image)?;
            let stack = files::read_field_stack(&field)?;
            if bin >= stack.fields.len() {
                bail!("bin {bin} out of range ({} bins)", stack.fields.len());
            }
            let field = stack.fields[bin].clone();
            let result = match method {
                WarpKind::Gridding => {
                    let plan = make_plan(input.shape(), &kernel.spec()?)?;
                    let op = ImageGridder::new(plan, field)?;
                    if adjoint {
                        op.warp_adjoint(&input)?
                    } else {
                        op.warp(&input)?
                    }
                }
                WarpKind::Nearest | WarpKind::Linear => {
                    if adjoint {
                        bail!("interpolating warps have no adjoint; use --method gridding");
                    }
                    let m = if matches!(method, WarpKind::Nearest) {
                        WarpMethod::Nearest
                    } else {
                        WarpMethod::Linear
                    };
                    warpgrid::warp_direct(&input, &field, m)?
                }
            };
            files::write_grid(&out, &result)
        }
        Command::Grid {
            direction,
            samples,
            image,
            shape,
            out,
            kernel,
        } => {
            let (set, weights) = files::read_samples(&samples)?;
            let weights = weights.unwrap_or_else(|| vec![1.0; set.count()]);
            match direction {
                GridDirection::ToImage => {
                    let shape = match (&image, &shape) {
                        (Some(path), _) => files::read_grid(path)?.shape().to_vec(),
                        (None, Some(text)) => parse_shape(text)?,
                        (None, None) => bail!("gridding to an image needs --image or --shape"),
                    };
                    let plan = make_plan(&shape, &kernel.spec()?)?;
                    let gridder = KSpaceGridder::new(plan, set.coords(), weights)?;
                    let result = gridder.to_image(set.values())?;
                    files::write_grid(&out, &result)
                }
                GridDirection::ToSamples => {
                    let Some(path) = image else {
                        bail!("gridding to samples needs --image");
                    };
                    let input = files::read_grid(&path)?;
                    let plan = make_plan(input.shape(), &kernel.spec()?)?;
                    let gridder = KSpaceGridder::new(plan, set.coords(), weights.clone())?;
                    let values = gridder.to_samples(&input)?;
                    let result = NonCartesianSet::new(set.dim(), set.coords().to_vec(), values)?;
                    files::write_samples(&out, &result, Some(&weights))
                }
            }
        }
        Command::ExportPng { input, out } => {
            let grid = files::read_grid(&input)?;
            imageio::write_png(&out, &grid)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("WARPGRID_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(cli.threads);
    if threads > 0 {
        // ignore failure if a pool already exists (e.g. under a test harness)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(warpgrid_cli::exit_code_for(&err) as u8)
        }
    }
}
