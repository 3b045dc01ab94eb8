//! Thin command-line front end; all logic lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sdi::cli::{self, AblationAxis, HessianTarget};
use sdi::forward::Encoding;

#[derive(Parser)]
#[command(name = "sdi", about = "Spectral deconvolution imaging toolkit")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Amplitude,
    Phase,
    Scatter,
}

impl From<KindArg> for Encoding {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::Amplitude => Encoding::Amplitude,
            KindArg::Phase => Encoding::Phase,
            KindArg::Scatter => Encoding::Scatter,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Conversion,
    FsBranch,
    Stages,
    Fusion,
}

impl From<AxisArg> for AblationAxis {
    fn from(axis: AxisArg) -> Self {
        match axis {
            AxisArg::Conversion => AblationAxis::Conversion,
            AxisArg::FsBranch => AblationAxis::FsBranch,
            AxisArg::Stages => AblationAxis::Stages,
            AxisArg::Fusion => AblationAxis::Fusion,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Sdi,
    Cassi,
    Ape,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic scene, kernel stack, and filter stack.
    Gen {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 8)]
        bands: usize,
        #[arg(long, default_value_t = 3)]
        channels: usize,
        /// Kernel edge length; defaults to a per-family size.
        #[arg(long)]
        kernel: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a measurement from scene and system files.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        psfs: PathBuf,
        #[arg(long)]
        filters: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a cube from a measurement.
    Reconstruct {
        #[arg(long)]
        measurement: PathBuf,
        #[arg(long)]
        psfs: PathBuf,
        #[arg(long)]
        filters: PathBuf,
        /// Solver config JSON; defaults are estimated from the system.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the randomized fast-vs-dense equivalence suites.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Materialize a tiny system's Gram matrix and report its structure.
    HessianReport {
        #[arg(long, value_enum)]
        system: SystemArg,
        #[arg(long)]
        psfs: Option<PathBuf>,
        #[arg(long)]
        filters: Option<PathBuf>,
        /// Single-band mask cube (mask-and-dispersion systems).
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        dispersion: usize,
        #[arg(long, default_value_t = 2)]
        bands: usize,
        /// Single-channel response stack (per-pixel-response systems).
        #[arg(long)]
        response: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct under a list of noise levels and report metrics.
    NoiseSweep {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        psfs: PathBuf,
        #[arg(long)]
        filters: PathBuf,
        /// Comma-separated noise standard deviations.
        #[arg(long, value_delimiter = ',',
              default_values_t = [0.0, sdi::defaults::ROBUSTNESS_NOISE_SIGMA])]
        sigmas: Vec<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one design axis and report metrics per setting.
    Ablate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        psfs: PathBuf,
        #[arg(long)]
        filters: PathBuf,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(command: Command) -> sdi::Result<bool> {
    match command {
        Command::Gen {
            kind,
            height,
            width,
            bands,
            channels,
            kernel,
            seed,
            out,
        } => {
            cli::cmd_gen(
                kind.into(),
                height,
                width,
                bands,
                channels,
                kernel,
                seed,
                &out,
            )?;
            println!(
                "wrote scene.hsic, psfs.hsic, filters.hsic to {}",
                out.display()
            );
            Ok(true)
        }
        Command::Simulate {
            scene,
            psfs,
            filters,
            sigma,
            seed,
            out,
        } => {
            cli::cmd_simulate(&scene, &psfs, &filters, sigma, seed, &out)?;
            println!("wrote measurement.hsic to {}", out.display());
            Ok(true)
        }
        Command::Reconstruct {
            measurement,
            psfs,
            filters,
            config,
            out,
        } => {
            let path =
                cli::cmd_reconstruct(&measurement, &psfs, &filters, config.as_deref(), &out)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::Verify { seed, trials } => {
            let ok = cli::cmd_verify(seed, trials, std::io::stdout().lock())?;
            Ok(ok)
        }
        Command::HessianReport {
            system,
            psfs,
            filters,
            mask,
            dispersion,
            bands,
            response,
            out,
        } => {
            let missing =
                |flag: &str| sdi::Error::InvalidParameter(format!("--{flag} is required"));
            let target = match system {
                SystemArg::Sdi => HessianTarget::Sdi {
                    psfs: psfs.ok_or_else(|| missing("psfs"))?,
                    filters: filters.ok_or_else(|| missing("filters"))?,
                },
                SystemArg::Cassi => HessianTarget::Cassi {
                    mask: mask.ok_or_else(|| missing("mask"))?,
                    dispersion,
                    bands,
                },
                SystemArg::Ape => HessianTarget::Ape {
                    response: response.ok_or_else(|| missing("response"))?,
                },
            };
            let path = cli::cmd_hessian_report(&target, &out)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::NoiseSweep {
            scene,
            psfs,
            filters,
            sigmas,
            config,
            seed,
            out,
        } => {
            let rows = cli::cmd_noise_sweep(
                &scene,
                &psfs,
                &filters,
                &sigmas,
                config.as_deref(),
                seed,
                &out,
            )?;
            for row in &rows {
                println!("{}: psnr {:.2} dB", row.method, row.psnr);
            }
            Ok(true)
        }
        Command::Ablate {
            scene,
            psfs,
            filters,
            axis,
            config,
            seed,
            out,
        } => {
            let rows = cli::cmd_ablate(
                &scene,
                &psfs,
                &filters,
                axis.into(),
                config.as_deref(),
                seed,
                &out,
            )?;
            for row in &rows {
                println!("{}: psnr {:.2} dB", row.method, row.psnr);
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("sdi: verification failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("sdi: {e}");
            ExitCode::FAILURE
        }
    }
}
