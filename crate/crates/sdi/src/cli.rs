//! Command implementations behind the `sdi` binary.
//!
//! Every command is a plain function over paths and values so it can be
//! driven from tests and examples as well as from the binary; each one is
//! reproducible from its config and seed, and re-running overwrites outputs
//! identically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::forward::{
    cassi_forward, sdi_forward, ApeSystem, CassiSystem, CsiSystem, Encoding, NoiseSpec, SdiSystem,
};
use crate::fourier::{hessian_report, ConversionStrategy};
use crate::io::{
    export_band_image, load_cube, load_filters, load_measurement, save_cube, save_filters,
    save_measurement,
};
use crate::metrics::{write_metrics_csv, MetricsRow, DEFAULT_PEAK};
use crate::solver::{run, DenoiserConfig, SolverConfig};
use crate::synth::{default_kernel_size, synth_filters, synth_psfs, synth_scene};
use crate::verify::run_trials;

/// Ablation axes supported by [`cmd_ablate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    Conversion,
    FsBranch,
    Stages,
    Fusion,
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

/// Parses a solver config file, reporting malformed fields with their path.
pub fn load_solver_config(path: &Path) -> Result<SolverConfig> {
    let text = fs::read_to_string(path)?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Generates a seeded synthetic scene, kernel stack, and filter stack.
#[allow(clippy::too_many_arguments)]
pub fn cmd_gen(
    kind: Encoding,
    height: usize,
    width: usize,
    bands: usize,
    channels: usize,
    kernel: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    ensure_dir(out)?;
    let kernel = kernel.unwrap_or_else(|| default_kernel_size(kind));
    let scene = synth_scene(height, width, bands, seed)?;
    let psfs = synth_psfs(kind, kernel, bands, seed ^ 0x9e37_79b9)?;
    let filters = synth_filters(height, width, bands, channels, seed ^ 0x85eb_ca6b)?;

    save_cube(&scene, &out.join("scene.hsic"))?;
    save_cube(
        &HsiCube::new(kernel, kernel, bands, psfs.data().to_vec())?,
        &out.join("psfs.hsic"),
    )?;
    save_filters(&filters, &out.join("filters.hsic"))?;
    export_band_image(&scene, 0, &out.join("scene_band0.pgm"))?;
    let psf_cube = HsiCube::new(kernel, kernel, bands, psfs.data().to_vec())?;
    export_band_image(&psf_cube, 0, &out.join("psf_band0.pgm"))?;
    Ok(())
}

fn load_system(psfs: &Path, filters: &Path, encoding: Encoding) -> Result<SdiSystem> {
    let psf_cube = load_cube(psfs)?;
    let psf_stack = crate::cube::PsfStack::new(
        psf_cube.height(),
        psf_cube.width(),
        psf_cube.bands(),
        psf_cube.data().to_vec(),
    )?;
    let filter_stack = load_filters(filters)?;
    SdiSystem::new(psf_stack, filter_stack, encoding)
}

/// Simulates a measurement from scene and system files.
pub fn cmd_simulate(
    scene: &Path,
    psfs: &Path,
    filters: &Path,
    sigma: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    ensure_dir(out)?;
    let scene = load_cube(scene)?;
    let system = load_system(psfs, filters, Encoding::Amplitude)?;
    let noise = if sigma > 0.0 {
        NoiseSpec::gaussian(sigma, seed)?
    } else {
        NoiseSpec::none()
    };
    let measurement = sdi_forward(&scene, &system, &noise)?;
    save_measurement(&measurement, &out.join("measurement.hsic"))?;
    let preview = HsiCube::new(
        measurement.height(),
        measurement.width(),
        measurement.channels(),
        measurement.data().to_vec(),
    )?;
    export_band_image(&preview, 0, &out.join("measurement_ch0.pgm"))?;
    Ok(())
}

/// Reconstructs a cube from a measurement and writes the estimate plus a
/// JSON log of the per-stage data-fidelity energies.
pub fn cmd_reconstruct(
    measurement: &Path,
    psfs: &Path,
    filters: &Path,
    config: Option<&Path>,
    out: &Path,
) -> Result<PathBuf> {
    ensure_dir(out)?;
    let measurement = load_measurement(measurement)?;
    let system = load_system(psfs, filters, Encoding::Amplitude)?;
    let config = match config {
        Some(path) => load_solver_config(path)?,
        None => SolverConfig::default(),
    };
    let (params, denoiser) = config.resolve(&measurement, &system)?;
    let (reconstruction, state) = run(&measurement, &system, &params, &denoiser)?;

    let recon_path = out.join("reconstruction.hsic");
    save_cube(&reconstruction, &recon_path)?;
    export_band_image(&reconstruction, 0, &out.join("reconstruction_band0.pgm"))?;

    let log = serde_json::json!({
        "stages": params.stages(),
        "gamma": params.gamma(),
        "phi": params.phi(),
        "chi": params.chi(),
        "fusionWeight": params.fusion_weight(),
        "conversion": params.conversion(),
        "energy": state.energy,
    });
    fs::write(
        out.join("state.json"),
        serde_json::to_string_pretty(&log)?.as_bytes(),
    )?;
    Ok(recon_path)
}

/// Runs the randomized oracle-equivalence suites, printing one line per
/// suite and a final tally. Returns whether every trial passed.
pub fn cmd_verify<W: Write>(seed: u64, trials: usize, out: W) -> Result<bool> {
    let reports = run_trials(seed, trials, out)?;
    Ok(reports.iter().all(|r| r.passes()))
}

/// System selector for [`cmd_hessian_report`].
pub enum HessianTarget {
    Sdi {
        psfs: PathBuf,
        filters: PathBuf,
    },
    Cassi {
        mask: PathBuf,
        dispersion: usize,
        bands: usize,
    },
    Ape {
        response: PathBuf,
    },
}

/// Materializes the chosen system's Gram matrix on a tiny instance and
/// writes the structure report as JSON.
pub fn cmd_hessian_report(target: &HessianTarget, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let report = match target {
        HessianTarget::Sdi { psfs, filters } => {
            let system = load_system(psfs, filters, Encoding::Amplitude)?;
            hessian_report(&CsiSystem::Sdi(&system))?
        }
        HessianTarget::Cassi {
            mask,
            dispersion,
            bands,
        } => {
            let mask_cube = load_cube(mask)?;
            if mask_cube.bands() != 1 {
                return Err(Error::DimensionMismatch(
                    "mask file must hold a single band".into(),
                ));
            }
            let system = CassiSystem::new(
                mask_cube.height(),
                mask_cube.width(),
                mask_cube.data().to_vec(),
                *dispersion,
            )?;
            hessian_report(&CsiSystem::Cassi {
                system: &system,
                bands: *bands,
            })?
        }
        HessianTarget::Ape { response } => {
            let system = ApeSystem::new(load_filters(response)?)?;
            hessian_report(&CsiSystem::Ape(&system))?
        }
    };
    let path = out.join("hessian.json");
    fs::write(&path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok(path)
}

fn reconstruct_in_memory(
    scene: &HsiCube,
    system: &SdiSystem,
    config: &SolverConfig,
    sigma: f64,
    seed: u64,
) -> Result<HsiCube> {
    let noise = if sigma > 0.0 {
        NoiseSpec::gaussian(sigma, seed)?
    } else {
        NoiseSpec::none()
    };
    let measurement = sdi_forward(scene, system, &noise)?;
    let (params, denoiser) = config.resolve(&measurement, system)?;
    Ok(run(&measurement, system, &params, &denoiser)?.0)
}

/// Simulates and reconstructs at each noise level, writing one metrics row
/// per level (method `sigma-<level>`).
pub fn cmd_noise_sweep(
    scene: &Path,
    psfs: &Path,
    filters: &Path,
    sigmas: &[f64],
    config: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<Vec<MetricsRow>> {
    ensure_dir(out)?;
    let scene_cube = load_cube(scene)?;
    let system = load_system(psfs, filters, Encoding::Amplitude)?;
    let config = match config {
        Some(path) => load_solver_config(path)?,
        None => SolverConfig::default(),
    };
    let mut rows = Vec::new();
    for (i, &sigma) in sigmas.iter().enumerate() {
        let recon = reconstruct_in_memory(
            &scene_cube,
            &system,
            &config,
            sigma,
            seed.wrapping_add(i as u64),
        )?;
        rows.push(MetricsRow::evaluate(
            "scene",
            &format!("sigma-{sigma}"),
            &scene_cube,
            &recon,
            DEFAULT_PEAK,
        )?);
    }
    let mut file = fs::File::create(out.join("noise_sweep.csv"))?;
    write_metrics_csv(&mut file, &rows)?;
    Ok(rows)
}

/// Sweeps one design axis and writes a metrics row per setting.
pub fn cmd_ablate(
    scene: &Path,
    psfs: &Path,
    filters: &Path,
    axis: AblationAxis,
    config: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<Vec<MetricsRow>> {
    ensure_dir(out)?;
    let scene_cube = load_cube(scene)?;
    let system = load_system(psfs, filters, Encoding::Amplitude)?;
    let base = match config {
        Some(path) => load_solver_config(path)?,
        None => SolverConfig::default(),
    };

    let mut rows = Vec::new();
    let mut push = |method: String, recon: &HsiCube| -> Result<()> {
        rows.push(MetricsRow::evaluate(
            "scene",
            &method,
            &scene_cube,
            recon,
            DEFAULT_PEAK,
        )?);
        Ok(())
    };

    match axis {
        AblationAxis::Conversion => {
            for strategy in [
                ConversionStrategy::RealPart,
                ConversionStrategy::Amplitude,
                ConversionStrategy::ImagPart,
            ] {
                let mut config = base.clone();
                config.conversion = Some(strategy);
                let recon = reconstruct_in_memory(&scene_cube, &system, &config, 0.0, seed)?;
                let name = match strategy {
                    ConversionStrategy::RealPart => "conversion-real-part",
                    ConversionStrategy::Amplitude => "conversion-amplitude",
                    ConversionStrategy::ImagPart => "conversion-imag-part",
                };
                push(name.to_string(), &recon)?;
            }
        }
        AblationAxis::FsBranch => {
            for (name, beta) in [("fs-branch-off", 0.0), ("fs-branch-on", 1.0)] {
                let mut config = base.clone();
                config.denoiser = Some(DenoiserConfig {
                    kind: "sfat-toy".into(),
                    params: serde_json::json!({
                        "channels": 8,
                        "levels": 2,
                        "heads": [1, 2],
                        "beta": beta,
                        "seed": seed,
                    }),
                });
                let recon = reconstruct_in_memory(&scene_cube, &system, &config, 0.0, seed)?;
                push(name.to_string(), &recon)?;
            }
        }
        AblationAxis::Stages => {
            for stages in 2..=6 {
                let mut config = base.clone();
                config.stages = Some(stages);
                // Schedules must match the stage count; fall back to the
                // estimator for each setting.
                config.gamma = None;
                config.phi = None;
                config.chi = None;
                let recon = reconstruct_in_memory(&scene_cube, &system, &config, 0.0, seed)?;
                push(format!("stages-{stages}"), &recon)?;
            }
        }
        AblationAxis::Fusion => {
            for weight in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let mut config = base.clone();
                config.fusion_weight = Some(weight);
                let recon = reconstruct_in_memory(&scene_cube, &system, &config, 0.0, seed)?;
                push(format!("fusion-{weight}"), &recon)?;
            }
        }
    }

    let mut file = fs::File::create(out.join("ablate.csv"))?;
    write_metrics_csv(&mut file, &rows)?;
    Ok(rows)
}

/// Convenience used by examples and tests: simulate a mask-and-dispersion
/// measurement from a cube file.
pub fn simulate_cassi(scene: &Path, mask: &Path, dispersion: usize, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let scene = load_cube(scene)?;
    let mask_cube = load_cube(mask)?;
    let system = CassiSystem::new(
        mask_cube.height(),
        mask_cube.width(),
        mask_cube.data().to_vec(),
        dispersion,
    )?;
    let measurement = cassi_forward(&scene, &system)?;
    save_measurement(&measurement, &out.join("cassi_measurement.hsic"))?;
    Ok(())
}
