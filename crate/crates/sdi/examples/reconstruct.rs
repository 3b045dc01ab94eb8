//! End-to-end reconstruction: simulate a measurement for each encoding
//! family and solve it, printing the per-stage data-fidelity energy and the
//! quality of the result against the ground-truth scene.
//!
//! Run with: `cargo run --example reconstruct`

use sdi::denoise::Denoiser;
use sdi::forward::{sdi_forward, Encoding, NoiseSpec};
use sdi::fourier::ConversionStrategy;
use sdi::metrics::{psnr, sam, ssim};
use sdi::solver::{initialize, run, SolverParams};
use sdi::synth::{default_kernel_size, synth_scene, synth_system};

fn main() -> sdi::Result<()> {
    let (h, w, bands, channels) = (32, 32, 4, 3);
    let stages = 5;
    let params = SolverParams::new(
        vec![1.0, 0.5, 0.25, 0.125, 0.0625],
        vec![0.0014; stages],
        vec![50.0, 80.0, 130.0, 200.0, 320.0],
        1.0,
        1e-8,
        ConversionStrategy::RealPart,
    )?;
    let denoiser = Denoiser::default_total_variation();

    for kind in [Encoding::Phase, Encoding::Amplitude, Encoding::Scatter] {
        let scene = synth_scene(h, w, bands, 10)?;
        let system = synth_system(kind, h, w, bands, channels, default_kernel_size(kind), 11)?;
        let measurement = sdi_forward(&scene, &system, &NoiseSpec::none())?;

        let start = initialize(&measurement, &system)?;
        let (recon, state) = run(&measurement, &system, &params, &denoiser)?;

        println!("{kind:?} encoding:");
        println!(
            "  energy trace: {}",
            state
                .energy
                .iter()
                .map(|e| format!("{e:.4}"))
                .collect::<Vec<_>>()
                .join(" -> ")
        );
        println!("  init    psnr {:6.2} dB", psnr(&scene, &start, 1.0)?);
        println!(
            "  recon   psnr {:6.2} dB   ssim {:.4}   sam {:.3} deg",
            psnr(&scene, &recon, 1.0)?,
            ssim(&scene, &recon)?,
            sam(&scene, &recon)?
        );
    }
    Ok(())
}
