//! Compares the three ways of scalarizing the complex spatial result of the
//! frequency-domain update: real part, amplitude, imaginary part.
//!
//! With the conjugate-form update the spectra stay Hermitian, so the
//! imaginary channel carries (numerically) nothing and amplitude coincides
//! with the real part wherever the iterates stay positive.
//!
//! Run with: `cargo run --example conversion_strategies`

use sdi::denoise::Denoiser;
use sdi::forward::{sdi_forward, Encoding, NoiseSpec};
use sdi::fourier::ConversionStrategy;
use sdi::metrics::psnr;
use sdi::solver::{run, SolverParams};
use sdi::synth::{default_kernel_size, synth_scene, synth_system};

fn main() -> sdi::Result<()> {
    let (h, w, bands) = (32, 32, 4);
    let scene = synth_scene(h, w, bands, 10)?;
    let system = synth_system(
        Encoding::Amplitude,
        h,
        w,
        bands,
        3,
        default_kernel_size(Encoding::Amplitude),
        11,
    )?;
    let measurement = sdi_forward(&scene, &system, &NoiseSpec::none())?;
    let denoiser = Denoiser::default_total_variation();

    println!("amplitude-encoded system, noiseless, 5 stages:");
    for (strategy, label) in [
        (ConversionStrategy::RealPart, "real part"),
        (ConversionStrategy::Amplitude, "amplitude"),
        (ConversionStrategy::ImagPart, "imaginary"),
    ] {
        let params = SolverParams::new(
            vec![1.0, 0.5, 0.25, 0.125, 0.0625],
            vec![0.0014; 5],
            vec![50.0, 80.0, 130.0, 200.0, 320.0],
            1.0,
            1e-8,
            strategy,
        )?;
        let (recon, _) = run(&measurement, &system, &params, &denoiser)?;
        println!("  {label:10} psnr {:6.2} dB", psnr(&scene, &recon, 1.0)?);
    }
    Ok(())
}
