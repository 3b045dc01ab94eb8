//! One-shot frequency-domain deconvolution: because the per-band convolution
//! operator is diagonalized by the DFT, dividing out the kernel spectrum
//! (with a small Tikhonov guard against its zeros) undoes the blur directly.
//!
//! This is the single-operator primitive the full solver builds on; the
//! solver's `eps` knob is this guard, relative to the peak kernel power.
//!
//! Run with: `cargo run --example frequency_deconvolution`

use sdi::forward::{convolve_psf, Encoding};
use sdi::fourier::{
    fft2_cube, freq_least_squares, ifft2_cube_real, psf_to_otf, ConversionStrategy,
};
use sdi::metrics::psnr;
use sdi::solver::DEFAULT_EPS;
use sdi::synth::{default_kernel_size, synth_psfs, synth_scene};

fn main() -> sdi::Result<()> {
    let (h, w, bands) = (32, 32, 4);
    let scene = synth_scene(h, w, bands, 5)?;

    for kind in [Encoding::Phase, Encoding::Amplitude, Encoding::Scatter] {
        let psfs = synth_psfs(kind, default_kernel_size(kind), bands, 6)?;
        let blurred = convolve_psf(&scene, &psfs)?;

        let otf = psf_to_otf(&psfs, h, w)?;
        let eps = DEFAULT_EPS * otf.max_power();
        let restored = ifft2_cube_real(
            &freq_least_squares(&otf, &fft2_cube(&blurred), eps)?,
            ConversionStrategy::RealPart,
        );

        println!(
            "{kind:?}: blurred {:6.2} dB -> deconvolved {:6.2} dB (eps {eps:.2e})",
            psnr(&scene, &blurred, 1.0)?,
            psnr(&scene, &restored, 1.0)?,
        );
    }
    Ok(())
}
