//! Builds the three PSF-encoded system families plus the two comparison
//! architectures (mask-and-dispersion, per-pixel response) on one small
//! scene, and prints what each measurement looks like.
//!
//! Run with: `cargo run --example forward_models`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdi::cube::FilterStack;
use sdi::forward::{
    ape_forward, cassi_forward, sdi_forward, ApeSystem, CassiSystem, Encoding, NoiseSpec,
};
use sdi::synth::{default_kernel_size, synth_scene, synth_system};

fn stats(label: &str, data: &[f64]) {
    let min = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    println!("  {label:28} min {min:7.4}  mean {mean:7.4}  max {max:7.4}");
}

fn main() -> sdi::Result<()> {
    let (h, w, bands) = (32, 32, 6);
    let scene = synth_scene(h, w, bands, 1)?;
    println!("scene: {h}x{w}x{bands}");
    stats("scene", scene.data());

    for kind in [Encoding::Phase, Encoding::Amplitude, Encoding::Scatter] {
        let system = synth_system(kind, h, w, bands, 3, default_kernel_size(kind), 2)?;
        let clean = sdi_forward(&scene, &system, &NoiseSpec::none())?;
        let noisy = sdi_forward(&scene, &system, &NoiseSpec::gaussian(0.01, 7)?)?;
        println!("{kind:?} encoding (kernel {}):", default_kernel_size(kind));
        stats("measurement", clean.data());
        let noise_norm: f64 = clean
            .data()
            .iter()
            .zip(noisy.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        println!("  injected noise norm {noise_norm:.4}");
    }

    // Mask-and-dispersion comparison system.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mask: Vec<f64> = (0..h * w)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
        .collect();
    let cassi = CassiSystem::new(h, w, mask, 1)?;
    let m = cassi_forward(&scene, &cassi)?;
    println!(
        "mask-and-dispersion: output {}x{} (width grows with dispersion)",
        m.height(),
        m.width()
    );
    stats("measurement", m.data());

    // Per-pixel response comparison system.
    let response: Vec<f64> = (0..h * w * bands)
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    let ape = ApeSystem::new(FilterStack::new(h, w, bands, 1, response)?)?;
    let m = ape_forward(&scene, &ape)?;
    println!("per-pixel response: output {}x{}", m.height(), m.width());
    stats("measurement", m.data());

    Ok(())
}
