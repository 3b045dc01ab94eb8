//! PSNR / SSIM / spectral-angle evaluation and CSV reporting.
//!
//! Run with: `cargo run --example quality_metrics`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdi::cube::HsiCube;
use sdi::metrics::{psnr, sam, ssim, write_metrics_csv, MetricsRow};
use sdi::synth::synth_scene;

fn main() -> sdi::Result<()> {
    let reference = synth_scene(32, 32, 4, 9)?;

    let mut rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for sigma in [0.0, 0.02, 0.05] {
        let degraded = HsiCube::new(
            32,
            32,
            4,
            reference
                .data()
                .iter()
                .map(|v| v + sigma * rng.random_range(-1.0..1.0))
                .collect(),
        )?;
        println!(
            "sigma {sigma:4}: psnr {:7.2} dB  ssim {:.4}  sam {:.3} deg",
            psnr(&reference, &degraded, 1.0)?,
            ssim(&reference, &degraded)?,
            sam(&reference, &degraded)?
        );
        rows.push(MetricsRow::evaluate(
            "demo-scene",
            &format!("noise-{sigma}"),
            &reference,
            &degraded,
            1.0,
        )?);
    }

    let mut csv = Vec::new();
    write_metrics_csv(&mut csv, &rows)?;
    println!("\nCSV output:\n{}", String::from_utf8(csv).unwrap());
    Ok(())
}
