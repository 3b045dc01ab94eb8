//! The binary cube container and PGM previews: save, reload bit-exactly,
//! and export a band image.
//!
//! Run with: `cargo run --example file_io`

use sdi::io::{export_band_image, load_cube, save_cube, HEADER_LEN};
use sdi::synth::synth_scene;

fn main() -> sdi::Result<()> {
    let dir = std::env::temp_dir().join("sdi-file-io-example");
    std::fs::create_dir_all(&dir)?;

    let scene = synth_scene(24, 32, 5, 3)?;
    let cube_path = dir.join("scene.hsic");
    save_cube(&scene, &cube_path)?;

    let size = std::fs::metadata(&cube_path)?.len();
    println!(
        "wrote {} ({size} bytes = {HEADER_LEN} header + 4 * {})",
        cube_path.display(),
        scene.data().len()
    );

    let back = load_cube(&cube_path)?;
    let max_diff = scene
        .data()
        .iter()
        .zip(back.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    println!("round-trip max abs diff: {max_diff}");

    let preview = dir.join("scene_band2.pgm");
    export_band_image(&scene, 2, &preview)?;
    println!("wrote {}", preview.display());
    Ok(())
}
