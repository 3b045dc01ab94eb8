//! Bit-exact file containers.
//!
//! The cube container is a 32-byte header followed by a little-endian `f32`
//! payload in the cube's own band-outermost row-major order:
//!
//! ```text
//! magic "HSIC" | version u32 = 1 | height u32 | width u32 | bands u32 | reserved u32 x 3
//! ```
//!
//! Solver math runs in `f64`; files store `f32`, so saving quantizes once and
//! `save -> load` is the identity exactly when samples are `f32`-representable
//! (everything the synthetic generators emit is). Filter stacks reuse the same
//! container with `reserved[0]` holding the channel count and the band field
//! holding `channels * bands`; measurements store their channel axis as the
//! band axis.
//!
//! Band previews are 8-bit binary PGM (`P5`, maxval 255), min-max normalized
//! per band; a constant band maps to mid-gray 128.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::cube::{FilterStack, HsiCube, Measurement};
use crate::error::{Error, Result};

const MAGIC: [u8; 4] = *b"HSIC";
const VERSION: u32 = 1;
/// Header size in bytes; total file size is `32 + 4 * height * width * bands`.
pub const HEADER_LEN: usize = 32;

/// Refuse to allocate for headers declaring more samples than this.
const MAX_SAMPLES: u64 = 1 << 31;

fn write_container(
    path: &Path,
    height: u32,
    width: u32,
    bands: u32,
    reserved0: u32,
    samples: &[f64],
) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * samples.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&height.to_le_bytes());
    buf.extend_from_slice(&width.to_le_bytes());
    buf.extend_from_slice(&bands.to_le_bytes());
    buf.extend_from_slice(&reserved0.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for v in samples {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let mut file = File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Container {
    height: usize,
    width: usize,
    bands: usize,
    reserved0: u32,
    samples: Vec<f64>,
}

fn read_container(path: &Path) -> Result<Container> {
    let mut file = File::open(path)?;
    let mut header = [0u8; HEADER_LEN];
    file.read_exact(&mut header)?;

    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let word = |i: usize| u32::from_le_bytes(header[4 * i..4 * i + 4].try_into().unwrap());
    let version = word(1);
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let (height, width, bands) = (word(2) as u64, word(3) as u64, word(4) as u64);
    let reserved0 = word(5);

    let expected = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(bands))
        .filter(|n| *n <= MAX_SAMPLES)
        .ok_or(Error::DimensionOverflow {
            height,
            width,
            bands,
        })? as usize;

    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    if payload.len() != 4 * expected {
        return Err(Error::PayloadLength {
            expected,
            got: payload.len() / 4,
        });
    }
    let samples = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(Container {
        height: height as usize,
        width: width as usize,
        bands: bands as usize,
        reserved0,
        samples,
    })
}

/// Writes a cube; the payload is quantized to `f32`.
pub fn save_cube(cube: &HsiCube, path: &Path) -> Result<()> {
    write_container(
        path,
        cube.height() as u32,
        cube.width() as u32,
        cube.bands() as u32,
        0,
        cube.data(),
    )
}

/// Reads a cube, validating header, payload length, and finiteness.
pub fn load_cube(path: &Path) -> Result<HsiCube> {
    let c = read_container(path)?;
    HsiCube::new(c.height, c.width, c.bands, c.samples)
}

/// Writes a filter stack; `reserved[0]` records the channel count.
pub fn save_filters(filters: &FilterStack, path: &Path) -> Result<()> {
    write_container(
        path,
        filters.height() as u32,
        filters.width() as u32,
        (filters.channels() * filters.bands()) as u32,
        filters.channels() as u32,
        filters.data(),
    )
}

/// Reads a filter stack written by [`save_filters`].
pub fn load_filters(path: &Path) -> Result<FilterStack> {
    let c = read_container(path)?;
    let channels = if c.reserved0 == 0 {
        1
    } else {
        c.reserved0 as usize
    };
    if c.bands % channels != 0 {
        return Err(Error::DimensionMismatch(format!(
            "filter container declares {} planes not divisible by {} channels",
            c.bands, channels
        )));
    }
    FilterStack::new(c.height, c.width, c.bands / channels, channels, c.samples)
}

/// Writes a measurement with its channel axis stored as the band axis.
pub fn save_measurement(m: &Measurement, path: &Path) -> Result<()> {
    write_container(
        path,
        m.height() as u32,
        m.width() as u32,
        m.channels() as u32,
        0,
        m.data(),
    )
}

/// Reads a measurement written by [`save_measurement`].
pub fn load_measurement(path: &Path) -> Result<Measurement> {
    let c = read_container(path)?;
    Measurement::new(c.height, c.width, c.bands, c.samples)
}

/// Exports one band as an 8-bit grayscale PGM preview.
pub fn export_band_image(cube: &HsiCube, band: usize, path: &Path) -> Result<()> {
    if band >= cube.bands() {
        return Err(Error::BandOutOfRange {
            band,
            bands: cube.bands(),
        });
    }
    let plane = cube.band(band);
    let min = plane.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = plane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let pixels: Vec<u8> = if span <= 0.0 {
        vec![128; plane.len()]
    } else {
        plane
            .iter()
            .map(|v| ((v - min) / span * 255.0).round() as u8)
            .collect()
    };

    let mut buf = format!("P5\n{} {}\n255\n", cube.width(), cube.height()).into_bytes();
    buf.extend_from_slice(&pixels);
    let mut file = File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("sdi-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    /// Random cube whose samples are exactly f32-representable.
    fn random_f32_cube(h: usize, w: usize, bands: usize, seed: u64) -> HsiCube {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..h * w * bands)
            .map(|_| rng.random::<f32>() as f64)
            .collect();
        HsiCube::new(h, w, bands, data).unwrap()
    }

    #[test]
    fn round_trip_constant_cube() {
        let path = tmp("const.hsic");
        let cube = HsiCube::constant(2, 2, 1, 0.5).unwrap();
        save_cube(&cube, &path).unwrap();
        assert_eq!(load_cube(&path).unwrap(), cube);
    }

    #[test]
    fn round_trip_random_cube_is_bitwise() {
        let path = tmp("rand.hsic");
        let cube = random_f32_cube(4, 4, 2, 7);
        save_cube(&cube, &path).unwrap();
        let back = load_cube(&path).unwrap();
        let max_diff = cube
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert_eq!(max_diff, 0.0);
        assert_eq!(cube, back);
    }

    #[test]
    fn file_size_matches_format_arithmetic() {
        let path = tmp("sized.hsic");
        let cube = random_f32_cube(8, 8, 3, 1);
        save_cube(&cube, &path).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, (HEADER_LEN + 4 * 8 * 8 * 3) as u64);
    }

    #[test]
    fn unwritable_target_reports_io_error() {
        // The temp dir itself is not a valid file target.
        let cube = HsiCube::constant(2, 2, 1, 0.5).unwrap();
        let err = save_cube(&cube, &std::env::temp_dir()).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn wrong_payload_length_is_distinct() {
        let path = tmp("short.hsic");
        let cube = random_f32_cube(3, 3, 3, 2);
        save_cube(&cube, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        std::fs::write(&path, &bytes).unwrap();
        let err = load_cube(&path).unwrap_err();
        assert!(matches!(
            err,
            Error::PayloadLength {
                expected: 27,
                got: 26
            }
        ));
    }

    #[test]
    fn bad_magic_is_distinct() {
        let path = tmp("magic.hsic");
        let cube = random_f32_cube(2, 2, 1, 3);
        save_cube(&cube, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_cube(&path).unwrap_err(), Error::BadMagic(_)));
    }

    #[test]
    fn overflowing_dims_are_rejected() {
        let path = tmp("huge.hsic");
        let cube = random_f32_cube(2, 2, 1, 4);
        save_cube(&cube, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        bytes[12..16].copy_from_slice(&u32::MAX.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_cube(&path).unwrap_err(),
            Error::DimensionOverflow { .. }
        ));
    }

    #[test]
    fn non_finite_payload_is_rejected() {
        let path = tmp("nan.hsic");
        let cube = random_f32_cube(2, 2, 1, 5);
        save_cube(&cube, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_cube(&path).unwrap_err(), Error::NonFinite(0)));
    }

    #[test]
    fn filters_round_trip_with_channels() {
        let path = tmp("filters.hsic");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<f64> = (0..3 * 3 * 4 * 2)
            .map(|_| rng.random::<f32>() as f64)
            .collect();
        let filters = FilterStack::new(3, 3, 4, 2, data).unwrap();
        save_filters(&filters, &path).unwrap();
        assert_eq!(load_filters(&path).unwrap(), filters);
    }

    #[test]
    fn constant_band_preview_is_mid_gray() {
        let path = tmp("const.pgm");
        let cube = HsiCube::constant(3, 5, 1, 0.7).unwrap();
        export_band_image(&cube, 0, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P5\n5 3\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert!(bytes[header.len()..].iter().all(|p| *p == 128));
    }

    #[test]
    fn preview_normalization_endpoints() {
        let path = tmp("endpoints.pgm");
        let cube = HsiCube::new(1, 3, 1, vec![0.0, 0.25, 1.0]).unwrap();
        export_band_image(&cube, 0, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let px = &bytes[bytes.len() - 3..];
        assert_eq!(px[0], 0);
        assert_eq!(px[2], 255);
    }

    #[test]
    fn ramp_preview_is_monotone() {
        let path = tmp("ramp.pgm");
        let n = 16;
        let data: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let cube = HsiCube::new(1, n, 1, data).unwrap();
        export_band_image(&cube, 0, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let px = &bytes[bytes.len() - n..];
        assert!(px.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn band_out_of_range_is_rejected() {
        let cube = HsiCube::constant(2, 2, 2, 0.1).unwrap();
        let err = export_band_image(&cube, 2, &tmp("oob.pgm")).unwrap_err();
        assert!(matches!(err, Error::BandOutOfRange { band: 2, bands: 2 }));
    }
}
