//! Quantitative evaluation: peak signal-to-noise ratio, structural
//! similarity, and spectral angle.
//!
//! Conventions, fixed here and used everywhere in the toolkit:
//! - PSNR peak defaults to 1.0 (configurable per call); MSE of zero maps to
//!   the `+inf` sentinel.
//! - SSIM uses an 11x11 Gaussian window with sigma 1.5, constants
//!   `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2` with `L = 1`, evaluated on fully
//!   interior windows, per band, then averaged over bands.
//! - The spectral angle is averaged over pixels where both spectra have norm
//!   above `1e-12`, reported in degrees.

use std::io::Write;

use crate::cube::HsiCube;
use crate::error::{Error, Result};

/// Default PSNR peak.
pub const DEFAULT_PEAK: f64 = 1.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_same_shape(reference: &HsiCube, test: &HsiCube) -> Result<()> {
    if !reference.same_shape(test) {
        return Err(Error::DimensionMismatch(
            "metric operands differ in shape".into(),
        ));
    }
    Ok(())
}

/// `10 log10(peak^2 / MSE)` over all voxels; `+inf` when the cubes agree
/// exactly.
pub fn psnr(reference: &HsiCube, test: &HsiCube, peak: f64) -> Result<f64> {
    check_same_shape(reference, test)?;
    if peak.is_nan() || peak <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "peak must be > 0, got {peak}"
        )));
    }
    let mse = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut window = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for r in 0..SSIM_WINDOW {
        for c in 0..SSIM_WINDOW {
            let dr = r as f64 - half;
            let dc = c as f64 - half;
            window.push((-(dr * dr + dc * dc) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp());
        }
    }
    let sum: f64 = window.iter().sum();
    window.iter_mut().for_each(|v| *v /= sum);
    window
}

/// Mean structural similarity over bands (unit dynamic range).
pub fn ssim(reference: &HsiCube, test: &HsiCube) -> Result<f64> {
    check_same_shape(reference, test)?;
    let (h, w) = (reference.height(), reference.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::DimensionMismatch(format!(
            "image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let window = gaussian_window();
    let c1 = (SSIM_K1 * 1.0_f64).powi(2);
    let c2 = (SSIM_K2 * 1.0_f64).powi(2);

    let mut band_mean = 0.0;
    for b in 0..reference.bands() {
        let x = reference.band(b);
        let y = test.band(b);
        let mut acc = 0.0;
        let mut count = 0usize;
        for top in 0..=(h - SSIM_WINDOW) {
            for left in 0..=(w - SSIM_WINDOW) {
                let (mut mx, mut my) = (0.0, 0.0);
                for wr in 0..SSIM_WINDOW {
                    for wc in 0..SSIM_WINDOW {
                        let g = window[wr * SSIM_WINDOW + wc];
                        let i = (top + wr) * w + left + wc;
                        mx += g * x[i];
                        my += g * y[i];
                    }
                }
                let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
                for wr in 0..SSIM_WINDOW {
                    for wc in 0..SSIM_WINDOW {
                        let g = window[wr * SSIM_WINDOW + wc];
                        let i = (top + wr) * w + left + wc;
                        vx += g * (x[i] - mx) * (x[i] - mx);
                        vy += g * (y[i] - my) * (y[i] - my);
                        cov += g * (x[i] - mx) * (y[i] - my);
                    }
                }
                let score = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                acc += score;
                count += 1;
            }
        }
        band_mean += acc / count as f64;
    }
    Ok(band_mean / reference.bands() as f64)
}

/// Mean per-pixel spectral angle in degrees, skipping pixels where either
/// spectrum is numerically zero. Scale-invariant.
pub fn sam(reference: &HsiCube, test: &HsiCube) -> Result<f64> {
    check_same_shape(reference, test)?;
    let (h, w, bands) = (reference.height(), reference.width(), reference.bands());
    let n = h * w;
    let mut total = 0.0;
    let mut counted = 0usize;
    for p in 0..n {
        let (mut dot, mut nr, mut nt) = (0.0, 0.0, 0.0);
        for b in 0..bands {
            let r = reference.data()[b * n + p];
            let t = test.data()[b * n + p];
            dot += r * t;
            nr += r * r;
            nt += t * t;
        }
        let (nr, nt) = (nr.sqrt(), nt.sqrt());
        if nr > 1e-12 && nt > 1e-12 {
            let cosine = (dot / (nr * nt)).clamp(-1.0, 1.0);
            total += cosine.acos();
            counted += 1;
        }
    }
    if counted == 0 {
        return Ok(0.0);
    }
    Ok(total / counted as f64 * 180.0 / std::f64::consts::PI)
}

/// One evaluation record in the reporting CSV.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub scene: String,
    pub method: String,
    pub psnr: f64,
    pub ssim: f64,
    pub sam: f64,
}

impl MetricsRow {
    pub fn evaluate(
        scene: &str,
        method: &str,
        reference: &HsiCube,
        test: &HsiCube,
        peak: f64,
    ) -> Result<Self> {
        Ok(Self {
            scene: scene.to_string(),
            method: method.to_string(),
            psnr: psnr(reference, test, peak)?,
            ssim: ssim(reference, test)?,
            sam: sam(reference, test)?,
        })
    }
}

/// Writes `scene, method, psnr, ssim, sam` rows with a header line.
pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[MetricsRow]) -> Result<()> {
    writeln!(out, "scene,method,psnr,ssim,sam")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6}",
            row.scene, row.method, row.psnr, row.ssim, row.sam
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cube(h: usize, w: usize, bands: usize, seed: u64) -> HsiCube {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..h * w * bands)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        HsiCube::new(h, w, bands, data).unwrap()
    }

    #[test]
    fn identical_cubes_hit_the_infinity_sentinel() {
        let cube = random_cube(12, 12, 2, 1);
        assert_eq!(psnr(&cube, &cube, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn constant_offset_gives_twenty_db() {
        let a = HsiCube::constant(8, 8, 1, 1.0).unwrap();
        let b = HsiCube::constant(8, 8, 1, 0.9).unwrap();
        let value = psnr(&a, &b, 1.0).unwrap();
        assert!((value - 20.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_matches_independent_mse_computation() {
        let a = random_cube(6, 7, 3, 2);
        let b = random_cube(6, 7, 3, 3);
        let fast = psnr(&a, &b, 1.0).unwrap();
        // Scalar loop, written independently of the implementation above.
        let mut acc = 0.0;
        let mut count = 0usize;
        for band in 0..3 {
            for r in 0..6 {
                for c in 0..7 {
                    let d = a.get(band, r, c) - b.get(band, r, c);
                    acc += d * d;
                    count += 1;
                }
            }
        }
        let reference = -10.0 * (acc / count as f64).log10();
        assert!((fast - reference).abs() < 1e-9);
    }

    #[test]
    fn ssim_of_identical_cubes_is_one() {
        let cube = random_cube(16, 16, 2, 4);
        assert!((ssim(&cube, &cube).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_of_anticorrelated_zero_mean_images_is_nonpositive() {
        // Alternating stripes: zero mean under every window, so the
        // structure term's anticorrelation dominates.
        let data: Vec<f64> = (0..16 * 16)
            .map(|i| if (i % 16) % 2 == 0 { 0.3 } else { -0.3 })
            .collect();
        let a = HsiCube::new(16, 16, 1, data.clone()).unwrap();
        let b = HsiCube::new(16, 16, 1, data.iter().map(|v| -v).collect()).unwrap();
        assert!(ssim(&a, &b).unwrap() <= 0.0);
    }

    #[test]
    fn ssim_matches_scalar_double_loop_oracle() {
        let a = random_cube(14, 13, 1, 6);
        let b = random_cube(14, 13, 1, 7);
        let fast = ssim(&a, &b).unwrap();

        // Independent evaluation of the same definition.
        let (h, w) = (14, 13);
        let mut window = vec![0.0; 121];
        for r in 0..11 {
            for c in 0..11 {
                let dr = r as f64 - 5.0;
                let dc = c as f64 - 5.0;
                window[r * 11 + c] = (-(dr * dr + dc * dc) / 4.5).exp();
            }
        }
        let wsum: f64 = window.iter().sum();
        let (c1, c2) = (0.0001, 0.0009);
        let mut acc = 0.0;
        let mut count = 0;
        for top in 0..=(h - 11) {
            for left in 0..=(w - 11) {
                let mut stats = [0.0_f64; 5];
                for wr in 0..11 {
                    for wc in 0..11 {
                        let g = window[wr * 11 + wc] / wsum;
                        let xv = a.get(0, top + wr, left + wc);
                        let yv = b.get(0, top + wr, left + wc);
                        stats[0] += g * xv;
                        stats[1] += g * yv;
                        stats[2] += g * xv * xv;
                        stats[3] += g * yv * yv;
                        stats[4] += g * xv * yv;
                    }
                }
                let (mx, my) = (stats[0], stats[1]);
                let vx = stats[2] - mx * mx;
                let vy = stats[3] - my * my;
                let cov = stats[4] - mx * my;
                acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        let reference = acc / count as f64;
        assert!(
            (fast - reference).abs() < 1e-6,
            "fast {fast} vs oracle {reference}"
        );
    }

    #[test]
    fn ssim_rejects_small_images() {
        let cube = random_cube(8, 8, 1, 8);
        assert!(matches!(
            ssim(&cube, &cube).unwrap_err(),
            Error::DimensionMismatch(_)
        ));
    }

    #[test]
    fn sam_of_identical_cubes_is_zero() {
        // acos near 1 resolves angles only to ~1e-8 rad.
        let cube = random_cube(6, 6, 4, 9);
        assert!(sam(&cube, &cube).unwrap().abs() < 1e-5);
    }

    #[test]
    fn sam_is_scale_invariant() {
        let cube = random_cube(6, 6, 4, 10);
        let doubled = HsiCube::new(6, 6, 4, cube.data().iter().map(|v| 2.0 * v).collect()).unwrap();
        assert!(sam(&cube, &doubled).unwrap().abs() < 1e-5);
    }

    #[test]
    fn orthogonal_two_band_spectra_measure_ninety_degrees() {
        let (h, w) = (4, 4);
        let mut a = vec![0.0; h * w * 2];
        let mut b = vec![0.0; h * w * 2];
        a[..h * w].iter_mut().for_each(|v| *v = 1.0);
        b[h * w..].iter_mut().for_each(|v| *v = 1.0);
        let a = HsiCube::new(h, w, 2, a).unwrap();
        let b = HsiCube::new(h, w, 2, b).unwrap();
        assert!((sam(&a, &b).unwrap() - 90.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_degrades_monotonically_with_noise_in_expectation() {
        use rand_distr::{Distribution, Normal};
        let reference = random_cube(16, 16, 2, 11);
        let mut means = Vec::new();
        for sigma in [0.01, 0.05, 0.1] {
            let mut acc = 0.0;
            for seed in 0..8u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                let normal = Normal::new(0.0, sigma).unwrap();
                let noisy = HsiCube::new(
                    16,
                    16,
                    2,
                    reference
                        .data()
                        .iter()
                        .map(|v| v + normal.sample(&mut rng))
                        .collect(),
                )
                .unwrap();
                acc += psnr(&reference, &noisy, 1.0).unwrap();
            }
            means.push(acc / 8.0);
        }
        assert!(means[0] > means[1] && means[1] > means[2]);
    }

    #[test]
    fn csv_rows_have_the_documented_columns() {
        let rows = vec![MetricsRow {
            scene: "s1".into(),
            method: "solver".into(),
            psnr: 30.0,
            ssim: 0.9,
            sam: 5.0,
        }];
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scene,method,psnr,ssim,sam\n"));
        assert!(text.contains("s1,solver,30.000000,0.900000,5.000000"));
    }
}
