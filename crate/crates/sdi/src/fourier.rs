//! Per-band 2-D FFT services and the frequency-domain primitives built on the
//! fact that a circular convolution operator is diagonalized by the DFT.
//!
//! Normalization convention: the forward transform is unnormalized and the
//! inverse carries the full `1/(height*width)` factor, so the spectrum of a
//! unit-mass kernel has DC value exactly 1.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::cube::{HsiCube, OtfStack, PsfStack};
use crate::error::{Error, Result};

/// Complex-valued cube holding per-band spectra (or complex spatial planes).
#[derive(Debug, Clone, PartialEq)]
pub struct FreqCube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<Complex64>,
}

impl FreqCube {
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != height * width * bands {
            return Err(Error::LengthMismatch {
                expected: height * width * bands,
                got: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            bands,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn band(&self, band: usize) -> &[Complex64] {
        let n = self.height * self.width;
        &self.data[band * n..(band + 1) * n]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width && self.bands == other.bands
    }
}

/// How a complex spatial plane is scalarized back to real samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConversionStrategy {
    /// Keep the real part (the default; lossless for Hermitian spectra).
    #[default]
    RealPart,
    /// Keep the complex magnitude.
    Amplitude,
    /// Keep the imaginary part.
    ImagPart,
}

/// Cached row/column FFT plans for one plane shape.
pub struct Fft2d {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn transform(&self, plane: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(plane.len(), self.height * self.width);
        let (row_fft, col_fft) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        for row in plane.chunks_exact_mut(self.width) {
            row_fft.process(row);
        }
        let mut column = vec![Complex64::default(); self.height];
        for c in 0..self.width {
            for r in 0..self.height {
                column[r] = plane[r * self.width + c];
            }
            col_fft.process(&mut column);
            for r in 0..self.height {
                plane[r * self.width + c] = column[r];
            }
        }
        if inverse {
            let scale = 1.0 / (self.height * self.width) as f64;
            for v in plane.iter_mut() {
                *v *= scale;
            }
        }
    }

    /// Unnormalized forward 2-D DFT, in place.
    pub fn forward(&self, plane: &mut [Complex64]) {
        self.transform(plane, false);
    }

    /// Inverse 2-D DFT including the `1/(height*width)` factor, in place.
    pub fn inverse(&self, plane: &mut [Complex64]) {
        self.transform(plane, true);
    }
}

/// Per-band unnormalized forward DFT of a real cube.
pub fn fft2_cube(cube: &HsiCube) -> FreqCube {
    let fft = Fft2d::new(cube.height(), cube.width());
    let n = cube.plane_len();
    let mut data = vec![Complex64::default(); n * cube.bands()];
    for b in 0..cube.bands() {
        let plane = &mut data[b * n..(b + 1) * n];
        for (dst, src) in plane.iter_mut().zip(cube.band(b)) {
            *dst = Complex64::new(*src, 0.0);
        }
        fft.forward(plane);
    }
    FreqCube {
        height: cube.height(),
        width: cube.width(),
        bands: cube.bands(),
        data,
    }
}

/// Per-band inverse DFT, keeping the complex spatial planes.
pub fn ifft2_cube_complex(freq: &FreqCube) -> FreqCube {
    let fft = Fft2d::new(freq.height, freq.width);
    let n = freq.height * freq.width;
    let mut data = freq.data.clone();
    for plane in data.chunks_exact_mut(n) {
        fft.inverse(plane);
    }
    FreqCube {
        height: freq.height,
        width: freq.width,
        bands: freq.bands,
        data,
    }
}

/// Per-band inverse DFT followed by the chosen scalarization.
pub fn ifft2_cube_real(freq: &FreqCube, strategy: ConversionStrategy) -> HsiCube {
    let spatial = ifft2_cube_complex(freq);
    let data = spatial
        .data
        .iter()
        .map(|z| match strategy {
            ConversionStrategy::RealPart => z.re,
            ConversionStrategy::Amplitude => z.norm(),
            ConversionStrategy::ImagPart => z.im,
        })
        .collect();
    HsiCube::from_raw(freq.height, freq.width, freq.bands, data)
}

/// Largest imaginary magnitude left after inverse-transforming, a measure of
/// how far a spectrum is from Hermitian symmetry.
pub fn imag_residue(freq: &FreqCube) -> f64 {
    ifft2_cube_complex(freq)
        .data
        .iter()
        .map(|z| z.im.abs())
        .fold(0.0, f64::max)
}

/// Largest deviation from Hermitian symmetry over each `height*width` plane
/// in `data` (`S[u][v]` vs `conj(S[-u][-v])`).
pub fn hermitian_residue(height: usize, width: usize, data: &[Complex64]) -> f64 {
    let n = height * width;
    let mut worst = 0.0_f64;
    for plane in data.chunks_exact(n) {
        for u in 0..height {
            for v in 0..width {
                let mirror = plane[((height - u) % height) * width + (width - v) % width];
                let diff = plane[u * width + v] - mirror.conj();
                worst = worst.max(diff.norm());
            }
        }
    }
    worst
}

/// Builds the frequency-domain diagonal of each band's convolution operator.
///
/// The kernel is embedded in the `height x width` grid with its center cell
/// `(kh/2, kw/2)` circularly shifted to the origin, then transformed, so a
/// delta kernel yields an all-ones spectrum and pointwise multiplication in
/// frequency reproduces the spatial circular convolution exactly.
pub fn psf_to_otf(psfs: &PsfStack, height: usize, width: usize) -> Result<OtfStack> {
    if psfs.kernel_height() > height || psfs.kernel_width() > width {
        return Err(Error::DimensionMismatch(format!(
            "kernel {}x{} larger than grid {}x{}",
            psfs.kernel_height(),
            psfs.kernel_width(),
            height,
            width
        )));
    }
    let fft = Fft2d::new(height, width);
    let n = height * width;
    let center_r = psfs.kernel_height() / 2;
    let center_c = psfs.kernel_width() / 2;
    let mut data = vec![Complex64::default(); n * psfs.bands()];
    for b in 0..psfs.bands() {
        let plane = &mut data[b * n..(b + 1) * n];
        for i in 0..psfs.kernel_height() {
            for j in 0..psfs.kernel_width() {
                let r = (i + height - center_r) % height;
                let c = (j + width - center_c) % width;
                plane[r * width + c] = Complex64::new(psfs.get(b, i, j), 0.0);
            }
        }
        fft.forward(plane);
    }
    OtfStack::new(height, width, psfs.bands(), data)
}

/// Tikhonov-stabilized frequency-domain least squares: recovers the spectrum
/// `x` from `j = otf .* x` as `conj(otf) .* j / (|otf|^2 + eps)` per element.
///
/// A strictly positive `eps` guards zeros of the OTF; bins where the OTF
/// vanishes come back as 0 rather than NaN.
pub fn freq_least_squares(otf: &OtfStack, jf: &FreqCube, eps: f64) -> Result<FreqCube> {
    if otf.height() != jf.height || otf.width() != jf.width || otf.bands() != jf.bands {
        return Err(Error::DimensionMismatch(
            "OTF and spectrum dimensions differ".into(),
        ));
    }
    if eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps must be > 0, got {eps}"
        )));
    }
    let data = otf
        .data()
        .iter()
        .zip(&jf.data)
        .map(|(psi, j)| psi.conj() * j / (psi.norm_sqr() + eps))
        .collect();
    Ok(FreqCube {
        height: jf.height,
        width: jf.width,
        bands: jf.bands,
        data,
    })
}

/// Default regularizer for [`freq_least_squares`]: `1e-8` relative to the
/// peak OTF power.
pub fn default_otf_eps(otf: &OtfStack) -> f64 {
    let peak = otf.max_power();
    if peak > 0.0 {
        1e-8 * peak
    } else {
        1e-8
    }
}

/// Structure report for the normal-equation coefficient matrix of a CSI
/// system, materialized densely on a tiny instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HessianReport {
    /// Condition number of the dense Gram matrix.
    pub condition_number: f64,
    /// `||offdiag||_F / ||.||_F` of the Gram matrix in the spatial domain.
    pub off_diag_ratio_spatial: f64,
    /// Same ratio for the convolution block conjugated into the frequency
    /// domain; only defined for PSF-encoded systems.
    pub off_diag_ratio_freq: Option<f64>,
    pub dims: ReportDims,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportDims {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub channels: usize,
}

fn off_diag_ratio_real(m: &DMatrix<f64>) -> f64 {
    let mut off = 0.0;
    let mut total = 0.0;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let e = m[(r, c)] * m[(r, c)];
            total += e;
            if r != c {
                off += e;
            }
        }
    }
    if total == 0.0 {
        return 0.0;
    }
    (off / total).sqrt()
}

/// Dense 2-D DFT matrix on an `height x width` grid, acting on row-major
/// flattened planes.
fn dft_matrix(height: usize, width: usize) -> DMatrix<Complex64> {
    let n = height * width;
    DMatrix::from_fn(n, n, |out, inp| {
        let (u, v) = (out / width, out % width);
        let (r, c) = (inp / width, inp % width);
        let phase = -2.0
            * std::f64::consts::PI
            * (u as f64 * r as f64 / height as f64 + v as f64 * c as f64 / width as f64);
        Complex64::from_polar(1.0, phase)
    })
}

/// Materializes the system's Gram matrix and reports how diagonal it is, in
/// space and (for PSF-encoded systems) after conjugation by the DFT.
pub fn hessian_report(system: &crate::forward::CsiSystem) -> Result<HessianReport> {
    use crate::forward::CsiSystem;

    let (phi, dims) = crate::oracle::materialize_system(system)?;
    let gram = phi.matrix().transpose() * phi.matrix();
    let condition_number = crate::oracle::condition_number_matrix(&gram);
    let off_diag_ratio_spatial = off_diag_ratio_real(&gram);

    let off_diag_ratio_freq = match system {
        CsiSystem::Sdi(sdi) => {
            let phi1 = crate::oracle::materialize_phi1(
                sdi.psfs(),
                sdi.filters().height(),
                sdi.filters().width(),
            )?;
            let conv_gram = phi1.matrix().transpose() * phi1.matrix();
            let (h, w) = (sdi.filters().height(), sdi.filters().width());
            let n = h * w;
            let dft = dft_matrix(h, w);
            let dft_h = dft.adjoint();
            let scale = Complex64::new(1.0 / n as f64, 0.0);
            // The convolution Gram never mixes bands, so conjugate each
            // band's block separately.
            let mut off = 0.0;
            let mut total = 0.0;
            for b in 0..sdi.psfs().bands() {
                let block = conv_gram
                    .view((b * n, b * n), (n, n))
                    .map(|v| Complex64::new(v, 0.0));
                let freq_block = (&dft * block * &dft_h) * scale;
                for r in 0..n {
                    for c in 0..n {
                        let e = freq_block[(r, c)].norm_sqr();
                        total += e;
                        if r != c {
                            off += e;
                        }
                    }
                }
            }
            Some(if total == 0.0 {
                0.0
            } else {
                (off / total).sqrt()
            })
        }
        _ => None,
    };

    Ok(HessianReport {
        condition_number,
        off_diag_ratio_spatial,
        off_diag_ratio_freq,
        dims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cube(h: usize, w: usize, bands: usize, seed: u64) -> HsiCube {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..h * w * bands)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        HsiCube::new(h, w, bands, data).unwrap()
    }

    /// O(n^2) reference DFT, independent of the FFT path.
    fn naive_dft(plane: &[f64], h: usize, w: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); h * w];
        for u in 0..h {
            for v in 0..w {
                let mut acc = Complex64::default();
                for r in 0..h {
                    for c in 0..w {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * (u as f64 * r as f64 / h as f64 + v as f64 * c as f64 / w as f64);
                        acc += plane[r * w + c] * Complex64::from_polar(1.0, phase);
                    }
                }
                out[u * w + v] = acc;
            }
        }
        out
    }

    #[test]
    fn constant_band_transforms_to_dc_bin() {
        let cube = HsiCube::constant(4, 4, 1, 0.3).unwrap();
        let freq = fft2_cube(&cube);
        assert!((freq.data()[0].re - 0.3 * 16.0).abs() < 1e-12);
        assert!(freq.data()[1..].iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn delta_transforms_to_all_ones() {
        let mut data = vec![0.0; 16];
        data[0] = 1.0;
        let cube = HsiCube::new(4, 4, 1, data).unwrap();
        let freq = fft2_cube(&cube);
        assert!(freq
            .data()
            .iter()
            .all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn fft_matches_naive_dft() {
        let cube = random_cube(8, 8, 2, 11);
        let freq = fft2_cube(&cube);
        for b in 0..2 {
            let reference = naive_dft(cube.band(b), 8, 8);
            let norm = reference.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let diff = freq
                .band(b)
                .iter()
                .zip(&reference)
                .map(|(a, e)| (a - e).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(diff / norm < 1e-9, "band {b}: rel diff {}", diff / norm);
        }
    }

    #[test]
    fn forward_inverse_round_trip() {
        let cube = random_cube(6, 5, 3, 3);
        let back = ifft2_cube_real(&fft2_cube(&cube), ConversionStrategy::RealPart);
        let err = cube
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(err / cube.norm() < 1e-10);
    }

    #[test]
    fn hermitian_input_has_negligible_imag_residue() {
        let cube = random_cube(8, 6, 1, 5);
        let freq = fft2_cube(&cube);
        assert!(hermitian_residue(8, 6, freq.data()) < 1e-9);
        assert!(imag_residue(&freq) < 1e-10);
        // Real part and amplitude agree up to sign on a Hermitian spectrum.
        let re = ifft2_cube_real(&freq, ConversionStrategy::RealPart);
        let amp = ifft2_cube_real(&freq, ConversionStrategy::Amplitude);
        for (r, a) in re.data().iter().zip(amp.data()) {
            assert!((r.abs() - a).abs() < 1e-10);
        }
    }

    #[test]
    fn broken_symmetry_is_detected() {
        let cube = random_cube(8, 8, 1, 6);
        let mut freq = fft2_cube(&cube);
        // Perturb a single non-self-conjugate bin.
        freq.data_mut()[8 + 2] += Complex64::new(0.5, 0.8);
        let residue = imag_residue(&freq);
        assert!(residue > 1e-4, "residue {residue} should be visible");
    }

    #[test]
    fn delta_kernel_gives_unit_otf() {
        let psf = PsfStack::delta(3, 3, 2).unwrap();
        let otf = psf_to_otf(&psf, 8, 8).unwrap();
        assert!(otf
            .data()
            .iter()
            .all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn normalized_kernel_has_unit_dc() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..1.0)).collect();
        let psf = PsfStack::new(3, 3, 1, data).unwrap().normalized();
        let otf = psf_to_otf(&psf, 8, 8).unwrap();
        assert!((otf.data()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn otf_from_real_kernel_is_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<f64> = (0..9 * 2).map(|_| rng.random_range(0.0..1.0)).collect();
        let psf = PsfStack::new(3, 3, 2, data).unwrap();
        let otf = psf_to_otf(&psf, 8, 7).unwrap();
        let scale = otf.max_power().sqrt();
        assert!(hermitian_residue(8, 7, otf.data()) / scale < 1e-10);
    }

    #[test]
    fn oversized_kernel_is_rejected() {
        let psf = PsfStack::delta(9, 9, 1).unwrap();
        assert!(matches!(
            psf_to_otf(&psf, 8, 8).unwrap_err(),
            Error::DimensionMismatch(_)
        ));
    }

    #[test]
    fn freq_least_squares_identity_otf() {
        let cube = random_cube(4, 4, 1, 9);
        let jf = fft2_cube(&cube);
        let psf = PsfStack::delta(3, 3, 1).unwrap();
        let otf = psf_to_otf(&psf, 4, 4).unwrap();
        let sol = freq_least_squares(&otf, &jf, 1e-14).unwrap();
        for (s, j) in sol.data().iter().zip(jf.data()) {
            assert!((s - j).norm() <= 1e-12 * j.norm().max(1.0));
        }
    }

    #[test]
    fn freq_least_squares_inverts_synthesized_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let data: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..1.0)).collect();
        let psf = PsfStack::new(5, 5, 1, data).unwrap().normalized();
        let otf = psf_to_otf(&psf, 6, 6).unwrap();
        let xf = fft2_cube(&random_cube(6, 6, 1, 13));
        let jf_data: Vec<Complex64> = otf
            .data()
            .iter()
            .zip(xf.data())
            .map(|(p, x)| p * x)
            .collect();
        let jf = FreqCube::new(6, 6, 1, jf_data).unwrap();
        let sol = freq_least_squares(&otf, &jf, 1e-12).unwrap();
        for ((s, x), psi) in sol.data().iter().zip(xf.data()).zip(otf.data()) {
            if psi.norm() > 1e-3 {
                assert!((s - x).norm() / x.norm().max(1e-9) < 1e-6);
            }
        }
    }

    #[test]
    fn freq_least_squares_preserves_hermitian_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let data: Vec<f64> = (0..9 * 2).map(|_| rng.random_range(0.01..1.0)).collect();
        let psf = PsfStack::new(3, 3, 2, data).unwrap().normalized();
        let otf = psf_to_otf(&psf, 6, 6).unwrap();
        let jf = fft2_cube(&random_cube(6, 6, 2, 16));
        let sol = freq_least_squares(&otf, &jf, 1e-10).unwrap();
        let scale = sol
            .data()
            .iter()
            .map(|z| z.norm())
            .fold(0.0_f64, f64::max)
            .max(1e-300);
        assert!(hermitian_residue(6, 6, sol.data()) / scale < 1e-10);
    }

    #[test]
    fn freq_least_squares_rejects_bad_eps_and_mismatched_dims() {
        let psf = PsfStack::delta(3, 3, 1).unwrap();
        let otf = psf_to_otf(&psf, 4, 4).unwrap();
        let jf = fft2_cube(&random_cube(4, 4, 1, 17));
        assert!(matches!(
            freq_least_squares(&otf, &jf, 0.0).unwrap_err(),
            Error::InvalidParameter(_)
        ));
        let wrong = fft2_cube(&random_cube(4, 5, 1, 18));
        assert!(matches!(
            freq_least_squares(&otf, &wrong, 1e-8).unwrap_err(),
            Error::DimensionMismatch(_)
        ));
    }

    #[test]
    fn freq_least_squares_zero_bin_yields_zero() {
        let zeros = vec![Complex64::default(); 16];
        let otf = OtfStack::new(4, 4, 1, zeros).unwrap();
        let jf = fft2_cube(&random_cube(4, 4, 1, 14));
        let sol = freq_least_squares(&otf, &jf, 1e-8).unwrap();
        assert!(sol
            .data()
            .iter()
            .all(|z| z.norm() == 0.0 && z.re.is_finite()));
    }

    #[test]
    fn hessian_report_delta_kernels_are_diagonal_in_frequency() {
        use crate::forward::{CsiSystem, Encoding, SdiSystem};
        let system = SdiSystem::new(
            PsfStack::delta(3, 3, 2).unwrap(),
            crate::cube::FilterStack::constant(6, 6, 2, 1, 0.8).unwrap(),
            Encoding::Phase,
        )
        .unwrap();
        let report = hessian_report(&CsiSystem::Sdi(&system)).unwrap();
        assert!(report.off_diag_ratio_freq.unwrap() < 1e-10);
    }

    #[test]
    fn hessian_report_per_pixel_response_is_pixel_block_diagonal() {
        use crate::forward::{ApeSystem, CsiSystem};
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let data: Vec<f64> = (0..4 * 4 * 2).map(|_| rng.random_range(0.0..1.0)).collect();
        let system =
            ApeSystem::new(crate::cube::FilterStack::new(4, 4, 2, 1, data).unwrap()).unwrap();
        let report = hessian_report(&CsiSystem::Ape(&system)).unwrap();
        assert!(report.off_diag_ratio_freq.is_none());

        // Entries of the dense Gram coupling different pixels are exactly 0.
        let (op, _) = crate::oracle::materialize_system(&CsiSystem::Ape(&system)).unwrap();
        let gram = op.matrix().transpose() * op.matrix();
        let n = 16;
        for r in 0..gram.nrows() {
            for c in 0..gram.ncols() {
                if r % n != c % n {
                    assert_eq!(gram[(r, c)], 0.0, "pixels {} and {} coupled", r % n, c % n);
                }
            }
        }
    }

    #[test]
    fn parseval_holds_per_band() {
        for seed in 0..5 {
            let cube = random_cube(7, 5, 2, 100 + seed);
            let freq = fft2_cube(&cube);
            for b in 0..cube.bands() {
                let spatial: f64 = cube.band(b).iter().map(|v| v * v).sum();
                let spectral: f64 = freq.band(b).iter().map(|z| z.norm_sqr()).sum();
                let scaled = spectral / (7.0 * 5.0);
                assert!((scaled - spatial).abs() / spatial < 1e-9);
            }
        }
    }
}
