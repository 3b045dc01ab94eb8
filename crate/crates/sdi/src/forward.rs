//! Forward operators: the PSF-encoded imaging chain (per-band circular
//! convolution followed by filtered spectral integration), plus the mask-and-
//! dispersion and per-pixel-response families used for structural comparison.
//!
//! Convolution is circular everywhere because the frequency-domain
//! diagonalization the solver relies on is exact only for circulant
//! operators; linear convolution of a real instrument is approximated by
//! pre-padding the scene before entering this module. The kernel is
//! registered at its center cell `(kh/2, kw/2)`, so a delta kernel is the
//! identity.
//!
//! All operators are pure functions of immutable inputs; noisy measurements
//! are deterministic for a fixed seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cube::{FilterStack, HsiCube, Measurement, PsfStack};
use crate::error::{Error, Result};

/// PSF-engineering family. Metadata only: the operator is fully determined by
/// the kernels and filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    Amplitude,
    Phase,
    Scatter,
}

/// Convolution boundary handling. Only the circulant case is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Circular,
}

/// A PSF-encoded imaging system: per-band kernels plus a filter stack.
#[derive(Debug, Clone)]
pub struct SdiSystem {
    psfs: PsfStack,
    filters: FilterStack,
    encoding: Encoding,
    boundary: Boundary,
}

impl SdiSystem {
    pub fn new(psfs: PsfStack, filters: FilterStack, encoding: Encoding) -> Result<Self> {
        if psfs.bands() != filters.bands() {
            return Err(Error::DimensionMismatch(format!(
                "kernel stack has {} bands, filters have {}",
                psfs.bands(),
                filters.bands()
            )));
        }
        if psfs.kernel_height() > filters.height() || psfs.kernel_width() > filters.width() {
            return Err(Error::DimensionMismatch(format!(
                "kernel {}x{} exceeds scene {}x{}",
                psfs.kernel_height(),
                psfs.kernel_width(),
                filters.height(),
                filters.width()
            )));
        }
        Ok(Self {
            psfs,
            filters,
            encoding,
            boundary: Boundary::Circular,
        })
    }

    pub fn psfs(&self) -> &PsfStack {
        &self.psfs
    }

    pub fn filters(&self) -> &FilterStack {
        &self.filters
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
}

/// Mask-plus-dispersion system: binary (or gray) occlusion followed by an
/// integer per-band shift along the width axis.
#[derive(Debug, Clone)]
pub struct CassiSystem {
    mask: Vec<f64>,
    height: usize,
    width: usize,
    dispersion_step: usize,
}

impl CassiSystem {
    pub fn new(
        height: usize,
        width: usize,
        mask: Vec<f64>,
        dispersion_step: usize,
    ) -> Result<Self> {
        if mask.len() != height * width {
            return Err(Error::LengthMismatch {
                expected: height * width,
                got: mask.len(),
            });
        }
        for (i, v) in mask.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if *v < 0.0 || *v > 1.0 {
                return Err(Error::OutOfRange(format!(
                    "mask value {v} at index {i} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            mask,
            height,
            width,
            dispersion_step,
        })
    }

    pub fn mask(&self) -> &[f64] {
        &self.mask
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dispersion_step(&self) -> usize {
        self.dispersion_step
    }
}

/// Per-pixel spectral response system: band-by-band integration after
/// elementwise modulation, no dispersion and no convolution.
#[derive(Debug, Clone)]
pub struct ApeSystem {
    response: FilterStack,
}

impl ApeSystem {
    /// The response array is a single-channel filter stack.
    pub fn new(response: FilterStack) -> Result<Self> {
        if response.channels() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "response array must be single-channel, got {}",
                response.channels()
            )));
        }
        Ok(Self { response })
    }

    pub fn response(&self) -> &FilterStack {
        &self.response
    }
}

/// A system reference for structure reports that work across families.
#[derive(Debug, Clone, Copy)]
pub enum CsiSystem<'a> {
    Sdi(&'a SdiSystem),
    Cassi {
        system: &'a CassiSystem,
        bands: usize,
    },
    Ape(&'a ApeSystem),
}

/// Additive measurement noise description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    Gaussian,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma: 0.0,
            seed: 0,
        }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Result<Self> {
        if sigma.is_nan() || sigma < 0.0 {
            return Err(Error::OutOfRange(format!(
                "noise sigma must be >= 0, got {sigma}"
            )));
        }
        Ok(Self {
            kind: NoiseKind::Gaussian,
            sigma,
            seed,
        })
    }
}

fn wrap(value: isize, modulus: usize) -> usize {
    value.rem_euclid(modulus as isize) as usize
}

fn check_cube_psf(cube: &HsiCube, psfs: &PsfStack) -> Result<()> {
    if cube.bands() != psfs.bands() {
        return Err(Error::DimensionMismatch(format!(
            "cube has {} bands, kernel stack has {}",
            cube.bands(),
            psfs.bands()
        )));
    }
    if psfs.kernel_height() > cube.height() || psfs.kernel_width() > cube.width() {
        return Err(Error::DimensionMismatch(format!(
            "kernel {}x{} exceeds scene {}x{}",
            psfs.kernel_height(),
            psfs.kernel_width(),
            cube.height(),
            cube.width()
        )));
    }
    Ok(())
}

fn shifted_accumulate(
    out: &mut [f64],
    inp: &[f64],
    height: usize,
    width: usize,
    weight: f64,
    dr: isize,
    dc: isize,
) {
    for r in 0..height {
        let src_r = wrap(r as isize - dr, height);
        let out_row = &mut out[r * width..(r + 1) * width];
        let in_row = &inp[src_r * width..(src_r + 1) * width];
        for (c, slot) in out_row.iter_mut().enumerate() {
            *slot += weight * in_row[wrap(c as isize - dc, width)];
        }
    }
}

/// Per-band circular 2-D convolution in the spatial domain.
///
/// Linear in the cube; a delta kernel reproduces the input exactly.
pub fn convolve_psf(cube: &HsiCube, psfs: &PsfStack) -> Result<HsiCube> {
    check_cube_psf(cube, psfs)?;
    let (h, w) = (cube.height(), cube.width());
    let center_r = psfs.kernel_height() as isize / 2;
    let center_c = psfs.kernel_width() as isize / 2;
    let mut data = vec![0.0; cube.data().len()];
    for b in 0..cube.bands() {
        let out = &mut data[b * h * w..(b + 1) * h * w];
        let inp = cube.band(b);
        for i in 0..psfs.kernel_height() {
            for j in 0..psfs.kernel_width() {
                let weight = psfs.get(b, i, j);
                if weight == 0.0 {
                    continue;
                }
                shifted_accumulate(
                    out,
                    inp,
                    h,
                    w,
                    weight,
                    i as isize - center_r,
                    j as isize - center_c,
                );
            }
        }
    }
    Ok(HsiCube::from_raw(h, w, cube.bands(), data))
}

/// Adjoint of [`convolve_psf`]: circular correlation with the same kernel.
pub fn convolve_psf_adjoint(cube: &HsiCube, psfs: &PsfStack) -> Result<HsiCube> {
    check_cube_psf(cube, psfs)?;
    let (h, w) = (cube.height(), cube.width());
    let center_r = psfs.kernel_height() as isize / 2;
    let center_c = psfs.kernel_width() as isize / 2;
    let mut data = vec![0.0; cube.data().len()];
    for b in 0..cube.bands() {
        let out = &mut data[b * h * w..(b + 1) * h * w];
        let inp = cube.band(b);
        for i in 0..psfs.kernel_height() {
            for j in 0..psfs.kernel_width() {
                let weight = psfs.get(b, i, j);
                if weight == 0.0 {
                    continue;
                }
                shifted_accumulate(
                    out,
                    inp,
                    h,
                    w,
                    weight,
                    center_r - i as isize,
                    center_c - j as isize,
                );
            }
        }
    }
    Ok(HsiCube::from_raw(h, w, cube.bands(), data))
}

fn check_cube_filters(cube: &HsiCube, filters: &FilterStack) -> Result<()> {
    if cube.height() != filters.height()
        || cube.width() != filters.width()
        || cube.bands() != filters.bands()
    {
        return Err(Error::DimensionMismatch(format!(
            "cube {}x{}x{} does not match filters {}x{}x{}",
            cube.height(),
            cube.width(),
            cube.bands(),
            filters.height(),
            filters.width(),
            filters.bands()
        )));
    }
    Ok(())
}

/// Pixel-wise filtering and band-wise integration: per camera channel,
/// `M[ch] = sum_b filters[ch][b] .* cube[b]`.
pub fn apply_filter_integrate(cube: &HsiCube, filters: &FilterStack) -> Result<Measurement> {
    check_cube_filters(cube, filters)?;
    let n = cube.plane_len();
    let mut data = vec![0.0; n * filters.channels()];
    for ch in 0..filters.channels() {
        let out = &mut data[ch * n..(ch + 1) * n];
        for b in 0..cube.bands() {
            let plane = filters.plane(ch, b);
            for ((slot, f), v) in out.iter_mut().zip(plane).zip(cube.band(b)) {
                *slot += f * v;
            }
        }
    }
    Ok(Measurement::from_raw(
        cube.height(),
        cube.width(),
        filters.channels(),
        data,
    ))
}

/// Adjoint of [`apply_filter_integrate`]: spreads each channel back across
/// bands and sums channel contributions.
pub fn apply_filter_adjoint(m: &Measurement, filters: &FilterStack) -> Result<HsiCube> {
    if m.height() != filters.height()
        || m.width() != filters.width()
        || m.channels() != filters.channels()
    {
        return Err(Error::DimensionMismatch(format!(
            "measurement {}x{}x{} does not match filters {}x{} with {} channels",
            m.height(),
            m.width(),
            m.channels(),
            filters.height(),
            filters.width(),
            filters.channels()
        )));
    }
    let n = m.height() * m.width();
    let mut data = vec![0.0; n * filters.bands()];
    for b in 0..filters.bands() {
        let out = &mut data[b * n..(b + 1) * n];
        for ch in 0..filters.channels() {
            let plane = filters.plane(ch, b);
            for ((slot, f), v) in out.iter_mut().zip(plane).zip(m.channel(ch)) {
                *slot += f * v;
            }
        }
    }
    Ok(HsiCube::from_raw(
        m.height(),
        m.width(),
        filters.bands(),
        data,
    ))
}

fn add_noise(m: Measurement, noise: &NoiseSpec) -> Result<Measurement> {
    match noise.kind {
        NoiseKind::None => Ok(m),
        NoiseKind::Gaussian => {
            if noise.sigma == 0.0 {
                return Ok(m);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            let normal = Normal::new(0.0, noise.sigma)
                .map_err(|e| Error::InvalidParameter(format!("noise sigma: {e}")))?;
            let data = m
                .data()
                .iter()
                .map(|v| v + normal.sample(&mut rng))
                .collect();
            Measurement::new(m.height(), m.width(), m.channels(), data)
        }
    }
}

/// Full PSF-encoded forward model: convolve, filter-integrate, add noise.
pub fn sdi_forward(cube: &HsiCube, system: &SdiSystem, noise: &NoiseSpec) -> Result<Measurement> {
    let convolved = convolve_psf(cube, system.psfs())?;
    let clean = apply_filter_integrate(&convolved, system.filters())?;
    add_noise(clean, noise)
}

/// Adjoint of the noiseless forward model, used for solver initialization.
pub fn sdi_adjoint(m: &Measurement, system: &SdiSystem) -> Result<HsiCube> {
    let spread = apply_filter_adjoint(m, system.filters())?;
    convolve_psf_adjoint(&spread, system.psfs())
}

/// Mask-and-dispersion forward model. The output is widened to
/// `width + dispersion_step * (bands - 1)` so every shifted band fits.
pub fn cassi_forward(cube: &HsiCube, system: &CassiSystem) -> Result<Measurement> {
    if cube.height() != system.height() || cube.width() != system.width() {
        return Err(Error::DimensionMismatch(format!(
            "cube {}x{} does not match mask {}x{}",
            cube.height(),
            cube.width(),
            system.height(),
            system.width()
        )));
    }
    let d = system.dispersion_step();
    let out_width = cube.width() + d * (cube.bands() - 1);
    let mut data = vec![0.0; cube.height() * out_width];
    for b in 0..cube.bands() {
        let shift = d * b;
        let plane = cube.band(b);
        for r in 0..cube.height() {
            for c in 0..cube.width() {
                data[r * out_width + c + shift] +=
                    system.mask()[r * cube.width() + c] * plane[r * cube.width() + c];
            }
        }
    }
    Ok(Measurement::from_raw(cube.height(), out_width, 1, data))
}

/// Per-pixel response forward model: band-by-band integration after
/// elementwise modulation.
pub fn ape_forward(cube: &HsiCube, system: &ApeSystem) -> Result<Measurement> {
    apply_filter_integrate(cube, system.response())
}
