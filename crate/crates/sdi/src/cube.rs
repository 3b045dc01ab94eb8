//! Core tensor types shared by every other module.
//!
//! All payloads are `f64` in band-outermost row-major order: sample `(b, r, c)`
//! lives at flat index `(b * height + r) * width + c`, so each band is a
//! contiguous `height * width` plane ready for per-band 2-D transforms.
//! Multi-channel containers ([`FilterStack`], [`Measurement`]) put the channel
//! axis outermost, ahead of the band axis.
//!
//! Constructors validate every documented invariant and reject violations with
//! a distinct [`Error`] variant. Instances are immutable after construction
//! and safe to share across threads.

use num_complex::Complex64;

use crate::error::{Error, Result};

fn check_dim(name: &'static str, value: usize) -> Result<()> {
    if value == 0 {
        return Err(Error::EmptyDimension(name));
    }
    Ok(())
}

fn check_finite(data: &[f64]) -> Result<()> {
    for (i, v) in data.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(i));
        }
    }
    Ok(())
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

/// A real hyperspectral cube: `bands` planes of `height x width` samples.
///
/// Holds the scene `I`, the convolved intermediate `J`, and the running
/// estimate `u` — they all share this shape.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f64>,
}

impl HsiCube {
    /// Validates dimensions, length, and finiteness.
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("height", height)?;
        check_dim("width", width)?;
        check_dim("bands", bands)?;
        check_len(height * width * bands, data.len())?;
        check_finite(&data)?;
        Ok(Self {
            height,
            width,
            bands,
            data,
        })
    }

    /// All-zero cube of the given shape.
    pub fn zeros(height: usize, width: usize, bands: usize) -> Self {
        Self::new(height, width, bands, vec![0.0; height * width * bands])
            .expect("zero cube is always valid for nonzero dims")
    }

    /// Constant-valued cube.
    pub fn constant(height: usize, width: usize, bands: usize, value: f64) -> Result<Self> {
        Self::new(height, width, bands, vec![value; height * width * bands])
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

    /// Samples per band plane.
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f64 {
        self.data[(band * self.height + row) * self.width + col]
    }

    /// Contiguous `height * width` plane of one band.
    pub fn band(&self, band: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[band * n..(band + 1) * n]
    }

    /// True when both cubes have identical dimensions.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width && self.bands == other.bands
    }

    /// Elementwise `self + scale * other`.
    pub fn add_scaled(&self, other: &Self, scale: f64) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch(
                "add_scaled operands differ in shape".into(),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + scale * b)
            .collect();
        Self::new(self.height, self.width, self.bands, data)
    }

    /// Largest sample value (signed).
    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Euclidean norm over all samples.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn from_raw(height: usize, width: usize, bands: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * bands);
        Self {
            height,
            width,
            bands,
            data,
        }
    }
}

/// Per-band spatial convolution kernels.
///
/// Kernels are stored like a cube (`bands` planes of `kernel_height x
/// kernel_width`). Every band must have a strictly positive sum so it can be
/// normalized to unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfStack {
    kernel_height: usize,
    kernel_width: usize,
    bands: usize,
    data: Vec<f64>,
}

impl PsfStack {
    pub fn new(
        kernel_height: usize,
        kernel_width: usize,
        bands: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        check_dim("kernel_height", kernel_height)?;
        check_dim("kernel_width", kernel_width)?;
        check_dim("bands", bands)?;
        check_len(kernel_height * kernel_width * bands, data.len())?;
        check_finite(&data)?;
        let plane = kernel_height * kernel_width;
        for b in 0..bands {
            let sum: f64 = data[b * plane..(b + 1) * plane].iter().sum();
            if sum <= 0.0 {
                return Err(Error::OutOfRange(format!(
                    "kernel band {b} sums to {sum}, must be > 0"
                )));
            }
        }
        Ok(Self {
            kernel_height,
            kernel_width,
            bands,
            data,
        })
    }

    /// Single-band identity kernel (1 at the center cell).
    pub fn delta(kernel_height: usize, kernel_width: usize, bands: usize) -> Result<Self> {
        let plane = kernel_height * kernel_width;
        let mut data = vec![0.0; plane * bands];
        let center = (kernel_height / 2) * kernel_width + kernel_width / 2;
        for b in 0..bands {
            data[b * plane + center] = 1.0;
        }
        Self::new(kernel_height, kernel_width, bands, data)
    }

    /// Rescales each band to unit sum.
    pub fn normalized(&self) -> Self {
        let plane = self.kernel_height * self.kernel_width;
        let mut data = self.data.clone();
        for b in 0..self.bands {
            let band = &mut data[b * plane..(b + 1) * plane];
            let sum: f64 = band.iter().sum();
            for v in band {
                *v /= sum;
            }
        }
        Self {
            kernel_height: self.kernel_height,
            kernel_width: self.kernel_width,
            bands: self.bands,
            data,
        }
    }

    pub fn kernel_height(&self) -> usize {
        self.kernel_height
    }

    pub fn kernel_width(&self) -> usize {
        self.kernel_width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn band(&self, band: usize) -> &[f64] {
        let n = self.kernel_height * self.kernel_width;
        &self.data[band * n..(band + 1) * n]
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f64 {
        self.data[(band * self.kernel_height + row) * self.kernel_width + col]
    }
}

/// Frequency-domain diagonal of the per-band convolution operator: one complex
/// `height x width` spectrum per band, matching the padded scene grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OtfStack {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<Complex64>,
}

impl OtfStack {
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<Complex64>) -> Result<Self> {
        check_dim("height", height)?;
        check_dim("width", width)?;
        check_dim("bands", bands)?;
        check_len(height * width * bands, data.len())?;
        for (i, v) in data.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite(i));
            }
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

    pub fn band(&self, band: usize) -> &[Complex64] {
        let n = self.height * self.width;
        &self.data[band * n..(band + 1) * n]
    }

    /// Largest squared magnitude over all entries.
    pub fn max_power(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v.norm_sqr())
            .fold(0.0_f64, f64::max)
    }

    /// Mean squared magnitude over all entries.
    pub fn mean_power(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }
}

/// Per-pixel, per-band spectral transmittance, one plane set per camera
/// channel. Entries live in `[0, 1]`; channel is the outermost axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStack {
    height: usize,
    width: usize,
    bands: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FilterStack {
    pub fn new(
        height: usize,
        width: usize,
        bands: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        check_dim("height", height)?;
        check_dim("width", width)?;
        check_dim("bands", bands)?;
        check_dim("channels", channels)?;
        check_len(height * width * bands * channels, data.len())?;
        for (i, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if *v < 0.0 || *v > 1.0 {
                return Err(Error::OutOfRange(format!(
                    "transmittance {v} at flat index {i} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            height,
            width,
            bands,
            channels,
            data,
        })
    }

    /// Uniform transmittance of the given value.
    pub fn constant(
        height: usize,
        width: usize,
        bands: usize,
        channels: usize,
        value: f64,
    ) -> Result<Self> {
        Self::new(
            height,
            width,
            bands,
            channels,
            vec![value; height * width * bands * channels],
        )
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

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Transmittance of `(channel, band)` as a contiguous spatial plane.
    pub fn plane(&self, channel: usize, band: usize) -> &[f64] {
        let n = self.height * self.width;
        let start = (channel * self.bands + band) * n;
        &self.data[start..start + n]
    }

    pub fn get(&self, channel: usize, band: usize, row: usize, col: usize) -> f64 {
        let n = self.height * self.width;
        self.data[(channel * self.bands + band) * n + row * self.width + col]
    }
}

/// A sensor image: one `height x width` plane per camera channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Measurement {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("height", height)?;
        check_dim("width", width)?;
        check_dim("channels", channels)?;
        check_len(height * width * channels, data.len())?;
        check_finite(&data)?;
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::new(
            height,
            width,
            channels,
            vec![0.0; height * width * channels],
        )
        .expect("zero measurement is always valid for nonzero dims")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn from_raw(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            data,
        }
    }
}
