//! Reference-scale constants for the full-size instrument configuration.
//!
//! Desk-scale runs use small grids throughout; these record the full-scale
//! geometry and the training recipe that learned denoiser variants would use,
//! so configs can reference them by name.

/// Spectral band count of the reference configuration.
pub const REFERENCE_BANDS: usize = 28;
/// Shortest wavelength of the reference band set, nanometers.
pub const WAVELENGTH_MIN_NM: f64 = 450.0;
/// Longest wavelength of the reference band set, nanometers.
pub const WAVELENGTH_MAX_NM: f64 = 650.0;
/// Kernel grid edge of the full-scale per-band kernels.
pub const REFERENCE_PSF_DIM: usize = 512;
/// Scene/filter grid edge of the full-scale configuration.
pub const REFERENCE_FILTER_DIM: usize = 256;

/// Noise level used by the robustness study.
pub const ROBUSTNESS_NOISE_SIGMA: f64 = 0.01;

/// Optimizer constants for training learned denoiser variants (not used by
/// this toolkit's closed-form path; recorded for configuration fidelity).
pub const TRAINING_ADAM_BETA1: f64 = 0.9;
pub const TRAINING_ADAM_BETA2: f64 = 0.999;
pub const TRAINING_EPOCHS: usize = 300;

/// Center wavelength of band `b` under the reference band set.
pub fn band_wavelength_nm(band: usize, bands: usize) -> f64 {
    if bands <= 1 {
        return (WAVELENGTH_MIN_NM + WAVELENGTH_MAX_NM) / 2.0;
    }
    WAVELENGTH_MIN_NM + (WAVELENGTH_MAX_NM - WAVELENGTH_MIN_NM) * band as f64 / (bands - 1) as f64
}
