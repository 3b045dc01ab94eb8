//! The hierarchical half-quadratic splitting loop.
//!
//! Each stage alternates two closed-form subproblem solves plus a denoising
//! prox:
//!
//! 1. *Filtering subproblem* (spatial): the residual `m - P2 P1 i_k` is
//!    rescaled per sensor element by `1/(gamma + eta)` — where `eta` holds the
//!    diagonal of `P2 P2^T` — and spread back through `P2^T`. This is the
//!    element-wise reduction of the dense normal-equation solve
//!    `(P2^T P2 + gamma I)^-1 (P2^T m + gamma P1 i_k)`, exact whenever
//!    `P2 P2^T` is diagonal (always true for a single channel; true for
//!    multiple channels when their spectral responses do not overlap).
//! 2. *Fusion*: a convex combination of the filtered iterate with `P1 i_k`;
//!    weight 1 recovers plain HQS.
//! 3. *Convolution subproblem* (frequency): with the convolution operator
//!    diagonalized by the DFT, the update is element-wise
//!    `(conj(psi) jf + phi uf) / (phi + |psi|^2)`, followed by an inverse
//!    transform and a real-part extraction (configurable).
//! 4. *Denoising prox* at strength `chi`.
//!
//! The learned fusion and schedule estimators of the original design are
//! replaced by the convex fusion weight and deterministic parameter
//! schedules, keeping every update closed-form and checkable against the
//! dense oracle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cube::{FilterStack, HsiCube, Measurement};
use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::forward::{
    apply_filter_adjoint, apply_filter_integrate, convolve_psf, sdi_adjoint, sdi_forward,
    NoiseSpec, SdiSystem,
};
use crate::fourier::{fft2_cube, ifft2_cube_real, psf_to_otf, ConversionStrategy, FreqCube};

/// Default fusion weight used by [`estimate_params`]; 1 is plain HQS.
pub const DEFAULT_FUSION_WEIGHT: f64 = 1.0;
/// Default relative OTF regularizer for frequency-domain least squares.
pub const DEFAULT_EPS: f64 = 1e-8;
/// Default stage count when a config specifies nothing.
pub const DEFAULT_STAGES: usize = 3;

/// Per-stage schedules and scalar knobs for [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    gamma: Vec<f64>,
    phi: Vec<f64>,
    chi: Vec<f64>,
    fusion_weight: f64,
    eps: f64,
    conversion: ConversionStrategy,
}

impl SolverParams {
    pub fn new(
        gamma: Vec<f64>,
        phi: Vec<f64>,
        chi: Vec<f64>,
        fusion_weight: f64,
        eps: f64,
        conversion: ConversionStrategy,
    ) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::InvalidParameter("stage count must be >= 1".into()));
        }
        if phi.len() != gamma.len() || chi.len() != gamma.len() {
            return Err(Error::InvalidParameter(format!(
                "schedule lengths differ: gamma {}, phi {}, chi {}",
                gamma.len(),
                phi.len(),
                chi.len()
            )));
        }
        for (name, values) in [("gamma", &gamma), ("phi", &phi), ("chi", &chi)] {
            if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidParameter(format!(
                    "{name} entries must be positive and finite, found {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&fusion_weight) {
            return Err(Error::InvalidParameter(format!(
                "fusion weight {fusion_weight} outside [0, 1]"
            )));
        }
        if eps.is_nan() || eps <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "eps must be > 0, got {eps}"
            )));
        }
        Ok(Self {
            gamma,
            phi,
            chi,
            fusion_weight,
            eps,
            conversion,
        })
    }

    pub fn stages(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    pub fn fusion_weight(&self) -> f64 {
        self.fusion_weight
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn conversion(&self) -> ConversionStrategy {
        self.conversion
    }

    pub fn with_conversion(mut self, conversion: ConversionStrategy) -> Self {
        self.conversion = conversion;
        self
    }

    pub fn with_fusion_weight(mut self, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParameter(format!(
                "fusion weight {weight} outside [0, 1]"
            )));
        }
        self.fusion_weight = weight;
        Ok(self)
    }

    pub fn with_chi(mut self, chi: Vec<f64>) -> Result<Self> {
        if chi.len() != self.gamma.len() || chi.iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(Error::InvalidParameter(
                "chi schedule must be positive with one entry per stage".into(),
            ));
        }
        self.chi = chi;
        Ok(self)
    }
}

/// Final per-iteration bundle plus the energy trace.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Completed stage count.
    pub stage: usize,
    /// Last deconvolved iterate (the `I` variable).
    pub iterate: HsiCube,
    /// Last fused filtering result (the `J` variable).
    pub filtered: HsiCube,
    /// Last denoised estimate (the `u` variable, also the returned cube).
    pub denoised: HsiCube,
    /// Data-fidelity energy `0.5 * ||m - P2 P1 u_k||^2` for the initial
    /// estimate and after each stage.
    pub energy: Vec<f64>,
}

/// Diagonal of `P2 P2^T`: per pixel and channel, the sum of squared
/// transmittances across bands.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaField {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl EtaField {
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
}

/// Computes the filtering subproblem's diagonal Hessian entries.
pub fn eta_field(filters: &FilterStack) -> EtaField {
    let n = filters.height() * filters.width();
    let mut data = vec![0.0; n * filters.channels()];
    for ch in 0..filters.channels() {
        let out = &mut data[ch * n..(ch + 1) * n];
        for b in 0..filters.bands() {
            for (slot, f) in out.iter_mut().zip(filters.plane(ch, b)) {
                *slot += f * f;
            }
        }
    }
    EtaField {
        height: filters.height(),
        width: filters.width(),
        channels: filters.channels(),
        data,
    }
}

/// Adjoint-based starting estimate `P1^T P2^T m`, rescaled so its peak matches
/// the measurement's peak (when positive).
pub fn initialize(measurement: &Measurement, system: &SdiSystem) -> Result<HsiCube> {
    let adjoint = sdi_adjoint(measurement, system)?;
    let peak = adjoint.max_value();
    if peak > 0.0 {
        let scale = measurement.max_value() / peak;
        let data = adjoint.data().iter().map(|v| v * scale).collect();
        HsiCube::new(adjoint.height(), adjoint.width(), adjoint.bands(), data)
    } else {
        Ok(adjoint)
    }
}

fn filtering_update_parts(
    i_k: &HsiCube,
    measurement: &Measurement,
    system: &SdiSystem,
    eta: &EtaField,
    gamma: f64,
) -> Result<(HsiCube, HsiCube)> {
    if gamma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma must be > 0, got {gamma}"
        )));
    }
    if eta.height != measurement.height()
        || eta.width != measurement.width()
        || eta.channels != measurement.channels()
    {
        return Err(Error::DimensionMismatch(
            "eta field does not match the measurement".into(),
        ));
    }
    let convolved = convolve_psf(i_k, system.psfs())?;
    let predicted = apply_filter_integrate(&convolved, system.filters())?;
    let weighted: Vec<f64> = measurement
        .data()
        .iter()
        .zip(predicted.data())
        .zip(&eta.data)
        .map(|((m, p), eta_i)| (m - p) / (gamma + eta_i))
        .collect();
    let weighted = Measurement::new(
        measurement.height(),
        measurement.width(),
        measurement.channels(),
        weighted,
    )?;
    let spread = apply_filter_adjoint(&weighted, system.filters())?;
    let updated = convolved.add_scaled(&spread, 1.0)?;
    Ok((updated, convolved))
}

/// Filtering subproblem update: the element-wise closed form of the dense
/// normal-equation solve (see the module docs). The residual is computed once.
pub fn filtering_update(
    i_k: &HsiCube,
    measurement: &Measurement,
    system: &SdiSystem,
    eta: &EtaField,
    gamma: f64,
) -> Result<HsiCube> {
    filtering_update_parts(i_k, measurement, system, eta, gamma).map(|(j, _)| j)
}

/// Deterministic stand-in for the learned fusion module: a convex
/// combination `weight * j + (1 - weight) * convolved_iterate`.
pub fn fusion_update(j: &HsiCube, convolved_iterate: &HsiCube, weight: f64) -> Result<HsiCube> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidParameter(format!(
            "fusion weight {weight} outside [0, 1]"
        )));
    }
    if !j.same_shape(convolved_iterate) {
        return Err(Error::DimensionMismatch(
            "fusion operands differ in shape".into(),
        ));
    }
    let data = j
        .data()
        .iter()
        .zip(convolved_iterate.data())
        .map(|(a, b)| weight * a + (1.0 - weight) * b)
        .collect();
    HsiCube::new(j.height(), j.width(), j.bands(), data)
}

/// Convolution subproblem update in the frequency domain, element-wise:
/// `(conj(psi) * jf + phi * uf) / (phi + |psi|^2)`.
///
/// The conjugated numerator and squared-magnitude denominator are the
/// normal-equation solution for complex diagonals; `phi > 0` guards OTF zeros.
pub fn convolution_update(
    jf: &FreqCube,
    uf: &FreqCube,
    otf: &crate::cube::OtfStack,
    phi: f64,
) -> Result<FreqCube> {
    if phi <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "phi must be > 0, got {phi}"
        )));
    }
    if !jf.same_shape(uf) {
        return Err(Error::DimensionMismatch(
            "spectra passed to the convolution update differ in shape".into(),
        ));
    }
    if otf.height() != jf.height() || otf.width() != jf.width() || otf.bands() != jf.bands() {
        return Err(Error::DimensionMismatch(
            "OTF does not match the spectra".into(),
        ));
    }
    let data: Vec<Complex64> = otf
        .data()
        .iter()
        .zip(jf.data().iter().zip(uf.data()))
        .map(|(psi, (j, u))| (psi.conj() * j + phi * u) / (psi.norm_sqr() + phi))
        .collect();
    FreqCube::new(jf.height(), jf.width(), jf.bands(), data)
}

/// Data-fidelity energy `0.5 * ||m - P2 P1 u||^2`.
pub fn data_fidelity(measurement: &Measurement, u: &HsiCube, system: &SdiSystem) -> Result<f64> {
    let predicted = sdi_forward(u, system, &NoiseSpec::none())?;
    Ok(0.5
        * measurement
            .data()
            .iter()
            .zip(predicted.data())
            .map(|(m, p)| (m - p) * (m - p))
            .sum::<f64>())
}

/// Runs the full unfolding loop and returns the final estimate with its
/// per-stage state. Deterministic for fixed inputs.
pub fn run(
    measurement: &Measurement,
    system: &SdiSystem,
    params: &SolverParams,
    denoiser: &Denoiser,
) -> Result<(HsiCube, SolverState)> {
    let filters = system.filters();
    if measurement.height() != filters.height()
        || measurement.width() != filters.width()
        || measurement.channels() != filters.channels()
    {
        return Err(Error::DimensionMismatch(format!(
            "measurement {}x{}x{} does not match system filters {}x{} with {} channels",
            measurement.height(),
            measurement.width(),
            measurement.channels(),
            filters.height(),
            filters.width(),
            filters.channels()
        )));
    }

    let otf = psf_to_otf(system.psfs(), filters.height(), filters.width())?;
    let eta = eta_field(filters);

    let mut iterate = initialize(measurement, system)?;
    let mut denoised = iterate.clone();
    let mut filtered = iterate.clone();
    let mut energy = Vec::with_capacity(params.stages() + 1);
    energy.push(data_fidelity(measurement, &denoised, system)?);

    for k in 0..params.stages() {
        let (j_raw, convolved) =
            filtering_update_parts(&iterate, measurement, system, &eta, params.gamma[k])?;
        filtered = fusion_update(&j_raw, &convolved, params.fusion_weight)?;

        let jf = fft2_cube(&filtered);
        let uf = fft2_cube(&denoised);
        let updated = convolution_update(&jf, &uf, &otf, params.phi[k])?;
        iterate = ifft2_cube_real(&updated, params.conversion);

        denoised = denoiser.apply(&iterate, params.chi[k])?;
        energy.push(data_fidelity(measurement, &denoised, system)?);
    }

    let state = SolverState {
        stage: params.stages(),
        iterate,
        filtered,
        denoised: denoised.clone(),
        energy,
    };
    Ok((denoised, state))
}

/// Deterministic schedule heuristics standing in for the learned estimators:
/// `gamma` halves from 1, `phi` is `0.1 * mean |psi|^2` throughout, `chi`
/// halves from 0.1. The measurement is part of the estimator interface but
/// the deterministic schedules depend only on the system.
pub fn estimate_params(
    _measurement: &Measurement,
    system: &SdiSystem,
    stages: usize,
) -> Result<SolverParams> {
    if stages == 0 {
        return Err(Error::InvalidParameter("stage count must be >= 1".into()));
    }
    let otf = psf_to_otf(
        system.psfs(),
        system.filters().height(),
        system.filters().width(),
    )?;
    let mean_power = otf.mean_power();
    let gamma: Vec<f64> = (0..stages).map(|k| 0.5_f64.powi(k as i32)).collect();
    let phi = vec![0.1 * mean_power; stages];
    let chi: Vec<f64> = (0..stages).map(|k| 0.1 * 0.5_f64.powi(k as i32)).collect();
    SolverParams::new(
        gamma,
        phi,
        chi,
        DEFAULT_FUSION_WEIGHT,
        DEFAULT_EPS,
        ConversionStrategy::RealPart,
    )
}

/// JSON-facing solver configuration; every field is optional and defaults
/// come from [`estimate_params`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct SolverConfig {
    pub stages: Option<usize>,
    pub gamma: Option<Vec<f64>>,
    pub phi: Option<Vec<f64>>,
    pub chi: Option<Vec<f64>>,
    pub fusion_weight: Option<f64>,
    pub eps: Option<f64>,
    pub conversion: Option<ConversionStrategy>,
    pub denoiser: Option<DenoiserConfig>,
}

/// Denoiser selector inside [`SolverConfig`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DenoiserConfig {
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl SolverConfig {
    /// Fills unset fields from [`estimate_params`] and builds the denoiser.
    pub fn resolve(
        &self,
        measurement: &Measurement,
        system: &SdiSystem,
    ) -> Result<(SolverParams, Denoiser)> {
        let stages = self
            .stages
            .or_else(|| self.gamma.as_ref().map(Vec::len))
            .or_else(|| self.phi.as_ref().map(Vec::len))
            .or_else(|| self.chi.as_ref().map(Vec::len))
            .unwrap_or(DEFAULT_STAGES);
        if stages == 0 {
            return Err(Error::Config {
                path: "stages".into(),
                message: "must be >= 1".into(),
            });
        }
        let defaults = estimate_params(measurement, system, stages)?;

        let take_schedule = |name: &str, given: &Option<Vec<f64>>, fallback: &[f64]| match given {
            Some(values) if values.len() != stages => Err(Error::Config {
                path: name.into(),
                message: format!("expected {stages} entries, got {}", values.len()),
            }),
            Some(values) => Ok(values.clone()),
            None => Ok(fallback.to_vec()),
        };
        let gamma = take_schedule("gamma", &self.gamma, defaults.gamma())?;
        let phi = take_schedule("phi", &self.phi, defaults.phi())?;
        let chi = take_schedule("chi", &self.chi, defaults.chi())?;

        let params = SolverParams::new(
            gamma,
            phi,
            chi,
            self.fusion_weight.unwrap_or(defaults.fusion_weight()),
            self.eps.unwrap_or(defaults.eps()),
            self.conversion.unwrap_or(defaults.conversion()),
        )
        .map_err(|e| Error::Config {
            path: "solver".into(),
            message: e.to_string(),
        })?;

        let otf = psf_to_otf(
            system.psfs(),
            system.filters().height(),
            system.filters().width(),
        )?;
        let denoiser = match &self.denoiser {
            Some(cfg) => Denoiser::from_config(&cfg.kind, &cfg.params, Some(otf))?,
            None => Denoiser::default_total_variation(),
        };
        Ok((params, denoiser))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::PsfStack;
    use crate::forward::Encoding;
    use crate::oracle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cube(h: usize, w: usize, bands: usize, seed: u64) -> HsiCube {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..h * w * bands)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        HsiCube::new(h, w, bands, data).unwrap()
    }

    fn random_psfs(k: usize, bands: usize, seed: u64) -> PsfStack {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..k * k * bands)
            .map(|_| rng.random_range(0.01..1.0))
            .collect();
        PsfStack::new(k, k, bands, data).unwrap().normalized()
    }

    fn random_filters(h: usize, w: usize, bands: usize, seed: u64) -> FilterStack {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..h * w * bands)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        FilterStack::new(h, w, bands, 1, data).unwrap()
    }

    fn random_measurement(h: usize, w: usize, channels: usize, seed: u64) -> Measurement {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..h * w * channels)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        Measurement::new(h, w, channels, data).unwrap()
    }

    fn rel_err(fast: &[f64], reference: &[f64]) -> f64 {
        let scale = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = fast
            .iter()
            .zip(reference)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        diff / scale.max(1e-300)
    }

    #[test]
    fn eta_constant_filters_give_band_count() {
        let filters = FilterStack::constant(3, 3, 4, 1, 1.0).unwrap();
        let eta = eta_field(&filters);
        assert!(eta.data().iter().all(|v| (v - 4.0).abs() < 1e-15));
    }

    #[test]
    fn eta_zero_filters_give_zero() {
        let filters = FilterStack::constant(3, 3, 4, 2, 0.0).unwrap();
        let eta = eta_field(&filters);
        assert!(eta.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn eta_matches_dense_gram_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<f64> = (0..4 * 4 * 3).map(|_| rng.random_range(0.0..1.0)).collect();
        let filters = FilterStack::new(4, 4, 3, 1, data).unwrap();
        let eta = eta_field(&filters);
        let phi2 = oracle::materialize_phi2(&filters).unwrap();
        let gram = phi2.matrix() * phi2.matrix().transpose();
        for i in 0..gram.nrows() {
            assert!((gram[(i, i)] - eta.data()[i]).abs() < 1e-12);
            for j in 0..gram.ncols() {
                if i != j {
                    assert!(gram[(i, j)].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn initialize_zero_measurement_gives_zero() {
        let system = SdiSystem::new(
            random_psfs(3, 2, 2),
            random_filters(4, 4, 2, 3),
            Encoding::Amplitude,
        )
        .unwrap();
        let m = Measurement::zeros(4, 4, 1);
        let init = initialize(&m, &system).unwrap();
        assert!(init.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn initialize_is_proportional_to_measurement_for_identity_system() {
        let system = SdiSystem::new(
            PsfStack::delta(3, 3, 1).unwrap(),
            FilterStack::constant(4, 4, 1, 1, 1.0).unwrap(),
            Encoding::Phase,
        )
        .unwrap();
        let m = random_measurement(4, 4, 1, 4);
        let init = initialize(&m, &system).unwrap();
        // Identity adjoint plus peak rescale reproduces the measurement.
        assert!(rel_err(init.data(), m.data()) < 1e-12);
    }

    #[test]
    fn adjoint_matches_dense_transpose_product() {
        let system = SdiSystem::new(
            random_psfs(3, 2, 5),
            random_filters(8, 8, 2, 6),
            Encoding::Scatter,
        )
        .unwrap();
        let m = random_measurement(8, 8, 1, 7);
        let fast = sdi_adjoint(&m, &system).unwrap();
        let phi = oracle::materialize_sdi(&system).unwrap();
        let dense = phi.matrix().transpose() * nalgebra::DVector::from_column_slice(m.data());
        assert!(rel_err(fast.data(), dense.as_slice()) < 1e-10);
    }

    #[test]
    fn filtering_update_keeps_consistent_iterate() {
        let system = SdiSystem::new(
            random_psfs(3, 2, 8),
            random_filters(5, 5, 2, 9),
            Encoding::Amplitude,
        )
        .unwrap();
        let eta = eta_field(system.filters());
        let i_k = random_cube(5, 5, 2, 10);
        let m = sdi_forward(&i_k, &system, &NoiseSpec::none()).unwrap();
        let j = filtering_update(&i_k, &m, &system, &eta, 0.7).unwrap();
        let target = convolve_psf(&i_k, system.psfs()).unwrap();
        assert!(rel_err(j.data(), target.data()) < 1e-12);
    }

    #[test]
    fn filtering_update_large_gamma_limit() {
        let system = SdiSystem::new(
            random_psfs(3, 2, 11),
            random_filters(5, 5, 2, 12),
            Encoding::Amplitude,
        )
        .unwrap();
        let eta = eta_field(system.filters());
        let i_k = random_cube(5, 5, 2, 13);
        let m = random_measurement(5, 5, 1, 14);
        let j = filtering_update(&i_k, &m, &system, &eta, 1e12).unwrap();
        let target = convolve_psf(&i_k, system.psfs()).unwrap();
        assert!(rel_err(j.data(), target.data()) < 1e-10);
    }

    #[test]
    fn filtering_update_matches_dense_solve() {
        let system = SdiSystem::new(
            random_psfs(3, 2, 15),
            random_filters(4, 4, 2, 16),
            Encoding::Amplitude,
        )
        .unwrap();
        let eta = eta_field(system.filters());
        let i_k = random_cube(4, 4, 2, 17);
        let m = random_measurement(4, 4, 1, 18);
        let fast = filtering_update(&i_k, &m, &system, &eta, 0.7).unwrap();
        let phi1 = oracle::materialize_phi1(system.psfs(), 4, 4).unwrap();
        let phi2 = oracle::materialize_phi2(system.filters()).unwrap();
        let dense = oracle::dense_solve_filtering(&phi1, &phi2, &m, &i_k, 0.7).unwrap();
        assert!(rel_err(fast.data(), &dense) < 1e-8);
    }

    #[test]
    fn fusion_endpoints_and_midpoint() {
        let j = random_cube(3, 3, 2, 19);
        let p = random_cube(3, 3, 2, 20);
        assert_eq!(fusion_update(&j, &p, 1.0).unwrap(), j);
        assert_eq!(fusion_update(&j, &p, 0.0).unwrap(), p);
        let mid = fusion_update(&j, &p, 0.5).unwrap();
        for ((m, a), b) in mid.data().iter().zip(j.data()).zip(p.data()) {
            assert!((m - (a + b) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn convolution_update_limits() {
        let psf = PsfStack::delta(3, 3, 1).unwrap();
        let otf = psf_to_otf(&psf, 4, 4).unwrap();
        let jf = fft2_cube(&random_cube(4, 4, 1, 21));
        let uf = fft2_cube(&random_cube(4, 4, 1, 22));
        // Unit OTF, tiny phi: the update returns jf.
        let out = convolution_update(&jf, &uf, &otf, 1e-12).unwrap();
        for (o, j) in out.data().iter().zip(jf.data()) {
            assert!((o - j).norm() < 1e-9 * j.norm().max(1.0));
        }
        // Huge phi: the prior dominates.
        let out = convolution_update(&jf, &uf, &otf, 1e12).unwrap();
        for (o, u) in out.data().iter().zip(uf.data()) {
            assert!((o - u).norm() < 1e-9 * u.norm().max(1.0));
        }
    }

    #[test]
    fn convolution_update_matches_dense_solve() {
        let psfs = random_psfs(3, 2, 23);
        let otf = psf_to_otf(&psfs, 4, 4).unwrap();
        let jf = fft2_cube(&random_cube(4, 4, 2, 24));
        let uf = fft2_cube(&random_cube(4, 4, 2, 25));
        let fast = convolution_update(&jf, &uf, &otf, 0.3).unwrap();
        let dense = oracle::dense_solve_convolution(&otf, &jf, &uf, 0.3).unwrap();
        let scale = dense.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let diff = fast
            .data()
            .iter()
            .zip(&dense)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff / scale < 1e-8);
    }

    #[test]
    fn run_recovers_scene_through_invertible_system() {
        let scene = random_cube(6, 6, 1, 26);
        let system = SdiSystem::new(
            PsfStack::delta(3, 3, 1).unwrap(),
            FilterStack::constant(6, 6, 1, 1, 1.0).unwrap(),
            Encoding::Phase,
        )
        .unwrap();
        let m = sdi_forward(&scene, &system, &NoiseSpec::none()).unwrap();
        let params = SolverParams::new(
            vec![1.0],
            vec![0.5],
            vec![1.0],
            1.0,
            1e-8,
            ConversionStrategy::RealPart,
        )
        .unwrap();
        let (recon, state) = run(&m, &system, &params, &Denoiser::Identity).unwrap();
        assert!(rel_err(recon.data(), scene.data()) < 1e-6);
        assert_eq!(state.energy.len(), 2);
        // Real-part conversion keeps iterates real f64 by construction;
        // they must also stay finite.
        assert!(state.iterate.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_stages_is_rejected() {
        let err = SolverParams::new(
            vec![],
            vec![],
            vec![],
            1.0,
            1e-8,
            ConversionStrategy::RealPart,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn estimate_params_schedules() {
        let system = SdiSystem::new(
            random_psfs(3, 2, 27),
            random_filters(4, 4, 2, 28),
            Encoding::Amplitude,
        )
        .unwrap();
        let m = random_measurement(4, 4, 1, 29);
        let params = estimate_params(&m, &system, 3).unwrap();
        assert_eq!(params.gamma(), &[1.0, 0.5, 0.25]);
        assert_eq!(params.stages(), 3);

        let single = estimate_params(&m, &system, 1).unwrap();
        assert_eq!(single.gamma().len(), 1);
        assert_eq!(single.phi().len(), 1);
        assert_eq!(single.chi().len(), 1);
    }

    #[test]
    fn estimate_params_phi_for_delta_psfs() {
        let system = SdiSystem::new(
            PsfStack::delta(3, 3, 2).unwrap(),
            random_filters(4, 4, 2, 30),
            Encoding::Phase,
        )
        .unwrap();
        let m = random_measurement(4, 4, 1, 31);
        let params = estimate_params(&m, &system, 2).unwrap();
        for phi in params.phi() {
            assert!((phi - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn solver_config_serializes_with_documented_keys() {
        let config = SolverConfig {
            stages: Some(2),
            gamma: Some(vec![1.0, 0.5]),
            phi: Some(vec![0.1, 0.1]),
            chi: Some(vec![50.0, 100.0]),
            fusion_weight: Some(0.9),
            eps: Some(1e-8),
            conversion: Some(ConversionStrategy::Amplitude),
            denoiser: Some(DenoiserConfig {
                kind: "total-variation".into(),
                params: serde_json::json!({"iterations": 30, "step": 0.248}),
            }),
        };
        let json = serde_json::to_value(&config).unwrap();
        for key in ["stages", "gamma", "phi", "chi", "fusionWeight", "eps", "conversion", "denoiser"] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
        assert_eq!(json["conversion"], "amplitude");
        let back: SolverConfig = serde_json::from_value(json).unwrap();
        assert_eq!(back.fusion_weight, Some(0.9));
        assert_eq!(back.denoiser.unwrap().kind, "total-variation");
    }

    #[test]
    fn solver_config_round_trips_and_validates() {
        let json = r#"{"stages": 2, "gamma": [1.0, 0.5], "denoiser": {"kind": "identity"}}"#;
        let config: SolverConfig = serde_json::from_str(json).unwrap();
        let system = SdiSystem::new(
            random_psfs(3, 2, 32),
            random_filters(4, 4, 2, 33),
            Encoding::Amplitude,
        )
        .unwrap();
        let m = random_measurement(4, 4, 1, 34);
        let (params, denoiser) = config.resolve(&m, &system).unwrap();
        assert_eq!(params.stages(), 2);
        assert!(matches!(denoiser, Denoiser::Identity));

        let bad: SolverConfig =
            serde_json::from_str(r#"{"stages": 3, "gamma": [1.0, 0.5]}"#).unwrap();
        let err = bad.resolve(&m, &system).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "gamma"));
    }
}
