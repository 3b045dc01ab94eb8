//! Randomized equivalence trials between the fast element-wise solver path
//! and the dense oracle, plus the structural identities the solver rests on.
//!
//! One trial draws a tiny random instance and measures, against dense
//! materializations:
//! - the filtering update vs the direct normal-equation solve,
//! - the convolution update vs the dense complex solve,
//! - the adjoint vs the transposed dense operator,
//! - the diagonal of `P2 P2^T` vs the eta field (and that the off-diagonal
//!   part vanishes),
//! - the DFT diagonalization of the convolution operator,
//! - the matrix-inverse identity behind the filtering reduction.

use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cube::HsiCube;
use crate::error::Result;
use crate::forward::{convolve_psf, sdi_adjoint, sdi_forward, NoiseSpec};
use crate::fourier::{fft2_cube, psf_to_otf};
use crate::oracle;
use crate::solver::{convolution_update, eta_field, filtering_update};
use crate::synth::verify_instance;

/// Pass thresholds for one trial.
pub const FILTERING_TOL: f64 = 1e-8;
pub const CONVOLUTION_TOL: f64 = 1e-8;
pub const ETA_TOL: f64 = 1e-12;
pub const ADJOINT_TOL: f64 = 1e-10;
pub const DIAGONALIZATION_TOL: f64 = 1e-9;
pub const IDENTITY_TOL: f64 = 1e-9;

/// Measured errors for one random instance.
#[derive(Debug, Clone)]
pub struct TrialReport {
    pub seed: u64,
    pub filtering_rel_err: f64,
    pub convolution_rel_err: f64,
    pub eta_max_abs_err: f64,
    pub gram_off_diag_max: f64,
    pub adjoint_rel_err: f64,
    pub diagonalization_rel_err: f64,
    pub identity_gap: f64,
}

impl TrialReport {
    pub fn passes(&self) -> bool {
        self.filtering_rel_err < FILTERING_TOL
            && self.convolution_rel_err < CONVOLUTION_TOL
            && self.eta_max_abs_err < ETA_TOL
            && self.gram_off_diag_max < ETA_TOL
            && self.adjoint_rel_err < ADJOINT_TOL
            && self.diagonalization_rel_err < DIAGONALIZATION_TOL
            && self.identity_gap < IDENTITY_TOL
    }
}

fn rel_err_real(fast: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff = fast
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    diff / scale.max(1e-300)
}

fn rel_err_complex(fast: &[Complex64], reference: &[Complex64]) -> f64 {
    let scale = reference.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let diff = fast
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    diff / scale.max(1e-300)
}

/// Runs every check on the instance drawn from `seed`.
pub fn equivalence_trial(seed: u64) -> Result<TrialReport> {
    let instance = verify_instance(seed)?;
    let system = &instance.system;
    let filters = system.filters();
    let (h, w, bands) = (filters.height(), filters.width(), filters.bands());

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bf0_3635);
    let iterate = HsiCube::new(
        h,
        w,
        bands,
        (0..h * w * bands)
            .map(|_| rng.random_range(0.0..1.0))
            .collect(),
    )?;
    let measurement = sdi_forward(&instance.scene, system, &NoiseSpec::none())?;

    let phi1 = oracle::materialize_phi1(system.psfs(), h, w)?;
    let phi2 = oracle::materialize_phi2(filters)?;
    let full = oracle::materialize_sdi(system)?;

    // Filtering subproblem: fast vs dense.
    let eta = eta_field(filters);
    let fast_j = filtering_update(&iterate, &measurement, system, &eta, instance.gamma)?;
    let dense_j =
        oracle::dense_solve_filtering(&phi1, &phi2, &measurement, &iterate, instance.gamma)?;
    let filtering_rel_err = rel_err_real(fast_j.data(), &dense_j);

    // Convolution subproblem: fast vs dense.
    let otf = psf_to_otf(system.psfs(), h, w)?;
    let jf = fft2_cube(&fast_j);
    let uf = fft2_cube(&iterate);
    let fast_if = convolution_update(&jf, &uf, &otf, instance.phi)?;
    let dense_if = oracle::dense_solve_convolution(&otf, &jf, &uf, instance.phi)?;
    let convolution_rel_err = rel_err_complex(fast_if.data(), &dense_if);

    // Filtering Hessian diagonal vs the eta field.
    let gram = phi2.matrix() * phi2.matrix().transpose();
    let mut eta_max_abs_err = 0.0_f64;
    let mut gram_off_diag_max = 0.0_f64;
    for r in 0..gram.nrows() {
        for c in 0..gram.ncols() {
            if r == c {
                eta_max_abs_err = eta_max_abs_err.max((gram[(r, c)] - eta.data()[r]).abs());
            } else {
                gram_off_diag_max = gram_off_diag_max.max(gram[(r, c)].abs());
            }
        }
    }

    // Adjoint vs dense transpose.
    let fast_adjoint = sdi_adjoint(&measurement, system)?;
    let dense_adjoint = full.matrix().transpose() * DVector::from_column_slice(measurement.data());
    let adjoint_rel_err = rel_err_real(fast_adjoint.data(), dense_adjoint.as_slice());

    // DFT diagonalization: F(P1 x) = otf .* F(x).
    let convolved = convolve_psf(&instance.scene, system.psfs())?;
    let lhs = fft2_cube(&convolved);
    let xf = fft2_cube(&instance.scene);
    let rhs: Vec<Complex64> = otf
        .data()
        .iter()
        .zip(xf.data())
        .map(|(p, x)| p * x)
        .collect();
    let diagonalization_rel_err = rel_err_complex(lhs.data(), &rhs);

    let identity_gap = oracle::matrix_inverse_identity_gap(&phi2, instance.gamma)?;

    Ok(TrialReport {
        seed,
        filtering_rel_err,
        convolution_rel_err,
        eta_max_abs_err,
        gram_off_diag_max,
        adjoint_rel_err,
        diagonalization_rel_err,
        identity_gap,
    })
}

/// Runs `trials` seeded trials, writing one summary line per suite and the
/// final `passed/trials pass` line. Returns the reports.
pub fn run_trials<W: Write>(seed: u64, trials: usize, mut out: W) -> Result<Vec<TrialReport>> {
    let mut reports = Vec::with_capacity(trials);
    for t in 0..trials {
        reports.push(equivalence_trial(seed.wrapping_add(t as u64))?);
    }
    let passed = reports.iter().filter(|r| r.passes()).count();

    let max = |f: fn(&TrialReport) -> f64| reports.iter().map(f).fold(0.0_f64, f64::max);
    writeln!(
        out,
        "filtering update vs dense solve: max rel err {:.3e} (tol {FILTERING_TOL:.0e})",
        max(|r| r.filtering_rel_err)
    )?;
    writeln!(
        out,
        "convolution update vs dense solve: max rel err {:.3e} (tol {CONVOLUTION_TOL:.0e})",
        max(|r| r.convolution_rel_err)
    )?;
    writeln!(
        out,
        "filtering Hessian diagonal: max abs err {:.3e}, off-diagonal max {:.3e} (tol {ETA_TOL:.0e})",
        max(|r| r.eta_max_abs_err),
        max(|r| r.gram_off_diag_max)
    )?;
    writeln!(
        out,
        "adjoint vs dense transpose: max rel err {:.3e} (tol {ADJOINT_TOL:.0e})",
        max(|r| r.adjoint_rel_err)
    )?;
    writeln!(
        out,
        "DFT diagonalization: max rel err {:.3e} (tol {DIAGONALIZATION_TOL:.0e})",
        max(|r| r.diagonalization_rel_err)
    )?;
    writeln!(
        out,
        "matrix-inverse identity: max rel gap {:.3e} (tol {IDENTITY_TOL:.0e})",
        max(|r| r.identity_gap)
    )?;
    writeln!(out, "{passed}/{trials} pass")?;
    Ok(reports)
}
