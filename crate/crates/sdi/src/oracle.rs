//! Brute-force dense materialization of the imaging operators and direct
//! solves of the subproblem normal equations on tiny instances.
//!
//! Everything here is the reference side of a dual-route check: the fast
//! element-wise updates in [`crate::solver`] must agree with these dense
//! solves to tight tolerances. Nothing in this module is on the hot path.
//!
//! Vector ordering matches the cube layout: sample `(band, row, col)` maps to
//! flat index `(band * height + row) * width + col`, and measurement rows
//! stack channels outermost the same way.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::cube::{FilterStack, HsiCube, Measurement, OtfStack, PsfStack};
use crate::error::{Error, Result};
use crate::forward::{self, CsiSystem};
use crate::fourier::{FreqCube, ReportDims};

/// Dense matrices larger than this many entries are refused.
pub const SIZE_GUARD: usize = 1 << 24;

/// A materialized linear operator.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Dense matrix-vector product.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(x);
        (&self.matrix * v).as_slice().to_vec()
    }
}

fn check_size(rows: usize, cols: usize) -> Result<()> {
    if rows.checked_mul(cols).is_none_or(|n| n > SIZE_GUARD) {
        return Err(Error::TooLarge(format!(
            "{rows} x {cols} exceeds the {SIZE_GUARD}-entry guard"
        )));
    }
    Ok(())
}

/// Materializes any linear map column by column from its action on unit
/// basis vectors.
pub fn materialize<F>(rows: usize, cols: usize, apply: F) -> Result<DenseOperator>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    check_size(rows, cols)?;
    let mut matrix = DMatrix::zeros(rows, cols);
    let mut basis = vec![0.0; cols];
    for i in 0..cols {
        basis[i] = 1.0;
        let column = apply(&basis)?;
        basis[i] = 0.0;
        if column.len() != rows {
            return Err(Error::DimensionMismatch(format!(
                "operator returned {} rows, expected {rows}",
                column.len()
            )));
        }
        matrix.set_column(i, &DVector::from_vec(column));
    }
    Ok(DenseOperator { matrix })
}

/// Dense per-band convolution operator (block-circulant per band,
/// block-diagonal across bands).
pub fn materialize_phi1(psfs: &PsfStack, height: usize, width: usize) -> Result<DenseOperator> {
    let n = height * width * psfs.bands();
    let bands = psfs.bands();
    materialize(n, n, |x| {
        let cube = HsiCube::new(height, width, bands, x.to_vec())?;
        Ok(forward::convolve_psf(&cube, psfs)?.data().to_vec())
    })
}

/// Dense filtering-and-integration operator, shape `(n * channels) x (n * bands)`.
pub fn materialize_phi2(filters: &FilterStack) -> Result<DenseOperator> {
    let n = filters.height() * filters.width();
    materialize(n * filters.channels(), n * filters.bands(), |x| {
        let cube = HsiCube::new(
            filters.height(),
            filters.width(),
            filters.bands(),
            x.to_vec(),
        )?;
        Ok(forward::apply_filter_integrate(&cube, filters)?
            .data()
            .to_vec())
    })
}

/// Dense full chain for a PSF-encoded system.
pub fn materialize_sdi(system: &forward::SdiSystem) -> Result<DenseOperator> {
    let (h, w) = (system.filters().height(), system.filters().width());
    let bands = system.filters().bands();
    let n = h * w;
    materialize(n * system.filters().channels(), n * bands, |x| {
        let cube = HsiCube::new(h, w, bands, x.to_vec())?;
        Ok(
            forward::sdi_forward(&cube, system, &forward::NoiseSpec::none())?
                .data()
                .to_vec(),
        )
    })
}

/// Dense mask-and-dispersion chain.
pub fn materialize_cassi(system: &forward::CassiSystem, bands: usize) -> Result<DenseOperator> {
    let (h, w) = (system.height(), system.width());
    let out_w = w + system.dispersion_step() * (bands - 1);
    materialize(h * out_w, h * w * bands, |x| {
        let cube = HsiCube::new(h, w, bands, x.to_vec())?;
        Ok(forward::cassi_forward(&cube, system)?.data().to_vec())
    })
}

/// Dense per-pixel-response chain.
pub fn materialize_ape(system: &forward::ApeSystem) -> Result<DenseOperator> {
    let r = system.response();
    let n = r.height() * r.width();
    materialize(n, n * r.bands(), |x| {
        let cube = HsiCube::new(r.height(), r.width(), r.bands(), x.to_vec())?;
        Ok(forward::ape_forward(&cube, system)?.data().to_vec())
    })
}

/// Materializes whichever system is referenced, with its scene dimensions.
pub fn materialize_system(system: &CsiSystem) -> Result<(DenseOperator, ReportDims)> {
    match system {
        CsiSystem::Sdi(s) => {
            let dims = ReportDims {
                height: s.filters().height(),
                width: s.filters().width(),
                bands: s.filters().bands(),
                channels: s.filters().channels(),
            };
            Ok((materialize_sdi(s)?, dims))
        }
        CsiSystem::Cassi { system: s, bands } => {
            let dims = ReportDims {
                height: s.height(),
                width: s.width(),
                bands: *bands,
                channels: 1,
            };
            Ok((materialize_cassi(s, *bands)?, dims))
        }
        CsiSystem::Ape(s) => {
            let dims = ReportDims {
                height: s.response().height(),
                width: s.response().width(),
                bands: s.response().bands(),
                channels: 1,
            };
            Ok((materialize_ape(s)?, dims))
        }
    }
}

/// Direct dense solve of the filtering subproblem normal equations
/// `(phi2^T phi2 + gamma I) j = phi2^T m + gamma phi1 i_k`.
pub fn dense_solve_filtering(
    phi1: &DenseOperator,
    phi2: &DenseOperator,
    measurement: &Measurement,
    i_k: &HsiCube,
    gamma: f64,
) -> Result<Vec<f64>> {
    if gamma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma must be > 0, got {gamma}"
        )));
    }
    let p2 = &phi2.matrix;
    let system = p2.transpose() * p2 + DMatrix::identity(phi2.cols(), phi2.cols()) * gamma;
    let rhs = p2.transpose() * DVector::from_column_slice(measurement.data())
        + DVector::from_vec(phi1.apply(i_k.data())) * gamma;
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidParameter("singular filtering system".into()))?;
    Ok(solution.as_slice().to_vec())
}

/// Direct dense complex solve of the convolution subproblem per band:
/// `(D^H D + phi I) x = D^H jf + phi uf` with `D = diag(otf)`.
pub fn dense_solve_convolution(
    otf: &OtfStack,
    jf: &FreqCube,
    uf: &FreqCube,
    phi: f64,
) -> Result<Vec<Complex64>> {
    if otf.height() != jf.height() || otf.width() != jf.width() || otf.bands() != jf.bands() {
        return Err(Error::DimensionMismatch(
            "OTF and spectrum dimensions differ".into(),
        ));
    }
    if !jf.same_shape(uf) {
        return Err(Error::DimensionMismatch(
            "spectra passed to the dense convolution solve differ in shape".into(),
        ));
    }
    let n = otf.height() * otf.width();
    check_size(n, n)?;
    let mut out = Vec::with_capacity(n * otf.bands());
    for b in 0..otf.bands() {
        let diag = otf.band(b);
        let mut system = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            system[(i, i)] = diag[i].conj() * diag[i] + Complex64::new(phi, 0.0);
        }
        let rhs = DVector::from_iterator(
            n,
            jf.band(b)
                .iter()
                .zip(uf.band(b))
                .zip(diag)
                .map(|((j, u), psi)| psi.conj() * j + Complex64::new(phi, 0.0) * u),
        );
        let solution = system
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidParameter("singular convolution system".into()))?;
        out.extend_from_slice(solution.as_slice());
    }
    Ok(out)
}

/// Condition number via full SVD: ratio of extreme singular values, with the
/// smallest clipped at `1e-300`.
pub fn condition_number(op: &DenseOperator) -> f64 {
    condition_number_matrix(&op.matrix)
}

pub fn condition_number_matrix(matrix: &DMatrix<f64>) -> f64 {
    let svd = matrix.clone().svd(false, false);
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let min = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .max(1e-300);
    max / min
}

/// Condition number estimated with power iteration (largest eigenvalue) and
/// inverse iteration (smallest), a route independent of the SVD.
///
/// Symmetric inputs are iterated directly; general inputs go through their
/// Gram matrix, whose eigenvalues are the squared singular values.
pub fn condition_number_power_estimate(matrix: &DMatrix<f64>, iterations: usize) -> f64 {
    let symmetric = (matrix - matrix.transpose()).norm() <= 1e-12 * matrix.norm();
    let (gram, take_sqrt) = if symmetric {
        (matrix.clone(), false)
    } else {
        (matrix.transpose() * matrix, true)
    };
    let n = gram.nrows();
    let start = DVector::from_iterator(n, (0..n).map(|i| 1.0 + (i as f64 * 0.7).sin()));

    let mut x = start.clone();
    x /= x.norm();
    for _ in 0..iterations {
        x = &gram * x;
        let norm = x.norm();
        if norm == 0.0 {
            return f64::INFINITY;
        }
        x /= norm;
    }
    let lambda_max = (x.transpose() * &gram * &x)[(0, 0)];

    let lu = gram.clone().lu();
    let mut y = start;
    y /= y.norm();
    for _ in 0..iterations {
        match lu.solve(&y) {
            Some(next) => {
                let norm = next.norm();
                if norm == 0.0 {
                    return f64::INFINITY;
                }
                y = next / norm;
            }
            None => return f64::INFINITY,
        }
    }
    let lambda_min = (y.transpose() * &gram * &y)[(0, 0)];
    let ratio = lambda_max / lambda_min.max(1e-300);
    if take_sqrt {
        ratio.sqrt()
    } else {
        ratio
    }
}

/// Relative Frobenius gap between the two sides of the matrix-inverse
/// identity used to reduce the filtering solve:
/// `(P^T P + g I)^-1  vs  g^-1 I - g^-1 P^T (I + P g^-1 P^T)^-1 P g^-1`.
///
/// Both sides are formed explicitly on purpose; this is a correctness probe,
/// not a solver path.
pub fn matrix_inverse_identity_gap(phi2: &DenseOperator, gamma: f64) -> Result<f64> {
    let p = &phi2.matrix;
    let (rows, cols) = (p.nrows(), p.ncols());
    let lhs = (p.transpose() * p + DMatrix::identity(cols, cols) * gamma)
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("singular lhs".into()))?;
    let inner = (DMatrix::identity(rows, rows) + p * p.transpose() / gamma)
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("singular inner term".into()))?;
    let rhs = DMatrix::identity(cols, cols) / gamma - (p.transpose() * inner * p) / (gamma * gamma);
    let gap = (&lhs - &rhs).norm();
    Ok(gap / lhs.norm())
}
