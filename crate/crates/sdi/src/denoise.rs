//! The denoising prox behind a uniform interface.
//!
//! `apply(cube, chi)` solves (exactly or approximately) the proximal problem
//! `min_u chi/2 ||cube - u||^2 + R(u)`, so larger `chi` means a weaker prior:
//! the smoothing kernel width scales with `sqrt(1/chi)` and the total
//! variation weight is `1/chi`.
//!
//! Total variation runs per band with a fixed-iteration dual projection, no
//! cross-band coupling; spectral coupling is the transformer denoiser's job.

use crate::cube::{HsiCube, OtfStack, PsfStack};
use crate::error::{Error, Result};
use crate::forward::convolve_psf;
use crate::sfat::{sfat_forward, SfatConfig, SfatWeights};

/// Default dual-projection iteration count for total variation.
pub const TV_ITERATIONS: usize = 30;
/// Default dual step size, just under the practical 1/4 stability bound.
pub const TV_STEP: f64 = 0.248;

/// A denoising prox operator. Stateless per call and safe to share.
#[derive(Debug, Clone)]
pub enum Denoiser {
    /// Returns the input unchanged.
    Identity,
    /// Per-band circular convolution with a Gaussian of width
    /// `width_scale * sqrt(1/chi)`.
    GaussianSmooth { width_scale: f64 },
    /// Per-band Rudin-Osher-Fatemi prox with weight `1/chi`, solved by a
    /// fixed number of dual-projection iterations.
    TotalVariation { iterations: usize, step: f64 },
    /// Forward pass of the seeded toy transformer.
    SfatToy {
        config: SfatConfig,
        otf: Option<OtfStack>,
    },
}

impl Denoiser {
    pub fn default_total_variation() -> Self {
        Denoiser::TotalVariation {
            iterations: TV_ITERATIONS,
            step: TV_STEP,
        }
    }

    /// Builds a denoiser from the JSON config selector.
    pub fn from_config(
        kind: &str,
        params: &serde_json::Value,
        otf: Option<OtfStack>,
    ) -> Result<Self> {
        let config_err = |path: &str, message: String| Error::Config {
            path: format!("denoiser.params.{path}"),
            message,
        };
        match kind {
            "identity" => Ok(Denoiser::Identity),
            "gaussian-smooth" => {
                let width_scale = match params.get("widthScale") {
                    Some(v) => v
                        .as_f64()
                        .ok_or_else(|| config_err("widthScale", "expected a number".into()))?,
                    None => 1.0,
                };
                if width_scale <= 0.0 {
                    return Err(config_err("widthScale", "must be > 0".into()));
                }
                Ok(Denoiser::GaussianSmooth { width_scale })
            }
            "total-variation" => {
                let iterations = match params.get("iterations") {
                    Some(v) => v
                        .as_u64()
                        .ok_or_else(|| config_err("iterations", "expected an integer".into()))?
                        as usize,
                    None => TV_ITERATIONS,
                };
                if iterations == 0 {
                    return Err(config_err("iterations", "must be >= 1".into()));
                }
                let step = match params.get("step") {
                    Some(v) => v
                        .as_f64()
                        .ok_or_else(|| config_err("step", "expected a number".into()))?,
                    None => TV_STEP,
                };
                if step.is_nan() || step <= 0.0 {
                    return Err(config_err("step", "must be > 0".into()));
                }
                Ok(Denoiser::TotalVariation { iterations, step })
            }
            "sfat-toy" => {
                let config: SfatConfig = if params.is_null() {
                    SfatConfig::default()
                } else {
                    serde_json::from_value(params.clone()).map_err(|e| Error::Config {
                        path: "denoiser.params".into(),
                        message: e.to_string(),
                    })?
                };
                config.validate()?;
                Ok(Denoiser::SfatToy { config, otf })
            }
            other => Err(Error::Config {
                path: "denoiser.kind".into(),
                message: format!(
                    "unknown kind `{other}` (expected identity, gaussian-smooth, total-variation, sfat-toy)"
                ),
            }),
        }
    }

    /// Applies the prox at strength `chi`, preserving dimensions.
    pub fn apply(&self, cube: &HsiCube, chi: f64) -> Result<HsiCube> {
        if chi.is_nan() || chi <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "chi must be > 0, got {chi}"
            )));
        }
        match self {
            Denoiser::Identity => Ok(cube.clone()),
            Denoiser::GaussianSmooth { width_scale } => {
                gaussian_smooth(cube, width_scale * (1.0 / chi).sqrt())
            }
            Denoiser::TotalVariation { iterations, step } => {
                if *iterations == 0 {
                    return Err(Error::InvalidParameter(
                        "total variation needs at least one iteration".into(),
                    ));
                }
                Ok(tv_denoise(cube, 1.0 / chi, *iterations, *step))
            }
            Denoiser::SfatToy { config, otf } => {
                let weights = SfatWeights::init(config, cube.bands())?;
                sfat_forward(cube, chi, otf.as_ref(), config, &weights)
            }
        }
    }
}

fn gaussian_smooth(cube: &HsiCube, sigma: f64) -> Result<HsiCube> {
    if sigma < 1e-6 {
        return Ok(cube.clone());
    }
    let max_radius = (cube.height().min(cube.width()) - 1) / 2;
    let radius = ((3.0 * sigma).ceil() as usize).min(max_radius);
    if radius == 0 {
        return Ok(cube.clone());
    }
    let k = 2 * radius + 1;
    let mut kernel = vec![0.0; k * k];
    for r in 0..k {
        for c in 0..k {
            let dr = r as f64 - radius as f64;
            let dc = c as f64 - radius as f64;
            kernel[r * k + c] = (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp();
        }
    }
    let per_band: Vec<f64> = (0..cube.bands()).flat_map(|_| kernel.clone()).collect();
    let psf = PsfStack::new(k, k, cube.bands(), per_band)?.normalized();
    convolve_psf(cube, &psf)
}

/// Chambolle-style dual projection for the per-band ROF prox
/// `min_u 0.5 ||u - g||^2 + weight * TV(u)`.
fn tv_denoise(cube: &HsiCube, weight: f64, iterations: usize, step: f64) -> HsiCube {
    if weight == 0.0 {
        return cube.clone();
    }
    let (h, w) = (cube.height(), cube.width());
    let n = h * w;
    let mut out = Vec::with_capacity(cube.data().len());
    let mut p1 = vec![0.0; n];
    let mut p2 = vec![0.0; n];
    let mut div = vec![0.0; n];
    let mut work = vec![0.0; n];

    for b in 0..cube.bands() {
        let g = cube.band(b);
        p1.iter_mut().for_each(|v| *v = 0.0);
        p2.iter_mut().for_each(|v| *v = 0.0);

        for _ in 0..iterations {
            divergence(&p1, &p2, h, w, &mut div);
            for i in 0..n {
                work[i] = div[i] - g[i] / weight;
            }
            // Forward differences with Neumann boundary; the normalized
            // update keeps |p| <= 1 pointwise.
            for r in 0..h {
                for c in 0..w {
                    let i = r * w + c;
                    let gx = if r + 1 < h {
                        work[i + w] - work[i]
                    } else {
                        0.0
                    };
                    let gy = if c + 1 < w {
                        work[i + 1] - work[i]
                    } else {
                        0.0
                    };
                    let denom = 1.0 + step * (gx * gx + gy * gy).sqrt();
                    p1[i] = (p1[i] + step * gx) / denom;
                    p2[i] = (p2[i] + step * gy) / denom;
                }
            }
        }
        divergence(&p1, &p2, h, w, &mut div);
        out.extend(g.iter().zip(&div).map(|(v, d)| v - weight * d));
    }
    HsiCube::from_raw(h, w, cube.bands(), out)
}

fn divergence(p1: &[f64], p2: &[f64], h: usize, w: usize, out: &mut [f64]) {
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let d1 = p1[i] - if r > 0 { p1[i - w] } else { 0.0 };
            let d2 = p2[i] - if c > 0 { p2[i - 1] } else { 0.0 };
            out[i] = d1 + d2;
        }
    }
}
