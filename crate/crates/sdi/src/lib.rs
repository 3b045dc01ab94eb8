//! Spectral deconvolution imaging toolkit.
//!
//! Simulates snapshot spectral cameras that encode a hyperspectral cube by
//! per-band convolution with engineered kernels followed by filtered spectral
//! integration onto a 2-D sensor, and reconstructs the cube with a
//! hierarchical half-quadratic splitting solver whose two subproblems have
//! closed forms: the filtering step is element-wise in the spatial domain
//! (its Hessian is diagonal there) and the deconvolution step is element-wise
//! in the frequency domain (circulant operators are diagonalized by the DFT).
//! Every closed form is checked against brute-force dense solves on small
//! instances.
//!
//! Module map:
//! - [`cube`]: validated tensor types (cubes, kernel stacks, filter stacks,
//!   measurements, frequency diagonals).
//! - [`io`]: bit-exact binary containers and PGM previews.
//! - [`forward`]: the convolution-plus-filtering forward operator and the
//!   mask-dispersion / per-pixel-response comparison families.
//! - [`fourier`]: per-band FFTs, kernel-to-spectrum construction,
//!   frequency least squares, and the Hessian structure report.
//! - [`solver`]: the unfolding loop with its closed-form updates, schedules,
//!   and JSON configuration.
//! - [`denoise`]: the prox interface (identity, Gaussian smoothing, total
//!   variation, toy transformer).
//! - [`sfat`]: the forward-only spatial-frequency aggregation transformer.
//! - [`oracle`]: dense materializations and direct solves, the reference
//!   side of every equivalence check.
//! - [`metrics`]: PSNR / SSIM / spectral angle and CSV reporting.
//! - [`synth`]: seeded synthetic scenes, kernels, and filters.
//! - [`verify`]: randomized fast-vs-dense equivalence trials.
//! - [`cli`]: the command implementations behind the `sdi` binary.
//!
//! Start with the `examples/` directory: each file is a runnable walkthrough
//! of one capability.

pub mod cli;
pub mod cube;
pub mod defaults;
pub mod denoise;
pub mod error;
pub mod forward;
pub mod fourier;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod sfat;
pub mod solver;
pub mod synth;
pub mod verify;

pub use cube::{FilterStack, HsiCube, Measurement, OtfStack, PsfStack};
pub use denoise::Denoiser;
pub use error::{Error, Result};
pub use forward::{ApeSystem, CassiSystem, Encoding, NoiseSpec, SdiSystem};
pub use fourier::{ConversionStrategy, FreqCube};
pub use solver::{SolverConfig, SolverParams, SolverState};
