//! Compressed-sensing recovery built around lossy compression codes.
//!
//! The central algorithm alternates a gradient step on the measurement
//! residual `||y - Ax||^2` with a projection onto the codebook of a
//! compression code, realized as one encode/decode round trip. The crate
//! provides:
//!
//! - [`signal`], [`rng`], [`metrics`], [`io`]: signal container, seeded
//!   reproducible randomness, quality metrics (MSE/PSNR/SNR), and the
//!   `.f64v` / binary PGM file formats.
//! - [`operators`]: Gaussian, Rademacher and partial-DCT measurement
//!   ensembles with apply/adjoint, spectral-norm estimation, and
//!   SNR-calibrated noise injection.
//! - [`codes`]: the encode/decode/project contract plus a quantized
//!   k-sparse code, a piecewise-polynomial code, and a subprocess adapter
//!   for external codecs.
//! - [`polyfit`]: constrained least-squares segment fitting and the
//!   dynamic-programming optimal segmentation behind the polynomial code.
//! - [`solver`]: the projected-gradient iteration with fixed or adaptive
//!   (derivative-free line search) step sizes, plus an exhaustive
//!   nearest-codeword oracle.
//! - [`theory`]: evaluators for the solver's convergence bounds and
//!   Monte Carlo checks of the concentration inequalities they rest on.

pub mod codes;
mod error;
pub mod io;
pub mod metrics;
pub mod operators;
pub mod polyfit;
pub mod rng;
pub mod signal;
pub mod solver;
pub mod theory;

pub use error::Error;
pub use signal::Signal;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
