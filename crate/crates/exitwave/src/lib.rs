//! TEM focal-series simulation and joint exit-wave reconstruction.
//!
//! The forward model renders a TEM image as a weighted autocorrelation of
//! the complex exit wave, with a transmission-cross-coefficient weight
//! built from lens aberrations, the objective aperture and partial
//! coherence envelopes. The inverse problem jointly recovers the exit
//! wave and per-image rigid translations from a focal series by
//! minimizing a Tikhonov-regularized least-squares functional with a
//! Fletcher-Reeves conjugate-gradient solver.
//!
//! Module map:
//! - [`field`]: sampled fields, spectral transforms, modulation, norms
//! - [`wcc`]: weighted cross-correlations (direct oracle + spectral paths)
//! - [`tcc`]: aberrations, pupil, transmission cross-coefficients and
//!   their factorized kernels
//! - [`forward`]: image and focal-series simulation
//! - [`objective`]: the joint functional, its gradients and line
//!   restrictions
//! - [`optimizer`]: initialization, gauge handling and the CG solver
//! - [`analysis`]: executable probes (coercivity, factorization
//!   convergence, gauge invariance)
//! - [`config`]: run configuration and the flat key/value format

pub mod analysis;
pub mod config;
pub mod error;
#[cfg(test)]
pub(crate) mod testutil;
pub mod field;
pub mod forward;
pub mod objective;
pub mod optimizer;
pub mod tcc;
pub mod wcc;

pub use error::{Error, Result};
