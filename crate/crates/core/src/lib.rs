//! Simulation and verification laboratory for sojourn functionals of
//! spatiotemporal Gaussian random fields with long memory in time.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! covariance model -> field simulation -> sojourn statistics -> limit checks
//!        |                   |                    |
//!     specfun            geometry           hermite/variance
//! ```
//!
//! * [`specfun`] — Hermite polynomials, Gaussian density/CDF, Mittag-Leffler,
//!   incomplete Beta, Gauss-Legendre/Hermite quadrature.
//! * [`geometry`] — convex bodies and pair-distance densities.
//! * [`covariance`] — separable and Gneiting-class space-time correlation
//!   models with long-range-dependence diagnostics.
//! * [`hermite`] — Hermite expansions of threshold functionals and rank
//!   detection.
//! * [`variance`] — chaos variances sigma^2_{n,K}(T), asymptotic constants,
//!   exponent fitting.
//! * [`fieldsim`] — exact (Cholesky) and FFT (circulant embedding) Gaussian
//!   field samplers on body-clipped lattices.
//! * [`sojourn`] — sojourn functionals and normalized limit-theorem statistics
//!   computed from field samples.
//! * [`rosenblatt`] — the second-chaos (Rosenblatt-type) limit: spectral
//!   kernel, cumulants, and a discretized sampler.
//! * [`stats`] — Kolmogorov-Smirnov tests and moment reports.
//! * [`experiment`] — declarative Monte Carlo experiments with reproducible
//!   seeding and CSV/JSON reporting.

pub mod error;
pub mod experiment;
pub mod covariance;
pub mod fieldsim;
pub mod geometry;
pub mod hermite;
pub mod rng;
pub mod rosenblatt;
pub mod sojourn;
pub mod stats;
pub mod specfun;
pub mod variance;

pub use error::{Error, Result};
