//! Lattice simulation of the 2D Liouville and sinh-Gordon fields coupled to
//! the Gaussian free field through a renormalisation-group flow.
//!
//! The crate is organised around the scale decomposition of the free-field
//! covariance `c_t = (-Δ + m² + 1/t)^{-1}`: Gaussian fields are sampled
//! spectrally, the renormalised potential and its gradient are estimated by
//! Monte Carlo, and the coupling between the interacting field and the free
//! field is realised by integrating a backward drift equation that shares its
//! noise increments with the free-field process bit for bit.  A verification
//! layer anchors every stochastic component to tiny-lattice brute-force
//! oracles (rejection sampling, tensor quadrature, closed-form spectral sums).
//!
//! Modules:
//! - [`lattice`]: discrete torus, Fourier calculus, lattice Laplacian
//! - [`scales`]: covariance decomposition and multiscale Gaussian sampling
//! - [`potential`]: Wick-ordered bare potentials and chaos masses
//! - [`renorm`]: Monte Carlo estimates of the renormalised potential/gradient
//! - [`flow`]: the coupled drift equation and minimiser extraction
//! - [`analysis`]: Sobolev/Hölder norms, dyadic block norms, scaling fits
//! - [`verify`]: brute-force oracles and identity checks
//! - [`harness`]: configuration, experiment registry, persistence, reporting
//!
//! Ensemble computations run data-parallel through [`exec`]; build with
//! `--no-default-features` for the sequential fallback.

pub mod analysis;
pub mod error;
pub mod exec;
pub mod flow;
pub mod harness;
pub mod lattice;
pub mod potential;
pub mod renorm;
pub mod rng;
pub mod scales;
pub mod stats;
pub mod tolerances;
pub mod verify;

pub use error::{Error, Result};
pub use lattice::{Field, SpectralField, TorusGrid};
pub use potential::{ModelKind, ModelParams, WickConvention};
pub use scales::{GffPath, ScaleGrid, ScaleParams};
