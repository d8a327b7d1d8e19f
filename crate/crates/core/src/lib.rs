//! Noncoherent energy-based MIMO detection with near-field and far-field
//! spatial correlation models.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] places the uniform planar array and computes field-region
//!   boundaries.
//! * [`channel`] draws local scattering clusters, builds spherical-wavefront
//!   (near-field) and planar-wavefront (far-field) covariance matrices and
//!   samples correlated Rayleigh channels.
//! * [`subspace`] extracts dominant eigenspaces and compares them on the
//!   Grassmannian (principal angles, chordal distance).
//! * [`constellation`] holds unipolar PAM level sets and power control.
//! * [`detection`] implements the quadratic (energy-based) detectors with a
//!   dense and a low-rank scoring path.
//! * [`simulation`] is the seeded, worker-count independent Monte Carlo
//!   engine for symbol error rates.
//! * [`experiment`] wires configs, presets and CSV output together.

pub mod channel;
pub mod constellation;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod rng;
pub mod simulation;
pub mod subspace;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
