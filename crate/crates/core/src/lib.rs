//! Spectral Galerkin simulation of the stochastic Navier-Stokes equations on
//! the periodic box `[0,1]^3`, together with Monte-Carlo checks of the
//! martingale-problem properties of its solutions.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: divergence-free Fourier fields, the Stokes operator and its
//!   powers, Sobolev norms, Leray projection and physical-space transforms.
//! * [`nonlinearity`]: the bilinear term `B(u,v) = P(u.grad)v`, as a brute-force
//!   triad sum and as a dealiased pseudo-spectral product.
//! * [`noise`]: trace-class covariances and counter-based Gaussian sampling.
//! * [`dynamics`]: time stepping for the full, cut-off, linear and controlled
//!   problems, stopping times and the derivative flow.
//! * [`verifier`]: ensemble statistics and verdicts.
//! * [`selection`]: a one-dimensional toy of selection by iterated maximisation
//!   of discounted functionals.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod noise;
pub mod nonlinearity;
pub mod selection;
pub mod spectral;
pub mod verifier;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use spectral::{SpectralField, WaveVector};
