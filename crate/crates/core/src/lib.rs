//! Numerical laboratory for small perturbations of the planar kink of the
//! cubic Klein-Gordon (phi^4) equation in three space dimensions.
//!
//! The kink is `th(x) = tanh(x/sqrt 2)`, constant in the transverse
//! variables `y`.  A perturbation `w` of the kink obeys
//!
//! ```text
//! w_tt = Δw + w - 3 th² w - 3 th w² - w³
//! ```
//!
//! The modules cover the linearized operator `H = -d²/dx² - 3 sech²(x/sqrt 2)`
//! and its spectral data, the modulation splitting of `w` into a translation,
//! an internal-mode amplitude and a dispersive remainder, a 3D leapfrog
//! integrator, hyperboloidal coordinates with their vector fields and
//! Morawetz fluxes, the normal form of the internal-mode oscillator, and the
//! decay-fitting harness tying these together.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod fields;
pub mod hyperbolic;
pub mod io;
pub mod kink;
pub mod modulation;
pub mod normalform;
pub mod quadrature;
pub mod runner;
pub mod scattering;
pub mod spectral;

pub use error::{LabError, Result};

/// Crate version string embedded in output provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
