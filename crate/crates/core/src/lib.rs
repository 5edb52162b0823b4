//! Resolved-sideband cooling of one-, two- and three-ion Coulomb crystals in a
//! Penning trap.
//!
//! The crate is split along the physics:
//!
//! * [`trap`]: single-particle and crystal mode frequencies, stability
//!   conditions and Lamb-Dicke parameters.
//! * [`coupling`]: Laguerre-polynomial Rabi strengths over one- and two-mode
//!   phonon spaces, coupling minima and two-dimensional strength maps.
//! * [`cooling`]: phonon distributions, the incoherent pulse model, heating,
//!   cooling-sequence files and the sequence optimiser.
//! * [`spectroscopy`]: Doppler-spectrum synthesis, coherent Lamb-Dicke
//!   evolution, detection observables, Gaussian broadening and spectrum fits.
//! * [`scenario`]: parameter presets for the standard experimental
//!   configurations.
//!
//! Frequencies are in hertz throughout the public API; angular rates are only
//! formed internally.

pub mod constants;
pub mod cooling;
pub mod coupling;
mod error;
pub mod scenario;
pub mod spectroscopy;
pub mod trap;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
