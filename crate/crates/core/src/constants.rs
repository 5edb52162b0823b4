//! Physical constants (CODATA 2018 exact values where defined).

/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// ⁴⁰Ca atomic mass in atomic mass units. The missing electron shifts this by
/// about 1.4e-5 relative, which is below every tolerance used in the crate.
pub const CA40_MASS_U: f64 = 39.962_590_9;

/// ⁴⁰Ca⁺ mass, kg.
pub const CA40_MASS: f64 = CA40_MASS_U * ATOMIC_MASS_UNIT;

/// S₁/₂ ↔ D₅/₂ quadrupole transition wavelength, m.
pub const CA40_729_WAVELENGTH: f64 = 729e-9;

/// Nominal field of the superconducting magnet, T.
pub const NOMINAL_FIELD: f64 = 1.865;
