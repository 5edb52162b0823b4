//! Penning-trap mode structure.
//!
//! All frequencies are ordinary frequencies in hertz. The trap is described
//! by its magnetic field and axial frequency; the radial motion follows from
//! the modified-cyclotron/magnetron pair and, for crystals, from the rotation
//! frequency through the effective radial confinement in the rotating frame.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::constants::{CA40_729_WAVELENGTH, CA40_MASS, ELEMENTARY_CHARGE, NOMINAL_FIELD, PLANCK};
use crate::{Error, Result};

/// Static trap and ion parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Tesla.
    pub magnetic_field: f64,
    /// Kilogram.
    pub ion_mass: f64,
    /// Coulomb.
    pub ion_charge: f64,
    /// Wavelength of the spectroscopy laser, metre.
    pub wavelength: f64,
    /// Single-ion axial frequency ν_z, hertz.
    pub axial_frequency: f64,
}

impl TrapConfig {
    /// Builds a validated configuration.
    pub fn new(
        magnetic_field: f64,
        ion_mass: f64,
        ion_charge: f64,
        wavelength: f64,
        axial_frequency: f64,
    ) -> Result<Self> {
        let cfg = TrapConfig { magnetic_field, ion_mass, ion_charge, wavelength, axial_frequency };
        cfg.validate()?;
        Ok(cfg)
    }

    /// ⁴⁰Ca⁺ at the nominal 1.865 T field probed at 729 nm.
    pub fn calcium40(axial_frequency: f64) -> Result<Self> {
        Self::new(NOMINAL_FIELD, CA40_MASS, ELEMENTARY_CHARGE, CA40_729_WAVELENGTH, axial_frequency)
    }

    /// ⁴⁰Ca⁺ with the field chosen so that the cyclotron frequency equals
    /// `cyclotron_hz` exactly.
    pub fn calcium40_with_cyclotron(cyclotron_hz: f64, axial_frequency: f64) -> Result<Self> {
        let field = 2.0 * PI * CA40_MASS * cyclotron_hz / ELEMENTARY_CHARGE;
        Self::new(field, CA40_MASS, ELEMENTARY_CHARGE, CA40_729_WAVELENGTH, axial_frequency)
    }

    /// Same trap at a different axial frequency.
    pub fn with_axial_frequency(&self, axial_frequency: f64) -> Result<Self> {
        Self::new(self.magnetic_field, self.ion_mass, self.ion_charge, self.wavelength, axial_frequency)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("magnetic_field", self.magnetic_field),
            ("ion_mass", self.ion_mass),
            ("ion_charge", self.ion_charge),
            ("wavelength", self.wavelength),
            ("axial_frequency", self.axial_frequency),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, format!("must be strictly positive, got {value}")));
            }
        }
        radial_frequencies(self).map(|_| ())
    }
}

/// ν_c = qB / (2πM).
pub fn cyclotron_frequency(cfg: &TrapConfig) -> f64 {
    cfg.ion_charge * cfg.magnetic_field / (2.0 * PI * cfg.ion_mass)
}

/// Modified-cyclotron and magnetron frequencies `(ν₊, ν₋)`.
pub fn radial_frequencies(cfg: &TrapConfig) -> Result<(f64, f64)> {
    let nu_c = cyclotron_frequency(cfg);
    let nu_z = cfg.axial_frequency;
    let radicand = nu_c * nu_c / 4.0 - nu_z * nu_z / 2.0;
    if radicand < 0.0 {
        return Err(Error::UnstableTrap { radicand });
    }
    let root = radicand.sqrt();
    Ok((nu_c / 2.0 + root, nu_c / 2.0 - root))
}

/// Effective radial trapping frequency in the frame rotating at `rotation_hz`.
pub fn effective_radial_frequency(rotation_hz: f64, cfg: &TrapConfig) -> Result<f64> {
    let nu_c = cyclotron_frequency(cfg);
    let nu_z = cfg.axial_frequency;
    let radicand = rotation_hz * (nu_c - rotation_hz) - nu_z * nu_z / 2.0;
    if radicand < 0.0 {
        return Err(Error::UnstableConfiguration(format!(
            "rotation at {rotation_hz} Hz gives no radial confinement (ν_eff² = {radicand:.6e} Hz²)"
        )));
    }
    Ok(radicand.sqrt())
}

/// Both rotation frequencies compatible with a measured tilt-mode frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationEstimate {
    /// Root closer to the magnetron frequency.
    pub primary: f64,
    /// Mirror root about ν_c/2.
    pub secondary: f64,
}

/// Inverts ν_tilt² = ν_z² − ν_eff(ν_r)² for the rotation frequency.
pub fn rotation_from_tilt(tilt_hz: f64, cfg: &TrapConfig) -> Result<RotationEstimate> {
    let nu_z = cfg.axial_frequency;
    if !(tilt_hz > 0.0 && tilt_hz <= nu_z) {
        return Err(Error::invalid(
            "tilt frequency",
            format!("must lie in (0, ν_z = {nu_z}] Hz, got {tilt_hz}"),
        ));
    }
    let nu_c = cyclotron_frequency(cfg);
    let eff_sq = nu_z * nu_z - tilt_hz * tilt_hz;
    // ν_r (ν_c − ν_r) = ν_eff² + ν_z²/2
    let product = eff_sq + nu_z * nu_z / 2.0;
    let disc = nu_c * nu_c / 4.0 - product;
    if disc < 0.0 {
        return Err(Error::NoRealRoot { tilt_hz });
    }
    let root = disc.sqrt();
    let upper = nu_c / 2.0 + root;
    // product / upper avoids cancellation in ν_c/2 − root when the root is large
    let lower = if upper > 0.0 { product / upper } else { nu_c / 2.0 - root };
    Ok(RotationEstimate { primary: lower, secondary: upper })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    AxialString,
    Planar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalConfig {
    pub ion_count: usize,
    pub geometry: Geometry,
    /// Crystal rotation frequency, hertz. Required for planar crystals.
    pub rotation_frequency: Option<f64>,
}

impl CrystalConfig {
    pub fn single_ion() -> Self {
        CrystalConfig { ion_count: 1, geometry: Geometry::AxialString, rotation_frequency: None }
    }

    pub fn string(ion_count: usize) -> Self {
        CrystalConfig { ion_count, geometry: Geometry::AxialString, rotation_frequency: None }
    }

    pub fn planar(ion_count: usize, rotation_frequency: f64) -> Self {
        CrystalConfig { ion_count, geometry: Geometry::Planar, rotation_frequency: Some(rotation_frequency) }
    }

    /// Checks the crystal against the trap.
    ///
    /// A string needs ν_eff > ν_z. Without a rotation frequency the most
    /// favourable case ν_r = ν_c/2 is used, which is a necessary condition.
    /// A planar crystal needs ν₋ < ν_r < ν₊ and ν_eff(ν_r) < ν_z.
    pub fn validate(&self, trap: &TrapConfig) -> Result<()> {
        if !(1..=3).contains(&self.ion_count) {
            return Err(Error::invalid("ion_count", format!("must be 1, 2 or 3, got {}", self.ion_count)));
        }
        let (nu_plus, nu_minus) = radial_frequencies(trap)?;
        if self.ion_count == 1 {
            return Ok(());
        }
        let nu_z = trap.axial_frequency;
        match self.geometry {
            Geometry::AxialString => {
                if self.ion_count == 3 {
                    return Err(Error::invalid("ion_count", "three-ion strings are not modelled"));
                }
                let rotation = self.rotation_frequency.unwrap_or(cyclotron_frequency(trap) / 2.0);
                let nu_eff = effective_radial_frequency(rotation, trap)?;
                if nu_eff <= nu_z {
                    return Err(Error::UnstableConfiguration(format!(
                        "axial string needs ν_eff > ν_z, got ν_eff = {nu_eff:.1} Hz ≤ {nu_z:.1} Hz"
                    )));
                }
            }
            Geometry::Planar => {
                let rotation = self.rotation_frequency.ok_or_else(|| {
                    Error::invalid("rotation_frequency", "planar crystals need a rotation frequency")
                })?;
                if !(rotation > nu_minus && rotation < nu_plus) {
                    return Err(Error::UnstableConfiguration(format!(
                        "rotation frequency {rotation:.1} Hz outside (ν₋, ν₊) = ({nu_minus:.1}, {nu_plus:.1}) Hz"
                    )));
                }
                let nu_eff = effective_radial_frequency(rotation, trap)?;
                if nu_eff >= nu_z {
                    return Err(Error::UnstableConfiguration(format!(
                        "planar crystal needs ν_eff < ν_z, got ν_eff = {nu_eff:.1} Hz ≥ {nu_z:.1} Hz"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeLabel {
    #[serde(rename = "COM")]
    Com,
    Breathing,
    Tilt,
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModeLabel::Com => "COM",
            ModeLabel::Breathing => "Breathing",
            ModeLabel::Tilt => "Tilt",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxialMode {
    pub label: ModeLabel,
    /// Hertz.
    pub frequency: f64,
    /// Lamb-Dicke parameter seen by each ion.
    pub lamb_dicke: Vec<f64>,
}

impl AxialMode {
    /// Lamb-Dicke parameter of the mode. All ions see the same magnitude in
    /// every configuration modelled here.
    pub fn eta(&self) -> f64 {
        self.lamb_dicke[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub modes: Vec<AxialMode>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn find(&self, label: ModeLabel) -> Option<&AxialMode> {
        self.modes.iter().find(|m| m.label == label)
    }
}

/// Single-ion Lamb-Dicke parameter η₀ = (1/λ)·√(h / (2Mν_z)).
pub fn single_ion_lamb_dicke(trap: &TrapConfig) -> f64 {
    (PLANCK / (2.0 * trap.ion_mass * trap.axial_frequency)).sqrt() / trap.wavelength
}

/// Axial mode frequencies of the crystal, in the order COM first.
fn mode_frequencies(trap: &TrapConfig, crystal: &CrystalConfig) -> Result<Vec<(ModeLabel, f64)>> {
    crystal.validate(trap)?;
    let nu_z = trap.axial_frequency;
    let modes = match (crystal.ion_count, crystal.geometry) {
        (1, _) => vec![(ModeLabel::Com, nu_z)],
        (2, Geometry::AxialString) => {
            vec![(ModeLabel::Com, nu_z), (ModeLabel::Breathing, 3f64.sqrt() * nu_z)]
        }
        (n, Geometry::Planar) => {
            // validated above: rotation present and ν_eff < ν_z
            let rotation = crystal.rotation_frequency.unwrap_or_default();
            let nu_eff = effective_radial_frequency(rotation, trap)?;
            let tilt = (nu_z * nu_z - nu_eff * nu_eff).sqrt();
            let mut modes = vec![(ModeLabel::Com, nu_z)];
            modes.extend(std::iter::repeat((ModeLabel::Tilt, tilt)).take(n - 1));
            modes
        }
        (n, g) => return Err(Error::invalid("crystal", format!("{n} ions in {g:?} geometry not modelled"))),
    };
    Ok(modes)
}

/// Lamb-Dicke parameter of each mode, in [`mode_set`] order.
///
/// The COM mode of an N-ion crystal moves N times the single-ion mass, so
/// η_COM = η₀/√N. The two-ion breathing mode has η_B = η₀/√(2√3). Planar tilt
/// modes are assigned η_COM.
pub fn lamb_dicke_parameters(trap: &TrapConfig, crystal: &CrystalConfig) -> Result<Vec<f64>> {
    let eta0 = single_ion_lamb_dicke(trap);
    let n = crystal.ion_count as f64;
    let eta_com = eta0 / n.sqrt();
    Ok(mode_frequencies(trap, crystal)?
        .into_iter()
        .map(|(label, _)| match label {
            ModeLabel::Com | ModeLabel::Tilt => eta_com,
            ModeLabel::Breathing => eta0 / (SQRT_2 * 3f64.sqrt().sqrt()),
        })
        .collect())
}

/// Axial modes of the crystal with their per-ion Lamb-Dicke parameters.
pub fn mode_set(trap: &TrapConfig, crystal: &CrystalConfig) -> Result<ModeSet> {
    let freqs = mode_frequencies(trap, crystal)?;
    let etas = lamb_dicke_parameters(trap, crystal)?;
    let modes = freqs
        .into_iter()
        .zip(etas)
        .map(|((label, frequency), eta)| AxialMode {
            label,
            frequency,
            lamb_dicke: vec![eta; crystal.ion_count],
        })
        .collect();
    Ok(ModeSet { modes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn trap_715(nu_z: f64) -> TrapConfig {
        TrapConfig::calcium40_with_cyclotron(715e3, nu_z).unwrap()
    }

    #[test]
    fn cyclotron_at_nominal_field() {
        let trap = TrapConfig::calcium40(162e3).unwrap();
        let nu_c = cyclotron_frequency(&trap);
        assert!((nu_c - 715e3).abs() < 2e3, "{nu_c}");
    }

    #[test]
    fn cyclotron_zero_field_and_linearity() {
        let mut trap = TrapConfig::calcium40(162e3).unwrap();
        let base = cyclotron_frequency(&trap);
        trap.magnetic_field *= 2.0;
        assert_relative_eq!(cyclotron_frequency(&trap), 2.0 * base, max_relative = 1e-15);
        trap.magnetic_field = 0.0;
        assert_eq!(cyclotron_frequency(&trap), 0.0);
    }

    #[test]
    fn magnetron_at_346k() {
        let (plus, minus) = radial_frequencies(&trap_715(346e3)).unwrap();
        // 357.5 kHz − √(357.5² − 346²/2) kHz
        assert_relative_eq!(minus, 96_831.149, max_relative = 1e-7);
        assert_relative_eq!(plus + minus, 715e3, max_relative = 1e-12);
    }

    #[test]
    fn free_cyclotron_limit_and_boundary() {
        let mut trap = trap_715(100e3);
        trap.axial_frequency = 0.0;
        let (plus, minus) = radial_frequencies(&trap).unwrap();
        assert_relative_eq!(plus, 715e3, max_relative = 1e-12);
        assert!(minus.abs() < 1e-6);

        trap.axial_frequency = 715e3 / SQRT_2;
        let (plus, minus) = radial_frequencies(&trap).unwrap();
        assert_relative_eq!(plus, 357.5e3, max_relative = 1e-6);
        assert_relative_eq!(minus, 357.5e3, max_relative = 1e-6);

        trap.axial_frequency = 600e3;
        assert!(matches!(radial_frequencies(&trap), Err(Error::UnstableTrap { .. })));
        assert!(TrapConfig::calcium40_with_cyclotron(715e3, 600e3).is_err());
    }

    #[test]
    fn effective_frequency_values() {
        let trap = trap_715(162e3);
        assert_relative_eq!(effective_radial_frequency(357.5e3, &trap).unwrap(), 338_650.0, max_relative = 2e-5);

        let trap = trap_715(346e3);
        let eff = effective_radial_frequency(106e3, &trap).unwrap();
        assert!((eff - 68.5e3).abs() < 0.5e3, "{eff}");
        let tilt = (346e3f64.powi(2) - eff * eff).sqrt();
        assert!((tilt - 339e3).abs() < 0.5e3, "{tilt}");
    }

    #[test]
    fn effective_frequency_boundary_and_error() {
        let trap = trap_715(346e3);
        let (_, minus) = radial_frequencies(&trap).unwrap();
        assert!(effective_radial_frequency(minus, &trap).unwrap() < 1.0);
        assert!(matches!(
            effective_radial_frequency(50e3, &trap),
            Err(Error::UnstableConfiguration(_))
        ));
    }

    #[test]
    fn two_ion_string_modes() {
        let trap = TrapConfig::calcium40(162e3).unwrap();
        let modes = mode_set(&trap, &CrystalConfig::string(2)).unwrap();
        assert_eq!(modes.len(), 2);
        assert_eq!(modes.modes[1].label, ModeLabel::Breathing);
        assert!((modes.modes[1].frequency - 280.6e3).abs() < 0.1e3);
        assert_relative_eq!(modes.modes[1].frequency / modes.modes[0].frequency, 3f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn single_ion_mode() {
        let trap = TrapConfig::calcium40(162e3).unwrap();
        let modes = mode_set(&trap, &CrystalConfig::single_ion()).unwrap();
        assert_eq!(modes.len(), 1);
        assert_eq!(modes.modes[0].frequency, 162e3);
        assert_eq!(modes.modes[0].eta(), single_ion_lamb_dicke(&trap));
    }

    #[test]
    fn three_ion_planar_has_degenerate_tilts() {
        let trap = TrapConfig::calcium40(379e3).unwrap();
        let (_, minus) = radial_frequencies(&trap).unwrap();
        let crystal = CrystalConfig::planar(3, minus + 10e3);
        let modes = mode_set(&trap, &crystal).unwrap();
        assert_eq!(modes.len(), 3);
        assert_eq!(modes.modes[1].label, ModeLabel::Tilt);
        assert_eq!(modes.modes[1].frequency, modes.modes[2].frequency);
        assert!(modes.modes[1].frequency < 379e3);
    }

    #[test]
    fn planar_rotation_outside_window_is_rejected() {
        let trap = TrapConfig::calcium40(346e3).unwrap();
        let (plus, minus) = radial_frequencies(&trap).unwrap();
        for rotation in [minus - 1e3, plus + 1e3] {
            let err = mode_set(&trap, &CrystalConfig::planar(2, rotation)).unwrap_err();
            assert!(matches!(err, Error::UnstableConfiguration(_)), "{err}");
        }
    }

    #[test]
    fn string_needs_weak_axial_confinement() {
        // ν_z above the ν_r = ν_c/2 maximum of ν_eff forces a planar crystal
        let trap = TrapConfig::calcium40(400e3).unwrap();
        assert!(CrystalConfig::string(2).validate(&trap).is_err());
        let trap = TrapConfig::calcium40(162e3).unwrap();
        assert!(CrystalConfig::string(2).validate(&trap).is_ok());
    }

    #[test]
    fn lamb_dicke_values() {
        let trap = TrapConfig::calcium40(162e3).unwrap();
        let eta0 = single_ion_lamb_dicke(&trap);
        assert!((eta0 - 0.24).abs() < 0.005, "{eta0}");
        let etas = lamb_dicke_parameters(&trap, &CrystalConfig::string(2)).unwrap();
        assert!((etas[0] - 0.17).abs() < 0.005);
        assert!((etas[1] - 0.13).abs() < 0.005);

        let trap = TrapConfig::calcium40(353e3).unwrap();
        let etas = lamb_dicke_parameters(&trap, &CrystalConfig::planar(2, 110e3)).unwrap();
        assert!((etas[0] - 0.115).abs() < 0.003, "{}", etas[0]);
        assert_eq!(etas[0], etas[1]);
    }

    #[test]
    fn lamb_dicke_quarter_frequency_scaling() {
        let trap = TrapConfig::calcium40(100e3).unwrap();
        let quad = trap.with_axial_frequency(400e3).unwrap();
        assert_relative_eq!(
            single_ion_lamb_dicke(&quad),
            single_ion_lamb_dicke(&trap) / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn rotation_from_measured_tilt() {
        let trap = trap_715(346e3);
        let est = rotation_from_tilt(339e3, &trap).unwrap();
        assert!((est.primary - 106e3).abs() < 3e3, "{}", est.primary);
        assert_relative_eq!(est.primary + est.secondary, 715e3, max_relative = 1e-12);
        let (_, minus) = radial_frequencies(&trap).unwrap();
        assert!((est.primary - minus - 9e3).abs() < 2e3);
    }

    #[test]
    fn tilt_equal_to_axial_sits_on_boundary() {
        let trap = trap_715(346e3);
        let est = rotation_from_tilt(346e3, &trap).unwrap();
        let (_, minus) = radial_frequencies(&trap).unwrap();
        assert_relative_eq!(est.primary, minus, max_relative = 1e-9);
        assert!(rotation_from_tilt(350e3, &trap).is_err());
        assert!(rotation_from_tilt(0.0, &trap).is_err());
    }

    #[test]
    fn tilt_with_no_real_rotation() {
        // a very low tilt frequency needs ν_eff above the ν_c/2 maximum
        let trap = trap_715(346e3);
        assert!(matches!(rotation_from_tilt(10e3, &trap), Err(Error::NoRealRoot { .. })));
    }
}
