//! Named parameter sets for the experimental situations studied: a single
//! ion and a two-ion string at 162 kHz, before and after sideband cooling,
//! and a two-ion planar crystal at 346 kHz.

use serde::{Deserialize, Serialize};

use crate::cooling::PulseModel;
use crate::spectroscopy::{LdMode, Observable, SpectrumModel};
use crate::trap::{mode_set, rotation_from_tilt, CrystalConfig, ModeSet, TrapConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub trap: TrapConfig,
    pub crystal: CrystalConfig,
    /// Thermal mean phonon number of each mode in the starting state.
    pub nbar: Vec<f64>,
    /// Carrier Rabi frequency Ω₀/2π, hertz.
    pub rabi_frequency: f64,
    /// Effective decay rate Γ/2π during cooling pulses, hertz.
    pub decay_rate: f64,
    /// Probe pulse length, seconds.
    pub probe_duration: f64,
    /// Carrier shift of each ion, hertz.
    pub carrier_offsets: Vec<f64>,
    /// Gaussian broadening of each mode's sidebands, hertz.
    pub sigma: Vec<f64>,
    pub observable: Observable,
}

pub const PRESETS: [&str; 5] = ["fig2-single-162k", "fig3-string-162k", "doppler-162k", "string-cooled-162k", "planar-346k"];

const STRING_SPLIT: f64 = 2e3;

impl Scenario {
    pub fn preset(name: &str) -> Result<Self> {
        let trap = TrapConfig::calcium40(162e3)?;
        let string = |description: &str, nbar: Vec<f64>, duration: f64| Scenario {
            name: name.to_string(),
            description: description.to_string(),
            trap,
            crystal: CrystalConfig::string(2),
            nbar,
            rabi_frequency: 14e3,
            decay_rate: 5e3,
            probe_duration: duration,
            carrier_offsets: vec![-STRING_SPLIT / 2.0, STRING_SPLIT / 2.0],
            sigma: vec![0.0, 0.0],
            observable: Observable::SingleIon(0),
        };
        let s = match name {
            "fig2-single-162k" => Scenario {
                crystal: CrystalConfig::single_ion(),
                nbar: vec![58.0],
                carrier_offsets: vec![0.0],
                sigma: vec![0.0],
                ..string("single ion at the Doppler limit", vec![], 50e-6)
            },
            "fig3-string-162k" => string("two-ion string, coupling maps", vec![87.0, 51.0], 50e-6),
            "doppler-162k" => string("two-ion string after Doppler cooling", vec![87.0, 51.0], 50e-6),
            "string-cooled-162k" => string("two-ion string after sideband cooling", vec![0.30, 0.07], 210e-6),
            "planar-346k" => {
                let trap = TrapConfig::calcium40(346e3)?;
                let rotation = rotation_from_tilt(339e3, &trap)?.primary;
                Scenario {
                    name: name.to_string(),
                    description: "two-ion planar crystal after sideband cooling".to_string(),
                    trap,
                    crystal: CrystalConfig::planar(2, rotation),
                    nbar: vec![0.1, 0.1],
                    rabi_frequency: 14e3,
                    decay_rate: 5e3,
                    probe_duration: 300e-6,
                    carrier_offsets: vec![0.0, 0.0],
                    sigma: vec![700.0, 1000.0],
                    observable: Observable::BothExcited,
                }
            }
            other => {
                return Err(Error::invalid("scenario", format!("unknown preset {other:?}; known: {}", PRESETS.join(", "))))
            }
        };
        Ok(s)
    }

    pub fn modes(&self) -> Result<ModeSet> {
        mode_set(&self.trap, &self.crystal)
    }

    pub fn ld_modes(&self) -> Result<Vec<LdMode>> {
        Ok(self.modes()?.modes.iter().map(|m| LdMode { frequency: m.frequency, eta: m.eta() }).collect())
    }

    /// Lamb-Dicke parameters of the first two modes; a single mode gets η₂ = 0.
    pub fn eta_pair(&self) -> Result<(f64, f64)> {
        let m = self.ld_modes()?;
        Ok((m[0].eta, m.get(1).map_or(0.0, |m| m.eta)))
    }

    /// Mode frequencies of the first two modes; a single mode repeats its own.
    pub fn frequency_pair(&self) -> Result<(f64, f64)> {
        let m = self.ld_modes()?;
        Ok((m[0].frequency, m.get(1).map_or(m[0].frequency, |m| m.frequency)))
    }

    pub fn nbar_pair(&self) -> (f64, f64) {
        (self.nbar[0], self.nbar.get(1).copied().unwrap_or(0.0))
    }

    pub fn spectrum_model(&self) -> Result<SpectrumModel> {
        SpectrumModel::new(self.crystal.ion_count, self.ld_modes()?, self.carrier_offsets.clone())
    }

    pub fn pulse_model(&self) -> PulseModel {
        PulseModel { rabi_frequency: self.rabi_frequency, decay_rate: self.decay_rate }
    }

    pub fn validate(&self) -> Result<()> {
        self.trap.validate()?;
        let modes = self.modes()?;
        if self.nbar.len() != modes.len() || self.sigma.len() != modes.len() {
            return Err(Error::invalid("nbar", format!("need one value per mode ({})", modes.len())));
        }
        if self.nbar.iter().chain(&self.sigma).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("nbar", "n̄ and σ must be non-negative"));
        }
        if self.carrier_offsets.len() != self.crystal.ion_count {
            return Err(Error::invalid("carrier_offsets", "need one entry per ion"));
        }
        for (name, v) in [("rabi_frequency", self.rabi_frequency), ("decay_rate", self.decay_rate), ("probe_duration", self.probe_duration)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trap::ModeLabel;

    #[test]
    fn every_preset_is_valid() {
        for name in PRESETS {
            let s = Scenario::preset(name).unwrap();
            s.validate().unwrap();
            assert_eq!(s.name, name);
        }
        assert!(Scenario::preset("nope").is_err());
    }

    #[test]
    fn string_preset_modes() {
        let s = Scenario::preset("doppler-162k").unwrap();
        let (e1, e2) = s.eta_pair().unwrap();
        assert!((e1 - 0.17).abs() < 0.005 && (e2 - 0.13).abs() < 0.005);
        assert_eq!(s.nbar_pair(), (87.0, 51.0));
    }

    #[test]
    fn planar_preset_tilt_mode() {
        let s = Scenario::preset("planar-346k").unwrap();
        let tilt = s.modes().unwrap().find(ModeLabel::Tilt).unwrap().frequency;
        assert!((tilt - 339e3).abs() < 1.0, "{tilt}");
    }
}
