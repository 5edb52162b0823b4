//! Excitation spectra: synthesis, coherent Lamb-Dicke evolution, detection
//! observables, Gaussian broadening and parameter extraction.
//!
//! Detunings are laser frequency minus the mean carrier frequency, in hertz;
//! positive detunings address blue sidebands.

mod broadening;
mod detection;
mod fit;
mod heating;
mod lamb_dicke;
mod synth;
mod thermal;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use broadening::convolve_gaussian;
pub use detection::detection_observable;
pub use fit::{average_fits, fit_sideband_spectrum, FitConfig, FitParams, FitResult};
pub use heating::{heating_rate_fit, read_heating_csv, write_heating_csv, HeatingFit, HeatingPoint};
pub use lamb_dicke::{evolve_two_ion, IonBasis, IonState, LdMode, SpectrumModel, TwoIonState};
pub use synth::{sample_spectrum, scan_grid, synthetic_heating_scan};
pub use thermal::{rotational_sidebands, simulate_spectrum_thermal, ThermalSpectrumConfig};

/// A spectroscopy pulse on the S↔D line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePulse {
    /// Laser detuning from the carrier, hertz.
    pub detuning: f64,
    /// Pulse length, seconds.
    pub duration: f64,
    /// Carrier Rabi frequency Ω₀/2π, hertz.
    pub rabi_frequency: f64,
}

impl ProbePulse {
    pub fn new(detuning: f64, duration: f64, rabi_frequency: f64) -> Result<Self> {
        let p = ProbePulse { detuning, duration, rabi_frequency };
        p.validate()?;
        Ok(p)
    }

    pub fn at(&self, detuning: f64) -> Self {
        ProbePulse { detuning, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid("probe duration", "must be positive"));
        }
        if !(self.rabi_frequency.is_finite() && self.rabi_frequency >= 0.0) {
            return Err(Error::invalid("probe rabi_frequency", "must be non-negative"));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("probe detuning", "must be finite"));
        }
        Ok(())
    }
}

/// What the detection records for one shot. Excited means the ion is in the
/// dark D state; bright means it fluoresces from S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observable {
    /// Excitation of one ion, resolved on the camera.
    SingleIon(usize),
    /// At least one ion fluoresces.
    AtLeastOneBright,
    /// Every ion is dark.
    BothExcited,
    /// At least one ion is dark.
    AnyExcited,
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::SingleIon(j) => write!(f, "single-ion-{j}"),
            Observable::AtLeastOneBright => write!(f, "at-least-one-bright"),
            Observable::BothExcited => write!(f, "both-excited"),
            Observable::AnyExcited => write!(f, "any-excited"),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "at-least-one-bright" => Ok(Observable::AtLeastOneBright),
            "both-excited" => Ok(Observable::BothExcited),
            "any-excited" => Ok(Observable::AnyExcited),
            _ => s
                .strip_prefix("single-ion-")
                .and_then(|j| j.parse().ok())
                .map(Observable::SingleIon)
                .ok_or_else(|| Error::invalid("observable", format!("unknown observable '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub detuning: f64,
    pub excitation: f64,
    /// Number of experimental repetitions; zero for noiseless model output.
    pub shots: u32,
    pub observable: Observable,
}

impl SpectrumPoint {
    pub fn new(detuning: f64, excitation: f64, shots: u32, observable: Observable) -> Result<Self> {
        if !(0.0..=1.0).contains(&excitation) {
            return Err(Error::invalid("excitation", format!("{excitation} is outside [0, 1]")));
        }
        if !detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        Ok(SpectrumPoint { detuning, excitation, shots, observable })
    }
}

#[derive(Serialize, Deserialize)]
struct SpectrumRow {
    detuning_hz: f64,
    excitation: f64,
    shots: u32,
    observable: String,
}

/// Writes `detuning_hz,excitation,shots,observable` rows.
pub fn write_spectrum_csv<W: Write>(points: &[SpectrumPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(SpectrumRow {
            detuning_hz: p.detuning,
            excitation: p.excitation,
            shots: p.shots,
            observable: p.observable.to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_spectrum_csv<R: Read>(reader: R) -> Result<Vec<SpectrumPoint>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<SpectrumRow>().enumerate() {
        let row = row?;
        let obs = row.observable.parse().map_err(|e: Error| Error::parse(i + 2, e.to_string()))?;
        out.push(SpectrumPoint::new(row.detuning_hz, row.excitation, row.shots, obs).map_err(|e| Error::parse(i + 2, e.to_string()))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observable_names_round_trip() {
        for o in [Observable::SingleIon(1), Observable::AtLeastOneBright, Observable::BothExcited, Observable::AnyExcited] {
            assert_eq!(o.to_string().parse::<Observable>().unwrap(), o);
        }
        assert!("single-ion-x".parse::<Observable>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let pts = vec![
            SpectrumPoint::new(-162e3 + 0.1, 0.123456789012345, 200, Observable::SingleIon(0)).unwrap(),
            SpectrumPoint::new(1.0 / 3.0, 1.0, 0, Observable::BothExcited).unwrap(),
        ];
        let mut buf = Vec::new();
        write_spectrum_csv(&pts, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("detuning_hz,excitation,shots,observable\n"));
        assert_eq!(read_spectrum_csv(&buf[..]).unwrap(), pts);
    }

    #[test]
    fn excitation_outside_unit_interval_rejected() {
        assert!(SpectrumPoint::new(0.0, 1.2, 0, Observable::BothExcited).is_err());
        assert!(read_spectrum_csv("detuning_hz,excitation,shots,observable\n0,0.5,10,nope\n".as_bytes()).is_err());
    }
}
