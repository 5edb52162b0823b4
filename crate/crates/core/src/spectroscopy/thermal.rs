use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Observable, ProbePulse, SpectrumPoint};
use crate::cooling::PhononDistribution;
use crate::coupling::CouplingTable;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpectrumConfig {
    /// Highest |Δn| per mode considered.
    pub max_order: usize,
    /// Sidebands further than this from the probe (hertz) are ignored.
    pub window: f64,
}

impl ThermalSpectrumConfig {
    /// Window of four carrier Rabi frequencies.
    pub fn for_probe(probe: &ProbePulse) -> Self {
        ThermalSpectrumConfig { max_order: 6, window: 4.0 * probe.rabi_frequency }
    }
}

struct Sideband {
    position: f64,
    f1: Vec<f64>,
    f2: Vec<f64>,
}

/// Incoherent single-ion spectrum of a phonon distribution.
///
/// Every start state s and every sideband (m₁, m₂) within the window of the
/// probe contributes P(s)·Ω²/(Ω² + Δ²)·sin²(√(Ω² + Δ²)·τ/2), where
/// Ω = Ω₀·|Ω_{s→s+m}/Ω₀| and Δ = 2π(δ − m₁ν₁ − m₂ν₂).
pub fn simulate_spectrum_thermal(
    dist: &PhononDistribution,
    eta: (f64, f64),
    probe: &ProbePulse,
    detunings: &[f64],
    mode_freqs: (f64, f64),
    config: &ThermalSpectrumConfig,
) -> Result<Vec<SpectrumPoint>> {
    probe.validate()?;
    if !(mode_freqs.0 > 0.0 && mode_freqs.1 > 0.0) {
        return Err(Error::invalid("mode_freqs", "must be positive"));
    }
    if !(config.window.is_finite() && config.window > 0.0) {
        return Err(Error::invalid("window", "must be positive"));
    }
    let (m1, m2) = dist.n_max();
    let order = config.max_order;
    let t1 = CouplingTable::new(eta.0, order, m1 + order);
    let t2 = CouplingTable::new(eta.1, order, m2 + order);
    let o = order as i32;
    let mut sidebands = Vec::new();
    for d1 in -o..=o {
        for d2 in -o..=o {
            let position = d1 as f64 * mode_freqs.0 + d2 as f64 * mode_freqs.1;
            // a negative target gets zero coupling so it drops out of the sum
            let f1 = (0..=m1).map(|n| if n as i32 + d1 < 0 { 0.0 } else { t1.factor(n, d1).abs() }).collect();
            let f2 = (0..=m2).map(|n| if n as i32 + d2 < 0 { 0.0 } else { t2.factor(n, d2).abs() }).collect();
            sidebands.push(Sideband { position, f1, f2 });
        }
    }
    let omega0 = 2.0 * PI * probe.rabi_frequency;
    let tau = probe.duration;
    let probs = dist.probs();
    let cols = m2 + 1;
    let results: Vec<(f64, usize)> = detunings
        .par_iter()
        .map(|&det| {
            let near: Vec<&Sideband> = sidebands.iter().filter(|s| (det - s.position).abs() < config.window).collect();
            let mut total = 0.0;
            for sb in &near {
                let delta = 2.0 * PI * (det - sb.position);
                let d2 = delta * delta;
                for n1 in 0..=m1 {
                    let a = omega0 * sb.f1[n1];
                    if a == 0.0 {
                        continue;
                    }
                    let row = &probs[n1 * cols..(n1 + 1) * cols];
                    for (p, f2) in row.iter().zip(&sb.f2) {
                        let w = a * f2;
                        if *p == 0.0 || w == 0.0 {
                            continue;
                        }
                        let w2 = w * w;
                        let gen = (w2 + d2).sqrt();
                        total += p * w2 / (w2 + d2) * (0.5 * gen * tau).sin().powi(2);
                    }
                }
            }
            (total.clamp(0.0, 1.0), near.len())
        })
        .collect();
    let overlapping = results.iter().filter(|r| r.1 > 1).count();
    if overlapping > 0 {
        log::warn!("{overlapping} detunings have several sidebands inside the window; contributions were summed");
    }
    detunings
        .iter()
        .zip(results)
        .map(|(&d, (e, _))| SpectrumPoint::new(d, e, 0, Observable::SingleIon(0)))
        .collect()
}

/// Phenomenological rotational sidebands for a probe beam offset from the
/// rotation axis: lines at ±k·ν_r with relative strength misalignment^|k|,
/// as (detuning, strength) pairs for k = 1, 2. Empty when aligned.
pub fn rotational_sidebands(rotation_hz: f64, misalignment: f64) -> Vec<(f64, f64)> {
    if misalignment <= 0.0 || rotation_hz <= 0.0 {
        return Vec::new();
    }
    [-2i32, -1, 1, 2]
        .iter()
        .map(|&k| (k as f64 * rotation_hz, misalignment.powi(k.abs())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooling::{thermal_distribution, PhononDistribution};
    use approx::assert_relative_eq;

    fn cfg() -> ThermalSpectrumConfig {
        ThermalSpectrumConfig { max_order: 3, window: 30e3 }
    }

    #[test]
    fn ground_state_without_coupling_is_a_bare_carrier() {
        let d = PhononDistribution::fock(0, 0, (2, 2)).unwrap();
        let probe = ProbePulse::new(0.0, 20e-6, 14e3).unwrap();
        let pts = simulate_spectrum_thermal(&d, (0.0, 0.0), &probe, &[0.0, 162e3], (162e3, 280.6e3), &cfg()).unwrap();
        assert_relative_eq!(pts[0].excitation, (PI * 14e3 * 20e-6).sin().powi(2), epsilon = 1e-12);
        assert_eq!(pts[1].excitation, 0.0);
    }

    #[test]
    fn weak_pulse_sideband_ratio_is_thermal() {
        let nbar = 0.3;
        let d = thermal_distribution(nbar, 0.0, (60, 0)).unwrap();
        let probe = ProbePulse::new(0.0, 2e-6, 1e3).unwrap();
        let pts = simulate_spectrum_thermal(&d, (0.17, 0.13), &probe, &[-162e3, 162e3], (162e3, 280.6e3), &cfg()).unwrap();
        let ratio = pts[0].excitation / pts[1].excitation;
        assert_relative_eq!(ratio, nbar / (nbar + 1.0), max_relative = 0.02);
    }

    #[test]
    fn rotational_lines() {
        assert!(rotational_sidebands(106e3, 0.0).is_empty());
        let lines = rotational_sidebands(106e3, 0.1);
        assert_eq!(lines.len(), 4);
        assert_relative_eq!(lines[2].0, 106e3);
        assert_relative_eq!(lines[0].1, 0.01);
    }
}
