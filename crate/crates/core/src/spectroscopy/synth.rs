use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};

use super::heating::HeatingPoint;
use super::{Observable, SpectrumPoint};
use crate::{Error, Result};

/// Sorted detuning grid covering `centre ± half_width` in steps of `step`
/// for every centre; duplicate points are merged.
pub fn scan_grid(centres: &[f64], half_width: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && half_width >= 0.0) {
        return Err(Error::invalid("scan grid", "step must be positive and half width non-negative"));
    }
    let k = (half_width / step).round() as i64;
    let mut out: Vec<f64> = centres.iter().flat_map(|c| (-k..=k).map(move |i| c + i as f64 * step)).collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * step);
    Ok(out)
}

/// Draws `shots` projective measurements per detuning from the model
/// probabilities and reports the observed fraction.
pub fn sample_spectrum(
    detunings: &[f64],
    probabilities: &[f64],
    shots: u32,
    seed: u64,
    observable: Observable,
) -> Result<Vec<SpectrumPoint>> {
    if detunings.len() != probabilities.len() {
        return Err(Error::invalid("probabilities", "length differs from detunings"));
    }
    if shots == 0 {
        return Err(Error::invalid("shots", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    detunings
        .iter()
        .zip(probabilities)
        .map(|(&d, &p)| {
            let b = Binomial::new(shots as u64, p.clamp(0.0, 1.0)).map_err(|e| Error::invalid("probability", e.to_string()))?;
            let k = b.sample(&mut rng);
            SpectrumPoint::new(d, k as f64 / shots as f64, shots, observable)
        })
        .collect()
}

/// n̄(t) = nbar0 + rate·t measured with Gaussian noise of relative size
/// `relative_noise`; the reported uncertainty is the noise level.
pub fn synthetic_heating_scan(nbar0: f64, rate: f64, delays: &[f64], relative_noise: f64, seed: u64) -> Result<Vec<HeatingPoint>> {
    if !(relative_noise >= 0.0 && relative_noise.is_finite()) {
        return Err(Error::invalid("relative_noise", "must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    delays
        .iter()
        .map(|&t| {
            let truth = nbar0 + rate * t;
            let sd = relative_noise * truth;
            let noise = if sd > 0.0 { Normal::new(0.0, sd).expect("positive sd").sample(&mut rng) } else { 0.0 };
            Ok(HeatingPoint { delay: t, nbar: truth + noise, uncertainty: sd })
        })
        .collect()
}
