use super::SpectrumPoint;
use crate::{Error, Result};

/// Gaussian smoothing of `y` sampled at `x`, restricted to the index set
/// `members`. Each output is Σ w·y over the members with unit-sum weights, so
/// a uniform lattice gives a discrete unit-area Gaussian.
pub(crate) fn smooth(x: &[f64], y: &[f64], members: &[usize], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return members.iter().map(|&i| y[i]).collect();
    }
    let cutoff = 6.0 * sigma;
    members
        .iter()
        .map(|&i| {
            let (mut acc, mut norm) = (0.0, 0.0);
            for &j in members {
                let d = x[j] - x[i];
                if d.abs() > cutoff {
                    continue;
                }
                let w = (-0.5 * (d / sigma).powi(2)).exp();
                acc += w * y[j];
                norm += w;
            }
            acc / norm
        })
        .collect()
}

/// Convolves the points whose detuning lies inside `window` (inclusive) with
/// a normalised Gaussian of standard deviation `sigma` hertz. Points outside
/// the window are returned unchanged and do not contribute.
pub fn convolve_gaussian(spectrum: &[SpectrumPoint], sigma: f64, window: (f64, f64)) -> Result<Vec<SpectrumPoint>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid("sigma", "must be non-negative"));
    }
    if !(window.0 <= window.1) {
        return Err(Error::invalid("window", "lower edge above upper edge"));
    }
    if sigma > 0.0 && window.1 - window.0 < 3.0 * sigma {
        log::warn!("convolution window {:.1} Hz is narrower than 3σ = {:.1} Hz", window.1 - window.0, 3.0 * sigma);
    }
    let x: Vec<f64> = spectrum.iter().map(|p| p.detuning).collect();
    let y: Vec<f64> = spectrum.iter().map(|p| p.excitation).collect();
    let members: Vec<usize> = (0..spectrum.len()).filter(|&i| x[i] >= window.0 && x[i] <= window.1).collect();
    let smoothed = smooth(&x, &y, &members, sigma);
    let mut out = spectrum.to_vec();
    for (&i, v) in members.iter().zip(smoothed) {
        out[i].excitation = v.clamp(0.0, 1.0);
    }
    Ok(out)
}
