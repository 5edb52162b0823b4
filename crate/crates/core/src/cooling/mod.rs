//! Sideband cooling of two axial modes.
//!
//! The phonon distribution evolves under an incoherent optical-pumping model:
//! while a pulse addresses a sideband, each phonon state is pumped towards its
//! target at the steady-state scattering rate of a driven two-level system
//! whose upper level is quenched at the effective decay rate. Spontaneous
//! decay leaves the phonon numbers unchanged. The resulting linear rate
//! equations are solved exactly by uniformisation.

mod distribution;
mod heating;
mod optimize;
mod pulse;
mod sequence;

pub use distribution::{
    thermal_auto, thermal_distribution, thermal_truncation, PhononDistribution, AUTO_TAIL, LEAKAGE_TOLERANCE,
};
pub use heating::apply_heating;
pub use optimize::{optimize_sequence, round_robin_baseline, OptimizerConfig, OptimizerReport};
pub use pulse::{apply_pulse, pumping_rate, run_sequence, transfer_probability, PulseModel};
pub use sequence::{two_ion_string_sequence, CoolingSequence, PulseBlock, PulseSpec};

/// exp(Q t)·v for a conservative rate generator Q, by uniformisation.
///
/// `step` must write (I + Q/λ)·v into its second argument, where `lambda_t`
/// is λ·t and λ bounds the total outflow rate of every state. The Poisson
/// series is split into chunks of λt ≤ 40 so the weights never underflow.
pub(crate) fn uniformized<F>(v: &[f64], lambda_t: f64, mut step: F) -> Vec<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    const CHUNK: f64 = 40.0;
    const TAIL: f64 = 1e-15;
    let mut current = v.to_vec();
    if lambda_t <= 0.0 {
        return current;
    }
    let chunks = (lambda_t / CHUNK).ceil().max(1.0);
    let lt = lambda_t / chunks;
    let mut scratch = vec![0.0; v.len()];
    for _ in 0..chunks as usize {
        let mut weight = (-lt).exp();
        let mut cumulative = weight;
        let mut acc: Vec<f64> = current.iter().map(|x| weight * x).collect();
        let mut k = 0usize;
        let max_terms = (lt + 12.0 * lt.sqrt() + 40.0) as usize;
        while cumulative < 1.0 - TAIL && k < max_terms {
            step(&current, &mut scratch);
            std::mem::swap(&mut current, &mut scratch);
            k += 1;
            weight *= lt / k as f64;
            cumulative += weight;
            acc.iter_mut().zip(&current).for_each(|(a, x)| *a += weight * x);
        }
        acc.iter_mut().for_each(|a| *a /= cumulative);
        current = acc;
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniformized_two_state_decay() {
        // 0 ← 1 at rate 3 for t = 0.7: P1 = e^{-2.1}
        let rate = 3.0;
        let t = 0.7;
        let out = uniformized(&[0.0, 1.0], rate * t, |v, out| {
            out[0] = v[0] + v[1];
            out[1] = 0.0;
        });
        assert_relative_eq!(out[1], (-rate * t).exp(), max_relative = 1e-12);
        assert_relative_eq!(out[0] + out[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn uniformized_long_times_do_not_underflow() {
        let out = uniformized(&[0.0, 1.0], 900.0, |v, out| {
            out[0] = v[0] + 0.5 * v[1];
            out[1] = 0.5 * v[1];
        });
        // effective rate λ/2 over λt = 900 ⇒ e^{-450}
        assert!(out[1] < 1e-190);
        assert_relative_eq!(out[0], 1.0, epsilon = 1e-13);
    }
}
