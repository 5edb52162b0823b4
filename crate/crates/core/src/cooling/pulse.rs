use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::distribution::PhononDistribution;
use super::sequence::{CoolingSequence, PulseSpec};
use super::uniformized;
use crate::coupling::CouplingTable;
use crate::{Error, Result};

/// Global parameters of the incoherent pulse model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseModel {
    /// Bare carrier Rabi frequency Ω₀/2π, hertz.
    pub rabi_frequency: f64,
    /// Effective quench-enhanced decay rate Γ/2π, hertz.
    pub decay_rate: f64,
}

impl Default for PulseModel {
    fn default() -> Self {
        PulseModel { rabi_frequency: 14e3, decay_rate: 5e3 }
    }
}

impl PulseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.rabi_frequency.is_finite() && self.rabi_frequency > 0.0) {
            return Err(Error::invalid("rabi_frequency", "must be positive"));
        }
        if !(self.decay_rate.is_finite() && self.decay_rate > 0.0) {
            return Err(Error::invalid("decay_rate", "must be positive"));
        }
        Ok(())
    }
}

/// Steady-state optical pumping rate (s⁻¹) of a resonantly driven two-level
/// system with angular Rabi frequency `omega` and decay rate `gamma`:
/// Γ·Ω² / (Γ² + 2Ω²).
pub fn pumping_rate(omega: f64, gamma: f64) -> f64 {
    let o2 = omega * omega;
    if o2 == 0.0 {
        return 0.0;
    }
    gamma * o2 / (gamma * gamma + 2.0 * o2)
}

/// Probability that a state with relative coupling `strength` leaves during a
/// pulse of `duration` seconds, ignoring population arriving from above.
pub fn transfer_probability(strength: f64, duration: f64, model: &PulseModel) -> f64 {
    let omega = 2.0 * PI * model.rabi_frequency * strength;
    let gamma = 2.0 * PI * model.decay_rate;
    1.0 - (-pumping_rate(omega, gamma) * duration).exp()
}

/// Pumping rate of every grid cell for one sideband.
fn cell_rates(n_max: (usize, usize), pulse: &PulseSpec, tables: &(CouplingTable, CouplingTable), model: &PulseModel) -> Vec<f64> {
    let rabi = 2.0 * PI * pulse.rabi_frequency.unwrap_or(model.rabi_frequency);
    let gamma = 2.0 * PI * model.decay_rate;
    let sb = pulse.sideband;
    let col: Vec<f64> = (0..=n_max.1).map(|n2| tables.1.factor(n2, sb.delta_n2)).collect();
    let mut rates = Vec::with_capacity((n_max.0 + 1) * (n_max.1 + 1));
    for n1 in 0..=n_max.0 {
        let f1 = tables.0.factor(n1, sb.delta_n1);
        for (n2, f2) in col.iter().enumerate() {
            let valid = sb.target(n1, n2).is_some();
            rates.push(if valid { pumping_rate(rabi * (f1 * f2).abs(), gamma) } else { 0.0 });
        }
    }
    rates
}

fn tables_for(dist: &PhononDistribution, eta: (f64, f64), order: usize) -> (CouplingTable, CouplingTable) {
    let (a, b) = dist.n_max();
    (CouplingTable::new(eta.0, order, a + order), CouplingTable::new(eta.1, order, b + order))
}

fn apply_with_tables(
    dist: &PhononDistribution,
    pulse: &PulseSpec,
    tables: &(CouplingTable, CouplingTable),
    model: &PulseModel,
) -> Result<PhononDistribution> {
    pulse.validate()?;
    let sb = pulse.sideband;
    let mut out = dist.clone();
    if sb.is_carrier() {
        // population returns to the same phonon state after decay
        return Ok(out);
    }
    let n_max = dist.n_max();
    let rates = cell_rates(n_max, pulse, tables, model);
    let lambda = rates.iter().cloned().fold(0.0, f64::max);
    if lambda == 0.0 {
        return Ok(out);
    }
    // next[t] = keep[t]·v[t] + gain[t]·v[t + shift], where t + shift is the
    // unique source feeding t; gain is zero where no source exists
    let cols = n_max.1 + 1;
    let keep: Vec<f64> = rates.iter().map(|r| 1.0 - r / lambda).collect();
    let shift = -(sb.delta_n1 as isize * cols as isize + sb.delta_n2 as isize);
    let mut gain = vec![0.0; rates.len()];
    for (src, r) in rates.iter().enumerate() {
        let (n1, n2) = (src / cols, src % cols);
        if let Some((t1, t2)) = sb.target(n1, n2).filter(|&(t1, t2)| t1 <= n_max.0 && t2 <= n_max.1) {
            gain[t1 * cols + t2] = r / lambda;
        }
    }
    let len = rates.len();
    let reach = shift.unsigned_abs().min(len);
    let (lo, hi) = if shift >= 0 { (0, len - reach) } else { (reach, len) };
    let duration = pulse.duration() * pulse.repeats as f64;
    let before = dist.total();
    let evolved = uniformized(dist.probs(), lambda * duration, |v, next| {
        for ((n, x), k) in next.iter_mut().zip(v).zip(&keep) {
            *n = x * k;
        }
        let src = &v[(lo as isize + shift).max(0) as usize..][..hi - lo];
        for ((n, g), x) in next[lo..hi].iter_mut().zip(&gain[lo..hi]).zip(src) {
            *n += g * x;
        }
    });
    out.probs_mut().copy_from_slice(&evolved);
    let after = out.total();
    out.add_leakage(before - after)?;
    out.renormalize();
    Ok(out)
}

/// Applies one pulse (including its `repeats`) to the distribution.
///
/// Each state s is pumped to s + Δn at the rate [`pumping_rate`] set by its
/// Rabi frequency Ω₀·|Ω_{s→t}/Ω₀|; states whose target has a negative phonon
/// number are not addressed. Population pushed past the grid edge is counted
/// as leakage.
pub fn apply_pulse(dist: &PhononDistribution, pulse: &PulseSpec, eta: (f64, f64), model: &PulseModel) -> Result<PhononDistribution> {
    model.validate()?;
    let tables = tables_for(dist, eta, pulse.sideband.max_abs_order() as usize);
    apply_with_tables(dist, pulse, &tables, model)
}

/// Runs every block of the sequence with its repeat count and returns the
/// final distribution with the mean phonon number of each mode.
pub fn run_sequence(
    dist: &PhononDistribution,
    seq: &CoolingSequence,
    eta: (f64, f64),
    model: &PulseModel,
) -> Result<(PhononDistribution, (f64, f64))> {
    model.validate()?;
    seq.validate()?;
    let order = seq.max_order();
    let tables = tables_for(dist, eta, order);
    let mut current = dist.clone();
    for block in &seq.blocks {
        for _ in 0..block.repeats {
            for pulse in &block.pulses {
                current = apply_with_tables(&current, pulse, &tables, model)?;
            }
        }
    }
    let means = current.means();
    Ok((current, means))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooling::thermal_auto;
    use crate::coupling::{two_mode_rabi, SidebandOrder};
    use approx::assert_relative_eq;

    const ETA: (f64, f64) = (0.17, 0.13);

    fn pulse(d1: i32, d2: i32, us: f64) -> PulseSpec {
        PulseSpec::new(SidebandOrder::new(d1, d2), us, 1).unwrap()
    }

    #[test]
    fn long_red_pulse_empties_first_level() {
        let dist = PhononDistribution::fock(1, 0, (4, 4)).unwrap();
        let out = apply_pulse(&dist, &pulse(-1, 0, 20_000.0), ETA, &PulseModel::default()).unwrap();
        assert!(out.get(0, 0) > 1.0 - 1e-9, "{}", out.get(0, 0));
    }

    #[test]
    fn single_step_matches_rate_law() {
        // from |1,0⟩ the only transfer is to |0,0⟩, so P(1,0) decays exponentially
        let model = PulseModel::default();
        let dist = PhononDistribution::fock(1, 0, (3, 3)).unwrap();
        let out = apply_pulse(&dist, &pulse(-1, 0, 50.0), ETA, &model).unwrap();
        let p = transfer_probability(two_mode_rabi(1, 0, 0, 0, ETA.0, ETA.1), 50e-6, &model);
        assert_relative_eq!(out.get(0, 0), p, max_relative = 1e-10);
    }

    #[test]
    fn carrier_leaves_distribution_unchanged() {
        let dist = thermal_auto(2.0, 1.0).unwrap();
        let out = apply_pulse(&dist, &pulse(0, 0, 500.0), ETA, &PulseModel::default()).unwrap();
        assert_eq!(out.probs(), dist.probs());
    }

    #[test]
    fn red_pulse_conserves_and_cools() {
        let dist = thermal_auto(4.0, 2.0).unwrap();
        for sb in [(-1, 0), (-2, 0), (0, -1), (-2, -1)] {
            let out = apply_pulse(&dist, &pulse(sb.0, sb.1, 300.0), ETA, &PulseModel::default()).unwrap();
            assert_relative_eq!(out.total(), 1.0, epsilon = 1e-9);
            assert!(out.mean(0) <= dist.mean(0) + 1e-12);
            assert!(out.mean(1) <= dist.mean(1) + 1e-12);
        }
    }

    #[test]
    fn blue_pulse_off_the_grid_is_leakage() {
        let dist = PhononDistribution::fock(3, 0, (3, 0)).unwrap();
        let err = apply_pulse(&dist, &pulse(1, 0, 500.0), (0.17, 0.0), &PulseModel::default()).unwrap_err();
        assert!(matches!(err, Error::TruncationLeakage { .. }));
    }

    #[test]
    fn dark_state_barely_moves() {
        let model = PulseModel::default();
        for sb in [(-1, 0), (-2, 0), (-3, 0), (0, -1), (0, -2)] {
            let s = two_mode_rabi(49, (49 + sb.0) as usize, 86, (86 + sb.1) as usize, 0.1703, 0.1294);
            assert!(transfer_probability(s, 500e-6, &model) < 1e-2);
        }
        let s = two_mode_rabi(49, 47, 86, 85, 0.1703, 0.1294);
        assert!(transfer_probability(s, 500e-6, &model) > 0.5);
    }
}
