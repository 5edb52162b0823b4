use super::distribution::PhononDistribution;
use super::uniformized;
use crate::{Error, Result};

/// Heats both modes for `delay` seconds.
///
/// Each mode is coupled to a hot reservoir with equal up and down rate
/// constants r: n → n+1 at r(n+1) and n → n−1 at r·n, so that dn̄/dt = r
/// exactly. `rates` are in quanta per second. Population that would climb
/// past the grid edge is reported as leakage.
pub fn apply_heating(dist: &PhononDistribution, rates: (f64, f64), delay: f64) -> Result<PhononDistribution> {
    for (name, r) in [("heating rate", rates.0), ("heating rate", rates.1)] {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::invalid(name, "must be non-negative"));
        }
    }
    if !(delay.is_finite() && delay >= 0.0) {
        return Err(Error::invalid("delay", "must be non-negative"));
    }
    let (m1, m2) = dist.n_max();
    let lambda = rates.0 * (2 * m1 + 1) as f64 + rates.1 * (2 * m2 + 1) as f64;
    if lambda == 0.0 || delay == 0.0 {
        return Ok(dist.clone());
    }
    let cols = m2 + 1;
    let (a, b) = (rates.0 / lambda, rates.1 / lambda);
    let before = dist.total();
    let evolved = uniformized(dist.probs(), lambda * delay, |v, next| {
        for n1 in 0..=m1 {
            for n2 in 0..=m2 {
                let i = n1 * cols + n2;
                let (x1, x2) = (n1 as f64, n2 as f64);
                let out = a * (2.0 * x1 + 1.0) + b * (2.0 * x2 + 1.0);
                let mut acc = v[i] * (1.0 - out);
                if n1 > 0 {
                    acc += a * x1 * v[i - cols];
                }
                if n1 < m1 {
                    acc += a * (x1 + 1.0) * v[i + cols];
                }
                if n2 > 0 {
                    acc += b * x2 * v[i - 1];
                }
                if n2 < m2 {
                    acc += b * (x2 + 1.0) * v[i + 1];
                }
                next[i] = acc;
            }
        }
    });
    let mut out = dist.clone();
    out.probs_mut().copy_from_slice(&evolved);
    let after = out.total();
    out.add_leakage(before - after)?;
    out.renormalize();
    Ok(out)
}
