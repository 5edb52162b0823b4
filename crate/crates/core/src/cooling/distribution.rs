use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest tolerated probability mass outside the truncated grid.
pub const LEAKAGE_TOLERANCE: f64 = 1e-6;

/// Tail mass targeted when a truncation is chosen automatically.
pub const AUTO_TAIL: f64 = 1e-8;

/// Truncated occupation grid P(n₁, n₂) over two axial modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhononDistribution {
    n_max: (usize, usize),
    /// Row-major over n₁ then n₂.
    probs: Vec<f64>,
    labels: (String, String),
    /// Probability mass lost through the grid edges so far.
    leakage: f64,
}

/// Smallest n_max for which a thermal state of mean `nbar` keeps at most
/// `tail` probability above the truncation.
pub fn thermal_truncation(nbar: f64, tail: f64) -> usize {
    if nbar <= 0.0 {
        return 0;
    }
    let q = nbar / (nbar + 1.0);
    // q^(n_max + 1) ≤ tail
    ((tail.ln() / q.ln()).ceil() as usize).saturating_sub(1)
}

impl PhononDistribution {
    pub fn zeros(n_max: (usize, usize)) -> Self {
        PhononDistribution {
            n_max,
            probs: vec![0.0; (n_max.0 + 1) * (n_max.1 + 1)],
            labels: ("mode1".into(), "mode2".into()),
            leakage: 0.0,
        }
    }

    /// All population in |n₁, n₂⟩.
    pub fn fock(n1: usize, n2: usize, n_max: (usize, usize)) -> Result<Self> {
        if n1 > n_max.0 || n2 > n_max.1 {
            return Err(Error::invalid("fock state", format!("({n1},{n2}) outside grid {n_max:?}")));
        }
        let mut d = Self::zeros(n_max);
        let idx = d.index(n1, n2);
        d.probs[idx] = 1.0;
        Ok(d)
    }

    pub fn from_probs(n_max: (usize, usize), probs: Vec<f64>) -> Result<Self> {
        if probs.len() != (n_max.0 + 1) * (n_max.1 + 1) {
            return Err(Error::invalid("probs", "length does not match the grid"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("probs", "entries must be finite and non-negative"));
        }
        let mut d = PhononDistribution { probs, ..Self::zeros((0, 0)) };
        d.n_max = n_max;
        Ok(d)
    }

    pub fn with_labels(mut self, mode1: impl Into<String>, mode2: impl Into<String>) -> Self {
        self.labels = (mode1.into(), mode2.into());
        self
    }

    pub fn labels(&self) -> (&str, &str) {
        (&self.labels.0, &self.labels.1)
    }

    pub fn n_max(&self) -> (usize, usize) {
        self.n_max
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub(crate) fn add_leakage(&mut self, leaked: f64) -> Result<()> {
        self.leakage += leaked.max(0.0);
        if self.leakage > LEAKAGE_TOLERANCE {
            return Err(Error::TruncationLeakage { leakage: self.leakage, tolerance: LEAKAGE_TOLERANCE });
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self, n1: usize, n2: usize) -> usize {
        n1 * (self.n_max.1 + 1) + n2
    }

    pub fn get(&self, n1: usize, n2: usize) -> f64 {
        self.probs[self.index(n1, n2)]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub(crate) fn probs_mut(&mut self) -> &mut [f64] {
        &mut self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub(crate) fn renormalize(&mut self) {
        let total = self.total();
        if total > 0.0 {
            self.probs.iter_mut().for_each(|p| *p /= total);
        }
    }

    /// Marginal occupation of mode 0 or 1.
    pub fn marginal(&self, mode: usize) -> Vec<f64> {
        let (r, c) = (self.n_max.0 + 1, self.n_max.1 + 1);
        match mode {
            0 => (0..r).map(|i| self.probs[i * c..(i + 1) * c].iter().sum()).collect(),
            _ => {
                let mut m = vec![0.0; c];
                for row in self.probs.chunks(c) {
                    m.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
                m
            }
        }
    }

    /// Mean phonon number of mode 0 or 1.
    pub fn mean(&self, mode: usize) -> f64 {
        self.marginal(mode).iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn means(&self) -> (f64, f64) {
        (self.mean(0), self.mean(1))
    }

    pub fn ground_population(&self, mode: usize) -> f64 {
        self.marginal(mode)[0]
    }

    pub fn mass_in(&self, cells: &[(usize, usize)]) -> f64 {
        cells
            .iter()
            .filter(|(a, b)| *a <= self.n_max.0 && *b <= self.n_max.1)
            .map(|&(a, b)| self.get(a, b))
            .sum()
    }

    /// Same distribution on a different grid. Cropping counts the discarded
    /// mass as leakage.
    pub fn resized(&self, n_max: (usize, usize)) -> Result<Self> {
        let mut out = Self::zeros(n_max);
        out.labels = self.labels.clone();
        out.leakage = self.leakage;
        let mut dropped = 0.0;
        for n1 in 0..=self.n_max.0 {
            for n2 in 0..=self.n_max.1 {
                let p = self.get(n1, n2);
                if n1 <= n_max.0 && n2 <= n_max.1 {
                    let idx = out.index(n1, n2);
                    out.probs[idx] = p;
                } else {
                    dropped += p;
                }
            }
        }
        out.add_leakage(dropped)?;
        out.renormalize();
        Ok(out)
    }

    /// CSV with header `n1,n2,prob`; probabilities in shortest round-trip
    /// exponent form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n1", "n2", "prob"])?;
        for n1 in 0..=self.n_max.0 {
            for n2 in 0..=self.n_max.1 {
                w.write_record(&[n1.to_string(), n2.to_string(), format!("{:e}", self.get(n1, n2))])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["n1", "n2", "prob"] {
            return Err(Error::parse(1, "expected header `n1,n2,prob`"));
        }
        let mut cells = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != 3 {
                return Err(Error::parse(line, "expected three fields"));
            }
            let n1: usize = rec[0].trim().parse().map_err(|_| Error::parse(line, "bad n1"))?;
            let n2: usize = rec[1].trim().parse().map_err(|_| Error::parse(line, "bad n2"))?;
            let p: f64 = rec[2].trim().parse().map_err(|_| Error::parse(line, "bad prob"))?;
            cells.push((n1, n2, p));
        }
        if cells.is_empty() {
            return Err(Error::parse(2, "no distribution rows"));
        }
        let r = cells.iter().map(|c| c.0).max().unwrap_or(0);
        let c = cells.iter().map(|c| c.1).max().unwrap_or(0);
        let mut d = Self::zeros((r, c));
        for (n1, n2, p) in cells {
            let idx = d.index(n1, n2);
            d.probs[idx] = p;
        }
        Ok(d)
    }
}

/// Product of two truncated thermal states, renormalised on the grid.
///
/// Fails when the mass beyond the truncation exceeds [`LEAKAGE_TOLERANCE`].
pub fn thermal_distribution(nbar1: f64, nbar2: f64, n_max: (usize, usize)) -> Result<PhononDistribution> {
    for (name, nbar) in [("nbar1", nbar1), ("nbar2", nbar2)] {
        if !(nbar.is_finite() && nbar >= 0.0) {
            return Err(Error::invalid(name, format!("must be non-negative, got {nbar}")));
        }
    }
    let ratio = |nbar: f64| nbar / (nbar + 1.0);
    let (q1, q2) = (ratio(nbar1), ratio(nbar2));
    let kept1 = 1.0 - q1.powi(n_max.0 as i32 + 1);
    let kept2 = 1.0 - q2.powi(n_max.1 as i32 + 1);
    let tail = 1.0 - kept1 * kept2;
    if tail > LEAKAGE_TOLERANCE {
        return Err(Error::TruncationLeakage { leakage: tail, tolerance: LEAKAGE_TOLERANCE });
    }
    let geometric = |q: f64, n: usize| -> Vec<f64> {
        let mut v = Vec::with_capacity(n + 1);
        let mut p = 1.0;
        for _ in 0..=n {
            v.push(p);
            p *= q;
        }
        v
    };
    let w1 = geometric(q1, n_max.0);
    let w2 = geometric(q2, n_max.1);
    let mut d = PhononDistribution::zeros(n_max);
    let c = n_max.1 + 1;
    for (i, a) in w1.iter().enumerate() {
        for (j, b) in w2.iter().enumerate() {
            d.probs[i * c + j] = a * b;
        }
    }
    d.renormalize();
    Ok(d)
}

/// Thermal state on the smallest grid that keeps the tail below 10⁻⁸.
pub fn thermal_auto(nbar1: f64, nbar2: f64) -> Result<PhononDistribution> {
    thermal_distribution(nbar1, nbar2, (thermal_truncation(nbar1, AUTO_TAIL), thermal_truncation(nbar2, AUTO_TAIL)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn thermal_ratio_follows_boltzmann() {
        let d = thermal_auto(58.0, 0.0).unwrap();
        let m = d.marginal(0);
        for n in [1usize, 10, 100] {
            assert_relative_eq!(m[n] / m[0], (58.0f64 / 59.0).powi(n as i32), max_relative = 1e-12);
        }
        assert_eq!(d.n_max().1, 0);
    }

    #[test]
    fn zero_temperature_is_ground() {
        let d = thermal_distribution(0.0, 0.0, (5, 5)).unwrap();
        assert_eq!(d.get(0, 0), 1.0);
        assert_eq!(d.total(), 1.0);
    }

    #[test]
    fn short_grid_is_rejected() {
        // 87 quanta need well over a thousand levels for a 1e-6 tail
        let err = thermal_distribution(87.0, 51.0, (300, 300)).unwrap_err();
        assert!(matches!(err, Error::TruncationLeakage { .. }));
    }

    #[test]
    fn auto_truncation_tail() {
        let n = thermal_truncation(87.0, AUTO_TAIL);
        let q: f64 = 87.0 / 88.0;
        assert!(q.powi(n as i32 + 1) <= AUTO_TAIL);
        assert!(q.powi(n as i32) > AUTO_TAIL);
    }

    #[test]
    fn means_of_thermal_state() {
        let d = thermal_auto(3.0, 0.5).unwrap();
        assert_relative_eq!(d.mean(0), 3.0, max_relative = 1e-5);
        assert_relative_eq!(d.mean(1), 0.5, max_relative = 1e-5);
        assert_relative_eq!(d.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let d = thermal_auto(0.7, 0.2).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = PhononDistribution::read_csv(&buf[..]).unwrap();
        assert_eq!(back.probs(), d.probs());
        assert_eq!(back.n_max(), d.n_max());
    }

    #[test]
    fn crop_counts_leakage() {
        let d = thermal_distribution(0.5, 0.0, (40, 0)).unwrap();
        assert!(d.resized((3, 0)).is_err());
        let grown = d.resized((80, 2)).unwrap();
        assert!((grown.get(3, 0) / d.get(3, 0) - 1.0).abs() < 1e-14);
        assert_eq!(grown.leakage(), 0.0);
    }
}
