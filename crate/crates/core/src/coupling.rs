//! Carrier and sideband coupling strengths outside the Lamb-Dicke regime.
//!
//! The single-mode factor for a transition n → n′ is
//!
//! ```text
//! √(n<! / n>!) · η^|Δn| · exp(−η²/2) · L_{n<}^{|Δn|}(η²)
//! ```
//!
//! with n< = min(n, n′) and n> = max(n, n′). It is evaluated with a forward
//! recurrence on the already-normalised quantity, so neither factorials nor
//! Laguerre polynomials are ever formed explicitly and every intermediate
//! value is itself a matrix element of magnitude at most one.
//!
//! All strengths are relative to the bare carrier Rabi frequency Ω₀.

use std::collections::VecDeque;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest sideband order accepted by default.
pub const DEFAULT_MAX_ORDER: u32 = 4;

/// A sideband is "dark" for a phonon state when its strength drops below this
/// fraction of the curve (or map) maximum.
pub const DARK_FRACTION: f64 = 0.02;

/// Default phonon truncation per mode for coupling curves and maps.
pub const DEFAULT_N_MAX: usize = 300;

/// Phonon-number change of a two-mode transition. Negative entries are red.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SidebandOrder {
    pub delta_n1: i32,
    pub delta_n2: i32,
}

impl SidebandOrder {
    pub const CARRIER: SidebandOrder = SidebandOrder { delta_n1: 0, delta_n2: 0 };

    pub const fn new(delta_n1: i32, delta_n2: i32) -> Self {
        SidebandOrder { delta_n1, delta_n2 }
    }

    /// Rejects orders beyond `max_order` in either mode.
    pub fn checked(delta_n1: i32, delta_n2: i32, max_order: u32) -> Result<Self> {
        if delta_n1.unsigned_abs() > max_order || delta_n2.unsigned_abs() > max_order {
            return Err(Error::invalid(
                "sideband",
                format!("({delta_n1},{delta_n2}) exceeds the maximum order {max_order}"),
            ));
        }
        Ok(Self::new(delta_n1, delta_n2))
    }

    pub fn is_carrier(&self) -> bool {
        *self == Self::CARRIER
    }

    /// At least one mode loses phonons.
    pub fn is_red(&self) -> bool {
        self.delta_n1 < 0 || self.delta_n2 < 0
    }

    pub fn max_abs_order(&self) -> u32 {
        self.delta_n1.unsigned_abs().max(self.delta_n2.unsigned_abs())
    }

    /// Final state reached from `(n1, n2)`, if it has no negative phonon number.
    pub fn target(&self, n1: usize, n2: usize) -> Option<(usize, usize)> {
        let t1 = n1 as i64 + self.delta_n1 as i64;
        let t2 = n2 as i64 + self.delta_n2 as i64;
        (t1 >= 0 && t2 >= 0).then_some((t1 as usize, t2 as usize))
    }

    /// Resonance detuning from the carrier for mode frequencies `(ν₁, ν₂)`.
    pub fn detuning(&self, mode_freqs: (f64, f64)) -> f64 {
        self.delta_n1 as f64 * mode_freqs.0 + self.delta_n2 as f64 * mode_freqs.1
    }
}

impl std::fmt::Display for SidebandOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.delta_n1, self.delta_n2)
    }
}

/// Normalised coupling factors g_m = ⟨m|…|m+d⟩ for m = 0..=m_max at fixed
/// order `d`, including the sign of the Laguerre polynomial.
fn coupling_row(eta: f64, d: usize, m_max: usize) -> Vec<f64> {
    let x = eta * eta;
    let mut out = Vec::with_capacity(m_max + 1);
    let g0 = if d == 0 {
        (-x / 2.0).exp()
    } else if eta == 0.0 {
        0.0
    } else {
        let ln_fact: f64 = (2..=d).map(|k| (k as f64).ln()).sum();
        (d as f64 * eta.ln() - 0.5 * ln_fact - x / 2.0).exp()
    };
    out.push(g0);
    if m_max == 0 {
        return out;
    }
    let df = d as f64;
    out.push(g0 * (1.0 + df - x) / (1.0 + df).sqrt());
    for k in 1..m_max {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + df - x) * out[k] - (kf * (kf + df)).sqrt() * out[k - 1])
            / ((kf + 1.0) * (kf + 1.0 + df)).sqrt();
        out.push(next);
    }
    out
}

/// Signed single-mode coupling factor for n → n′.
pub fn coupling_factor(n: usize, n_prime: usize, eta: f64) -> f64 {
    let lo = n.min(n_prime);
    let d = n.abs_diff(n_prime);
    coupling_row(eta, d, lo)[lo]
}

/// Magnitude of the single-mode factor, Ω_{n→n′}/Ω₀ for one mode.
pub fn relative_rabi(n: usize, n_prime: usize, eta: f64) -> f64 {
    coupling_factor(n, n_prime, eta).abs()
}

/// Ω_{n₁′,n₂′,n₁,n₂}/Ω₀: the product of the two single-mode factors.
pub fn two_mode_rabi(n1: usize, n1_prime: usize, n2: usize, n2_prime: usize, eta1: f64, eta2: f64) -> f64 {
    relative_rabi(n1, n1_prime, eta1) * relative_rabi(n2, n2_prime, eta2)
}

/// Precomputed signed coupling factors for one mode, for phonon changes
/// 0..=max_order and states up to `n_max`.
#[derive(Debug, Clone)]
pub struct CouplingTable {
    eta: f64,
    n_max: usize,
    rows: Vec<Vec<f64>>,
}

impl CouplingTable {
    pub fn new(eta: f64, max_order: usize, n_max: usize) -> Self {
        let rows = (0..=max_order).map(|d| coupling_row(eta, d, n_max)).collect();
        CouplingTable { eta, n_max, rows }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn max_order(&self) -> usize {
        self.rows.len() - 1
    }

    /// Signed factor for n → n + delta; zero when the target is negative.
    pub fn factor(&self, n: usize, delta: i32) -> f64 {
        let target = n as i64 + delta as i64;
        if target < 0 {
            return 0.0;
        }
        let d = delta.unsigned_abs() as usize;
        let lo = n.min(target as usize);
        match self.rows.get(d).and_then(|row| row.get(lo)) {
            Some(v) => *v,
            None => coupling_factor(n, target as usize, self.eta),
        }
    }
}

/// Strength of the `order`-th red sideband (n → n − order) for n = 0..=n_max.
/// States with n < order have no such transition and read as zero.
pub fn red_sideband_curve(eta: f64, order: usize, n_max: usize) -> Vec<f64> {
    let row = coupling_row(eta, order, n_max.saturating_sub(order));
    (0..=n_max).map(|n| if n < order { 0.0 } else { row[n - order].abs() }).collect()
}

/// Phonon numbers where the `order`-th red sideband (order 0: the carrier)
/// has a local minimum below the dark threshold.
pub fn find_minima(eta: f64, order: usize, n_max: usize) -> Vec<usize> {
    find_minima_with_threshold(eta, order, n_max, DARK_FRACTION)
}

pub fn find_minima_with_threshold(eta: f64, order: usize, n_max: usize, dark_fraction: f64) -> Vec<usize> {
    if n_max < 2 {
        return Vec::new();
    }
    let curve = red_sideband_curve(eta, order, n_max);
    let peak = curve.iter().cloned().fold(0.0, f64::max);
    let threshold = dark_fraction * peak;
    (order + 1..n_max)
        .filter(|&n| curve[n] <= curve[n - 1] && curve[n] <= curve[n + 1] && curve[n] < threshold)
        .collect()
}

/// Two-dimensional map of the strongest coupling available to each phonon
/// state under a set of sidebands, normalised to Ω₀ = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthMap {
    pub sidebands: Vec<SidebandOrder>,
    pub eta: (f64, f64),
    pub n_max: (usize, usize),
    /// Row-major over n₁ then n₂.
    pub grid: Vec<f64>,
    /// True where no sideband in the set has a valid target (the state cannot
    /// be addressed at all, e.g. the ground state under red sidebands).
    pub terminal: Vec<bool>,
}

impl StrengthMap {
    fn index(&self, n1: usize, n2: usize) -> usize {
        n1 * (self.n_max.1 + 1) + n2
    }

    pub fn get(&self, n1: usize, n2: usize) -> f64 {
        self.grid[self.index(n1, n2)]
    }

    pub fn is_terminal(&self, n1: usize, n2: usize) -> bool {
        self.terminal[self.index(n1, n2)]
    }

    pub fn max(&self) -> f64 {
        self.grid.iter().cloned().fold(0.0, f64::max)
    }

    pub fn dark_threshold(&self) -> f64 {
        DARK_FRACTION * self.max()
    }

    fn is_dark(&self, idx: usize, threshold: f64) -> bool {
        !self.terminal[idx] && self.grid[idx] < threshold
    }

    /// Four-connected components of addressable cells below `threshold`.
    pub fn dark_components_below(&self, threshold: f64) -> Vec<Vec<(usize, usize)>> {
        let (r, c) = (self.n_max.0 + 1, self.n_max.1 + 1);
        let mut seen = vec![false; r * c];
        let mut components = Vec::new();
        for start in 0..r * c {
            if seen[start] || !self.is_dark(start, threshold) {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(idx) = queue.pop_front() {
                let (i, j) = (idx / c, idx % c);
                comp.push((i, j));
                let mut visit = |ni: usize, nj: usize| {
                    let nidx = ni * c + nj;
                    if !seen[nidx] && self.is_dark(nidx, threshold) {
                        seen[nidx] = true;
                        queue.push_back(nidx);
                    }
                };
                if i > 0 {
                    visit(i - 1, j);
                }
                if i + 1 < r {
                    visit(i + 1, j);
                }
                if j > 0 {
                    visit(i, j - 1);
                }
                if j + 1 < c {
                    visit(i, j + 1);
                }
            }
            components.push(comp);
        }
        components
    }

    pub fn dark_components(&self) -> Vec<Vec<(usize, usize)>> {
        self.dark_components_below(self.dark_threshold())
    }

    /// The dark component containing `(n1, n2)`, if that cell is dark.
    pub fn dark_component_containing(&self, n1: usize, n2: usize) -> Option<Vec<(usize, usize)>> {
        self.dark_components().into_iter().find(|comp| comp.contains(&(n1, n2)))
    }

    /// CSV with header `n1,n2,strength`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n1", "n2", "strength"])?;
        for n1 in 0..=self.n_max.0 {
            for n2 in 0..=self.n_max.1 {
                w.write_record(&[n1.to_string(), n2.to_string(), format!("{:e}", self.get(n1, n2))])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a `n1,n2,strength` CSV back into a dense row-major grid.
pub fn read_strength_csv<R: Read>(reader: R) -> Result<((usize, usize), Vec<f64>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["n1", "n2", "strength"] {
        return Err(Error::parse(1, "expected header `n1,n2,strength`"));
    }
    let mut cells = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let parse_err = |what: &str| Error::parse(line, format!("bad {what}"));
        let n1: usize = rec[0].trim().parse().map_err(|_| parse_err("n1"))?;
        let n2: usize = rec[1].trim().parse().map_err(|_| parse_err("n2"))?;
        let s: f64 = rec[2].trim().parse().map_err(|_| parse_err("strength"))?;
        cells.push((n1, n2, s));
    }
    let r = cells.iter().map(|c| c.0).max().unwrap_or(0);
    let c = cells.iter().map(|c| c.1).max().unwrap_or(0);
    let mut grid = vec![0.0; (r + 1) * (c + 1)];
    for (n1, n2, s) in cells {
        grid[n1 * (c + 1) + n2] = s;
    }
    Ok(((r, c), grid))
}

/// Builds the max-combined strength map of a sideband set.
pub fn strength_map(sidebands: &[SidebandOrder], eta: (f64, f64), n_max: (usize, usize)) -> Result<StrengthMap> {
    if sidebands.is_empty() {
        return Err(Error::invalid("sidebands", "sideband set is empty"));
    }
    let order = sidebands.iter().map(|s| s.max_abs_order() as usize).max().unwrap_or(0);
    let t1 = CouplingTable::new(eta.0, order, n_max.0 + order);
    let t2 = CouplingTable::new(eta.1, order, n_max.1 + order);
    let cols = n_max.1 + 1;
    let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..=n_max.0)
        .into_par_iter()
        .map(|n1| {
            let mut strength = vec![0.0; cols];
            let mut terminal = vec![true; cols];
            for (n2, (s, term)) in strength.iter_mut().zip(terminal.iter_mut()).enumerate() {
                for sb in sidebands {
                    if sb.target(n1, n2).is_some() {
                        *term = false;
                        let v = (t1.factor(n1, sb.delta_n1) * t2.factor(n2, sb.delta_n2)).abs();
                        *s = f64::max(*s, v);
                    }
                }
            }
            (strength, terminal)
        })
        .collect();
    let mut grid = Vec::with_capacity(rows.len() * cols);
    let mut terminal = Vec::with_capacity(rows.len() * cols);
    for (s, t) in rows {
        grid.extend(s);
        terminal.extend(t);
    }
    Ok(StrengthMap { sidebands: sidebands.to_vec(), eta, n_max, grid, terminal })
}

/// Red sidebands used on the COM mode of the two-ion string (1st–3rd).
pub fn com_red_set() -> Vec<SidebandOrder> {
    vec![SidebandOrder::new(-1, 0), SidebandOrder::new(-2, 0), SidebandOrder::new(-3, 0)]
}

/// Red sidebands used on the breathing mode (1st and 2nd).
pub fn breathing_red_set() -> Vec<SidebandOrder> {
    vec![SidebandOrder::new(0, -1), SidebandOrder::new(0, -2)]
}

/// Second red COM sideband of the first red breathing sideband.
pub const INTERMODULATION: SidebandOrder = SidebandOrder::new(-2, -1);
