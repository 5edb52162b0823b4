use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coupling::{SidebandOrder, DEFAULT_MAX_ORDER};
use crate::{Error, Result};

/// One sideband pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub sideband: SidebandOrder,
    /// Pulse length in microseconds, kept as written so files round-trip exactly.
    pub duration_us: f64,
    pub repeats: u32,
    /// Carrier Rabi frequency override in hertz; the model default when absent.
    pub rabi_frequency: Option<f64>,
}

impl PulseSpec {
    pub fn new(sideband: SidebandOrder, duration_us: f64, repeats: u32) -> Result<Self> {
        let p = PulseSpec { sideband, duration_us, repeats, rabi_frequency: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_rabi_frequency(mut self, hz: f64) -> Result<Self> {
        self.rabi_frequency = Some(hz);
        self.validate()?;
        Ok(self)
    }

    /// Duration of a single repeat in seconds.
    pub fn duration(&self) -> f64 {
        self.duration_us * 1e-6
    }

    pub fn total_duration(&self) -> f64 {
        self.duration() * self.repeats as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_us.is_finite() && self.duration_us > 0.0) {
            return Err(Error::invalid("duration_us", "must be positive"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats", "must be at least 1"));
        }
        if let Some(r) = self.rabi_frequency {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::invalid("rabi_frequency", "must be positive"));
            }
        }
        SidebandOrder::checked(self.sideband.delta_n1, self.sideband.delta_n2, DEFAULT_MAX_ORDER)?;
        Ok(())
    }
}

impl fmt::Display for PulseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sideband={} duration_us={:?} repeats={}", self.sideband, self.duration_us, self.repeats)?;
        if let Some(r) = self.rabi_frequency {
            write!(f, " rabi_hz={r:?}")?;
        }
        Ok(())
    }
}

/// A list of pulses applied `repeats` times in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseBlock {
    pub pulses: Vec<PulseSpec>,
    pub repeats: u32,
}

impl PulseBlock {
    pub fn new(pulses: Vec<PulseSpec>, repeats: u32) -> Self {
        PulseBlock { pulses, repeats }
    }

    pub fn duration(&self) -> f64 {
        self.repeats as f64 * self.pulses.iter().map(PulseSpec::total_duration).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingSequence {
    pub blocks: Vec<PulseBlock>,
}

impl CoolingSequence {
    pub fn new(blocks: Vec<PulseBlock>) -> Result<Self> {
        let s = CoolingSequence { blocks };
        s.validate()?;
        Ok(s)
    }

    /// A single block holding `pulses` once.
    pub fn flat(pulses: Vec<PulseSpec>) -> Result<Self> {
        Self::new(vec![PulseBlock::new(pulses, 1)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::invalid("sequence", "has no blocks"));
        }
        for b in &self.blocks {
            if b.pulses.is_empty() {
                return Err(Error::invalid("sequence", "contains an empty block"));
            }
            if b.repeats == 0 {
                return Err(Error::invalid("sequence", "block repeat count must be at least 1"));
            }
            for p in &b.pulses {
                p.validate()?;
            }
        }
        Ok(())
    }

    /// Total time spent pulsing, seconds.
    pub fn total_duration(&self) -> f64 {
        self.blocks.iter().map(PulseBlock::duration).sum()
    }

    /// Largest |Δn| over all pulses.
    pub fn max_order(&self) -> usize {
        self.pulses().map(|p| p.sideband.max_abs_order() as usize).max().unwrap_or(0)
    }

    pub fn pulses(&self) -> impl Iterator<Item = &PulseSpec> {
        self.blocks.iter().flat_map(|b| b.pulses.iter())
    }

    /// Number of pulses actually applied, counting every repeat.
    pub fn pulse_count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.repeats as usize * b.pulses.iter().map(|p| p.repeats as usize).sum::<usize>())
            .sum()
    }

    /// Copy with every pulse on `sideband` dropped; blocks left empty are removed.
    pub fn without_sideband(&self, sideband: SidebandOrder) -> Result<Self> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| PulseBlock::new(b.pulses.iter().copied().filter(|p| p.sideband != sideband).collect(), b.repeats))
            .filter(|b| !b.pulses.is_empty())
            .collect();
        Self::new(blocks)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut open: Option<PulseBlock> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("begin-block") {
                if open.is_some() {
                    return Err(Error::parse(line_no, "nested begin-block"));
                }
                let repeats: u32 = rest
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("bad block repeat count '{}'", rest.trim())))?;
                open = Some(PulseBlock::new(Vec::new(), repeats));
            } else if line == "end-block" {
                let block = open.take().ok_or_else(|| Error::parse(line_no, "end-block without begin-block"))?;
                if block.pulses.is_empty() {
                    return Err(Error::parse(line_no, "empty block"));
                }
                if block.repeats == 0 {
                    return Err(Error::parse(line_no, "block repeat count must be at least 1"));
                }
                blocks.push(block);
            } else {
                let block = open.as_mut().ok_or_else(|| Error::parse(line_no, "pulse outside a block"))?;
                block.pulses.push(parse_pulse(line, line_no)?);
            }
        }
        if open.is_some() {
            return Err(Error::parse(text.lines().count(), "missing end-block"));
        }
        Self::new(blocks)
    }
}

fn parse_pulse(line: &str, line_no: usize) -> Result<PulseSpec> {
    let mut sideband = None;
    let mut duration = None;
    let mut repeats = None;
    let mut rabi = None;
    for token in line.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, format!("expected key=value, got '{token}'")))?;
        let bad = |what: &str| Error::parse(line_no, format!("bad {what} '{value}'"));
        match key {
            "sideband" => {
                let (a, b) = value.split_once(',').ok_or_else(|| bad("sideband"))?;
                let d1: i32 = a.trim().parse().map_err(|_| bad("sideband"))?;
                let d2: i32 = b.trim().parse().map_err(|_| bad("sideband"))?;
                sideband = Some(SidebandOrder::new(d1, d2));
            }
            "duration_us" => duration = Some(value.parse::<f64>().map_err(|_| bad("duration_us"))?),
            "repeats" => repeats = Some(value.parse::<u32>().map_err(|_| bad("repeats"))?),
            "rabi_hz" => rabi = Some(value.parse::<f64>().map_err(|_| bad("rabi_hz"))?),
            other => return Err(Error::parse(line_no, format!("unknown key '{other}'"))),
        }
    }
    let pulse = PulseSpec {
        sideband: sideband.ok_or_else(|| Error::parse(line_no, "missing sideband"))?,
        duration_us: duration.ok_or_else(|| Error::parse(line_no, "missing duration_us"))?,
        repeats: repeats.unwrap_or(1),
        rabi_frequency: rabi,
    };
    pulse.validate().map_err(|e| Error::parse(line_no, e.to_string()))?;
    Ok(pulse)
}

impl fmt::Display for CoolingSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            writeln!(f, "begin-block {}", b.repeats)?;
            for p in &b.pulses {
                writeln!(f, "{p}")?;
            }
            writeln!(f, "end-block")?;
        }
        Ok(())
    }
}

impl FromStr for CoolingSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Reference cooling schedule for a two-ion axial string (COM, breathing).
pub fn two_ion_string_sequence() -> CoolingSequence {
    let p = |d1, d2, us| PulseSpec::new(SidebandOrder::new(d1, d2), us, 1).expect("valid literal");
    CoolingSequence::new(vec![
        PulseBlock::new(vec![p(-2, 0, 500.0), p(0, -2, 500.0), p(-3, 0, 300.0), p(0, -1, 200.0), p(-2, -1, 500.0)], 15),
        PulseBlock::new(vec![p(0, -1, 200.0), p(-2, 0, 500.0), p(-1, 0, 500.0), p(-2, -1, 500.0)], 2),
        PulseBlock::new(vec![p(-2, -1, 500.0), p(-1, 0, 2000.0), p(0, -1, 500.0)], 1),
    ])
    .expect("valid literal")
}
