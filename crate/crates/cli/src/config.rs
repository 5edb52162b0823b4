//! Run configuration: a named scenario preset, optionally overridden by a flat
//! INI file.
//!
//! ```ini
//! scenario = string-cooled-162k
//!
//! [trap]
//! magnetic_field = 1.865      ; tesla
//! species = ca40
//! wavelength = 729e-9         ; metre
//! axial_frequency = 162e3     ; hertz
//!
//! [crystal]
//! ions = 2
//! geometry = string           ; or planar
//! rotation_frequency = 106e3  ; planar only; or give tilt_frequency instead
//!
//! [simulation]
//! truncation = auto           ; or N, or N1,N2
//! tail = 1e-8
//! seed = 7
//! nbar = 0.3, 0.07
//! ```

use std::collections::HashMap;
use std::path::Path;

use ini::Ini;
use sideband_core::constants::{CA40_MASS, ELEMENTARY_CHARGE};
use sideband_core::cooling::AUTO_TAIL;
use sideband_core::scenario::Scenario;
use sideband_core::spectroscopy::Observable;
use sideband_core::trap::{rotation_from_tilt, CrystalConfig, Geometry, TrapConfig};

use crate::error::{CliError, CliResult};

const ALLOWED: &[(&str, &[&str])] = &[
    ("", &["scenario"]),
    ("trap", &["magnetic_field", "species", "wavelength", "axial_frequency"]),
    ("crystal", &["ions", "geometry", "rotation_frequency", "tilt_frequency"]),
    (
        "simulation",
        &[
            "truncation",
            "tail",
            "seed",
            "decay_rate",
            "rabi_frequency",
            "probe_duration",
            "nbar",
            "sigma",
            "carrier_offsets",
            "observable",
            "shots",
        ],
    ),
];

pub const DEFAULT_SCENARIO: &str = "doppler-162k";
const DEFAULT_SHOTS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Smallest grid keeping the thermal tail of the start state below `tail`.
    Auto { tail: f64 },
    Fixed(usize, usize),
}

/// Everything a command needs after presets, config file and flags are merged.
#[derive(Debug, Clone)]
pub struct Settings {
    pub scenario: Scenario,
    pub seed: u64,
    pub truncation: Truncation,
    pub shots: u32,
}

/// Parsed INI file with the line of every key, for diagnostics.
struct Source<'a> {
    file: &'a str,
    ini: Ini,
    lines: HashMap<(String, String), usize>,
}

impl Source<'_> {
    fn get(&self, section: &str, key: &str) -> Option<&str> {
        let sec = if section.is_empty() { None } else { Some(section) };
        self.ini.section(sec).and_then(|p| p.get(key)).map(str::trim)
    }

    fn error(&self, section: &str, key: &str, message: impl std::fmt::Display) -> CliError {
        let line = self.lines.get(&(section.to_string(), key.to_string()));
        let field = if section.is_empty() { key.to_string() } else { format!("[{section}] {key}") };
        match line {
            Some(l) => CliError::config(format!("{}:{l}: {field}: {message}", self.file)),
            None => CliError::config(format!("{}: {field}: {message}", self.file)),
        }
    }

    fn parsed<T: std::str::FromStr>(&self, section: &str, key: &str, what: &str) -> CliResult<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| self.error(section, key, format!("expected {what}, got {v:?}"))),
        }
    }

    fn positive(&self, section: &str, key: &str) -> CliResult<Option<f64>> {
        let v: Option<f64> = self.parsed(section, key, "a number")?;
        match v {
            Some(x) if !(x.is_finite() && x > 0.0) => Err(self.error(section, key, format!("must be positive, got {x}"))),
            _ => Ok(v),
        }
    }

    fn list(&self, section: &str, key: &str) -> CliResult<Option<Vec<f64>>> {
        let Some(v) = self.get(section, key) else { return Ok(None) };
        let values: Result<Vec<f64>, _> = v.split(',').map(|x| x.trim().parse::<f64>()).collect();
        match values {
            Ok(xs) if xs.iter().all(|x| x.is_finite()) => Ok(Some(xs)),
            _ => Err(self.error(section, key, format!("expected a comma-separated list of numbers, got {v:?}"))),
        }
    }
}

/// Line numbers of `key = value` entries, keyed by (section, key).
fn key_lines(text: &str) -> HashMap<(String, String), usize> {
    let mut section = String::new();
    let mut out = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with(';') || line.starts_with('#') || line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            out.entry((section.clone(), String::new())).or_insert(i + 1);
        } else if let Some((k, _)) = line.split_once(['=', ':']) {
            out.entry((section.clone(), k.trim().to_string())).or_insert(i + 1);
        }
    }
    out
}

/// Drops trailing `;` or `#` comments; no value contains either character.
fn strip_inline_comments(text: &str) -> String {
    text.lines().map(|l| l.split([';', '#']).next().unwrap_or("").trim_end()).collect::<Vec<_>>().join("\n")
}

fn load(path: &Path, text: &str) -> CliResult<Ini> {
    Ini::load_from_str(&strip_inline_comments(text)).map_err(|e| CliError::config(format!("{}:{}: {}", path.display(), e.line, e.msg)))
}

fn check_keys(src: &Source) -> CliResult<()> {
    for (section, props) in src.ini.iter() {
        let name = section.unwrap_or("");
        let Some((_, keys)) = ALLOWED.iter().find(|(s, _)| *s == name) else {
            let line = src.lines.get(&(name.to_string(), String::new()));
            let known: Vec<&str> = ALLOWED.iter().filter(|(s, _)| !s.is_empty()).map(|(s, _)| *s).collect();
            let at = line.map(|l| format!(":{l}")).unwrap_or_default();
            return Err(CliError::config(format!(
                "{}{at}: unknown section [{name}]; known sections: {}",
                src.file,
                known.join(", ")
            )));
        };
        for (key, _) in props.iter() {
            if !keys.contains(&key) {
                return Err(src.error(name, key, format!("unknown key; allowed: {}", keys.join(", "))));
            }
        }
    }
    Ok(())
}

fn trap_override(src: &Source, base: TrapConfig) -> CliResult<TrapConfig> {
    let mut t = base;
    if let Some(s) = src.get("trap", "species") {
        match s.to_ascii_lowercase().as_str() {
            "ca40" | "40ca+" | "ca40+" => {
                t.ion_mass = CA40_MASS;
                t.ion_charge = ELEMENTARY_CHARGE;
            }
            _ => return Err(src.error("trap", "species", format!("unsupported species {s:?}; supported: ca40"))),
        }
    }
    if let Some(b) = src.positive("trap", "magnetic_field")? {
        t.magnetic_field = b;
    }
    if let Some(w) = src.positive("trap", "wavelength")? {
        t.wavelength = w;
    }
    if let Some(z) = src.positive("trap", "axial_frequency")? {
        t.axial_frequency = z;
    }
    if t != base {
        t.validate().map_err(|e| src.error("trap", "axial_frequency", e))?;
    }
    Ok(t)
}

fn crystal_override(src: &Source, trap: &TrapConfig, base: CrystalConfig) -> CliResult<CrystalConfig> {
    let mut c = base;
    if let Some(n) = src.parsed::<usize>("crystal", "ions", "an ion count")? {
        c.ion_count = n;
    }
    if let Some(g) = src.get("crystal", "geometry") {
        c.geometry = match g.to_ascii_lowercase().as_str() {
            "string" | "linear" => Geometry::AxialString,
            "planar" => Geometry::Planar,
            _ => return Err(src.error("crystal", "geometry", format!("expected string or planar, got {g:?}"))),
        };
    }
    let rotation = src.positive("crystal", "rotation_frequency")?;
    let tilt = src.positive("crystal", "tilt_frequency")?;
    match (rotation, tilt) {
        (Some(_), Some(_)) => {
            return Err(src.error("crystal", "tilt_frequency", "give either rotation_frequency or tilt_frequency, not both"))
        }
        (Some(r), None) => c.rotation_frequency = Some(r),
        (None, Some(t)) => {
            let r = rotation_from_tilt(t, trap).map_err(|e| src.error("crystal", "tilt_frequency", e))?;
            c.rotation_frequency = Some(r.primary);
        }
        (None, None) => {}
    }
    let key = if tilt.is_some() { "tilt_frequency" } else { "rotation_frequency" };
    c.validate(trap).map_err(|e| src.error("crystal", key, e))?;
    Ok(c)
}

fn simulation_override(src: &Source, s: &mut Scenario, settings: &mut Settings) -> CliResult<()> {
    if let Some(v) = src.positive("simulation", "decay_rate")? {
        s.decay_rate = v;
    }
    if let Some(v) = src.positive("simulation", "rabi_frequency")? {
        s.rabi_frequency = v;
    }
    if let Some(v) = src.positive("simulation", "probe_duration")? {
        s.probe_duration = v;
    }
    if let Some(v) = src.list("simulation", "nbar")? {
        s.nbar = v;
    }
    if let Some(v) = src.list("simulation", "sigma")? {
        s.sigma = v;
    }
    if let Some(v) = src.list("simulation", "carrier_offsets")? {
        s.carrier_offsets = v;
    }
    if let Some(o) = src.get("simulation", "observable") {
        s.observable = o.parse().map_err(|e| src.error("simulation", "observable", e))?;
    }
    if let Some(seed) = src.parsed("simulation", "seed", "a non-negative integer")? {
        settings.seed = seed;
    }
    if let Some(shots) = src.parsed::<u32>("simulation", "shots", "a positive integer")? {
        if shots == 0 {
            return Err(src.error("simulation", "shots", "must be positive"));
        }
        settings.shots = shots;
    }
    let tail = src.positive("simulation", "tail")?;
    if let Some(t) = tail {
        if t >= 1.0 {
            return Err(src.error("simulation", "tail", "must be below 1"));
        }
    }
    settings.truncation = match src.get("simulation", "truncation") {
        None | Some("auto") => Truncation::Auto { tail: tail.unwrap_or(AUTO_TAIL) },
        Some(v) => {
            let parts: Result<Vec<usize>, _> = v.split(',').map(|x| x.trim().parse::<usize>()).collect();
            match parts.as_deref() {
                Ok([n]) => Truncation::Fixed(*n, *n),
                Ok([a, b]) => Truncation::Fixed(*a, *b),
                _ => return Err(src.error("simulation", "truncation", format!("expected auto, N or N1,N2, got {v:?}"))),
            }
        }
    };
    Ok(())
}

/// Builds the settings for one run. Precedence, lowest first: scenario preset,
/// config file, command-line flags.
pub fn resolve(config: Option<&Path>, scenario_flag: Option<&str>, seed_flag: Option<u64>) -> CliResult<Settings> {
    let text = match config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| CliError::unreadable(p, e))?),
        None => None,
    };
    let file_name = config.map(|p| p.display().to_string()).unwrap_or_default();
    let source = match (&text, config) {
        (Some(t), Some(p)) => Some(Source { file: &file_name, ini: load(p, t)?, lines: key_lines(t) }),
        _ => None,
    };
    if let Some(src) = &source {
        check_keys(src)?;
    }
    let name = scenario_flag
        .map(str::to_string)
        .or_else(|| source.as_ref().and_then(|s| s.get("", "scenario")).map(str::to_string))
        .unwrap_or_else(|| DEFAULT_SCENARIO.to_string());
    let mut scenario = Scenario::preset(&name).map_err(|e| match (&source, scenario_flag) {
        (Some(src), None) => src.error("", "scenario", e),
        _ => CliError::Usage(e.to_string()),
    })?;
    let mut settings =
        Settings { scenario: scenario.clone(), seed: 0, truncation: Truncation::Auto { tail: AUTO_TAIL }, shots: DEFAULT_SHOTS };
    if let Some(src) = &source {
        scenario.trap = trap_override(src, scenario.trap)?;
        scenario.crystal = crystal_override(src, &scenario.trap, scenario.crystal)?;
        simulation_override(src, &mut scenario, &mut settings)?;
        fit_defaults_to_crystal(&mut scenario)?;
        scenario.validate().map_err(|e| CliError::config(format!("{file_name}: {e}")))?;
    }
    if let Some(seed) = seed_flag {
        settings.seed = seed;
    }
    settings.scenario = scenario;
    Ok(settings)
}

/// Resizes per-mode and per-ion lists after the crystal changed, keeping any
/// values that still apply.
fn fit_defaults_to_crystal(s: &mut Scenario) -> CliResult<()> {
    let modes = s.modes().map_err(|e| CliError::config(e.to_string()))?.len();
    let ions = s.crystal.ion_count;
    let resize = |v: &mut Vec<f64>, n: usize| {
        if v.len() != n {
            let fill = v.last().copied().unwrap_or(0.0);
            v.resize(n, fill);
        }
    };
    resize(&mut s.nbar, modes);
    resize(&mut s.sigma, modes);
    if s.carrier_offsets.len() != ions {
        s.carrier_offsets = vec![0.0; ions];
    }
    if let Observable::SingleIon(j) = s.observable {
        if j >= ions {
            s.observable = Observable::SingleIon(0);
        }
    }
    if ions == 1 && matches!(s.observable, Observable::BothExcited | Observable::AtLeastOneBright) {
        s.observable = Observable::SingleIon(0);
    }
    Ok(())
}
