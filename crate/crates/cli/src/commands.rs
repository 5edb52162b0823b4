use std::path::{Path, PathBuf};

use serde::Serialize;
use sideband_core::cooling::{
    optimize_sequence, run_sequence, thermal_distribution, thermal_truncation, two_ion_string_sequence,
    CoolingSequence, OptimizerConfig, PhononDistribution,
};
use sideband_core::coupling::{breathing_red_set, com_red_set, strength_map, SidebandOrder, StrengthMap, INTERMODULATION};
use sideband_core::spectroscopy::{
    average_fits, fit_sideband_spectrum, heating_rate_fit, read_heating_csv, read_spectrum_csv, rotational_sidebands,
    sample_spectrum, scan_grid, simulate_spectrum_thermal, synthetic_heating_scan, write_heating_csv,
    write_spectrum_csv, FitConfig, FitParams, FitResult, Observable, ProbePulse, SpectrumPoint, ThermalSpectrumConfig,
};
use sideband_core::trap::{cyclotron_frequency, radial_frequencies, single_ion_lamb_dicke, ModeLabel};

use crate::config::{Settings, Truncation};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

/// Above this n̄ in any mode the probe is outside the Lamb-Dicke regime and
/// spectra are computed incoherently.
const DOPPLER_NBAR: f64 = 5.0;

pub struct Run<'a> {
    pub settings: &'a Settings,
    pub out_root: &'a Path,
}

impl Run<'_> {
    fn output(&self, command: &str) -> CliResult<OutputDir> {
        OutputDir::create(self.out_root, &self.settings.scenario.name, command, self.settings.seed)
    }
}

fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::unreadable(path, e))
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> sideband_core::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// Parses a list such as `-1,0 -2,0` or `-1,0;0,-2` into sideband orders.
pub fn parse_sidebands(text: &str) -> CliResult<Vec<SidebandOrder>> {
    let items: Vec<&str> = text.split([' ', ';']).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::Usage("empty sideband list".into()));
    }
    items
        .iter()
        .map(|item| {
            let bad = || CliError::Usage(format!("bad sideband {item:?}; expected Δn1,Δn2 such as -2,0"));
            let (a, b) = item.split_once(',').ok_or_else(bad)?;
            let (a, b) = (a.trim().parse::<i32>().map_err(|_| bad())?, b.trim().parse::<i32>().map_err(|_| bad())?);
            Ok(SidebandOrder::checked(a, b, sideband_core::coupling::DEFAULT_MAX_ORDER)?)
        })
        .collect()
}

fn start_distribution(settings: &Settings) -> CliResult<PhononDistribution> {
    let (a, b) = settings.scenario.nbar_pair();
    let n_max = match settings.truncation {
        Truncation::Auto { tail } => (thermal_truncation(a, tail), thermal_truncation(b, tail)),
        Truncation::Fixed(n1, n2) => (n1, n2),
    };
    Ok(thermal_distribution(a, b, n_max)?)
}

// ---------------------------------------------------------------- modes

#[derive(Serialize)]
struct ModeRow {
    label: ModeLabel,
    frequency_hz: f64,
    eta: f64,
}

#[derive(Serialize)]
struct ModesReport {
    scenario: String,
    ion_count: usize,
    geometry: String,
    cyclotron_hz: f64,
    modified_cyclotron_hz: f64,
    magnetron_hz: f64,
    rotation_hz: Option<f64>,
    single_ion_eta: f64,
    modes: Vec<ModeRow>,
}

pub fn modes(run: &Run) -> CliResult<String> {
    let s = &run.settings.scenario;
    let set = s.modes()?;
    let (plus, minus) = radial_frequencies(&s.trap)?;
    let report = ModesReport {
        scenario: s.name.clone(),
        ion_count: s.crystal.ion_count,
        geometry: format!("{:?}", s.crystal.geometry),
        cyclotron_hz: cyclotron_frequency(&s.trap),
        modified_cyclotron_hz: plus,
        magnetron_hz: minus,
        rotation_hz: s.crystal.rotation_frequency,
        single_ion_eta: single_ion_lamb_dicke(&s.trap),
        modes: set.modes.iter().map(|m| ModeRow { label: m.label, frequency_hz: m.frequency, eta: m.eta() }).collect(),
    };
    let mut out = run.output("modes")?;
    out.write_json("modes.json", &report)?;
    out.set_parameters(s)?;
    out.finish()?;
    let mut table = format!("{:<10} {:>14} {:>8}\n", "mode", "frequency/kHz", "eta");
    for m in &report.modes {
        table.push_str(&format!("{:<10} {:>14.3} {:>8.4}\n", m.label.to_string(), m.frequency_hz / 1e3, m.eta));
    }
    table.push_str(&format!("cyclotron {:.3} kHz, magnetron {:.3} kHz", report.cyclotron_hz / 1e3, report.magnetron_hz / 1e3));
    Ok(table)
}

// ---------------------------------------------------------------- map

#[derive(Serialize)]
struct DarkComponent {
    cells: usize,
    n1_range: (usize, usize),
    n2_range: (usize, usize),
}

fn describe_components(map: &StrengthMap) -> Vec<DarkComponent> {
    let mut comps: Vec<DarkComponent> = map
        .dark_components()
        .iter()
        .map(|c| DarkComponent {
            cells: c.len(),
            n1_range: (c.iter().map(|x| x.0).min().unwrap_or(0), c.iter().map(|x| x.0).max().unwrap_or(0)),
            n2_range: (c.iter().map(|x| x.1).min().unwrap_or(0), c.iter().map(|x| x.1).max().unwrap_or(0)),
        })
        .collect();
    comps.sort_by(|a, b| b.cells.cmp(&a.cells).then(a.n1_range.cmp(&b.n1_range)).then(a.n2_range.cmp(&b.n2_range)));
    comps
}

#[derive(Serialize)]
struct MapReport {
    sidebands: Vec<SidebandOrder>,
    eta: (f64, f64),
    n_max: (usize, usize),
    dark_threshold: f64,
    dark_cells: usize,
    components: Vec<DarkComponent>,
}

pub struct MapArgs {
    pub sidebands: Option<String>,
    pub intermodulation: bool,
    pub n_max: (usize, usize),
}

pub fn map(run: &Run, args: &MapArgs) -> CliResult<String> {
    let s = &run.settings.scenario;
    let mut sidebands = match &args.sidebands {
        Some(text) => parse_sidebands(text)?,
        None => com_red_set().into_iter().chain(breathing_red_set()).collect(),
    };
    if args.intermodulation && !sidebands.contains(&INTERMODULATION) {
        sidebands.push(INTERMODULATION);
    }
    let eta = s.eta_pair()?;
    let map = strength_map(&sidebands, eta, args.n_max)?;
    let components = describe_components(&map);
    let report = MapReport {
        dark_cells: components.iter().map(|c| c.cells).sum(),
        sidebands,
        eta,
        n_max: args.n_max,
        dark_threshold: map.dark_threshold(),
        components,
    };
    let mut out = run.output("map")?;
    out.write_bytes("strength.csv", &csv_bytes(|b| map.write_csv(b))?)?;
    out.write_json("dark_regions.json", &report)?;
    out.set_parameters(serde_json::json!({ "sidebands": report.sidebands, "eta": eta, "n_max": args.n_max }))?;
    out.finish()?;
    Ok(match report.components.first() {
        Some(c) => format!(
            "{} dark components, {} dark cells; largest spans n1 {}-{}, n2 {}-{}",
            report.components.len(),
            report.dark_cells,
            c.n1_range.0,
            c.n1_range.1,
            c.n2_range.0,
            c.n2_range.1
        ),
        None => "no dark cells".to_string(),
    })
}

// ---------------------------------------------------------------- spectrum

pub struct SpectrumArgs {
    pub observable: Option<Observable>,
    pub step: Option<f64>,
    pub span: Option<f64>,
    pub misalignment: f64,
}

fn doppler_regime(settings: &Settings) -> bool {
    settings.scenario.nbar.iter().any(|n| *n > DOPPLER_NBAR)
}

/// Carrier ±10 kHz and every first sideband ±6 kHz.
fn resolved_grid(settings: &Settings, step: f64) -> CliResult<Vec<f64>> {
    let modes = settings.scenario.ld_modes()?;
    let centres: Vec<f64> = modes.iter().flat_map(|m| [-m.frequency, m.frequency]).collect();
    let mut grid = scan_grid(&[0.0], 10e3, step)?;
    grid.extend(scan_grid(&centres, 6e3, step)?);
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * step);
    Ok(grid)
}

fn doppler_grid(settings: &Settings, step: f64, span: Option<f64>) -> CliResult<Vec<f64>> {
    let (f1, f2) = settings.scenario.frequency_pair()?;
    let span = span.unwrap_or(3.0 * f1.max(f2));
    Ok(scan_grid(&[0.0], span, step)?)
}

fn truth_params(settings: &Settings) -> FitParams {
    let s = &settings.scenario;
    FitParams { nbar: s.nbar.clone(), rabi_frequency: s.rabi_frequency, carrier_offset: 0.0, sigma: s.sigma.clone() }
}

/// Model excitation of `observable` on `grid`, incoherent for hot crystals.
fn model_spectrum(settings: &Settings, grid: &[f64], observable: Observable) -> CliResult<Vec<f64>> {
    let s = &settings.scenario;
    if doppler_regime(settings) {
        let dist = start_distribution(settings)?;
        let probe = ProbePulse::new(0.0, s.probe_duration, s.rabi_frequency)?;
        let cfg = ThermalSpectrumConfig::for_probe(&probe);
        let pts = simulate_spectrum_thermal(&dist, s.eta_pair()?, &probe, grid, s.frequency_pair()?, &cfg)?;
        Ok(pts.iter().map(|p| p.excitation).collect())
    } else {
        let cfg = FitConfig::new(s.spectrum_model()?, s.probe_duration, observable, truth_params(settings));
        Ok(cfg.predict(grid, &truth_params(settings))?)
    }
}

#[derive(Serialize)]
struct SpectrumMeta {
    regime: &'static str,
    observable: Observable,
    points: usize,
    rotational_sidebands: Vec<(f64, f64)>,
}

pub fn spectrum(run: &Run, args: &SpectrumArgs) -> CliResult<String> {
    let settings = run.settings;
    let s = &settings.scenario;
    let doppler = doppler_regime(settings);
    let observable = if doppler { Observable::SingleIon(0) } else { args.observable.unwrap_or(s.observable) };
    let grid = if doppler {
        doppler_grid(settings, args.step.unwrap_or(1e3), args.span)?
    } else {
        resolved_grid(settings, args.step.unwrap_or(250.0))?
    };
    let y = model_spectrum(settings, &grid, observable)?;
    let points: Vec<SpectrumPoint> =
        grid.iter().zip(&y).map(|(&d, &e)| SpectrumPoint::new(d, e, 0, observable)).collect::<Result<_, _>>()?;
    let rotational = match s.crystal.rotation_frequency {
        Some(r) if args.misalignment > 0.0 => rotational_sidebands(r, args.misalignment),
        _ => Vec::new(),
    };
    let meta = SpectrumMeta {
        regime: if doppler { "incoherent" } else { "lamb-dicke" },
        observable,
        points: points.len(),
        rotational_sidebands: rotational,
    };
    let mut out = run.output("spectrum")?;
    out.write_bytes("spectrum.csv", &csv_bytes(|b| write_spectrum_csv(&points, b))?)?;
    out.write_json("spectrum_meta.json", &meta)?;
    out.set_parameters(serde_json::json!({ "scenario": s, "misalignment": args.misalignment }))?;
    out.finish()?;
    let peak = points.iter().map(|p| p.excitation).fold(0.0, f64::max);
    Ok(format!("{} points ({} model), peak excitation {peak:.3}", points.len(), meta.regime))
}

// ---------------------------------------------------------------- cool

pub struct CoolArgs {
    pub sequence: Option<PathBuf>,
    pub write_distribution: bool,
}

#[derive(Serialize)]
struct CoolSummary {
    sequence: String,
    pulses: usize,
    sequence_duration_s: f64,
    n_max: (usize, usize),
    initial_nbar: (f64, f64),
    final_nbar: (f64, f64),
    ground_population: (f64, f64),
    dark_sidebands: Vec<SidebandOrder>,
    dark_cells: usize,
    dark_mass_initial: f64,
    dark_mass_final: f64,
    leakage: f64,
    final_marginals: (Vec<f64>, Vec<f64>),
}

/// Red sidebands that address a single mode; their common dark cells are the
/// region the mixed sidebands are meant to empty.
fn single_mode_red(seq: &CoolingSequence) -> Vec<SidebandOrder> {
    let mut out: Vec<SidebandOrder> = seq
        .pulses()
        .map(|p| p.sideband)
        .filter(|o| (o.delta_n1 < 0 && o.delta_n2 == 0) || (o.delta_n1 == 0 && o.delta_n2 < 0))
        .collect();
    out.sort();
    out.dedup();
    out
}

pub fn cool(run: &Run, args: &CoolArgs) -> CliResult<String> {
    let settings = run.settings;
    let s = &settings.scenario;
    let mut out = run.output("cool")?;
    let (seq, label) = match &args.sequence {
        Some(path) => {
            let bytes = read_input(path)?;
            let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::config(format!("{}: not UTF-8", path.display())))?;
            let seq = CoolingSequence::parse(&text).map_err(|e| CliError::in_file(path, e))?;
            out.record_input("sequence", path, &bytes);
            (seq, path.display().to_string())
        }
        None => (two_ion_string_sequence(), "built-in two-ion string schedule".to_string()),
    };
    let start = start_distribution(settings)?;
    let eta = s.eta_pair()?;
    let (end, final_nbar) = run_sequence(&start, &seq, eta, &s.pulse_model())?;
    let dark_sidebands = single_mode_red(&seq);
    let dark: Vec<(usize, usize)> = if dark_sidebands.is_empty() {
        Vec::new()
    } else {
        strength_map(&dark_sidebands, eta, start.n_max())?.dark_components().concat()
    };
    let summary = CoolSummary {
        sequence: label,
        pulses: seq.pulse_count(),
        sequence_duration_s: seq.total_duration(),
        n_max: start.n_max(),
        initial_nbar: start.means(),
        final_nbar,
        ground_population: (end.ground_population(0), end.ground_population(1)),
        dark_cells: dark.len(),
        dark_mass_initial: start.mass_in(&dark),
        dark_mass_final: end.mass_in(&dark),
        dark_sidebands,
        leakage: end.leakage(),
        final_marginals: (end.marginal(0), end.marginal(1)),
    };
    out.write_json("summary.json", &summary)?;
    out.write_bytes("sequence.seq", seq.to_string().as_bytes())?;
    if args.write_distribution {
        out.write_bytes("final_distribution.csv", &csv_bytes(|b| end.write_csv(b))?)?;
    }
    out.set_parameters(serde_json::json!({ "scenario": s, "n_max": start.n_max() }))?;
    out.finish()?;
    Ok(format!(
        "final n̄ = ({:.3}, {:.3}); ground occupation ({:.3}, {:.3}); dark-region mass {:.3e}",
        final_nbar.0, final_nbar.1, summary.ground_population.0, summary.ground_population.1, summary.dark_mass_final
    ))
}

// ---------------------------------------------------------------- optimize

pub struct OptimizeArgs {
    pub budget: f64,
    pub iterations: usize,
    pub candidates: Option<String>,
    pub durations_us: Option<Vec<f64>>,
}

pub fn optimize(run: &Run, args: &OptimizeArgs) -> CliResult<String> {
    let settings = run.settings;
    let s = &settings.scenario;
    let candidates = match &args.candidates {
        Some(text) => parse_sidebands(text)?,
        None => com_red_set().into_iter().chain(breathing_red_set()).chain([INTERMODULATION]).collect(),
    };
    let mut cfg = OptimizerConfig { seed: settings.seed, max_iterations: args.iterations, model: s.pulse_model(), ..Default::default() };
    if let Some(d) = &args.durations_us {
        cfg.durations_us = d.clone();
    }
    let start = start_distribution(settings)?;
    let report = optimize_sequence(&start, s.eta_pair()?, args.budget, &candidates, &cfg)?;
    let mut out = run.output("optimize")?;
    out.write_bytes("optimized.seq", report.sequence.to_string().as_bytes())?;
    out.write_json("report.json", &report)?;
    out.set_parameters(serde_json::json!({ "budget_s": args.budget, "candidates": candidates, "optimizer": cfg }))?;
    out.finish()?;
    Ok(format!(
        "final n̄ = ({:.3}, {:.3}); objective {:.4} against round-robin {:.4}; {} pulses",
        report.final_nbar.0,
        report.final_nbar.1,
        report.objective,
        report.baseline_objective,
        report.sequence.pulse_count()
    ))
}

// ---------------------------------------------------------------- fit

pub struct FitArgs {
    pub data: PathBuf,
    pub observable: Option<Observable>,
}

pub fn fit(run: &Run, args: &FitArgs) -> CliResult<String> {
    let settings = run.settings;
    let s = &settings.scenario;
    let bytes = read_input(&args.data)?;
    let points = read_spectrum_csv(bytes.as_slice()).map_err(|e| CliError::in_file(&args.data, e))?;
    let mut groups: Vec<(Observable, Vec<SpectrumPoint>)> = Vec::new();
    for p in points.into_iter().filter(|p| args.observable.is_none_or(|o| o == p.observable)) {
        match groups.iter_mut().find(|(o, _)| *o == p.observable) {
            Some((_, v)) => v.push(p),
            None => groups.push((p.observable, vec![p])),
        }
    }
    if groups.is_empty() {
        return Err(CliError::config(format!("{}: no points for the requested observable", args.data.display())));
    }
    let initial = FitParams {
        nbar: s.nbar.iter().map(|n| n.clamp(0.05, 1.0)).collect(),
        rabi_frequency: s.rabi_frequency,
        carrier_offset: 0.0,
        sigma: s.sigma.clone(),
    };
    let model = s.spectrum_model()?;
    let fits: Vec<FitResult> = groups
        .iter()
        .map(|(obs, pts)| {
            let mut cfg = FitConfig::new(model.clone(), s.probe_duration, *obs, initial.clone());
            cfg.fit_broadening = s.sigma.iter().any(|x| *x > 0.0);
            fit_sideband_spectrum(pts, &cfg).map_err(CliError::from)
        })
        .collect::<CliResult<_>>()?;
    let result = if fits.len() > 1 { average_fits(&fits)? } else { fits[0].clone() };
    let mut out = run.output("fit")?;
    out.record_input("data", &args.data, &bytes);
    out.write_json("fit.json", &result)?;
    if fits.len() > 1 {
        out.write_json("fit_components.json", &fits)?;
    }
    out.set_parameters(serde_json::json!({ "scenario": s, "initial": initial }))?;
    out.finish()?;
    let nbar: Vec<String> = result
        .nbar
        .iter()
        .zip(&result.nbar_uncertainty)
        .zip(&result.upper_bound_only)
        .map(|((n, u), ub)| if *ub { format!("< {n:.3}") } else { format!("{n:.3} ± {u:.3}") })
        .collect();
    let line = format!("n̄ = [{}]; Ω₀ = {:.0} Hz; reduced χ² {:.2}", nbar.join(", "), result.rabi_frequency, result.reduced_chi_squared);
    if !result.converged {
        return Err(CliError::Numeric(format!("fit did not converge ({line}); report written")));
    }
    Ok(line)
}

// ---------------------------------------------------------------- heat

pub fn heat(run: &Run, data: &Path) -> CliResult<String> {
    let bytes = read_input(data)?;
    let points = read_heating_csv(bytes.as_slice()).map_err(|e| CliError::in_file(data, e))?;
    let fit = heating_rate_fit(&points)?;
    let mut out = run.output("heat")?;
    out.record_input("data", data, &bytes);
    out.write_json("heating_fit.json", &fit)?;
    out.set_parameters(serde_json::json!({ "points": points.len() }))?;
    out.finish()?;
    Ok(format!("heating rate {:.3} ± {:.3} quanta/s, n̄(0) = {:.3} ± {:.3}", fit.rate, fit.rate_uncertainty, fit.intercept, fit.intercept_uncertainty))
}

// ---------------------------------------------------------------- synth

pub struct SynthSpectrumArgs {
    pub observable: Option<Observable>,
    pub step: Option<f64>,
}

pub fn synth_spectrum(run: &Run, args: &SynthSpectrumArgs) -> CliResult<String> {
    let settings = run.settings;
    let s = &settings.scenario;
    let doppler = doppler_regime(settings);
    let grid = if doppler {
        doppler_grid(settings, args.step.unwrap_or(2e3), None)?
    } else {
        resolved_grid(settings, args.step.unwrap_or(1e3))?
    };
    let observables: Vec<Observable> = match args.observable.unwrap_or(s.observable) {
        _ if doppler => vec![Observable::SingleIon(0)],
        Observable::SingleIon(_) if args.observable.is_none() => (0..s.crystal.ion_count).map(Observable::SingleIon).collect(),
        o => vec![o],
    };
    let mut points = Vec::new();
    for (k, obs) in observables.iter().enumerate() {
        let p = model_spectrum(settings, &grid, *obs)?;
        points.extend(sample_spectrum(&grid, &p, settings.shots, settings.seed.wrapping_add(k as u64), *obs)?);
    }
    let mut out = run.output("synth")?;
    out.write_bytes("synthetic_spectrum.csv", &csv_bytes(|b| write_spectrum_csv(&points, b))?)?;
    out.set_parameters(serde_json::json!({ "scenario": s, "shots": settings.shots, "observables": observables }))?;
    let dir = out.finish()?;
    Ok(format!("{} points, {} shots each -> {}", points.len(), settings.shots, dir.join("synthetic_spectrum.csv").display()))
}

pub struct SynthHeatingArgs {
    pub rate: f64,
    pub nbar0: Option<f64>,
    pub noise: f64,
    pub delays: Vec<f64>,
}

pub fn synth_heating(run: &Run, args: &SynthHeatingArgs) -> CliResult<String> {
    let settings = run.settings;
    let nbar0 = args.nbar0.unwrap_or(settings.scenario.nbar[0]);
    let points = synthetic_heating_scan(nbar0, args.rate, &args.delays, args.noise, settings.seed)?;
    let mut out = run.output("synth")?;
    out.write_bytes("synthetic_heating.csv", &csv_bytes(|b| write_heating_csv(&points, b))?)?;
    out.set_parameters(serde_json::json!({ "rate": args.rate, "nbar0": nbar0, "noise": args.noise, "delays": args.delays }))?;
    let dir = out.finish()?;
    Ok(format!("{} delays -> {}", points.len(), dir.join("synthetic_heating.csv").display()))
}
