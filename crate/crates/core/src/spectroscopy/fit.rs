use std::cell::RefCell;

use argmin::core::{CostFunction, Executor, State, TerminationReason};
use argmin::solver::neldermead::NelderMead;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::broadening::smooth;
use super::lamb_dicke::SpectrumModel;
use super::{Observable, SpectrumPoint};
use crate::{Error, Result};

/// Free parameters of the sideband-spectrum model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    /// Thermal mean phonon number of each mode.
    pub nbar: Vec<f64>,
    /// Carrier Rabi frequency Ω₀/2π, hertz.
    pub rabi_frequency: f64,
    /// Shift of the common carrier, hertz.
    pub carrier_offset: f64,
    /// Gaussian broadening applied around each mode's sidebands, hertz.
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub model: SpectrumModel,
    /// Probe pulse length, seconds.
    pub duration: f64,
    pub observable: Observable,
    pub initial: FitParams,
    /// Fit the Gaussian widths; otherwise they stay at their initial values.
    pub fit_broadening: bool,
    /// Extra starting points for the carrier search.
    pub restarts: usize,
    /// Simplex iteration cap for each inner minimisation.
    pub max_iterations: u64,
    /// Rounds of relinearising the model in Rabi frequency and carrier offset.
    pub refine_iterations: u64,
    pub uncertainties: bool,
}

impl FitConfig {
    pub fn new(model: SpectrumModel, duration: f64, observable: Observable, initial: FitParams) -> Self {
        FitConfig {
            model,
            duration,
            observable,
            initial,
            fit_broadening: true,
            restarts: 2,
            max_iterations: 2000,
            refine_iterations: 4,
            uncertainties: true,
        }
    }

    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let k = self.model.modes.len();
        if self.initial.nbar.len() != k || self.initial.sigma.len() != k {
            return Err(Error::invalid("initial", "need one n̄ and one σ per mode"));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid("duration", "must be positive"));
        }
        if !(self.initial.rabi_frequency.is_finite() && self.initial.rabi_frequency > 0.0) {
            return Err(Error::invalid("rabi_frequency", "must be positive"));
        }
        if self.initial.nbar.iter().chain(&self.initial.sigma).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("initial", "n̄ and σ must be non-negative"));
        }
        Ok(())
    }

    fn table(&self, x: &[f64], rabi: f64, offset: f64) -> Result<Vec<Vec<f64>>> {
        self.model.excitation_table(x, rabi, self.duration, offset, self.observable)
    }

    /// Model signal at each detuning, including the Gaussian broadening.
    pub fn predict(&self, detunings: &[f64], params: &FitParams) -> Result<Vec<f64>> {
        let table = self.table(detunings, params.rabi_frequency, params.carrier_offset)?;
        let groups = Groups::new(detunings, &self.model, params.carrier_offset);
        let w = self.model.thermal_weights(&params.nbar)?;
        Ok(groups.broaden(detunings, &mix(&table, &w), &params.sigma))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub nbar: Vec<f64>,
    pub nbar_uncertainty: Vec<f64>,
    pub gaussian_sigma: Vec<f64>,
    pub sigma_uncertainty: Vec<f64>,
    pub carrier_offset: f64,
    pub carrier_offset_uncertainty: f64,
    pub rabi_frequency: f64,
    pub rabi_uncertainty: f64,
    pub chi_squared: f64,
    pub reduced_chi_squared: f64,
    pub points: usize,
    pub converged: bool,
    /// True for a mode whose red sideband was not sampled; its n̄ is then only an upper bound.
    pub upper_bound_only: Vec<bool>,
    pub observable: Observable,
}

/// Points grouped by the resonance they are closest to: the carrier or the
/// red or blue sideband of one mode.
struct Groups {
    carrier: Vec<usize>,
    /// (mode, indices) for every red and blue sideband window.
    sidebands: Vec<(usize, Vec<usize>)>,
    red_counts: Vec<usize>,
}

impl Groups {
    fn new(detunings: &[f64], model: &SpectrumModel, offset: f64) -> Self {
        let k = model.modes.len();
        let mut carrier = Vec::new();
        let mut bins: Vec<Vec<usize>> = vec![Vec::new(); 2 * k];
        for (i, &d) in detunings.iter().enumerate() {
            let x = d - offset;
            let mut best = (x.abs(), None);
            for (m, mode) in model.modes.iter().enumerate() {
                for (s, pos) in [(0, -mode.frequency), (1, mode.frequency)] {
                    let dist = (x - pos).abs();
                    if dist < best.0 {
                        best = (dist, Some(2 * m + s));
                    }
                }
            }
            match best.1 {
                None => carrier.push(i),
                Some(b) => bins[b].push(i),
            }
        }
        let red_counts = (0..k).map(|m| bins[2 * m].len()).collect();
        let sidebands = bins.into_iter().enumerate().filter(|(_, v)| !v.is_empty()).map(|(b, v)| (b / 2, v)).collect();
        Groups { carrier, sidebands, red_counts }
    }

    fn broaden(&self, x: &[f64], y: &[f64], sigma: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        for (mode, idx) in &self.sidebands {
            for (&i, v) in idx.iter().zip(smooth(x, y, idx, sigma[*mode].abs())) {
                out[i] = v;
            }
        }
        out
    }
}

fn mix(table: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    table.iter().map(|row| row.iter().zip(weights).map(|(e, w)| e * w).sum()).collect()
}

struct Data {
    x: Vec<f64>,
    y: Vec<f64>,
    shots: Vec<f64>,
}

impl Data {
    fn new(points: &[SpectrumPoint]) -> Self {
        Data {
            x: points.iter().map(|p| p.detuning).collect(),
            y: points.iter().map(|p| p.excitation).collect(),
            shots: points.iter().map(|p| p.shots as f64).collect(),
        }
    }

    /// Binomial deviance for counted points, squared residual otherwise.
    fn term(&self, i: usize, model: f64) -> f64 {
        let (y, n) = (self.y[i], self.shots[i]);
        if n == 0.0 {
            return (y - model).powi(2);
        }
        let m = model.clamp(1e-12, 1.0 - 1e-12);
        let part = |obs: f64, exp: f64| if obs > 0.0 { obs * (obs / exp).ln() } else { 0.0 };
        2.0 * n * (part(y, m) + part(1.0 - y, 1.0 - m))
    }

    fn chi2(&self, model: &[f64]) -> f64 {
        model.iter().enumerate().map(|(i, &m)| self.term(i, m)).sum()
    }

    fn chi2_on(&self, model: &[f64], subset: &[usize]) -> f64 {
        subset.iter().zip(model).map(|(&i, &m)| self.term(i, m)).sum()
    }
}

struct Closure<'a> {
    f: &'a dyn Fn(&[f64]) -> Result<f64>,
    error: RefCell<Option<Error>>,
}

impl CostFunction for Closure<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        match (self.f)(p) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => Ok(f64::MAX),
            Err(e) => {
                self.error.borrow_mut().get_or_insert(e);
                Ok(f64::MAX)
            }
        }
    }
}

/// Nelder–Mead from `start` with an axis-aligned initial simplex.
fn simplex(f: &dyn Fn(&[f64]) -> Result<f64>, start: &[f64], steps: &[f64], max_iters: u64) -> Result<(Vec<f64>, f64, bool)> {
    let mut vertices = vec![start.to_vec()];
    for (i, s) in steps.iter().enumerate() {
        let mut v = start.to_vec();
        v[i] += s;
        vertices.push(v);
    }
    let solver = NelderMead::new(vertices).with_sd_tolerance(1e-9).map_err(|e| Error::Integration(e.to_string()))?;
    let problem = Closure { f, error: RefCell::new(None) };
    let res = Executor::new(problem, solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .map_err(|e| Error::Integration(e.to_string()))?;
    if let Some(e) = res.problem.problem.as_ref().and_then(|p| p.error.borrow_mut().take()) {
        return Err(e);
    }
    let state = res.state();
    let best = state.get_best_param().cloned().unwrap_or_else(|| start.to_vec());
    let converged = matches!(state.get_termination_reason(), Some(TerminationReason::SolverConverged));
    Ok((best, state.get_best_cost(), converged))
}

/// Simplex followed by a restart at the optimum, which guards against a
/// collapsed simplex.
fn polish(f: &dyn Fn(&[f64]) -> Result<f64>, start: &[f64], steps: &[f64], max_iters: u64) -> Result<(Vec<f64>, f64, bool)> {
    let (p, c, conv) = simplex(f, start, steps, max_iters)?;
    let small: Vec<f64> = steps.iter().map(|s| 0.2 * s).collect();
    let (p2, c2, conv2) = simplex(f, &p, &small, max_iters)?;
    Ok(if c2 <= c { (p2, c2, conv && conv2) } else { (p, c, conv) })
}

/// The exact excitation table at (Ω₀, offset) together with its derivatives
/// in both, giving a model that is linear in small shifts.
struct Linearised {
    rabi: f64,
    offset: f64,
    base: Vec<Vec<f64>>,
    d_rabi: Vec<Vec<f64>>,
    d_offset: Vec<Vec<f64>>,
    groups: Groups,
}

impl Linearised {
    fn new(cfg: &FitConfig, x: &[f64], rabi: f64, offset: f64) -> Result<Self> {
        let [base, d_rabi, d_offset] = cfg.model.linearised_table(x, rabi, cfg.duration, offset, cfg.observable)?;
        Ok(Linearised { rabi, offset, base, d_rabi, d_offset, groups: Groups::new(x, &cfg.model, offset) })
    }

    /// Broadened signal for thermal weights `w` and shifts (dΩ₀, d offset).
    fn signal(&self, x: &[f64], w: &[f64], shift: (f64, f64), sigma: &[f64]) -> Vec<f64> {
        let (a, b) = (mix(&self.base, w), (mix(&self.d_rabi, w), mix(&self.d_offset, w)));
        let y: Vec<f64> = (0..x.len()).map(|i| a[i] + shift.0 * b.0[i] + shift.1 * b.1[i]).collect();
        self.groups.broaden(x, &y, sigma)
    }
}

/// Parameter vector layout: n̄ per mode, σ per mode (when fitted), dΩ₀, d offset.
struct Layout {
    modes: usize,
    fit_sigma: bool,
}

impl Layout {
    fn len(&self) -> usize {
        if self.fit_sigma {
            2 * self.modes + 2
        } else {
            self.modes + 2
        }
    }

    fn unpack(&self, p: &[f64], fixed_sigma: &[f64]) -> (Vec<f64>, Vec<f64>, (f64, f64)) {
        let k = self.modes;
        let nbar = p[..k].iter().map(|v| v.abs()).collect();
        let sigma = if self.fit_sigma { p[k..2 * k].iter().map(|v| v.abs()).collect() } else { fixed_sigma.to_vec() };
        let n = p.len();
        (nbar, sigma, (p[n - 2], p[n - 1]))
    }

    fn pack(&self, nbar: &[f64], sigma: &[f64], shift: (f64, f64)) -> Vec<f64> {
        let mut p = nbar.to_vec();
        if self.fit_sigma {
            p.extend_from_slice(sigma);
        }
        p.push(shift.0);
        p.push(shift.1);
        p
    }

    fn steps(&self, rabi: f64) -> Vec<f64> {
        let mut s = vec![0.1; self.modes];
        if self.fit_sigma {
            s.extend(std::iter::repeat(300.0).take(self.modes));
        }
        s.push(0.01 * rabi);
        s.push(200.0);
        s
    }
}

/// Least-squares fit of the thermal Lamb-Dicke model to a measured spectrum.
///
/// The carrier Rabi frequency and carrier offset are first located on the
/// carrier points with a carrier-only model. The exact model is then
/// linearised in those two parameters and all parameters are fitted on the
/// linear model; this is repeated around each new optimum. Standard errors
/// come from the curvature of χ² at the final optimum.
pub fn fit_sideband_spectrum(data: &[SpectrumPoint], config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let layout = Layout { modes: config.model.modes.len(), fit_sigma: config.fit_broadening };
    let n_free = layout.len();
    if data.len() <= n_free {
        return Err(Error::InsufficientData(format!("{} points for {} free parameters", data.len(), n_free)));
    }
    if data.iter().any(|p| p.observable != config.observable) {
        return Err(Error::invalid("data", format!("all points must use the {} observable", config.observable)));
    }
    let d = Data::new(data);
    let init = &config.initial;
    let groups0 = Groups::new(&d.x, &config.model, init.carrier_offset);
    let upper_bound_only: Vec<bool> = groups0.red_counts.iter().map(|&c| c == 0).collect();

    // carrier search with a carrier-only model
    let subset = if groups0.carrier.len() >= 5 { groups0.carrier.clone() } else { (0..d.x.len()).collect() };
    let sx: Vec<f64> = subset.iter().map(|&i| d.x[i]).collect();
    let w0 = config.model.thermal_weights(&init.nbar)?;
    let carrier = |p: &[f64]| -> Result<f64> {
        let t = config.model.carrier_table(&sx, p[0].abs(), config.duration, p[1], config.observable)?;
        Ok(d.chi2_on(&mix(&t, &w0), &subset))
    };
    let mut best = (vec![init.rabi_frequency, init.carrier_offset], f64::INFINITY);
    for r in 0..=config.restarts {
        let scale = 1.0 + 0.1 * (r as f64) * if r % 2 == 0 { 1.0 } else { -1.0 };
        let start = [init.rabi_frequency * scale, init.carrier_offset];
        let (p, c, _) = polish(&carrier, &start, &[0.03 * init.rabi_frequency, 500.0], config.max_iterations)?;
        if c < best.1 {
            best = (p, c);
        }
    }
    let (mut rabi, mut offset) = (best.0[0].abs(), best.0[1]);

    // relinearise the exact model around the current (Ω₀, offset)
    let (mut nbar, mut sigma) = (init.nbar.clone(), init.sigma.clone());
    let mut converged = false;
    let mut lin = Linearised::new(config, &d.x, rabi, offset)?;
    for round in 0..config.refine_iterations.max(1) {
        let cost = |p: &[f64]| -> Result<f64> {
            let (nb, sg, shift) = layout.unpack(p, &init.sigma);
            let w = config.model.thermal_weights(&nb)?;
            Ok(d.chi2(&lin.signal(&d.x, &w, shift, &sg)))
        };
        let (p, _, nm_conv) =
            polish(&cost, &layout.pack(&nbar, &sigma, (0.0, 0.0)), &layout.steps(rabi), config.max_iterations)?;
        let (nb, sg, (dr, doff)) = layout.unpack(&p, &init.sigma);
        nbar = nb;
        sigma = sg;
        if dr.abs() < 1e-3 * rabi && doff.abs() < 20.0 {
            converged = nm_conv;
            break;
        }
        if round + 1 == config.refine_iterations.max(1) {
            break;
        }
        // trust region: the linear model is only good for small shifts
        rabi = (rabi + dr.clamp(-0.05 * rabi, 0.05 * rabi)).abs();
        offset += doff.clamp(-1500.0, 1500.0);
        lin = Linearised::new(config, &d.x, rabi, offset)?;
    }

    // final fit on the last linearisation, shifts included
    let final_cost = |p: &[f64]| -> Result<f64> {
        let (nb, sg, shift) = layout.unpack(p, &init.sigma);
        let w = config.model.thermal_weights(&nb)?;
        Ok(d.chi2(&lin.signal(&d.x, &w, shift, &sg)))
    };
    let (p, chi2, _) =
        polish(&final_cost, &layout.pack(&nbar, &sigma, (0.0, 0.0)), &layout.steps(rabi), config.max_iterations)?;
    let n = p.len();
    let (nbar, sigma, (dr, doff)) = layout.unpack(&p, &init.sigma);
    let best_p = layout.pack(&nbar, &sigma, (dr, doff));
    let dof = (data.len() - n_free).max(1);

    let mut unc = vec![f64::NAN; n];
    if config.uncertainties {
        let mut h: Vec<f64> = vec![0.01; layout.modes];
        if layout.fit_sigma {
            h.extend(std::iter::repeat(30.0).take(layout.modes));
        }
        h.push(5e-4 * rabi);
        h.push(10.0);
        match covariance(&final_cost, &best_p, &h)? {
            Some(cov) => {
                for (i, u) in unc.iter_mut().enumerate() {
                    let v = cov[(i, i)];
                    *u = if v >= 0.0 { v.sqrt() } else { f64::NAN };
                }
            }
            None => converged = false,
        }
    }

    let k = layout.modes;
    let sigma_unc = if layout.fit_sigma { unc[k..2 * k].to_vec() } else { vec![0.0; k] };
    Ok(FitResult {
        nbar,
        nbar_uncertainty: unc[..k].to_vec(),
        gaussian_sigma: sigma,
        sigma_uncertainty: sigma_unc,
        carrier_offset: lin.offset + doff,
        carrier_offset_uncertainty: unc[n - 1],
        rabi_frequency: lin.rabi + dr,
        rabi_uncertainty: unc[n - 2],
        chi_squared: chi2,
        reduced_chi_squared: chi2 / dof as f64,
        points: data.len(),
        converged,
        upper_bound_only,
        observable: config.observable,
    })
}

/// 2·H⁻¹ from a central-difference Hessian of χ²; None when H is singular.
fn covariance(f: &dyn Fn(&[f64]) -> Result<f64>, p: &[f64], h: &[f64]) -> Result<Option<DMatrix<f64>>> {
    let n = p.len();
    let f0 = f(p)?;
    let eval = |shifts: &[(usize, f64)]| -> Result<f64> {
        let mut q = p.to_vec();
        for &(i, s) in shifts {
            q[i] += s;
        }
        f(&q)
    };
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let fp = eval(&[(i, h[i])])?;
        let fm = eval(&[(i, -h[i])])?;
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let fpp = eval(&[(i, h[i]), (j, h[j])])?;
            let fpm = eval(&[(i, h[i]), (j, -h[j])])?;
            let fmp = eval(&[(i, -h[i]), (j, h[j])])?;
            let fmm = eval(&[(i, -h[i]), (j, -h[j])])?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess.try_inverse().map(|inv| inv * 2.0))
}

/// Mean of independent per-ion fits; uncertainties are combined as for the
/// mean of independent estimates.
pub fn average_fits(fits: &[FitResult]) -> Result<FitResult> {
    let first = fits.first().ok_or_else(|| Error::InsufficientData("no fits to average".into()))?;
    let n = fits.len() as f64;
    let k = first.nbar.len();
    if fits.iter().any(|f| f.nbar.len() != k) {
        return Err(Error::invalid("fits", "mode counts differ"));
    }
    let mean = |g: &dyn Fn(&FitResult) -> f64| fits.iter().map(g).sum::<f64>() / n;
    let comb = |g: &dyn Fn(&FitResult) -> f64| fits.iter().map(|f| g(f).powi(2)).sum::<f64>().sqrt() / n;
    Ok(FitResult {
        nbar: (0..k).map(|m| mean(&|f| f.nbar[m])).collect(),
        nbar_uncertainty: (0..k).map(|m| comb(&|f| f.nbar_uncertainty[m])).collect(),
        gaussian_sigma: (0..k).map(|m| mean(&|f| f.gaussian_sigma[m])).collect(),
        sigma_uncertainty: (0..k).map(|m| comb(&|f| f.sigma_uncertainty[m])).collect(),
        carrier_offset: mean(&|f| f.carrier_offset),
        carrier_offset_uncertainty: comb(&|f| f.carrier_offset_uncertainty),
        rabi_frequency: mean(&|f| f.rabi_frequency),
        rabi_uncertainty: comb(&|f| f.rabi_uncertainty),
        chi_squared: fits.iter().map(|f| f.chi_squared).sum(),
        reduced_chi_squared: mean(&|f| f.reduced_chi_squared),
        points: fits.iter().map(|f| f.points).sum(),
        converged: fits.iter().all(|f| f.converged),
        upper_bound_only: (0..k).map(|m| fits.iter().any(|f| f.upper_bound_only[m])).collect(),
        observable: first.observable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectroscopy::{scan_grid, LdMode};
    use approx::assert_relative_eq;

    fn config(nbar: f64) -> FitConfig {
        let model = SpectrumModel::new(1, vec![LdMode { frequency: 162e3, eta: 0.17 }], vec![0.0])
            .unwrap()
            .with_cutoffs(3, 5)
            .unwrap();
        let initial = FitParams { nbar: vec![nbar], rabi_frequency: 14e3, carrier_offset: 0.0, sigma: vec![0.0] };
        let mut c = FitConfig::new(model, 30e-6, Observable::SingleIon(0), initial);
        c.fit_broadening = false;
        c.refine_iterations = 4;
        c
    }

    fn points(cfg: &FitConfig, truth: &FitParams) -> Vec<SpectrumPoint> {
        let x = scan_grid(&[-162e3, 0.0, 162e3], 20e3, 2e3).unwrap();
        let y = cfg.predict(&x, truth).unwrap();
        x.iter().zip(y).map(|(&d, e)| SpectrumPoint::new(d, e.clamp(0.0, 1.0), 500, cfg.observable).unwrap()).collect()
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let truth = FitParams { nbar: vec![0.4], rabi_frequency: 13.2e3, carrier_offset: 400.0, sigma: vec![0.0] };
        let cfg = config(1.0);
        let data = points(&cfg, &truth);
        let fit = fit_sideband_spectrum(&data, &cfg).unwrap();
        assert_relative_eq!(fit.nbar[0], 0.4, max_relative = 0.03);
        assert_relative_eq!(fit.rabi_frequency, 13.2e3, max_relative = 0.01);
        assert!((fit.carrier_offset - 400.0).abs() < 100.0);
        assert!(fit.nbar_uncertainty[0] > 0.0);
        assert!(!fit.upper_bound_only[0]);
    }

    #[test]
    fn missing_red_sideband_marks_an_upper_bound() {
        let cfg = config(0.5);
        let truth = cfg.initial.clone();
        let data: Vec<_> = points(&cfg, &truth).into_iter().filter(|p| p.detuning > -100e3).collect();
        let fit = fit_sideband_spectrum(&data, &cfg).unwrap();
        assert!(fit.upper_bound_only[0]);
    }

    #[test]
    fn too_few_points() {
        let cfg = config(0.5);
        let p = SpectrumPoint::new(0.0, 0.5, 100, cfg.observable).unwrap();
        assert!(matches!(fit_sideband_spectrum(&[p, p, p], &cfg), Err(Error::InsufficientData(_))));
        assert!(matches!(fit_sideband_spectrum(&[], &cfg), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn averaging_halves_variance_of_two_equal_fits() {
        let f = FitResult {
            nbar: vec![1.0],
            nbar_uncertainty: vec![0.2],
            gaussian_sigma: vec![500.0],
            sigma_uncertainty: vec![50.0],
            carrier_offset: 0.0,
            carrier_offset_uncertainty: 10.0,
            rabi_frequency: 14e3,
            rabi_uncertainty: 100.0,
            chi_squared: 3.0,
            reduced_chi_squared: 1.0,
            points: 10,
            converged: true,
            upper_bound_only: vec![false],
            observable: Observable::SingleIon(0),
        };
        let mut g = f.clone();
        g.nbar[0] = 2.0;
        let avg = average_fits(&[f, g]).unwrap();
        assert_relative_eq!(avg.nbar[0], 1.5);
        assert_relative_eq!(avg.nbar_uncertainty[0], 0.2 / 2f64.sqrt(), max_relative = 1e-12);
        assert_eq!(avg.points, 20);
        assert!(average_fits(&[]).is_err());
    }
}
