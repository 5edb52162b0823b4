use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use ode_solvers::{Dopri5, OutputType, System};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detection::{detection_mask, detection_observable};
use super::{Observable, ProbePulse};
use crate::{Error, Result};

const NORM_TOLERANCE: f64 = 1e-8;
const LAMB_DICKE_LIMIT: f64 = 0.5;

/// One axial mode as seen by the probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdMode {
    pub frequency: f64,
    pub eta: f64,
}

/// Product basis of ion spins and truncated Fock states.
///
/// Basis index = spin · fock_dim + fock, where bit `j` of `spin` marks ion `j`
/// as excited and the Fock index is mixed-radix with the last mode fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IonBasis {
    ions: usize,
    cutoffs: Vec<usize>,
}

impl IonBasis {
    pub fn new(ions: usize, cutoffs: Vec<usize>) -> Result<Self> {
        if !(1..=3).contains(&ions) {
            return Err(Error::invalid("ions", "must be 1, 2 or 3"));
        }
        if cutoffs.is_empty() {
            return Err(Error::invalid("cutoffs", "need at least one mode"));
        }
        Ok(IonBasis { ions, cutoffs })
    }

    pub fn ions(&self) -> usize {
        self.ions
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn spin_dim(&self) -> usize {
        1 << self.ions
    }

    pub fn fock_dim(&self) -> usize {
        self.cutoffs.iter().map(|c| c + 1).product()
    }

    pub fn dim(&self) -> usize {
        self.spin_dim() * self.fock_dim()
    }

    pub fn fock_index(&self, fock: &[usize]) -> Option<usize> {
        if fock.len() != self.cutoffs.len() {
            return None;
        }
        let mut idx = 0;
        for (n, c) in fock.iter().zip(&self.cutoffs) {
            if n > c {
                return None;
            }
            idx = idx * (c + 1) + n;
        }
        Some(idx)
    }

    pub fn fock_of(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.cutoffs.len()];
        for k in (0..self.cutoffs.len()).rev() {
            out[k] = idx % (self.cutoffs[k] + 1);
            idx /= self.cutoffs[k] + 1;
        }
        out
    }

    pub fn index(&self, spin: usize, fock: &[usize]) -> Option<usize> {
        if spin >= self.spin_dim() {
            return None;
        }
        self.fock_index(fock).map(|f| spin * self.fock_dim() + f)
    }
}

/// State of N ions and their axial modes, in the interaction picture.
#[derive(Debug, Clone, PartialEq)]
pub struct IonState {
    pub basis: IonBasis,
    pub amplitudes: Vec<Complex64>,
    /// Carrier frequency shift of each ion relative to the common carrier, hertz.
    pub carrier_offsets: Vec<f64>,
}

pub type TwoIonState = IonState;

impl IonState {
    pub fn new(basis: IonBasis, amplitudes: Vec<Complex64>, carrier_offsets: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::invalid("amplitudes", "length does not match the basis"));
        }
        if carrier_offsets.len() != basis.ions() {
            return Err(Error::invalid("carrier_offsets", "need one entry per ion"));
        }
        let s = IonState { basis, amplitudes, carrier_offsets };
        let drift = (s.norm() - 1.0).abs();
        if drift > NORM_TOLERANCE {
            return Err(Error::NormDrift { drift, tolerance: NORM_TOLERANCE });
        }
        Ok(s)
    }

    /// All ions in the ground electronic state, modes in the given Fock state.
    pub fn ground(basis: IonBasis, fock: &[usize], carrier_offsets: Vec<f64>) -> Result<Self> {
        let idx = basis.index(0, fock).ok_or_else(|| Error::invalid("fock", "outside the basis"))?;
        let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amps[idx] = Complex64::new(1.0, 0.0);
        Self::new(basis, amps, carrier_offsets)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Probability of each spin configuration, traced over the modes.
    pub fn joint_spin_populations(&self) -> Vec<f64> {
        let f = self.basis.fock_dim();
        self.amplitudes.chunks(f).map(|c| c.iter().map(|a| a.norm_sqr()).sum()).collect()
    }

    pub fn excitation(&self, ion: usize) -> Result<f64> {
        detection_observable(&self.joint_spin_populations(), Observable::SingleIon(ion))
    }
}

/// Static pieces of the Hamiltonian: H_I(t)_ab = V_ab · exp(i(E_a − E_b)t),
/// with E the diagonal of H0 = −Σ 2πν_k n_k + Σ_j 2πδ_j |↑_j⟩⟨↑_j| and V
/// the carrier plus first red and blue sidebands with the Debye–Waller
/// correction. Angular units.
struct Terms {
    energies: Vec<f64>,
    couplings: Vec<(usize, usize, Complex64)>,
}

fn build_terms(basis: &IonBasis, modes: &[LdMode], rabi_hz: f64, detunings: &[f64]) -> Terms {
    let fdim = basis.fock_dim();
    let mut energies = Vec::with_capacity(basis.dim());
    for spin in 0..basis.spin_dim() {
        let spin_e: f64 = (0..basis.ions()).filter(|j| spin & (1 << j) != 0).map(|j| 2.0 * PI * detunings[j]).sum();
        for f in 0..fdim {
            let fock = basis.fock_of(f);
            let phonon: f64 = fock.iter().zip(modes).map(|(&n, m)| 2.0 * PI * m.frequency * n as f64).sum();
            energies.push(spin_e - phonon);
        }
    }
    let half = PI * rabi_hz;
    let mut couplings = Vec::new();
    for spin in 0..basis.spin_dim() {
        for j in 0..basis.ions() {
            if spin & (1 << j) == 0 {
                continue;
            }
            let lower = spin & !(1 << j);
            for f in 0..fdim {
                let fock = basis.fock_of(f);
                let from = spin * fdim + f;
                // ⟨lower, f'| (Ω/2) σ⁻_j ⊗ M |spin, f⟩ and its conjugate
                let mut push = |target_fock: &[usize], m: Complex64| {
                    if let Some(t) = basis.fock_index(target_fock) {
                        let to = lower * fdim + t;
                        couplings.push((to, from, m * half));
                        couplings.push((from, to, (m * half).conj()));
                    }
                };
                let dw = 1.0 - fock.iter().zip(modes).map(|(&n, m)| m.eta * m.eta * (n as f64 + 0.5)).sum::<f64>();
                push(&fock, Complex64::new(dw, 0.0));
                for (k, m) in modes.iter().enumerate() {
                    let n = fock[k];
                    if n > 0 {
                        let mut down = fock.clone();
                        down[k] -= 1;
                        push(&down, Complex64::new(0.0, m.eta * (n as f64).sqrt()));
                    }
                    let mut up = fock.clone();
                    up[k] += 1;
                    push(&up, Complex64::new(0.0, m.eta * (n as f64 + 1.0).sqrt()));
                }
            }
        }
    }
    Terms { energies, couplings }
}

fn check_modes(basis: &IonBasis, modes: &[LdMode]) -> Result<()> {
    if modes.len() != basis.cutoffs().len() {
        return Err(Error::invalid("modes", "count does not match the basis"));
    }
    for m in modes {
        if !(m.frequency.is_finite() && m.frequency > 0.0) {
            return Err(Error::invalid("mode frequency", "must be positive"));
        }
        if !(m.eta.is_finite() && m.eta >= 0.0) {
            return Err(Error::invalid("lamb_dicke", "must be non-negative"));
        }
    }
    Ok(())
}

struct Schrodinger {
    /// (row, column, Re V, Im V, E_row − E_col)
    entries: Vec<(usize, usize, f64, f64, f64)>,
    dim: usize,
}

impl System<f64, DVector<f64>> for Schrodinger {
    fn system(&self, t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        dy.fill(0.0);
        let d = self.dim;
        for &(a, b, vr, vi, w) in &self.entries {
            let (s, c) = (w * t).sin_cos();
            let hr = vr * c - vi * s;
            let hi = vr * s + vi * c;
            let (pr, pi) = (y[b], y[d + b]);
            // dψ_a/dt = −i h ψ_b
            dy[a] += hr * pi + hi * pr;
            dy[d + a] -= hr * pr - hi * pi;
        }
    }
}

/// Integrates the Schrödinger equation for time `t` under the interaction
/// picture Lamb-Dicke Hamiltonian: carrier with Debye–Waller factor and the
/// first red and blue sidebands of every mode, with per-ion detunings
/// δ_j = probe detuning − carrier offset of ion j.
pub fn evolve_two_ion(state: &IonState, probe: &ProbePulse, modes: &[LdMode], t: f64) -> Result<IonState> {
    probe.validate()?;
    check_modes(&state.basis, modes)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("t", "must be non-negative"));
    }
    warn_outside_lamb_dicke(state, modes);
    if t == 0.0 {
        return Ok(state.clone());
    }
    let detunings: Vec<f64> = state.carrier_offsets.iter().map(|o| probe.detuning - o).collect();
    let terms = build_terms(&state.basis, modes, probe.rabi_frequency, &detunings);
    let e = &terms.energies;
    let sys = Schrodinger {
        entries: terms.couplings.iter().map(|&(a, b, v)| (a, b, v.re, v.im, e[a] - e[b])).collect(),
        dim: state.basis.dim(),
    };
    let d = state.basis.dim();
    let mut y0 = DVector::zeros(2 * d);
    for (i, a) in state.amplitudes.iter().enumerate() {
        y0[i] = a.re;
        y0[d + i] = a.im;
    }
    let mut solver = Dopri5::from_param(
        sys, 0.0, t, t, y0, 1e-10, 1e-12, 0.9, 0.04, 0.2, 10.0, t, 0.0, 5_000_000, u32::MAX, OutputType::Sparse,
    );
    solver.integrate().map_err(|e| Error::Integration(e.to_string()))?;
    let y = solver.y_out().last().ok_or_else(|| Error::Integration("no output".into()))?;
    let amplitudes: Vec<Complex64> = (0..d).map(|i| Complex64::new(y[i], y[d + i])).collect();
    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let drift = (norm - 1.0).abs();
    if drift > NORM_TOLERANCE {
        return Err(Error::NormDrift { drift, tolerance: NORM_TOLERANCE });
    }
    Ok(IonState { basis: state.basis.clone(), amplitudes, carrier_offsets: state.carrier_offsets.clone() })
}

fn warn_outside_lamb_dicke(state: &IonState, modes: &[LdMode]) {
    let f = state.basis.fock_dim();
    for (i, a) in state.amplitudes.iter().enumerate() {
        if a.norm_sqr() < 1e-12 {
            continue;
        }
        let fock = state.basis.fock_of(i % f);
        for (n, m) in fock.iter().zip(modes) {
            let x = m.eta * (2.0 * *n as f64 + 1.0).sqrt();
            if x >= LAMB_DICKE_LIMIT {
                log::warn!("η√(2n+1) = {x:.3} at n = {n}: outside the Lamb-Dicke regime");
                return;
            }
        }
    }
}

/// Populations, d/dΩ₀ and d/d(offset), each `[initial][spin]`.
struct Propagated(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Thermal mixture of low Fock states probed by the Lamb-Dicke Hamiltonian,
/// evaluated by exact diagonalisation.
///
/// In the frame rotating with H0 the Hamiltonian K = H0 + V is constant. The
/// diagonal phase gauge (−i)^{Σn} makes K real symmetric, so populations
/// after a pulse follow from one symmetric eigendecomposition per detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModel {
    pub ion_count: usize,
    pub modes: Vec<LdMode>,
    /// Carrier shift of each ion relative to the common carrier, hertz.
    pub carrier_offsets: Vec<f64>,
    /// Highest initial phonon number of each mode in the thermal mixture.
    pub initial_cutoff: usize,
    /// Highest phonon number kept in the basis.
    pub basis_cutoff: usize,
}

impl SpectrumModel {
    pub fn new(ion_count: usize, modes: Vec<LdMode>, carrier_offsets: Vec<f64>) -> Result<Self> {
        let m = SpectrumModel { ion_count, modes, carrier_offsets, initial_cutoff: 4, basis_cutoff: 5 };
        m.validate()?;
        Ok(m)
    }

    pub fn with_cutoffs(mut self, initial: usize, basis: usize) -> Result<Self> {
        self.initial_cutoff = initial;
        self.basis_cutoff = basis;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let basis = self.basis()?;
        check_modes(&basis, &self.modes)?;
        if self.carrier_offsets.len() != self.ion_count {
            return Err(Error::invalid("carrier_offsets", "need one entry per ion"));
        }
        if self.initial_cutoff >= self.basis_cutoff {
            return Err(Error::invalid("basis_cutoff", "must exceed the initial cutoff"));
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<IonBasis> {
        IonBasis::new(self.ion_count, vec![self.basis_cutoff; self.modes.len()])
    }

    /// Initial Fock states of the thermal mixture.
    pub fn initial_states(&self) -> Vec<Vec<usize>> {
        let init = IonBasis { ions: self.ion_count, cutoffs: vec![self.initial_cutoff; self.modes.len()] };
        (0..init.fock_dim()).map(|i| init.fock_of(i)).collect()
    }

    /// Thermal weights of [`Self::initial_states`], renormalised on the truncated set.
    pub fn thermal_weights(&self, nbar: &[f64]) -> Result<Vec<f64>> {
        if nbar.len() != self.modes.len() || nbar.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            return Err(Error::invalid("nbar", "need one non-negative value per mode"));
        }
        let q: Vec<f64> = nbar.iter().map(|n| n / (n + 1.0)).collect();
        let mut w: Vec<f64> =
            self.initial_states().iter().map(|f| f.iter().zip(&q).map(|(&n, q)| q.powi(n as i32)).product()).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        Ok(w)
    }

    fn real_hamiltonian(&self, basis: &IonBasis, detuning: f64, rabi: f64, carrier_offset: f64) -> DMatrix<f64> {
        let det: Vec<f64> = self.carrier_offsets.iter().map(|o| detuning - carrier_offset - o).collect();
        let terms = build_terms(basis, &self.modes, rabi, &det);
        let d = basis.dim();
        let fdim = basis.fock_dim();
        let phase = |i: usize| -> Complex64 {
            let n: usize = basis.fock_of(i % fdim).iter().sum();
            Complex64::new(0.0, -1.0).powu(n as u32)
        };
        let phases: Vec<Complex64> = (0..d).map(phase).collect();
        let mut k = DMatrix::from_diagonal(&DVector::from_vec(terms.energies));
        for (a, b, v) in terms.couplings {
            k[(a, b)] += (phases[a].conj() * v * phases[b]).re;
        }
        k
    }

    /// Joint spin populations after a pulse, for every initial state: `[initial][spin]`.
    pub fn joint_populations(&self, detuning: f64, rabi: f64, duration: f64, carrier_offset: f64) -> Result<Vec<Vec<f64>>> {
        Ok(self.propagate(detuning, rabi, duration, carrier_offset, false)?.0)
    }

    /// Populations and, when asked, their exact derivatives with respect to
    /// the Rabi frequency and the carrier offset.
    ///
    /// With K = QΛQᵀ the derivative of e^{−iKt} along B is Q(M∘F)Qᵀ, where
    /// M = QᵀBQ and F_kl = (e^{−iλ_k t} − e^{−iλ_l t})/(λ_k − λ_l).
    fn propagate(&self, detuning: f64, rabi: f64, duration: f64, carrier_offset: f64, derivatives: bool) -> Result<Propagated> {
        let basis = self.basis()?;
        let k = self.real_hamiltonian(&basis, detuning, rabi, carrier_offset);
        let d = basis.dim();
        let fdim = basis.fock_dim();
        let coupling = derivatives.then(|| {
            let mut b = k.clone();
            b.fill_diagonal(0.0);
            b / rabi
        });
        let eig = SymmetricEigen::new(k);
        let q = &eig.eigenvectors;
        let lam = &eig.eigenvalues;
        let inits: Vec<usize> =
            self.initial_states().iter().map(|f| basis.index(0, f).expect("initial state inside basis")).collect();
        let ni = inits.len();
        let c = DMatrix::from_fn(d, ni, |kk, col| q[(inits[col], kk)]);
        let cr = DMatrix::from_fn(d, ni, |kk, col| c[(kk, col)] * (lam[kk] * duration).cos());
        let ci = DMatrix::from_fn(d, ni, |kk, col| -c[(kk, col)] * (lam[kk] * duration).sin());
        let ar = q * cr;
        let ai = q * ci;
        let spins = basis.spin_dim();
        let pops = (0..ni)
            .map(|col| {
                (0..spins).map(|s| (s * fdim..(s + 1) * fdim).map(|r| ar[(r, col)].powi(2) + ai[(r, col)].powi(2)).sum()).collect()
            })
            .collect();
        let Some(coupling) = coupling else {
            return Ok(Propagated(pops, Vec::new(), Vec::new()));
        };
        let t = duration;
        let mut fr = DMatrix::zeros(d, d);
        let mut fi = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in 0..=a {
                let mu = 0.5 * (lam[a] + lam[b]);
                let x = 0.5 * (lam[a] - lam[b]) * t;
                let sinc = if x.abs() < 1e-8 { 1.0 } else { x.sin() / x };
                let (s, co) = (mu * t).sin_cos();
                fr[(a, b)] = -t * sinc * s;
                fi[(a, b)] = -t * sinc * co;
                fr[(b, a)] = fr[(a, b)];
                fi[(b, a)] = fi[(a, b)];
            }
        }
        let excited = DVector::from_fn(d, |i, _| -2.0 * PI * ((i / fdim).count_ones() as f64));
        let mut shifted = q.clone();
        for (mut row, e) in shifted.row_iter_mut().zip(excited.iter()) {
            row *= *e;
        }
        let m_rabi = q.transpose() * coupling * q;
        let m_offset = q.transpose() * shifted;
        let derivative = |m: DMatrix<f64>| -> Vec<Vec<f64>> {
            let gr = m.component_mul(&fr) * &c;
            let gi = m.component_mul(&fi) * &c;
            let dr = q * gr;
            let di = q * gi;
            (0..ni)
                .map(|col| {
                    (0..spins)
                        .map(|s| {
                            (s * fdim..(s + 1) * fdim)
                                .map(|r| 2.0 * (ar[(r, col)] * dr[(r, col)] + ai[(r, col)] * di[(r, col)]))
                                .sum()
                        })
                        .collect()
                })
                .collect()
        };
        Ok(Propagated(pops, derivative(m_rabi), derivative(m_offset)))
    }

    /// Observable table with its derivatives in Rabi frequency and carrier
    /// offset, each `[point][initial]`.
    pub(crate) fn linearised_table(
        &self,
        detunings: &[f64],
        rabi: f64,
        duration: f64,
        carrier_offset: f64,
        observable: Observable,
    ) -> Result<[Vec<Vec<f64>>; 3]> {
        self.validate()?;
        let mask = detection_mask(self.ion_count, observable)?;
        let apply = |joint: &[Vec<f64>]| -> Vec<f64> {
            joint.iter().map(|j| j.iter().zip(&mask).filter(|(_, m)| **m).map(|(p, _)| p).sum()).collect()
        };
        let rows: Vec<[Vec<f64>; 3]> = detunings
            .par_iter()
            .map(|&det| {
                let Propagated(p, dr, doff) = self.propagate(det, rabi, duration, carrier_offset, true)?;
                Ok([apply(&p).into_iter().map(|v| v.clamp(0.0, 1.0)).collect(), apply(&dr), apply(&doff)])
            })
            .collect::<Result<_>>()?;
        let mut out: [Vec<Vec<f64>>; 3] = Default::default();
        for row in rows {
            for (o, r) in out.iter_mut().zip(row) {
                o.push(r);
            }
        }
        Ok(out)
    }

    /// Observable for every detuning and initial state: `[point][initial]`.
    pub fn excitation_table(
        &self,
        detunings: &[f64],
        rabi: f64,
        duration: f64,
        carrier_offset: f64,
        observable: Observable,
    ) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        detunings
            .par_iter()
            .map(|&det| {
                self.joint_populations(det, rabi, duration, carrier_offset)?
                    .iter()
                    .map(|joint| detection_observable(joint, observable))
                    .collect()
            })
            .collect()
    }

    /// Carrier-only approximation of [`Self::excitation_table`]: each ion
    /// flops independently at Ω₀ times the Debye–Waller factor of the initial
    /// Fock state, and sidebands are ignored.
    pub fn carrier_table(
        &self,
        detunings: &[f64],
        rabi: f64,
        duration: f64,
        carrier_offset: f64,
        observable: Observable,
    ) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let inits = self.initial_states();
        let spin_dim = 1usize << self.ion_count;
        detunings
            .iter()
            .map(|&det| {
                inits
                    .iter()
                    .map(|fock| {
                        let dw = 1.0
                            - fock.iter().zip(&self.modes).map(|(&n, m)| m.eta * m.eta * (n as f64 + 0.5)).sum::<f64>();
                        let w = rabi * dw.abs();
                        let p: Vec<f64> = self
                            .carrier_offsets
                            .iter()
                            .map(|o| {
                                let d = det - carrier_offset - o;
                                let g2 = w * w + d * d;
                                if g2 == 0.0 {
                                    0.0
                                } else {
                                    w * w / g2 * (PI * g2.sqrt() * duration).sin().powi(2)
                                }
                            })
                            .collect();
                        let joint: Vec<f64> = (0..spin_dim)
                            .map(|s| p.iter().enumerate().map(|(j, pj)| if s & (1 << j) != 0 { *pj } else { 1.0 - pj }).product())
                            .collect();
                        detection_observable(&joint, observable)
                    })
                    .collect()
            })
            .collect()
    }

    /// Thermal-mixture signal at each detuning, without broadening.
    pub fn spectrum(
        &self,
        detunings: &[f64],
        nbar: &[f64],
        rabi: f64,
        duration: f64,
        carrier_offset: f64,
        observable: Observable,
    ) -> Result<Vec<f64>> {
        let w = self.thermal_weights(nbar)?;
        let table = self.excitation_table(detunings, rabi, duration, carrier_offset, observable)?;
        Ok(table.iter().map(|row| row.iter().zip(&w).map(|(e, w)| e * w).sum::<f64>().clamp(0.0, 1.0)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn modes(e1: f64, e2: f64) -> Vec<LdMode> {
        vec![LdMode { frequency: 162e3, eta: e1 }, LdMode { frequency: 280.6e3, eta: e2 }]
    }

    #[test]
    fn basis_indexing_round_trips() {
        let b = IonBasis::new(2, vec![3, 2]).unwrap();
        assert_eq!(b.dim(), 4 * 12);
        for i in 0..b.fock_dim() {
            assert_eq!(b.fock_index(&b.fock_of(i)), Some(i));
        }
        assert_eq!(b.index(3, &[3, 2]), Some(47));
        assert_eq!(b.index(0, &[4, 0]), None);
    }

    #[test]
    fn decoupled_carrier_flops_each_ion() {
        let b = IonBasis::new(2, vec![2, 2]).unwrap();
        let s = IonState::ground(b, &[0, 0], vec![0.0, 0.0]).unwrap();
        let probe = ProbePulse::new(0.0, 20e-6, 14e3).unwrap();
        let t = 20e-6;
        let out = evolve_two_ion(&s, &probe, &modes(0.0, 0.0), t).unwrap();
        let expect = (PI * 14e3 * t).sin().powi(2);
        assert_relative_eq!(out.excitation(0).unwrap(), expect, epsilon = 1e-8);
        assert_relative_eq!(out.excitation(1).unwrap(), expect, epsilon = 1e-8);
        assert_relative_eq!(out.norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn detuning_split_separates_ions() {
        let b = IonBasis::new(2, vec![2, 2]).unwrap();
        let s = IonState::ground(b, &[0, 0], vec![-1e3, 1e3]).unwrap();
        let probe = ProbePulse::new(3e3, 100e-6, 5e3).unwrap();
        let out = evolve_two_ion(&s, &probe, &modes(0.17, 0.13), 100e-6).unwrap();
        assert!((out.excitation(0).unwrap() - out.excitation(1).unwrap()).abs() > 1e-2);
    }

    #[test]
    fn eigen_route_matches_integrator() {
        let model = SpectrumModel::new(2, modes(0.17, 0.13), vec![-1e3, 1e3]).unwrap().with_cutoffs(2, 3).unwrap();
        let basis = model.basis().unwrap();
        for det in [0.0, -161e3, 163e3, 281e3] {
            let joint = model.joint_populations(det, 14e3, 150e-6, 0.0).unwrap();
            for (k, fock) in model.initial_states().iter().enumerate() {
                let s = IonState::ground(basis.clone(), fock, vec![-1e3, 1e3]).unwrap();
                let probe = ProbePulse::new(det, 150e-6, 14e3).unwrap();
                let out = evolve_two_ion(&s, &probe, &model.modes, 150e-6).unwrap();
                for (a, b) in out.joint_spin_populations().iter().zip(&joint[k]) {
                    assert!((a - b).abs() < 1e-7, "det {det} fock {fock:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let model = SpectrumModel::new(2, modes(0.17, 0.13), vec![-1e3, 1e3]).unwrap().with_cutoffs(2, 3).unwrap();
        let obs = Observable::SingleIon(1);
        let x = [-160e3, 0.0, 2.5e3, 281e3];
        let [t, dr, doff] = model.linearised_table(&x, 14e3, 150e-6, 100.0, obs).unwrap();
        let h = 1e-2;
        let up = model.excitation_table(&x, 14e3 + h, 150e-6, 100.0, obs).unwrap();
        let dn = model.excitation_table(&x, 14e3 - h, 150e-6, 100.0, obs).unwrap();
        let right = model.excitation_table(&x, 14e3, 150e-6, 100.0 + h, obs).unwrap();
        let left = model.excitation_table(&x, 14e3, 150e-6, 100.0 - h, obs).unwrap();
        for p in 0..x.len() {
            for i in 0..t[p].len() {
                let fd_r = (up[p][i] - dn[p][i]) / (2.0 * h);
                let fd_o = (right[p][i] - left[p][i]) / (2.0 * h);
                assert!((dr[p][i] - fd_r).abs() < 1e-7 + 1e-4 * fd_r.abs(), "{} vs {}", dr[p][i], fd_r);
                assert!((doff[p][i] - fd_o).abs() < 1e-7 + 1e-4 * fd_o.abs(), "{} vs {}", doff[p][i], fd_o);
            }
        }
    }

    #[test]
    fn ground_state_red_sideband_is_dark() {
        let model = SpectrumModel::new(2, modes(0.17, 0.13), vec![0.0, 0.0]).unwrap();
        let red = model.spectrum(&[-162e3], &[0.0, 0.0], 14e3, 210e-6, 0.0, Observable::SingleIon(0)).unwrap();
        let blue = model.spectrum(&[162e3], &[0.0, 0.0], 14e3, 210e-6, 0.0, Observable::SingleIon(0)).unwrap();
        assert!(red[0] < 0.01, "{}", red[0]);
        assert!(blue[0] > 0.3, "{}", blue[0]);
    }

    #[test]
    fn thermal_weights_are_normalised_geometric() {
        let model = SpectrumModel::new(2, modes(0.17, 0.13), vec![0.0, 0.0]).unwrap();
        let w = model.thermal_weights(&[0.3, 0.0]).unwrap();
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        let q: f64 = 0.3 / 1.3;
        assert_relative_eq!(w[5] / w[0], q, max_relative = 1e-12);
        assert!(model.thermal_weights(&[-0.1, 0.0]).is_err());
    }
}
