use approx::assert_relative_eq;
use proptest::prelude::*;

use sideband_core::scenario::Scenario;
use sideband_core::spectroscopy::{
    evolve_two_ion, fit_sideband_spectrum, read_spectrum_csv, sample_spectrum, scan_grid, write_spectrum_csv,
    FitConfig, FitParams, IonBasis, IonState, LdMode, Observable, ProbePulse, SpectrumModel, SpectrumPoint,
};

#[test]
fn norm_is_preserved_over_ten_milliseconds() {
    let modes = [LdMode { frequency: 162e3, eta: 0.17 }, LdMode { frequency: 280.6e3, eta: 0.13 }];
    let basis = IonBasis::new(2, vec![2, 2]).unwrap();
    let start = IonState::ground(basis, &[1, 0], vec![-1e3, 1e3]).unwrap();
    let probe = ProbePulse::new(-162e3, 10e-3, 14e3).unwrap();
    let end = evolve_two_ion(&start, &probe, &modes, 10e-3).unwrap();
    assert!((end.norm() - 1.0).abs() < 1e-8);
}

#[test]
fn resonant_carrier_flop_of_the_motional_ground_state() {
    // Ω_eff = Ω₀(1 − η²/2) at n = 0; a π pulse at the effective frequency inverts the ion
    let eta: f64 = 0.05;
    let modes = [LdMode { frequency: 500e3, eta }];
    let basis = IonBasis::new(1, vec![3]).unwrap();
    let start = IonState::ground(basis, &[0], vec![0.0]).unwrap();
    let rabi = 10e3;
    let t = 0.5 / (rabi * (1.0 - eta * eta / 2.0));
    let end = evolve_two_ion(&start, &ProbePulse::new(0.0, t, rabi).unwrap(), &modes, t).unwrap();
    assert_relative_eq!(end.excitation(0).unwrap(), 1.0, epsilon = 2e-3);
}

/// First-order sideband excitations of a single ion after a weak pulse timed
/// to a node of the off-resonant carrier.
fn sideband_pair(nbar: f64) -> (f64, f64) {
    let f = 162e3;
    let rabi = 2e3;
    let model = SpectrumModel::new(1, vec![LdMode { frequency: f, eta: 0.1 }], vec![0.0]).unwrap();
    let t = 16.0 / (rabi * rabi + f * f).sqrt();
    let s = model.spectrum(&[-f, f], &[nbar], rabi, t, 0.0, Observable::SingleIon(0)).unwrap();
    (s[0], s[1])
}

#[test]
fn spectrum_csv_round_trip() {
    let pts: Vec<SpectrumPoint> = [(-1.5e3, 0.25, 200), (0.0, 0.5, 200), (2.75e3, 0.0, 0)]
        .iter()
        .map(|&(d, e, n)| SpectrumPoint::new(d, e, n, Observable::BothExcited).unwrap())
        .collect();
    let mut buf = Vec::new();
    write_spectrum_csv(&pts, &mut buf).unwrap();
    assert_eq!(read_spectrum_csv(buf.as_slice()).unwrap(), pts);
}

fn single_ion_config(initial: FitParams) -> FitConfig {
    let model = SpectrumModel::new(1, vec![LdMode { frequency: 162e3, eta: 0.17 }], vec![0.0])
        .unwrap()
        .with_cutoffs(3, 5)
        .unwrap();
    let mut c = FitConfig::new(model, 30e-6, Observable::SingleIon(0), initial);
    c.fit_broadening = false;
    c.uncertainties = false;
    c
}

#[test]
fn fit_recovers_parameters_over_a_grid() {
    let grid = scan_grid(&[-162e3, 0.0, 162e3], 20e3, 2e3).unwrap();
    let initial = FitParams { nbar: vec![0.5], rabi_frequency: 14e3, carrier_offset: 0.0, sigma: vec![0.0] };
    let cfg = single_ion_config(initial);
    let cases = [
        (0.05, 12e3, 0.0),
        (0.1, 13e3, 300.0),
        (0.2, 14e3, -400.0),
        (0.3, 15e3, 150.0),
        (0.4, 12.5e3, -150.0),
        (0.5, 13.5e3, 500.0),
        (0.6, 14.5e3, 0.0),
        (0.7, 15.5e3, -250.0),
        (0.8, 13e3, 250.0),
        (1.0, 14e3, -500.0),
    ];
    for (nbar, rabi, offset) in cases {
        let truth = FitParams { nbar: vec![nbar], rabi_frequency: rabi, carrier_offset: offset, sigma: vec![0.0] };
        let y = cfg.predict(&grid, &truth).unwrap();
        let data: Vec<SpectrumPoint> =
            grid.iter().zip(y).map(|(&d, e)| SpectrumPoint::new(d, e, 0, cfg.observable).unwrap()).collect();
        let fit = fit_sideband_spectrum(&data, &cfg).unwrap();
        assert!((fit.nbar[0] - nbar).abs() < 0.02 + 0.03 * nbar, "n̄ {nbar}: {}", fit.nbar[0]);
        assert_relative_eq!(fit.rabi_frequency, rabi, max_relative = 0.01);
        assert!((fit.carrier_offset - offset).abs() < 100.0, "offset {offset}: {}", fit.carrier_offset);
    }
}

#[test]
fn synthetic_data_is_reproducible() {
    let grid = scan_grid(&[0.0], 5e3, 500.0).unwrap();
    let p: Vec<f64> = grid.iter().map(|d| 0.5 + 0.4 * (d / 5e3)).collect();
    let a = sample_spectrum(&grid, &p, 200, 42, Observable::AnyExcited).unwrap();
    let b = sample_spectrum(&grid, &p, 200, 42, Observable::AnyExcited).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|x| (0.0..=1.0).contains(&x.excitation) && x.shots == 200));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn weak_pulse_sideband_ratio_is_thermal(nbar in 0.02f64..0.2) {
        let (red, blue) = sideband_pair(nbar);
        let expected = nbar / (nbar + 1.0);
        prop_assert!(((red / blue) - expected).abs() <= 0.02 * expected, "{} vs {}", red / blue, expected);
    }

    #[test]
    fn planar_red_sideband_is_suppressed(n1 in 0.0f64..0.25, n2 in 0.0f64..0.25) {
        let s = Scenario::preset("planar-346k").unwrap();
        let model = s.spectrum_model().unwrap();
        let (f1, f2) = s.frequency_pair().unwrap();
        let p = model.spectrum(&[-f1, f1, -f2, f2], &[n1, n2], s.rabi_frequency, s.probe_duration, 0.0, Observable::BothExcited).unwrap();
        prop_assert!(p[0] < p[1] / 10.0, "COM {} vs {}", p[0], p[1]);
        prop_assert!(p[2] < p[3] / 10.0, "tilt {} vs {}", p[2], p[3]);
    }

    #[test]
    fn excitation_is_a_probability(det in -400e3f64..400e3, t in 1e-6f64..300e-6, nbar in 0.0f64..2.0) {
        let model = SpectrumModel::new(2, vec![LdMode { frequency: 162e3, eta: 0.17 }, LdMode { frequency: 280.6e3, eta: 0.13 }], vec![-1e3, 1e3]).unwrap();
        for obs in [Observable::BothExcited, Observable::AtLeastOneBright, Observable::AnyExcited, Observable::SingleIon(1)] {
            let p = model.spectrum(&[det], &[nbar, nbar / 2.0], 14e3, t, 0.0, obs).unwrap()[0];
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
