use approx::assert_relative_eq;
use proptest::prelude::*;

use sideband_core::cooling::{
    apply_heating, apply_pulse, optimize_sequence, run_sequence, thermal_auto, thermal_distribution,
    two_ion_string_sequence, CoolingSequence, OptimizerConfig, PhononDistribution, PulseBlock, PulseModel, PulseSpec,
};
use sideband_core::coupling::SidebandOrder;
use sideband_core::scenario::Scenario;
use sideband_core::spectroscopy::{heating_rate_fit, HeatingPoint};

// Population left in n = 1 after 100 µs on the first red sideband at η = 0.17,
// Ω₀ = 14 kHz, Γ = 5 kHz: exp(−Rτ) with R = ΓΩ²/(Γ² + 2Ω²), 30-digit arithmetic.
const SURVIVAL_100US: f64 = 0.618_690_676_998_239_1;

#[test]
fn frozen_single_level_pumping() {
    let start = PhononDistribution::fock(1, 0, (5, 0)).unwrap();
    let pulse = PulseSpec::new(SidebandOrder::new(-1, 0), 100.0, 1).unwrap();
    let after = apply_pulse(&start, &pulse, (0.17, 0.0), &PulseModel::default()).unwrap();
    assert_relative_eq!(after.get(1, 0), SURVIVAL_100US, max_relative = 1e-9);
    assert_relative_eq!(after.get(0, 0), 1.0 - SURVIVAL_100US, max_relative = 1e-9);
}

#[test]
fn table_one_from_doppler_limit() {
    let s = Scenario::preset("doppler-162k").unwrap();
    let start = thermal_auto(87.0, 51.0).unwrap();
    let (end, means) = run_sequence(&start, &two_ion_string_sequence(), s.eta_pair().unwrap(), &s.pulse_model()).unwrap();
    assert!(end.ground_population(0) > 0.5 && end.ground_population(1) > 0.5);
    assert!(means.0 < 87.0 && means.1 < 51.0);
    assert!((end.total() + end.leakage() - 1.0).abs() < 1e-9);
}

#[test]
fn heating_slope_matches_rate() {
    let start = thermal_distribution(0.3, 0.07, (150, 100)).unwrap();
    let rates = (11.0, 0.8);
    let points: Vec<(HeatingPoint, HeatingPoint)> = (0..=8)
        .map(|k| {
            let t = k as f64 * 0.025;
            let d = apply_heating(&start, rates, t).unwrap();
            let p = |nbar| HeatingPoint { delay: t, nbar, uncertainty: 0.0 };
            (p(d.mean(0)), p(d.mean(1)))
        })
        .collect();
    let com: Vec<_> = points.iter().map(|p| p.0).collect();
    let b: Vec<_> = points.iter().map(|p| p.1).collect();
    assert_relative_eq!(heating_rate_fit(&com).unwrap().rate, 11.0, max_relative = 0.02);
    assert_relative_eq!(heating_rate_fit(&b).unwrap().rate, 0.8, max_relative = 0.02);
}

fn final_means(start: &PhononDistribution, seq: &CoolingSequence, s: &Scenario) -> (f64, f64) {
    run_sequence(start, seq, s.eta_pair().unwrap(), &s.pulse_model()).unwrap().1
}

#[test]
fn doubling_the_grid_leaves_results_unchanged() {
    let planar = {
        let p = |d1, d2, us| PulseSpec::new(SidebandOrder::new(d1, d2), us, 1).unwrap();
        CoolingSequence::new(vec![PulseBlock::new(vec![p(-1, 0, 300.0), p(0, -1, 300.0)], 10)]).unwrap()
    };
    for (name, seq) in [
        ("doppler-162k", two_ion_string_sequence()),
        ("string-cooled-162k", two_ion_string_sequence()),
        ("planar-346k", planar),
    ] {
        let s = Scenario::preset(name).unwrap();
        let (a, b) = s.nbar_pair();
        let start = thermal_auto(a, b).unwrap();
        let (m1, m2) = start.n_max();
        let wide = thermal_distribution(a, b, (2 * m1 + 1, 2 * m2 + 1)).unwrap();
        let x = final_means(&start, &seq, &s);
        let y = final_means(&wide, &seq, &s);
        assert!((x.0 - y.0).abs() < 1e-4 && (x.1 - y.1).abs() < 1e-4, "{name}: {x:?} vs {y:?}");
    }
}

#[test]
fn optimizer_is_reproducible() {
    let start = thermal_distribution(2.0, 1.0, (40, 30)).unwrap();
    let candidates = [SidebandOrder::new(-1, 0), SidebandOrder::new(0, -1), SidebandOrder::new(-2, 0)];
    let cfg = OptimizerConfig { seed: 11, max_iterations: 8, ..Default::default() };
    let a = optimize_sequence(&start, (0.17, 0.13), 4e-3, &candidates, &cfg).unwrap();
    let b = optimize_sequence(&start, (0.17, 0.13), 4e-3, &candidates, &cfg).unwrap();
    assert_eq!(a.sequence.to_string(), b.sequence.to_string());
    assert!(a.objective <= a.baseline_objective);
}

fn distribution(max: (usize, usize)) -> impl Strategy<Value = PhononDistribution> {
    let len = (max.0 + 1) * (max.1 + 1);
    proptest::collection::vec(0.0f64..1.0, len).prop_map(move |w| {
        let total: f64 = w.iter().sum::<f64>().max(1e-12);
        PhononDistribution::from_probs(max, w.iter().map(|x| x / total).collect()).unwrap()
    })
}

fn red_or_carrier() -> impl Strategy<Value = SidebandOrder> {
    (-3i32..=0, -2i32..=0).prop_map(|(a, b)| SidebandOrder::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pulses_conserve_probability(
        d in distribution((15, 12)),
        sb in red_or_carrier(),
        us in 1.0f64..3000.0,
        e1 in 0.05f64..0.3,
        e2 in 0.05f64..0.3,
    ) {
        let p = PulseSpec::new(sb, us, 1).unwrap();
        let after = apply_pulse(&d, &p, (e1, e2), &PulseModel::default()).unwrap();
        prop_assert!((after.total() + after.leakage() - 1.0).abs() < 1e-9);
        prop_assert!(after.probs().iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn resonant_red_pulse_never_heats_its_mode(
        d in distribution((20, 20)),
        order in 1i32..=3,
        mode in 0usize..2,
        us in 1.0f64..3000.0,
    ) {
        let sb = if mode == 0 { SidebandOrder::new(-order, 0) } else { SidebandOrder::new(0, -order) };
        let p = PulseSpec::new(sb, us, 1).unwrap();
        let after = apply_pulse(&d, &p, (0.17, 0.13), &PulseModel::default()).unwrap();
        prop_assert!(after.mean(mode) <= d.mean(mode) + 1e-12);
        let other = 1 - mode;
        prop_assert!((after.mean(other) - d.mean(other)).abs() < 1e-9);
    }

    #[test]
    fn heating_conserves_probability(d in distribution((10, 10)), r1 in 0.0f64..20.0, r2 in 0.0f64..20.0) {
        let padded = d.resized((120, 120)).unwrap();
        let after = apply_heating(&padded, (r1, r2), 0.05).unwrap();
        prop_assert!((after.total() + after.leakage() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sequence_text_round_trips(
        blocks in proptest::collection::vec(
            (proptest::collection::vec((-4i32..=4, -4i32..=4, 1u32..5000, 1u32..4), 1..5), 1u32..20),
            1..4,
        )
    ) {
        let blocks: Vec<PulseBlock> = blocks
            .into_iter()
            .map(|(pulses, repeats)| {
                let pulses = pulses
                    .into_iter()
                    .map(|(a, b, us, r)| PulseSpec::new(SidebandOrder::new(a, b), us as f64 / 4.0, r).unwrap())
                    .collect();
                PulseBlock::new(pulses, repeats)
            })
            .collect();
        let seq = CoolingSequence::new(blocks).unwrap();
        let again: CoolingSequence = seq.to_string().parse().unwrap();
        prop_assert_eq!(again, seq);
    }

    #[test]
    fn distribution_csv_round_trips(d in distribution((6, 4))) {
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = PhononDistribution::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.n_max(), d.n_max());
        prop_assert_eq!(back.probs(), d.probs());
    }
}
