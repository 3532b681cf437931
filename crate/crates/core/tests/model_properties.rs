use std::f64::consts::PI;

use ifm_core::model::{
    calibrate_fit, exit_intensities, forward_targets, ideal_params, optimize_attenuation,
    outcome_probabilities, AttenuationGrid, FitConfig, InterferometerParams, Objective,
    ObjectiveValue,
};
use ifm_core::ObjectKind;
use proptest::prelude::*;

fn arb_params() -> impl Strategy<Value = InterferometerParams> {
    (
        proptest::array::uniform4(0.0..1.0f64),
        proptest::array::uniform4(0.0..1.0f64),
        0.0..=1.0f64,
        0.0..=1.0f64,
        0.0..2.0f64,
        -PI..PI,
        any::<(bool, bool)>(),
    )
        .prop_map(|(c, k, v, t, extra, phi0, (s1, s2))| {
            let coh = [[c[0], c[1]], [c[2], c[3]]];
            let inc = [[k[0], k[1]], [k[2], k[3]]];
            let path_i = coh[0][0] + inc[0][0] + coh[1][0] + inc[1][0];
            InterferometerParams {
                coh_coupling: coh,
                inc_coupling: inc,
                coherence: v,
                exit_sign: [if s1 { 1.0 } else { -1.0 }, if s2 { 1.0 } else { -1.0 }],
                phase_offset: phi0,
                attenuation: t,
                test_path_flux: path_i + extra,
            }
        })
}

fn arb_object() -> impl Strategy<Value = Option<ObjectKind>> {
    prop_oneof![
        Just(None),
        Just(Some(ObjectKind::Black)),
        Just(Some(ObjectKind::Transparent))
    ]
}

fn amplitude(p: &InterferometerParams, exit: usize) -> f64 {
    let a = exit_intensities(p, p.operating_phase(), None).unwrap();
    let b = exit_intensities(p, p.operating_phase() + PI, None).unwrap();
    let (x, y) = if exit == 0 {
        (a.i1, b.i1)
    } else {
        (a.i2, b.i2)
    };
    0.5 * (x - y).abs()
}

proptest! {
    #[test]
    fn flux_is_conserved(p in arb_params(), phase in -10.0..10.0f64, object in arb_object()) {
        let x = exit_intensities(&p, phase, object).unwrap();
        for part in [x.i1, x.i2, x.absorbed_object, x.absorbed_attenuator, x.lost_unused] {
            prop_assert!(part >= 0.0);
        }
        let incident = p.incident_flux();
        prop_assert!((x.total() - incident).abs() <= 1e-9 * incident.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn amplitude_scales_with_root_t(p in arb_params(), t in 0.0..=1.0f64) {
        let full = p.with_attenuation(1.0);
        for exit in 0..2 {
            let reference = amplitude(&full, exit);
            prop_assume!(reference > 1e-6);
            let ratio = amplitude(&p.with_attenuation(t), exit) / reference;
            prop_assert!((ratio - t.sqrt()).abs() <= 1e-12, "exit {}: {} vs {}", exit, ratio, t.sqrt());
        }
    }

    #[test]
    fn black_object_is_phase_independent(p in arb_params(), phases in proptest::collection::vec(-10.0..10.0f64, 8)) {
        let values: Vec<_> = phases
            .iter()
            .map(|&ph| exit_intensities(&p, ph, Some(ObjectKind::Black)).unwrap())
            .collect();
        for v in &values {
            prop_assert_eq!(v.i1, values[0].i1);
            prop_assert_eq!(v.i2, values[0].i2);
        }
    }

    #[test]
    fn absorption_grows_with_transmittance(p in arb_params(), t1 in 0.0..1.0f64, dt in 1e-3..1.0f64) {
        prop_assume!(p.test_path_flux > 1e-3);
        prop_assume!(p.coupling(0, 1) + p.coupling(1, 1) > 1e-3);
        let t2 = (t1 + dt).min(1.0);
        prop_assume!(t2 > t1);
        let a = outcome_probabilities(&p.with_attenuation(t1), ObjectKind::Black).unwrap();
        let b = outcome_probabilities(&p.with_attenuation(t2), ObjectKind::Black).unwrap();
        prop_assert!(b.p_iii.unwrap().value > a.p_iii.unwrap().value);
    }
}

fn arb_instrument() -> impl Strategy<Value = InterferometerParams> {
    (
        proptest::array::uniform4(0.05..1.0f64),
        proptest::array::uniform4(0.0..0.5f64),
        0.2..0.95f64,
        0.05..1.0f64,
        0.05..1.0f64,
        -PI..PI,
    )
        .prop_map(|(c, k, v, t, extra, phi0)| {
            let coh = [[c[0], c[1]], [c[2], c[3]]];
            let inc = [[k[0], k[1]], [k[2], k[3]]];
            let path_i = coh[0][0] + inc[0][0] + coh[1][0] + inc[1][0];
            InterferometerParams {
                coh_coupling: coh,
                inc_coupling: inc,
                coherence: v,
                exit_sign: [1.0, -1.0],
                phase_offset: phi0,
                attenuation: t,
                test_path_flux: path_i + extra,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn calibration_round_trip(p in arb_instrument()) {
        let targets = forward_targets(&p).unwrap();
        let config = FitConfig { residual_bound: 1e-6, ..FitConfig::default() };
        let fit = calibrate_fit(&targets, &config).unwrap();
        prop_assert!(fit.is_converged(), "max residual {}", fit.max_abs_residual());
        let again = forward_targets(&fit.params).unwrap();
        for (a, b) in [
            (again.exit_mean[0], targets.exit_mean[0]),
            (again.exit_mean[1], targets.exit_mean[1]),
            (again.exit_amplitude[0], targets.exit_amplitude[0]),
            (again.exit_amplitude[1], targets.exit_amplitude[1]),
            (again.black[0], targets.black[0]),
            (again.black[1], targets.black[1]),
            (again.black[2], targets.black[2]),
            (again.transparent[0], targets.transparent[0]),
            (again.transparent[1], targets.transparent[1]),
        ] {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn attenuation_scan_is_total_and_order_free() {
    let mut p = ideal_params();
    p.coherence = 0.6;
    p.inc_coupling[1][1] = 0.3;
    for objective in [
        Objective::EnrichmentAt { f: 0.5 },
        Objective::LikelihoodRatio,
        Objective::CorrectClassification { f: 0.5 },
    ] {
        let scan = optimize_attenuation(&p, objective, AttenuationGrid::default()).unwrap();
        assert_eq!(scan.points.len(), 512);
        for (k, point) in scan.points.iter().enumerate() {
            assert_eq!(point.t, (k + 1) as f64 / 512.0);
            match &point.value {
                ObjectiveValue::Finite(v) => assert!(v.is_finite()),
                ObjectiveValue::Unbounded | ObjectiveValue::Undefined(_) => {}
            }
        }
        // single-threaded evaluation must agree with the parallel scan
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let serial = pool
            .install(|| optimize_attenuation(&p, objective, AttenuationGrid::default()))
            .unwrap();
        assert_eq!(serial, scan);
    }
}
