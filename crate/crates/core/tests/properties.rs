use num_complex::Complex;
use proptest::prelude::*;
use reflectionless::cli_harness::{ExperimentConfig, GridSpec, Mode, ModelEntry, ModelSpec};
use reflectionless::cmv_core::{cmv_r_spec, laurent_weyl};
use reflectionless::dynamics::{evolve, norm_sqr, EnergyWindow, HorizonPolicy};
use reflectionless::lattice_models::{make_cmv, make_jacobi, truncate, Sequence};
use reflectionless::reflection_jacobi::{r_spec, ReflTolerances};
use reflectionless::weyl_jacobi::{weyl_solutions, BoundaryPath, WeylPolicy};
use reflectionless::{Model, C64};

fn perturbation() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..6).prop_flat_map(|len| {
        (
            prop::collection::vec(0.5f64..1.8, len),
            prop::collection::vec(-1.5f64..1.5, len),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jacobi_reflection_is_a_probability((a, b) in perturbation(), lambda in -1.9f64..1.9) {
        let j = make_jacobi(Sequence::window(-1, a, 1.0), Sequence::window(-1, b, 0.0), None).unwrap();
        let rep = r_spec(&j, lambda, &WeylPolicy::default(), &ReflTolerances::default()).unwrap();
        prop_assert!(rep.r_spec >= 0.0 && rep.r_spec <= 1.0 + 1e-12);
        prop_assert!((rep.alpha.norm_sqr() - rep.r_spec).abs() < 1e-9);
    }

    #[test]
    fn weyl_invariants((a, b) in perturbation(), lambda in -1.9f64..1.9) {
        let j = make_jacobi(Sequence::window(-2, a, 1.0), Sequence::window(-2, b, 0.0), None).unwrap();
        let w = weyl_solutions(&j, lambda, 10, &WeylPolicy::default()).unwrap();
        prop_assert!(w.wronskian_spread < 1e-9);
        prop_assert!(w.recurrence_residual(&j) < 1e-10);
        // f_± > 0 inside the band
        prop_assert!(w.f_plus > 0.0 && w.f_minus > 0.0);
    }

    #[test]
    fn closed_form_and_ladder_agree((a, b) in perturbation(), lambda in -1.6f64..1.6) {
        let j = make_jacobi(Sequence::window(0, a, 1.0), Sequence::window(0, b, 0.0), None).unwrap();
        let tol = ReflTolerances::default();
        let exact = r_spec(&j, lambda, &WeylPolicy::default().with_path(BoundaryPath::ClosedForm), &tol).unwrap();
        let ladder = r_spec(&j, lambda, &WeylPolicy::default().with_path(BoundaryPath::Ladder), &tol).unwrap();
        prop_assert!((exact.r_spec - ladder.r_spec).abs() < 1e-5 + 10.0 * ladder.err);
    }

    #[test]
    fn cmv_reflection_is_a_probability(
        coeffs in prop::collection::vec((0.0f64..0.85, -3.2f64..3.2), 1..5),
        theta in -3.1f64..3.1,
    ) {
        let alpha: Vec<C64> = coeffs.iter().map(|&(r, p)| C64::from_polar(r, p)).collect();
        let m = make_cmv(Sequence::window(0, alpha, Complex::new(0.0, 0.0))).unwrap();
        let rep = cmv_r_spec(&m, theta, &WeylPolicy::default(), &ReflTolerances::default()).unwrap();
        prop_assert!(rep.r_spec >= 0.0 && rep.r_spec <= 1.0 + 1e-12);
        prop_assert!((rep.alpha.norm_sqr() - rep.r_spec).abs() < 1e-9);
        let b = laurent_weyl(&m, theta, 6, &WeylPolicy::default()).unwrap();
        prop_assert!(b.wronskian_spread < 1e-9);
        prop_assert!(b.transfer_residual(&m) < 1e-10);
    }

    #[test]
    fn jacobi_flow_is_unitary_and_reversible(
        (a, b) in perturbation(),
        re in prop::collection::vec(-1.0f64..1.0, 9),
        im in prop::collection::vec(-1.0f64..1.0, 9),
        t in 0.1f64..30.0,
    ) {
        let j = make_jacobi(Sequence::window(-1, a, 1.0), Sequence::window(-1, b, 0.0), None).unwrap();
        let op = truncate(&Model::from(j), 60).unwrap();
        let mut psi = vec![Complex::new(0.0, 0.0); op.dim()];
        for k in 0..9 {
            psi[56 + k] = Complex::new(re[k], im[k]);
        }
        let fwd = evolve(&op, &psi, t).unwrap();
        prop_assert!((norm_sqr(&fwd) - norm_sqr(&psi)).abs() < 1e-10 * norm_sqr(&psi).max(1.0));
        let back = evolve(&op, &fwd, -t).unwrap();
        let err: f64 = back.iter().zip(&psi).map(|(x, y)| (x - y).norm_sqr()).sum();
        prop_assert!(err.sqrt() < 1e-9);
    }

    #[test]
    fn cmv_steps_are_unitary_and_reversible(
        coeffs in prop::collection::vec((0.0f64..0.9, -3.2f64..3.2), 1..6),
        steps in 1i64..80,
    ) {
        let alpha: Vec<C64> = coeffs.iter().map(|&(r, p)| C64::from_polar(r, p)).collect();
        let m = make_cmv(Sequence::window(-2, alpha, Complex::new(0.0, 0.0))).unwrap();
        let op = truncate(&Model::from(m), 50).unwrap();
        let mut psi = vec![Complex::new(0.0, 0.0); op.dim()];
        psi[50] = Complex::new(0.6, 0.0);
        psi[51] = Complex::new(0.0, 0.8);
        let fwd = evolve(&op, &psi, steps as f64).unwrap();
        prop_assert!((norm_sqr(&fwd) - 1.0).abs() < 1e-12);
        let back = evolve(&op, &fwd, -(steps as f64)).unwrap();
        let err: f64 = back.iter().zip(&psi).map(|(x, y)| (x - y).norm_sqr()).sum();
        prop_assert!(err.sqrt() < 1e-12);
    }

    #[test]
    fn config_round_trips(
        seed in any::<u64>(),
        n in 2usize..5000,
        c in -3.0f64..3.0,
        center in -2.0f64..2.0,
        halfwidth in 0.01f64..1.0,
        flat in 0.0f64..0.9,
        settle in 1usize..40,
        count in 1usize..200,
    ) {
        let window = EnergyWindow { center, halfwidth, flat_top: flat };
        let cfg = ExperimentConfig {
            schema: 1,
            name: "prop".into(),
            mode: Mode::Compare,
            seed,
            n,
            models: vec![
                ModelEntry {
                    name: "d".into(),
                    model: ModelSpec::Defect { c, site: 0 },
                    path: BoundaryPath::Ladder,
                    grid: Some(GridSpec { lo: -1.0, hi: 1.0, count, points: vec![], exclude: vec![0.0] }),
                    windows: None,
                    expect: Default::default(),
                },
                ModelEntry {
                    name: "r".into(),
                    model: ModelSpec::CmvRandom { radius: 0.5, support: Some(3) },
                    path: BoundaryPath::Auto,
                    grid: None,
                    windows: Some(vec![window]),
                    expect: Default::default(),
                },
            ],
            grid: None,
            windows: vec![window],
            horizon: HorizonPolicy { settle_samples: settle, ..Default::default() },
            tolerances: Default::default(),
            stone: Default::default(),
            parseval: Default::default(),
            dynamics: Default::default(),
            outputs: Default::default(),
        };
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }
}
