use bsppa_core::algorithms::{
    run_unified, EstimatorState, RunConfig, SamplingStreams, StepSchedule, SvrpOuter, Variant,
};
use bsppa_core::harness::{read_records, write_records};
use bsppa_core::kernels::{
    bregman_definitional, dual_bregman_definitional, Burg, Euclidean, Kernel, KernelId,
};
use bsppa_core::problems::{make_poisson_instance, FiniteSumProblem, PoissonMode};
use bsppa_core::prox::{solve_prox, subproblem_grad, InnerSolverConfig};
use proptest::prelude::*;

fn positive(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..5.0, d)
}

fn real(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, d)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn burg_divergence_matches_definition((x, y) in (1usize..8).prop_flat_map(|d| (positive(d), positive(d)))) {
        let closed = Burg.bregman(&x, &y).unwrap();
        prop_assert!(closed >= 0.0);
        prop_assert!(rel(closed, bregman_definitional(&Burg, &x, &y).unwrap()) < 1e-9);
    }

    #[test]
    fn dual_divergences_match_definition((x, y) in (1usize..8).prop_flat_map(|d| (positive(d), positive(d)))) {
        let (u, v) = (Burg.mirror(&x).unwrap(), Burg.mirror(&y).unwrap());
        let closed = Burg.dual_bregman(&u, &v).unwrap();
        prop_assert!(rel(closed, dual_bregman_definitional(&Burg, &u, &v).unwrap()) < 1e-9);
        let closed = Euclidean.dual_bregman(&x, &y).unwrap();
        prop_assert!(rel(closed, dual_bregman_definitional(&Euclidean, &x, &y).unwrap()) < 1e-12);
    }

    #[test]
    fn euclidean_divergence_is_half_squared_distance((x, y) in (1usize..8).prop_flat_map(|d| (real(d), real(d)))) {
        let direct: f64 = x.iter().zip(&y).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
        prop_assert!(rel(Euclidean.bregman(&x, &y).unwrap(), direct) < 1e-14);
    }

    #[test]
    fn estimator_is_unbiased(
        seed in 0u64..1000,
        variant in prop::sample::select(Variant::ALL.to_vec()),
        steps in 0usize..30,
    ) {
        let p = make_poisson_instance(6, 3, PoissonMode::Noisy, seed).unwrap();
        let mut streams = SamplingStreams::new(seed);
        let x0 = [1.0, 0.7, 1.3];
        let mut st = match variant {
            Variant::None => EstimatorState::none(),
            Variant::Saga => EstimatorState::saga(&p, &x0, false).unwrap(),
            Variant::Lsvrg => EstimatorState::lsvrg(&p, &x0, 0.4).unwrap(),
            Variant::Svrp => EstimatorState::svrp(&p, &x0, 4, SvrpOuter::Average, true, &mut streams).unwrap(),
        };
        for k in 0..steps {
            let x = [0.5 + 0.1 * k as f64, 1.0, 2.0 / (1.0 + k as f64)];
            st.update(&p, &Burg, k % 6, &x, &mut streams).unwrap();
        }
        let mut mean = [0.0; 3];
        for i in 0..6 {
            let e = st.compute_e(&p, i).unwrap();
            for j in 0..3 {
                mean[j] += e[j] / 6.0;
            }
        }
        prop_assert!(mean.iter().all(|m| m.abs() < 1e-12), "{mean:?}");
    }

    #[test]
    fn prox_meets_its_certificate(
        seed in 0u64..500,
        i in 0usize..10,
        alpha in 0.001f64..2.0,
        xk in positive(4),
    ) {
        let p = make_poisson_instance(10, 4, PoissonMode::Interpolation, seed).unwrap();
        let e = vec![0.0; 4];
        let cfg = InnerSolverConfig::default();
        let r = solve_prox(&Burg, &p, i, &xk, &e, alpha, &cfg).unwrap();
        let g = subproblem_grad(&Burg, &p, i, &xk, &e, alpha, &r.point).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(norm <= cfg.tolerance);
        prop_assert!(r.point.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn vanishing_schedules_decrease(alpha in 1e-4f64..10.0, k in 0usize..100_000) {
        for s in [StepSchedule::InvSqrt { alpha0: alpha }, StepSchedule::InvK { alpha0: alpha }] {
            prop_assert!(s.alpha_at(k + 1) < s.alpha_at(k));
            prop_assert!(s.alpha_at(k) <= alpha);
        }
    }

    #[test]
    fn traces_round_trip_through_csv(seed in 0u64..200, every in 1usize..7) {
        let p = make_poisson_instance(5, 3, PoissonMode::Interpolation, seed).unwrap();
        let mut cfg = RunConfig::new(Variant::Saga, KernelId::Burg, StepSchedule::Constant { alpha: 0.05 }, 30);
        cfg.record_every = Some(every);
        cfg.seed = seed;
        let tr = run_unified(&cfg, &p).unwrap();
        prop_assert!(tr.records.windows(2).all(|w| w[0].iteration < w[1].iteration));
        prop_assert!(tr.records.iter().all(|r| r.objective_gap.unwrap() >= -1e-9));
        let mut buf = Vec::new();
        write_records(&mut buf, &tr.records).unwrap();
        prop_assert_eq!(read_records(buf.as_slice()).unwrap(), tr.records);
    }
}

#[test]
fn full_gradient_is_mean_of_components() {
    let p = make_poisson_instance(12, 5, PoissonMode::Noisy, 2).unwrap();
    let x = [0.9, 1.1, 0.4, 2.0, 1.0];
    let full = p.full_grad(&x).unwrap();
    for j in 0..5 {
        let m: f64 = (0..12).map(|i| p.component_grad(i, &x).unwrap()[j]).sum::<f64>() / 12.0;
        assert!((m - full[j]).abs() < 1e-12);
    }
}
