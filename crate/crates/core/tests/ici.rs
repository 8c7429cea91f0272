mod common;

use common::*;
use ici::ici::*;
use ici::linalg::Mat;
use ici::plants::*;
use ici::seqops::*;
use ici::stable_family::{FamilyDims, StableOperator, StableOperatorParams};
use ici::IciError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalar_loop() -> ClosedLoopSystem {
    ClosedLoopSystem::new(
        Box::new(ScalarUnstablePlant::default()),
        ControllerSpec::ScalarPoly.boxed(),
        NoiseSpec::Zero,
    )
    .unwrap()
}

#[test]
fn scalar_loop_equilibrium_and_impulse() {
    let mut cl = scalar_loop();
    let z = Sequence::zeros(30, 1);
    let (_, y) = closed_loop_run(&mut cl, &z, &z).unwrap();
    assert!(y.as_flat().iter().all(|v| *v == 0.0));

    let mut r = Sequence::zeros(30, 1);
    r.step_mut(0)[0] = 1.0;
    let (_, y) = closed_loop_run(&mut cl, &r, &z).unwrap();
    assert_eq!(y.step(0)[0], 0.0);
    for t in 1..30 {
        assert_eq!(y.step(t)[0], 0.5f64.powi(t as i32 - 1));
    }
}

#[test]
fn scalar_open_loop_diverges() {
    let mut cl = ClosedLoopSystem::new(
        Box::new(ScalarUnstablePlant::default()),
        Box::new(ZeroOperator::new(1, 1)),
        NoiseSpec::Zero,
    )
    .unwrap();
    let z = Sequence::zeros(6, 1);
    let (_, y) = closed_loop_run(&mut cl, &z, &z).unwrap();
    assert_eq!(y.as_flat(), &[0.0, 1.0, 2.0, 5.0, 26.0, 677.0]);

    let z = Sequence::zeros(20, 1);
    match closed_loop_run(&mut cl, &z, &z) {
        Err(IciError::Diverged { step }) => assert_eq!(step, 8),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn closed_loop_rejects_bad_shapes() {
    let mut cl = scalar_loop();
    let r = Sequence::zeros(5, 1);
    assert!(closed_loop_run(&mut cl, &r, &Sequence::zeros(4, 1)).is_err());
    assert!(closed_loop_run(&mut cl, &Sequence::zeros(5, 2), &r).is_err());
    assert!(ClosedLoopSystem::new(
        Box::new(Identity::new(1)),
        Box::new(Identity::new(1)),
        NoiseSpec::Zero
    )
    .is_err());
}

#[test]
fn ici_with_zero_q_outputs_zero() {
    let mut m = IciModel::new(
        Box::new(ZeroOperator::new(1, 1)),
        ControllerSpec::ScalarPoly.boxed(),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let u = randn_seq(&mut rng, 40, 1, 3.0);
    for t in 0..40 {
        assert_eq!(ici_step(&mut m, u.step(t)).unwrap(), vec![0.0]);
    }
    assert!(ici_step(&mut m, &[1.0, 2.0]).is_err());
}

#[test]
fn ici_with_zero_controller_is_q() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dims = FamilyDims {
        in_dim: 2,
        out_dim: 2,
        n_h: 6,
        n_linear: 2,
        alpha: 0.9,
    };
    let q = StableOperator::new(StableOperatorParams::random(dims, &mut rng));
    let mut g = IciModel::new(Box::new(q.clone()), Box::new(ZeroOperator::new(2, 2))).unwrap();
    let mut q = q;
    let u = randn_seq(&mut rng, 50, 2, 1.0);
    assert_eq!(
        run_from_reset(&mut g, &u).unwrap(),
        run_from_reset(&mut q, &u).unwrap()
    );
}

#[test]
fn ici_hand_recursion() {
    let (q, k) = (0.5, 0.3);
    let mut m = IciModel::new(
        Box::new(UnitDelay::with_gain(1, q)),
        Box::new(StaticMap::gain(Mat::from_rows(1, 1, vec![k]))),
    )
    .unwrap();
    let mut expected = 0.0;
    for t in 0..10 {
        let y = ici_step(&mut m, &[1.0]).unwrap()[0];
        if t == 0 {
            assert_eq!(y, 0.0);
        }
        assert!((y - expected).abs() < 1e-15, "step {t}");
        expected = q * (1.0 - k * y);
    }
}

#[test]
fn ici_rejects_non_strict_q() {
    assert!(matches!(
        IciModel::new(Box::new(Identity::new(1)), Box::new(Identity::new(1))),
        Err(IciError::Contract(_))
    ));
    assert!(IciModel::new(
        Box::new(UnitDelay::new(2)),
        Box::new(ZeroOperator::new(1, 1))
    )
    .is_err());
}

/// Block lower-triangular matrix of a SISO causal operator's impulse
/// response, built column by column from unit impulses.
fn toeplitz(op: &mut dyn CausalOperator, horizon: usize) -> nalgebra::DMatrix<f64> {
    let mut m = nalgebra::DMatrix::zeros(horizon, horizon);
    for j in 0..horizon {
        let mut e = Sequence::zeros(horizon, 1);
        e.step_mut(j)[0] = 1.0;
        let y = run_from_reset(op, &e).unwrap();
        for i in 0..horizon {
            m[(i, j)] = y.step(i)[0];
        }
    }
    m
}

#[test]
fn recursion_matches_implicit_linear_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let horizon = rng.random_range(5..=30);
        let q = random_stable_plant(&mut rng, 3, 0.9);
        // ŷ = Q(û − K ŷ) is the loop u = −K(y); pick K so that loop is stable
        let ControllerSpec::LinearSs { a, b, c, d } = random_stabilizing_controller(&mut rng, &q)
        else {
            unreachable!()
        };
        let k = ControllerSpec::LinearSs {
            a,
            b,
            c: c.scale(-1.0),
            d: d.scale(-1.0),
        }
        .operator();
        let qm = toeplitz(&mut q.clone(), horizon);
        let km = toeplitz(&mut k.clone(), horizon);
        let u = randn_seq(&mut rng, horizon, 1, 1.0);
        let uv = nalgebra::DVector::from_column_slice(u.as_flat());
        // ŷ = Q(û − K ŷ)  ⇔  (I + Q K) ŷ = Q û
        let lhs = nalgebra::DMatrix::identity(horizon, horizon) + &qm * &km;
        let implicit = lhs.lu().solve(&(&qm * uv)).unwrap();
        let mut model = IciModel::new(Box::new(q), Box::new(k)).unwrap();
        let rec = run_from_reset(&mut model, &u).unwrap();
        for t in 0..horizon {
            assert!(
                (rec.step(t)[0] - implicit[t]).abs() < 1e-10,
                "{} vs {}",
                rec.step(t)[0],
                implicit[t]
            );
        }
    }
}

#[test]
fn ici_model_is_strictly_causal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dims = FamilyDims {
        in_dim: 1,
        out_dim: 1,
        n_h: 5,
        n_linear: 0,
        alpha: 0.95,
    };
    for _ in 0..10 {
        // tanh units keep ŷ° bounded, so the quadratic K cannot overflow
        let q = StableOperator::new(StableOperatorParams::random(dims, &mut rng));
        let m = IciModel::new(Box::new(q), ControllerSpec::ScalarPoly.boxed()).unwrap();
        let u = randn_seq(&mut rng, 20, 1, 0.3);
        for t in [0, 7, 19] {
            assert!(causality_probe(&m, &u, t, 0.1));
        }
    }
}

#[test]
fn true_q_with_zero_controller_is_plant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let plant = random_stable_plant(&mut rng, 3, 0.9);
    let mut q =
        construct_true_q(Box::new(plant.clone()), Box::new(ZeroOperator::new(1, 1))).unwrap();
    let mut plant = plant;
    let u = randn_seq(&mut rng, 60, 1, 1.0);
    assert_eq!(
        run_from_reset(q.as_mut(), &u).unwrap(),
        run_from_reset(&mut plant, &u).unwrap()
    );
}

fn round_trip_error(plant: OperatorHandle, k: OperatorHandle, u: &Sequence) -> (f64, f64) {
    let q = construct_true_q(plant.clone(), k.clone()).unwrap();
    assert!(q.is_strictly_causal());
    let mut g_hat = IciModel::new(q, k).unwrap();
    let mut plant = plant;
    let a = run_from_reset(&mut g_hat, u).unwrap();
    let b = open_loop_run(plant.as_mut(), u).unwrap();
    (a.sub(&b).unwrap().lp_norm(2), b.lp_norm(2))
}

#[test]
fn true_q_round_trip_delay_plant() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let u = randn_seq(&mut rng, 50, 1, 1.0);
    let (err, _) = round_trip_error(
        Box::new(UnitDelay::with_gain(1, 0.8)),
        Box::new(StaticMap::gain(Mat::from_rows(1, 1, vec![0.3]))),
        &u,
    );
    assert!(err < 1e-9);
}

#[test]
fn true_q_round_trip_scalar_benchmark() {
    // bounded û taken from a stable closed-loop run
    let mut cl = scalar_loop();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let r = randn_seq(&mut rng, 100, 1, 0.5);
        let v = NoiseSpec::TruncatedGaussian {
            std: 0.1,
            lower: -0.25,
            upper: 0.25,
        }
        .sample(100, 1, &mut rng);
        let (u, _) = closed_loop_run(&mut cl, &r, &v).unwrap();
        let (err, norm) = round_trip_error(
            Box::new(ScalarUnstablePlant::default()),
            ControllerSpec::ScalarPoly.boxed(),
            &u,
        );
        assert!(err <= 1e-6 * norm.max(1.0), "{err} vs {norm}");
    }
}

#[test]
fn true_q_of_scalar_benchmark_is_linear() {
    // K(y) = −y² − 1 + 0.5y cancels the plant nonlinearity: x' = 0.5 x + w
    let mut q = construct_true_q(
        Box::new(ScalarUnstablePlant::default()),
        ControllerSpec::ScalarPoly.boxed(),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let w = randn_seq(&mut rng, 100, 1, 1.0);
    let y = run_from_reset(q.as_mut(), &w).unwrap();
    let mut x = 0.0;
    for t in 0..100 {
        assert!((y.step(t)[0] - x).abs() < 1e-9);
        x = 0.5 * x + w.step(t)[0];
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn true_q_round_trip_random_linear(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let order = rng.random_range(1..=3);
        let plant = random_stable_plant(&mut rng, order, 0.9);
        let k = random_stabilizing_controller(&mut rng, &plant);
        let u = randn_seq(&mut rng, 100, 1, 1.0);
        let (err, norm) = round_trip_error(Box::new(plant), k.boxed(), &u);
        prop_assert!(err <= 1e-6 * norm.max(1.0));
    }
}

#[test]
fn omega_respects_constructive_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let dims = FamilyDims {
        in_dim: 2,
        out_dim: 2,
        n_h: 8,
        n_linear: 0,
        alpha: 0.95,
    };
    for _ in 0..10 {
        let q = StableOperator::new(StableOperatorParams::random(dims, &mut rng));
        let (k1, k2) = (rng.random_range(0.1..2.0), rng.random_range(0.1..2.0));
        let k = ControllerSpec::Proportional2d {
            kappa1: k1,
            kappa2: k2,
            target: [0.0, 0.0],
        };
        let gamma = k.certified_ifg().unwrap();
        let mut model = IciModel::new(Box::new(q), k.boxed()).unwrap();
        let mut outer = k.operator();
        for _ in 0..10 {
            let r = unit_norm(randn_seq(&mut rng, 100, 2, 1.0));
            let v = unit_norm(randn_seq(&mut rng, 100, 2, 1.0));
            let tr = model.closed_loop_run(&mut outer, &r, &v).unwrap();
            assert!(tr.omega.lp_norm(2) <= 1.0 + gamma + 1e-9);
        }
    }
}

#[test]
fn dataset_shapes_and_reproducibility() {
    let b = build_benchmark(BenchmarkId::ScalarUnstable, &BenchmarkOptions::default()).unwrap();
    let cl = ClosedLoopSystem::from_benchmark(&b).unwrap();
    let d1 = collect_dataset(&cl, 40, 100, 0.5, 17).unwrap();
    let d2 = collect_dataset(&cl, 40, 100, 0.5, 17).unwrap();
    assert_eq!(d1.len(), 40);
    assert!(d1
        .trajectories
        .iter()
        .all(|t| t.r.horizon() == 100 && t.y.dim() == 1));
    assert_eq!(d1, d2);
    assert_eq!(d1.hash(), d2.hash());
    assert_ne!(
        d1.hash(),
        collect_dataset(&cl, 40, 100, 0.5, 18).unwrap().hash()
    );
    // trajectory i depends only on its own seed
    let tail = collect_dataset(&cl, 39, 100, 0.5, 18).unwrap();
    assert_eq!(tail.trajectories[0], d1.trajectories[1]);
}

#[test]
fn dataset_boundaries() {
    let b = build_benchmark(BenchmarkId::ScalarUnstable, &BenchmarkOptions::default()).unwrap();
    let cl = ClosedLoopSystem::from_benchmark(&b).unwrap();
    let d = collect_dataset(&cl, 1, 1, 0.5, 3).unwrap();
    let tr = &d.trajectories[0];
    let v0 = sample_disturbance(&b.noise, 3, 1, 1).step(0)[0];
    assert_eq!(tr.y.step(0)[0], v0);
    assert!(collect_dataset(&cl, 0, 10, 0.5, 0).is_err());

    let quiet = ClosedLoopSystem::new(
        Box::new(ScalarUnstablePlant::default()),
        ControllerSpec::ScalarPoly.boxed(),
        NoiseSpec::Zero,
    )
    .unwrap();
    let d = collect_dataset(&quiet, 3, 20, 0.0, 0).unwrap();
    for tr in &d.trajectories {
        assert!(tr.y.as_flat().iter().all(|v| *v == 0.0));
        assert!(tr.u.as_flat().iter().all(|v| *v == -1.0));
    }
}

#[test]
fn dataset_round_trips_through_files() {
    let b = build_benchmark(BenchmarkId::Robot, &BenchmarkOptions::default()).unwrap();
    let cl = ClosedLoopSystem::from_benchmark(&b).unwrap();
    let d = collect_dataset(&cl, 3, 25, 10.0, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let hash = d.save(dir.path()).unwrap();
    assert_eq!(hash, d.hash());
    let back = Dataset::load(dir.path()).unwrap();
    assert_eq!(back, d);
    assert_eq!(back.hash(), hash);
    let first = std::fs::read_to_string(dir.path().join("traj_0.csv")).unwrap();
    assert!(first.starts_with("t,r[0],r[1],u[0],u[1],y[0],y[1]\n"));
}

#[test]
fn csv_parser_rejects_malformed_input() {
    let ok = "t,r[0],u[0],y[0]\n0,1.0,2.0,3.0\n1,0,0,0\n";
    let tr = Trajectory::from_csv(ok, 1, 1).unwrap();
    assert_eq!(tr.y.as_flat(), &[3.0, 0.0]);
    for bad in [
        "",
        "t,r[0],u[0]\n0,1,2\n",
        "t,r[0],u[0],y[0]\n",
        "t,r[0],u[0],y[0]\n1,1,2,3\n",
        "t,r[0],u[0],y[0]\n0,1,x,3\n",
        "t,r[0],u[0],y[0]\n0,1,2\n",
    ] {
        assert!(Trajectory::from_csv(bad, 1, 1).is_err(), "{bad:?}");
    }
    assert!(DatasetMeta::from_json("{}").is_err());
}
