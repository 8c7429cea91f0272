mod composition {
    use ici::linalg::Mat;
    use ici::seqops::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_controller() -> OperatorHandle {
        Box::new(StaticMap::new(1, 1, |y, k| {
            k[0] = -y[0] * y[0] - 1.0 + 0.5 * y[0]
        }))
    }

    #[test]
    fn run_examples() {
        let u = Sequence::scalar(&[1.0, 2.0, 3.0]);
        let mut id = Identity::new(1);
        assert_eq!(run(&mut id, &u).unwrap(), u);

        let mut delay = UnitDelay::new(1);
        assert_eq!(run(&mut delay, &u).unwrap().as_flat(), &[0.0, 1.0, 2.0]);

        let mut k = scalar_controller();
        let y = run(k.as_mut(), &Sequence::scalar(&[0.0, 1.0])).unwrap();
        assert_eq!(y.as_flat(), &[-1.0, -1.5]);
    }

    #[test]
    fn run_rejects_dimension_mismatch() {
        let mut id = Identity::new(2);
        assert!(run(&mut id, &Sequence::scalar(&[1.0])).is_err());
    }

    #[test]
    fn series_examples() {
        let u = Sequence::scalar(&[1.0, 0.0, 0.0]);
        let mut dd = series(Box::new(UnitDelay::new(1)), Box::new(UnitDelay::new(1))).unwrap();
        assert_eq!(dd.causality(), Causality::StrictlyCausal);
        assert_eq!(run(dd.as_mut(), &u).unwrap().as_flat(), &[0.0, 0.0, 1.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = Sequence::scalar(
            &(0..20)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect::<Vec<_>>(),
        );
        let mut lone = scalar_controller();
        let mut with_id = series(Box::new(Identity::new(1)), scalar_controller()).unwrap();
        assert_eq!(with_id.causality(), Causality::Causal);
        assert_eq!(
            run(lone.as_mut(), &w).unwrap(),
            run(with_id.as_mut(), &w).unwrap()
        );

        // K(G(u)) against a manual two-stage evaluation with the scalar plant x' = x² + 1 + u
        let plant = HistoryOperator::new(1, 1, |hist, y| {
            let mut x = 0.0;
            for u in hist {
                x = x * x + 1.0 + u[0];
            }
            y[0] = x;
        });
        let small = Sequence::scalar(&[-1.0, -1.5, -1.2, -0.8]);
        let mut composed = series(Box::new(plant.clone()), scalar_controller()).unwrap();
        let got = run(composed.as_mut(), &small).unwrap();
        let mut p = plant;
        let g = run(&mut p, &small).unwrap();
        let mut k = scalar_controller();
        let expected = run(k.as_mut(), &g).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn series_rejects_mismatch() {
        assert!(series(Box::new(Identity::new(2)), Box::new(Identity::new(1))).is_err());
    }

    #[test]
    fn feedback_inverse_examples() {
        let a = Sequence::scalar(&[1.0, 1.0, 1.0]);
        let mut inv = feedback_inverse(Box::new(ZeroOperator::new(1, 1))).unwrap();
        assert_eq!(run(inv.as_mut(), &a).unwrap(), a);

        let mut inv = feedback_inverse(Box::new(UnitDelay::new(1))).unwrap();
        let b = run(inv.as_mut(), &a).unwrap();
        assert_eq!(b.as_flat(), &[1.0, 0.0, 1.0]);
        // Υ(b) = b + delay(b) = a
        let mut delay = UnitDelay::new(1);
        let db = run(&mut delay, &b).unwrap();
        assert_eq!(b.add(&db).unwrap(), a);
    }

    #[test]
    fn feedback_inverse_rejects_causal() {
        assert!(matches!(
            feedback_inverse(Box::new(Identity::new(1))),
            Err(ici::IciError::Contract(_))
        ));
    }

    #[test]
    fn linear_state_space_probe() {
        let ss = LinearStateSpace::new(
            Mat::from_rows(2, 2, vec![0.5, 0.1, 0.0, 0.3]),
            Mat::from_rows(2, 1, vec![1.0, 1.0]),
            Mat::from_rows(1, 2, vec![1.0, -1.0]),
            None,
        );
        let u = Sequence::scalar(&[0.3, -0.2, 0.9, 0.1, 0.4]);
        for t in 0..5 {
            assert!(causality_probe(&ss, &u, t, 0.5));
        }
        let mut direct = ss.clone();
        direct.d = Some(Mat::from_rows(1, 1, vec![2.0]));
        assert_eq!(direct.causality(), Causality::Causal);
        assert!(causality_probe(&direct, &u, 2, 0.5));
    }
}

mod sequence {
    use ici::seqops::*;

    #[test]
    fn norm_examples() {
        assert_eq!(Sequence::scalar(&[0.0, 0.0, 0.0]).lp_norm(2), 0.0);
        assert_eq!(Sequence::scalar(&[3.0, 4.0]).lp_norm(2), 5.0);
        let x = Sequence::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!((x.lp_norm(2) - 2.0).abs() < 1e-15);
        assert_eq!(Sequence::new(3).lp_norm(1), 0.0);
        // p = 1 sums per-step Euclidean norms
        let y = Sequence::from_rows(&[[3.0, 4.0], [0.0, 1.0]]).unwrap();
        assert!((y.lp_norm(1) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn truncation() {
        let x = Sequence::scalar(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(x.truncate(1, 2).as_flat(), &[1.0, 2.0]);
        assert!(x.truncate(2, 1).is_empty());
        assert_eq!(x.truncate(0, 0).as_flat(), &[0.0]);
    }

    #[test]
    fn push_rejects_wrong_dim() {
        let mut x = Sequence::new(2);
        assert!(x.push(&[1.0]).is_err());
        assert!(x.push(&[1.0, 2.0]).is_ok());
        assert_eq!(x.horizon(), 1);
    }
}
