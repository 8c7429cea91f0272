mod family {
    use ici::linalg::Mat;
    use ici::seqops::{causality_probe, run_from_reset, Sequence};
    use ici::stable_family::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn dims(n_linear: usize) -> FamilyDims {
        FamilyDims {
            in_dim: 2,
            out_dim: 2,
            n_h: 8,
            n_linear,
            alpha: 0.95,
        }
    }

    fn randn_seq(rng: &mut ChaCha8Rng, t: usize, d: usize, std: f64) -> Sequence {
        Sequence::from_flat(
            d,
            (0..t * d)
                .map(|_| std * Distribution::<f64>::sample(&StandardNormal, rng))
                .collect(),
        )
        .unwrap()
    }

    fn random_params(rng: &mut ChaCha8Rng, n_linear: usize) -> StableOperatorParams {
        let mut p = StableOperatorParams::random(dims(n_linear), rng);
        for v in p.bias_h.iter_mut().chain(p.bias_y.iter_mut()) {
            *v = 0.3 * Distribution::<f64>::sample(&StandardNormal, rng);
        }
        // push A_raw past the unit ball so the projection is active
        p.a_raw = p.a_raw.scale(2.0);
        p
    }

    #[test]
    fn q_step_examples() {
        let d1 = FamilyDims {
            in_dim: 1,
            out_dim: 1,
            n_h: 1,
            n_linear: 0,
            alpha: 0.9,
        };
        let mut p = StableOperatorParams::zeros(d1);
        p.bias_y = vec![0.7];
        let mut s = OperatorState::zeros(1);
        for w in [1.0, -3.0, 10.0] {
            let (y, next) = q_step(&p, &s, &[w]);
            assert_eq!(y, vec![0.7]);
            s = next;
        }

        let mut p = StableOperatorParams::zeros(d1);
        p.b.data[0] = 1.0;
        p.c.data[0] = 1.0;
        let (y, _) = q_step(&p, &OperatorState::zeros(1), &[123.0]);
        assert_eq!(y, vec![0.0]);

        // A = 0.5 realized through A_raw = 0.5/α (σ ≤ 1, so no rescaling)
        let mut p = StableOperatorParams::zeros(d1);
        p.a_raw.data[0] = 0.5 / 0.9;
        p.b.data[0] = 1.0;
        p.c.data[0] = 1.0;
        let (y, next) = q_step(&p, &OperatorState { h: vec![0.2] }, &[0.1]);
        assert!((y[0] - 0.2).abs() < 1e-15);
        assert!((next.h[0] - 0.2f64.tanh()).abs() < 1e-15);
        assert!((next.h[0] - 0.19737).abs() < 1e-5);
    }

    #[test]
    fn strict_causality_for_random_theta() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n_linear in [0, 3, 8] {
            let op = StableOperator::new(random_params(&mut rng, n_linear));
            let u = randn_seq(&mut rng, 15, 2, 1.0);
            for t in [0, 4, 14] {
                assert!(causality_probe(&op, &u, t, 0.7));
            }
        }
    }

    #[test]
    fn determinism_from_reset() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut op = StableOperator::new(random_params(&mut rng, 2));
        let u = randn_seq(&mut rng, 40, 2, 1.0);
        let a = run_from_reset(&mut op, &u).unwrap();
        let b = run_from_reset(&mut op, &u).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hidden_state_decays_after_input_stops() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for trial in 0..20 {
            let mut p = random_params(&mut rng, trial % 9);
            p.bias_h.fill(0.0);
            p.bias_y.fill(0.0);
            let realized = Realized::new(p.clone());
            let horizon = 60;
            let mut u = randn_seq(&mut rng, horizon, 2, 2.0);
            for t in horizon / 2..horizon {
                u.step_mut(t).fill(0.0);
            }
            let rec = forward(&realized, &u, None).unwrap();
            let norm = |t: usize| ici::linalg::norm2(&rec.h[t * 8..(t + 1) * 8]);
            // h_{T/2} already absorbed the last nonzero input u_{T/2 − 1}
            for t in horizon / 2..horizon {
                assert!(
                    norm(t + 1) <= p.alpha * norm(t) + 1e-15,
                    "trial {trial} step {t}"
                );
            }
        }
    }

    #[test]
    fn empirical_incremental_gain_below_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let n_linear = rng.random_range(0..=8);
            let p = random_params(&mut rng, n_linear);
            let bound = p.incremental_gain_bound();
            let mut op = StableOperator::new(p);
            for _ in 0..50 {
                let x1 = randn_seq(&mut rng, 30, 2, 1.0);
                let x2 = x1.add(&randn_seq(&mut rng, 30, 2, 0.5)).unwrap();
                let y1 = run_from_reset(&mut op, &x1).unwrap();
                let y2 = run_from_reset(&mut op, &x2).unwrap();
                let ratio = y1.sub(&y2).unwrap().lp_norm(2) / x1.sub(&x2).unwrap().lp_norm(2);
                assert!(ratio <= bound * (1.0 + 1e-12));
                worst = worst.max(ratio / bound);
            }
        }
        assert!(worst > 0.0);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_params(&mut rng, 2);
        let u = randn_seq(&mut rng, 10, 2, 1.0);
        let rec = forward(&Realized::new(p.clone()), &u, None).unwrap();
        let g = q_backward(&p, &rec, &Sequence::zeros(10, 2)).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
        assert!(matches!(
            q_backward(&p, &rec, &Sequence::zeros(9, 2)),
            Err(ici::IciError::Contract(_))
        ));
    }

    #[test]
    fn scalar_two_step_chain_rule() {
        // n_h = 1, tanh unit, A_raw inside the unit ball: A = α a.
        let d1 = FamilyDims {
            in_dim: 1,
            out_dim: 1,
            n_h: 1,
            n_linear: 0,
            alpha: 0.9,
        };
        let (a_raw, b, c, bh, by) = (0.5, 0.8, -1.2, 0.1, 0.3);
        let p = StableOperatorParams::zeros(d1).with_vec(&[a_raw, b, c, bh, by]);
        let (w0, w1) = (0.7, -0.4);
        let u = Sequence::scalar(&[w0, w1]);
        // J = y_0 + y_1, h_0 = 0 → y_0 = c_b, h_1 = tanh(b w0 + bh), y_1 = c h_1 + c_b
        let rec = forward(&Realized::new(p.clone()), &u, None).unwrap();
        let g = q_backward(&p, &rec, &Sequence::scalar(&[1.0, 1.0])).unwrap();
        let pre0 = b * w0 + bh;
        let h1 = pre0.tanh();
        let dh1 = 1.0 - h1 * h1;
        let expected = [0.0, c * dh1 * w0, h1, c * dh1, 2.0];
        for (got, exp) in g.iter().zip(expected) {
            assert!((got - exp).abs() < 1e-14, "{g:?} vs {expected:?}");
        }
        assert!((rec.y[1] - (c * h1 + by)).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n_linear in [0, 4] {
            let p = random_params(&mut rng, n_linear);
            let u = randn_seq(&mut rng, 20, 2, 1.0);
            let target = randn_seq(&mut rng, 20, 2, 1.0);
            let loss = |theta: &[f64]| -> f64 {
                let q = p.with_vec(theta);
                let rec = forward(&Realized::new(q), &u, None).unwrap();
                rec.y
                    .iter()
                    .zip(target.as_flat())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum()
            };
            let rec = forward(&Realized::new(p.clone()), &u, None).unwrap();
            let upstream: Vec<f64> = rec
                .y
                .iter()
                .zip(target.as_flat())
                .map(|(a, b)| 2.0 * (a - b))
                .collect();
            let g = q_backward(&p, &rec, &Sequence::from_flat(2, upstream).unwrap()).unwrap();
            let theta = p.to_vec();
            for k in 0..theta.len() {
                let mut plus = theta.clone();
                plus[k] += 1e-5;
                let mut minus = theta.clone();
                minus[k] -= 1e-5;
                let fd = (loss(&plus) - loss(&minus)) / 2e-5;
                if fd.abs().max(g[k].abs()) > 1e-8 {
                    let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs());
                    assert!(rel < 1e-4, "component {k}: analytic {} fd {fd}", g[k]);
                }
            }
        }
    }

    #[test]
    fn projection_keeps_realized_norm_below_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..50 {
            let p = random_params(&mut rng, 0);
            let r = Realized::new(p.clone());
            assert!(r.a().spectral_norm_svd() <= p.alpha + 1e-8);
        }
        let mut big = StableOperatorParams::zeros(dims(0));
        big.a_raw = Mat::identity(8).scale(1e3);
        assert!(Realized::new(big).a().spectral_norm_svd() <= 0.95 + 1e-12);
    }
}

mod projection {
    use ici::linalg::Mat;
    use ici::stable_family::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_mat(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> Mat {
        Mat::from_rows(
            n,
            n,
            (0..n * n)
                .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng))
                .collect(),
        )
    }

    #[test]
    fn zero_and_identity() {
        let p = project_spectral(&Mat::zeros(4, 4), 0.9);
        assert!(p.a.data.iter().all(|&x| x == 0.0));
        let p = project_spectral(&Mat::identity(3), 0.9);
        let svd = Mat::identity(3).spectral_norm_svd();
        assert_eq!(svd, 1.0);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 0.9 } else { 0.0 };
                assert!((p.a.get(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn random_projection_within_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let scale = [0.05, 0.3, 1.0, 5.0][trial % 4];
            let a_raw = random_mat(8, &mut rng, scale);
            let p = project_spectral(&a_raw, 0.9);
            assert!(p.a.spectral_norm_svd() <= 0.9 + 1e-8, "trial {trial}");
            if let ScaleSource::Svd { .. } = p.source {
                let exact = a_raw.spectral_norm_svd();
                assert!((p.sigma - exact).abs() <= 1e-9 * exact);
            }
        }
    }

    #[test]
    fn backward_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a_raw = random_mat(5, &mut rng, 1.0);
        let g = random_mat(5, &mut rng, 1.0);
        let f = |m: &Mat| -> f64 {
            let p = project_spectral(m, 0.95);
            p.a.data.iter().zip(&g.data).map(|(x, y)| x * y).sum()
        };
        let proj = project_spectral(&a_raw, 0.95);
        assert!(matches!(proj.source, ScaleSource::Svd { .. }));
        let grad = projection_backward(&proj, &a_raw, 0.95, &g);
        for k in 0..25 {
            let mut plus = a_raw.clone();
            plus.data[k] += 1e-6;
            let mut minus = a_raw.clone();
            minus.data[k] -= 1e-6;
            let fd = (f(&plus) - f(&minus)) / 2e-6;
            assert!(
                (fd - grad.data[k]).abs() < 1e-6 * (1.0 + fd.abs()),
                "entry {k}"
            );
        }
    }

    #[test]
    fn backward_accurate_near_degenerate_top_singular_values() {
        // orthogonal × diag(2, 2 − 1e-4, 1, 0.5): σ₁ and σ₂ differ by 1e-4
        let sv = [2.0, 2.0 - 1e-4, 1.0, 0.5];
        let mut a_raw = Mat::zeros(4, 4);
        for (o, angle) in [(0usize, 0.3f64), (2, -1.1)] {
            let (c, s) = (angle.cos(), angle.sin());
            a_raw.data[o * 4 + o] = c * sv[o];
            a_raw.data[o * 4 + o + 1] = -s * sv[o + 1];
            a_raw.data[(o + 1) * 4 + o] = s * sv[o];
            a_raw.data[(o + 1) * 4 + o + 1] = c * sv[o + 1];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_mat(4, &mut rng, 1.0);
        let f = |m: &Mat| -> f64 {
            let p = project_spectral(m, 0.99);
            p.a.data.iter().zip(&g.data).map(|(x, y)| x * y).sum()
        };
        let proj = project_spectral(&a_raw, 0.99);
        assert!((proj.sigma - 2.0).abs() < 1e-12);
        let grad = projection_backward(&proj, &a_raw, 0.99, &g);
        for k in 0..16 {
            let mut plus = a_raw.clone();
            plus.data[k] += 1e-7;
            let mut minus = a_raw.clone();
            minus.data[k] -= 1e-7;
            let fd = (f(&plus) - f(&minus)) / 2e-7;
            assert!(
                (fd - grad.data[k]).abs() < 1e-6 * (1.0 + fd.abs()),
                "entry {k}: {fd} vs {}",
                grad.data[k]
            );
        }
    }
}

mod checkpoint {
    use ici::stable_family::FamilyDims;
    use ici::stable_family::*;
    use proptest::prelude::*;

    fn dims() -> FamilyDims {
        FamilyDims {
            in_dim: 2,
            out_dim: 1,
            n_h: 3,
            n_linear: 1,
            alpha: 0.95,
        }
    }

    proptest! {
        #[test]
        fn bit_exact_roundtrip(values in proptest::collection::vec(-1e6f64..1e6, 22)) {
            let p = StableOperatorParams::zeros(dims()).with_vec(&values);
            let back = StableOperatorParams::from_checkpoint_json(&p.to_checkpoint_json()).unwrap();
            let a: Vec<u64> = p.to_vec().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.to_vec().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(back.alpha.to_bits(), p.alpha.to_bits());
        }
    }

    #[test]
    fn rejects_malformed() {
        let p = StableOperatorParams::zeros(dims());
        let mut ck = Checkpoint::from_params(&p);
        ck.arrays[1].data.pop();
        assert!(ck.into_params().is_err());

        let mut ck = Checkpoint::from_params(&p);
        ck.arrays.swap(0, 1);
        assert!(ck.into_params().is_err());

        assert!(StableOperatorParams::from_checkpoint_json("{}").is_err());
        assert!(StableOperatorParams::from_checkpoint_json("not json").is_err());
    }
}

mod params {
    use ici::stable_family::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims() -> FamilyDims {
        FamilyDims {
            in_dim: 2,
            out_dim: 3,
            n_h: 4,
            n_linear: 1,
            alpha: 0.9,
        }
    }

    #[test]
    fn flatten_roundtrip_and_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = StableOperatorParams::random(dims(), &mut rng);
        assert_eq!(p.num_params(), 16 + 8 + 12 + 4 + 3);
        let v = p.to_vec();
        assert_eq!(p.with_vec(&v), p);
    }

    #[test]
    fn gain_bound_examples() {
        let mut p = StableOperatorParams::zeros(dims());
        p.c.data.fill(1.0);
        assert_eq!(p.incremental_gain_bound(), 0.0);

        let mut q = StableOperatorParams::zeros(FamilyDims {
            in_dim: 1,
            out_dim: 1,
            n_h: 1,
            n_linear: 0,
            alpha: 0.9,
        });
        q.b.data[0] = 1.0;
        q.c.data[0] = 2.0;
        assert!((q.incremental_gain_bound() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        let mut d = dims();
        d.n_linear = 5;
        assert!(d.validate().is_err());
        let mut d = dims();
        d.alpha = 1.0;
        assert!(d.validate().is_err());
        assert!(dims().validate().is_ok());
    }
}
