use ici::verify::{run_suite, Suite};

fn check(suite: Suite, expected: &[&str]) {
    let report = run_suite(suite, 0).unwrap();
    let names: Vec<&str> = report.properties.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, expected);
    for p in &report.properties {
        assert!(p.pass, "{suite}: {p:?}");
        assert!(p.samples > 0);
        assert!((p.margin - (p.limit - p.worst)).abs() <= 1e-12 * p.limit.abs().max(1.0));
    }
    assert!(report.pass);
}

#[test]
fn loop_bound_and_reconstruction_suite_passes() {
    check(
        Suite::Theorem1,
        &[
            "t1_omega_bound",
            "t2_linear_round_trip",
            "t2_scalar_round_trip",
        ],
    );
}

#[test]
fn feedback_inverse_suite_passes() {
    check(Suite::Corollary1, &["feedback_inverse_round_trip"]);
}

#[test]
fn gradients_suite_passes() {
    check(
        Suite::Gradients,
        &[
            "grad_S1_direct_id",
            "grad_S2_dir_ici",
            "grad_S3_indir_ici",
            "grad_S2_dir_ici_poly",
        ],
    );
}

#[test]
fn suites_are_seeded() {
    let a = run_suite(Suite::Corollary1, 5).unwrap();
    let b = run_suite(Suite::Corollary1, 5).unwrap();
    let c = run_suite(Suite::Corollary1, 6).unwrap();
    assert_eq!(a.properties[0].worst, b.properties[0].worst);
    assert_ne!(a.properties[0].worst, c.properties[0].worst);
}

#[test]
fn suite_names_round_trip() {
    for s in Suite::ALL {
        assert_eq!(s.as_str().parse::<Suite>().unwrap(), s);
        assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
    }
    assert!("theorem2".parse::<Suite>().is_err());
}
