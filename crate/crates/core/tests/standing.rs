use clines_core::standing::{
    barrier_condition_holds, default_x_max, first_integral_p, profile_from_quadrature, profile_from_shooting,
};
use clines_core::Error;

#[test]
fn p_is_positive_below_the_barrier_condition() {
    for &(s, r) in &[
        (0.1, 0.1),
        (0.6, 0.25),
        (0.25, 0.25),
        (0.02, 0.5),
        (0.39, 0.1),
        (1.0, 0.3),
    ] {
        assert!(barrier_condition_holds(s, r));
        for i in 1..99 {
            assert!(first_integral_p(0.01 * i as f64, s, r) > 0.0);
        }
    }
}

#[test]
fn fine_quadrature_profile_meets_tight_residual() {
    let p = profile_from_quadrature(0.6, 0.25, 20.0, 0.01).unwrap();
    assert!(p.ode_residual() < 1e-8, "{}", p.ode_residual());
    assert!((p.value_at(0.0) - 0.5).abs() < 1e-10);
}

#[test]
fn residual_refines_at_fourth_order() {
    let a = profile_from_quadrature(0.6, 0.25, 20.0, 0.1).unwrap().ode_residual();
    let b = profile_from_quadrature(0.6, 0.25, 20.0, 0.05).unwrap().ode_residual();
    let order = (a / b).log2();
    assert!((order - 4.0).abs() < 0.3, "{order}");
}

#[test]
fn shooting_meets_invariants_at_fig2_parameters() {
    for &(s, r, violated) in &[(0.6, 0.25, false), (0.85, 0.15, true)] {
        let out = profile_from_shooting(s, r, default_x_max(s), 0.05).unwrap();
        assert_eq!(out.condition_violated, violated);
        let p = &out.profile;
        assert!(p.slope_law_defect() < 1e-8);
        assert!(p.symmetry_defect() < 1e-8);
        assert!(p.du[1..p.len() - 1].iter().all(|&d| d < 0.0));
        assert_eq!(p.u[p.centre()], 0.5);
    }
}

#[test]
fn shooting_escape_is_reported() {
    // Beyond the barrier condition by a wide margin the unstable manifold
    // leaves through the lower half-plane.
    let r = profile_from_shooting(4.0, 0.01, 30.0, 0.05);
    match r {
        Err(Error::NoHeteroclinic { y, .. }) => assert!(y < -20.0),
        Ok(out) => {
            // If the orbit does connect, it must still satisfy the first integral.
            assert!(out.condition_violated);
            assert!(out.profile.slope_law_defect() < 1e-6);
        }
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn csv_export_is_deterministic() {
    let p = profile_from_quadrature(0.25, 0.25, 20.0, 0.5).unwrap();
    let mut a = Vec::new();
    let mut b = Vec::new();
    p.write_csv(&mut a).unwrap();
    p.write_csv(&mut b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,u,du"));
    assert_eq!(lines.count(), p.len());
}
