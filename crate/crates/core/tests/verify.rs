use ostro_core::catalog;
use ostro_core::expr::{parse, Binding};
use ostro_core::model::{derive, AffineModel};
use ostro_core::verify::*;
use proptest::prelude::*;

fn load(name: &str) -> AffineModel {
    AffineModel::load(catalog::source(name).unwrap()).unwrap()
}

fn required_failures(reports: &[IdentityReport]) -> Vec<String> {
    reports.iter().filter(|r| r.required && !r.passed).map(|r| r.to_string()).collect()
}

#[test]
fn helmholtz_holds_on_symmetric_catalog_models() {
    for m in [load("geodesic"), load("geodesic").apply_setting("omega=diag").unwrap(), load("bubble")] {
        let d = derive(&m);
        let reports = helmholtz_suite(&m, &d, 8, 0, 1).unwrap();
        assert_eq!(reports.iter().filter(|r| r.required).count(), 6);
        assert!(all_passed(&reports), "{:?}", required_failures(&reports));
        assert!(reports.iter().all(|r| r.samples == 8));
    }
}

#[test]
fn helmholtz_rejects_chiral_model() {
    let m = load("chiral");
    let d = derive(&m);
    assert!(matches!(helmholtz_suite(&m, &d, 8, 0, 1), Err(VerifyError::Model(_))));
}

#[test]
fn perturbed_potential_breaks_helmholtz() {
    for (name, dv) in [("geodesic", "y*xdot^3"), ("bubble", "r*tdot^3")] {
        let m = load(name);
        let d = derive(&m);
        let delta = parse(dv, m.table()).unwrap();
        let bad = perturb_potential(&m, &d, &delta);
        let reports = helmholtz_suite(&m, &bad, 8, 0, 1).unwrap();
        assert!(!all_passed(&reports), "{name}: corrupted tensors passed");
        let fd = fd_crosscheck(&m, &bad, 8, 0, &FdPolicy::default(), 1).unwrap();
        assert!(!all_passed(&fd), "{name}: corrupted tensors passed the FD check");
    }
}

#[test]
fn printed_forms_are_informational() {
    let m = load("geodesic");
    let d = derive(&m);
    let reports = helmholtz_suite(&m, &d, 8, 0, 1).unwrap();
    let sym = reports.iter().find(|r| r.name.contains("symmetrised")).unwrap();
    assert!(!sym.required);
    // the symmetrised right-hand side differs from the transport of X
    assert!(!sym.passed);
    assert!(all_passed(&reports));
}

#[test]
fn fd_agrees_on_catalog_models() {
    for name in ["geodesic", "bubble", "chiral"] {
        let m = load(name);
        let d = derive(&m);
        let reports = fd_crosscheck(&m, &d, 8, 0, &FdPolicy::default(), 1).unwrap();
        assert_eq!(reports.len(), 7);
        assert!(all_passed(&reports), "{name}: {:?}", required_failures(&reports));
    }
}

fn bubble_point(m: &AffineModel) -> Binding {
    let t = m.table();
    // (t, r) = (0, 1), (tdot, rdot) = (2, 1)
    let mut b = m.parameter_binding();
    b.set(t.coordinate(0), 0.0);
    b.set(t.coordinate(1), 1.0);
    b.set(t.velocity(0), 2.0);
    b.set(t.velocity(1), 1.0);
    b
}

#[test]
fn bubble_mass_and_curl_oracles() {
    let m = load("bubble");
    let d = derive(&m);
    let b = bubble_point(&m);
    // M_rr = -4 alpha r tdot^3 / (tdot^2 - rdot^2)^2 with alpha = r = 1
    let m_rr = -4.0 * 8.0 / 9.0;
    assert!((m_rr + 32.0 / 9.0_f64).abs() < 1e-15);
    // X_tr = 2 alpha tdot^2 / N^2 - beta q^2 / r^2 = 8/3 - 1
    let x_tr = 5.0 / 3.0;
    assert!((d.mass[1][1].evaluate(&b).unwrap() - m_rr).abs() < 1e-12);
    assert!((d.x_curl[0][1].evaluate(&b).unwrap() - x_tr).abs() < 1e-12);

    let fd = fd_tensors_at(&m, &b, &FdPolicy::default()).unwrap();
    assert!((fd.mass[1][1].value - m_rr).abs() < 1e-5 * m_rr.abs());
    assert!((fd.x_curl[0][1].value - x_tr).abs() < 1e-5 * x_tr);
}

#[test]
fn fd_skips_points_whose_stencil_leaves_the_domain() {
    // sqrt(x) is undefined for x < 0: points near the edge are dropped
    let src = r#"
[model]
name = "edge"
dimension = 1
coordinates = ["x"]

[lagrangian]
K = ["0"]
V = "xdot^2/2 - sqrt(x)"

[sampling]
box = [-1e-4, 1e-4]
seed = 0
"#;
    let m = AffineModel::load(src).unwrap();
    let d = derive(&m);
    match fd_crosscheck(&m, &d, 8, 0, &FdPolicy::default(), 1) {
        Ok(r) => assert!(all_passed(&r) && r[0].skipped > 0),
        Err(VerifyError::NotEnoughPoints { wanted: 8, .. }) => {}
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn report_display_is_structured() {
    let m = load("geodesic");
    let d = derive(&m);
    let reports = helmholtz_suite(&m, &d, 4, 7, 1).unwrap();
    let text = reports[0].to_string();
    assert!(text.starts_with("identity: M symmetric\n"));
    assert!(text.contains("samples: 4"));
    assert!(text.contains("seed 7"));
    assert!(text.contains("worst residual:"));
    assert!(text.contains("verdict: pass"));
    // thread count does not change the result
    let again = helmholtz_suite(&m, &d, 4, 7, 3).unwrap();
    assert_eq!(reports, again);
    let fd1 = fd_crosscheck(&m, &d, 5, 7, &FdPolicy::default(), 1).unwrap();
    let fd4 = fd_crosscheck(&m, &d, 5, 7, &FdPolicy::default(), 4).unwrap();
    assert_eq!(fd1, fd4);
}

/// Random regular model in three dimensions with `K = ∂Λ/∂ẋ`, so that
/// `∂K/∂ẋ` is symmetric by construction.
fn random_model(c: &[i32]) -> AffineModel {
    let lambda = format!(
        "{}*x*xdot^2 + {}*y*z*ydot*zdot + {}*x^2*zdot + {}*y*xdot*ydot^2",
        c[0], c[1], c[2], c[3]
    );
    let k = [
        format!("2*{}*x*xdot + {}*y*ydot^2", c[0], c[3]),
        format!("{}*y*z*zdot + 2*{}*y*xdot*ydot", c[1], c[3]),
        format!("{}*y*z*ydot + {}*x^2", c[1], c[2]),
    ];
    let src = format!(
        r#"
# K is the velocity gradient of {lambda}
[model]
name = "random"
dimension = 3
coordinates = ["x", "y", "z"]

[lagrangian]
K = ["{}", "{}", "{}"]
V = "(1 + x^2)*xdot^2/2 + ydot^2/2 + zdot^2/2 + {}*x*y*zdot + {}*z*xdot*ydot - {}*x*y*z"

[sampling]
box = [-1, 1]
seed = 0
"#,
        k[0], k[1], k[2], c[4], c[5], c[6]
    );
    AffineModel::load(&src).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn helmholtz_and_fd_hold_on_random_symmetric_models(c in proptest::collection::vec(-3i32..=3, 7), seed in 0u64..1000) {
        let m = random_model(&c);
        let d = derive(&m);
        let h = helmholtz_suite(&m, &d, 6, seed, 1).unwrap();
        prop_assert!(all_passed(&h), "{:?}", required_failures(&h));
        let fd = fd_crosscheck(&m, &d, 6, seed, &FdPolicy::default(), 1).unwrap();
        prop_assert!(all_passed(&fd), "{:?}", required_failures(&fd));
    }
}

#[test]
fn constant_potential_gives_vanishing_tensors() {
    let src = r#"
[model]
name = "constant"
dimension = 2
coordinates = ["x", "y"]

[lagrangian]
K = ["0", "0"]
V = "3"
"#;
    let m = AffineModel::load(src).unwrap();
    let d = derive(&m);
    let fd = fd_crosscheck(&m, &d, 8, 0, &FdPolicy::default(), 1).unwrap();
    assert!(all_passed(&fd));
    assert!(fd.iter().all(|r| r.max_abs == 0.0));
    let h = helmholtz_suite(&m, &d, 8, 0, 1).unwrap();
    assert!(h.iter().all(|r| r.passed));
}
