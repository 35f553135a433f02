use nalgebra::{DMatrix, DVector};
use ostro_core::catalog;
use ostro_core::constraints::*;
use ostro_core::expr::rational::is_identically_zero;
use ostro_core::expr::{parse, Expr};
use ostro_core::model::{derive, AffineModel, DerivedTensors};

fn load(name: &str) -> AffineModel {
    AffineModel::load(catalog::source(name).unwrap()).unwrap()
}

fn setup(m: &AffineModel) -> (DerivedTensors, ConstraintSystem) {
    let d = derive(m);
    let cs = ConstraintSystem::build(m, &d, 0).unwrap();
    (d, cs)
}

/// Admissible `(x, ẋ)` pairs drawn from the model's sampler.
fn configurations(m: &AffineModel, n: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let t = m.table();
    let dim = m.dimension();
    m.sampler(seed)
        .sample(&m.configuration_symbols(1), n)
        .unwrap()
        .into_iter()
        .map(|b| {
            let x = (0..dim).map(|mu| b.get(t.coordinate(mu)).unwrap()).collect();
            let v = (0..dim).map(|mu| b.get(t.velocity(mu)).unwrap()).collect();
            (x, v)
        })
        .collect()
}

fn same(a: &Expr, b: &Expr) -> bool {
    is_identically_zero(&(a - b).simplify())
}

#[test]
fn chiral_primaries_do_not_commute() {
    let m = load("chiral");
    let (d, cs) = setup(&m);
    assert!(!cs.symmetric);
    assert_eq!(cs.omega[0][1], parse("-lambda", m.table()).unwrap());
    assert_eq!(cs.omega[1][0], parse("lambda", m.table()).unwrap());
    let s = PhaseState::new(vec![0.1, 0.2], vec![1.0, 0.0], vec![0.3, -0.4], vec![0.0, 0.5]);
    let cls = classify(&cs, &d, &m, &s, RANK_TOL).unwrap();
    assert_eq!(cls.kind, StructureKind::Chiral);
    assert_eq!(cls.second_class.len(), 2);
    assert!(cls.first_class.is_empty());
    assert_eq!(cls.dof, 3);
    assert_eq!(cls.second_class_rank, 2);
}

#[test]
fn chiral_multiplier_recovers_acceleration() {
    let m = load("chiral");
    let (d, cs) = setup(&m);
    // p = p(x, ẋ) + N ẍ puts the state on the chiral surface with u = ẍ.
    let acc = [0.3, -0.2];
    let lambda = 1.0;
    let mut s = PhaseState::on_surface(&m, &d, &[0.0, 0.0], &[1.0, 2.0]).unwrap();
    s.p[0] += -lambda * acc[1];
    s.p[1] += lambda * acc[0];
    let sol = multiplier_solve(&cs, &d, &m, &s, &[], 1e-10).unwrap();
    assert!(sol.determined());
    assert!((sol.u[0] - acc[0]).abs() < 1e-12 && (sol.u[1] - acc[1]).abs() < 1e-12);
}

#[test]
fn geodesic_bracket_blocks_are_twice_the_metric() {
    let m = load("geodesic");
    let (d, cs) = setup(&m);
    assert!(cs.symmetric);
    for (x, v) in configurations(&m, 8, 1) {
        let s = PhaseState::on_surface(&m, &d, &x, &v).unwrap();
        let o = cs.omega_at(&m, &s).unwrap();
        let b = s.binding(&m);
        for mu in 0..2 {
            for nu in 0..2 {
                let g = -0.5 * d.mass[mu][nu].evaluate(&b).unwrap();
                assert!(o[(mu, nu)].abs() < 1e-12, "primaries commute");
                assert!((o[(mu, 2 + nu)] - 2.0 * g).abs() < 1e-10);
                assert!((o[(2 + mu, nu)] + 2.0 * g).abs() < 1e-10);
                assert!((o[(2 + mu, 2 + nu)] - d.x_curl[mu][nu].evaluate(&b).unwrap()).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn euclidean_geodesic_omega() {
    let m = load("geodesic").apply_setting("omega=euclidean").unwrap();
    let (_, cs) = setup(&m);
    let s = PhaseState::new(vec![0.3, -0.2], vec![0.5, 0.1], vec![0.0; 2], vec![0.0; 2]);
    let o = cs.omega_at(&m, &s).unwrap();
    let expected = DMatrix::from_row_slice(4, 4, &[
        0.0, 0.0, 2.0, 0.0, //
        0.0, 0.0, 0.0, 2.0, //
        -2.0, 0.0, 0.0, 0.0, //
        0.0, -2.0, 0.0, 0.0,
    ]);
    assert!((o - expected).amax() < 1e-15);
}

#[test]
fn geodesic_is_regular_with_n_dof() {
    let m = load("geodesic");
    let (d, cs) = setup(&m);
    for (x, v) in configurations(&m, 4, 2) {
        let s = PhaseState::on_surface(&m, &d, &x, &v).unwrap();
        let cls = classify(&cs, &d, &m, &s, RANK_TOL).unwrap();
        assert_eq!(cls.kind, StructureKind::Regular);
        assert_eq!(cls.dof, 2);
        assert!(cls.zero_modes.is_empty() && cls.lagrangian_constraints.is_empty());
        assert_eq!(linalg::rank(&cs.omega_at(&m, &s).unwrap(), RANK_TOL), 4);
        assert_eq!(cls.second_class_rank, cls.second_class.len());
    }
}

#[test]
fn geodesic_multiplier_matches_hand_christoffels() {
    // L = (1 + x²) ẋ² + ẏ²  ⇒  ẍ = −x ẋ² / (1 + x²), ÿ = 0.
    let m = load("geodesic").apply_setting("omega=diag").unwrap();
    let (d, cs) = setup(&m);
    for (x, v) in configurations(&m, 6, 3) {
        let s = PhaseState::on_surface(&m, &d, &x, &v).unwrap();
        let sol = multiplier_solve(&cs, &d, &m, &s, &[], 1e-10).unwrap();
        let want = -x[0] * v[0] * v[0] / (1.0 + x[0] * x[0]);
        assert!((sol.u[0] - want).abs() < 1e-12, "{} vs {want}", sol.u[0]);
        assert!(sol.u[1].abs() < 1e-12);
    }
}

#[test]
fn geodesic_dirac_matches_closed_form_inverse() {
    // With Ω⁻¹ = ¼[[g⁻¹Xg⁻¹, −2g⁻¹], [2g⁻¹, 0]]:
    // {ẋ^α, ẋ^β}* = ¼ (g⁻¹Xg⁻¹)^{αβ} and {x^α, ẋ^β}* = ½ g^{αβ}.
    let m = load("geodesic");
    let (d, cs) = setup(&m);
    let t = m.table();
    for (x, v) in configurations(&m, 4, 4) {
        let s = PhaseState::on_surface(&m, &d, &x, &v).unwrap();
        let b = s.binding(&m);
        let cls = classify(&cs, &d, &m, &s, RANK_TOL).unwrap();
        let g = DMatrix::from_fn(2, 2, |i, j| -0.5 * d.mass[i][j].evaluate(&b).unwrap());
        let xc = DMatrix::from_fn(2, 2, |i, j| d.x_curl[i][j].evaluate(&b).unwrap());
        let gi = g.clone().try_inverse().unwrap();
        let vv = &gi * &xc * &gi * 0.25;
        for a in 0..2 {
            for c in 0..2 {
                let fa = Expr::sym(t.velocity(a));
                let fc = Expr::sym(t.velocity(c));
                let r = dirac(Observable::Expr(&fa), Observable::Expr(&fc), &cs, &cls, &m, &s).unwrap();
                assert!((r.value - vv[(a, c)]).abs() < 1e-9);
                let xa = Expr::sym(t.coordinate(a));
                let r = dirac(Observable::Expr(&xa), Observable::Expr(&fc), &cs, &cls, &m, &s).unwrap();
                assert!((r.value - 0.5 * gi[(a, c)]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn dirac_bracket_annihilates_second_class() {
    let m = load("geodesic");
    let (d, cs) = setup(&m);
    let t = m.table();
    let f = parse("x*p_y + xdot^2*P_x - sin(y)*ydot", t).unwrap();
    for (x, v) in configurations(&m, 4, 5) {
        let mut s = PhaseState::on_surface(&m, &d, &x, &v).unwrap();
        s.p[0] += 0.3;
        s.big_p[1] -= 0.2;
        let cls = classify(&cs, &d, &m, &s, RANK_TOL).unwrap();
        for chi in &cls.second_class {
            let r = dirac(Observable::Expr(&f), Observable::Combination(&chi.coefficients), &cs, &cls, &m, &s).unwrap();
            assert!(r.value.abs() < 1e-8, "{} -> {}", chi.label, r.value);
        }
    }
}

fn bubble_state(m: &AffineModel, d: &DerivedTensors, r: f64, tdot: f64, rdot: f64) -> PhaseState {
    PhaseState::on_surface(m, d, &[0.0, r], &[tdot, rdot]).unwrap()
}

#[test]
fn bubble_mass_block_at_rest() {
    let m = load("bubble");
    let (d, cs) = setup(&m);
    let s = bubble_state(&m, &d, 1.0, 1.0, 0.0);
    let o = cs.omega_at(&m, &s).unwrap();
    let lower = o.view((2, 0), (2, 2)).into_owned();
    assert!((lower - DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -4.0])).amax() < 1e-12);
}

#[test]
fn bubble_zero_mode_is_the_velocity() {
    let m = load("bubble");
    let (d, cs) = setup(&m);
    assert!(cs.velocity_zero_mode);
    for (x, v) in configurations(&m, 6, 6) {
        let s = PhaseState::on_surface(&m, &d, &x, &v).unwrap();
        let z = zero_modes_at(&d, &m, &s, RANK_TOL).unwrap();
        assert_eq!(z.len(), 1);
        let vel = DVector::from_vec(v.clone()).normalize();
        assert!((z[0].dot(&vel).abs() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn bubble_classification() {
    let m = load("bubble");
    let (d, cs) = setup(&m);
    let t = m.table();
    let f1 = parse("P_t*tdot + P_r*rdot", t).unwrap();
    let f2 = parse("p_t*tdot + p_r*rdot + (2*alpha*r + beta*q^2/r)*tdot", t).unwrap();
    let s1 = parse("P_t*rdot + P_r*tdot + alpha*r^2", t).unwrap();
    // The velocity factor on the charge term follows from contracting 𝒞 with (ṙ, ṫ).
    let s2 = parse("p_t*rdot + p_r*tdot + beta*q^2*rdot/r", t).unwrap();
    for (x, v) in configurations(&m, 4, 7) {
        let s = PhaseState::on_surface(&m, &d, &x, &v).unwrap();
        let cls = classify(&cs, &d, &m, &s, RANK_TOL).unwrap();
        assert_eq!(cls.kind, StructureKind::Singular);
        assert_eq!(cls.dof, 1);
        assert_eq!(cls.first_class.len(), 2);
        assert_eq!(cls.second_class.len(), 2);
        assert_eq!(cls.second_class_rank, 2);
        assert!(same(cls.first_class[0].symbolic.as_ref().unwrap(), &f1));
        assert!(same(cls.first_class[1].symbolic.as_ref().unwrap(), &f2));
        assert!(same(cls.second_class[0].symbolic.as_ref().unwrap(), &s1));
        assert!(same(cls.second_class[1].symbolic.as_ref().unwrap(), &s2));
        assert!(cls.lagrangian_constraints[0].abs() < 1e-10);
    }
}

#[test]
fn bubble_first_class_algebra() {
    let m = load("bubble");
    let (d, cs) = setup(&m);
    let t = m.table();
    let f1 = parse("P_t*tdot + P_r*rdot", t).unwrap();
    let f2 = parse("p_t*tdot + p_r*rdot + (2*alpha*r + beta*q^2/r)*tdot", t).unwrap();
    let sum = (poisson(&f1, &f2, t) + &f2).simplify();
    for (i, (x, v)) in configurations(&m, 8, 8).into_iter().enumerate() {
        // Primary surface: P = K, p arbitrary.
        let mut s = PhaseState::on_surface(&m, &d, &x, &v).unwrap();
        s.p = vec![0.7 * i as f64 - 2.0, 1.3 - 0.4 * i as f64];
        assert!(sum.evaluate(&s.binding(&m)).unwrap().abs() < 1e-8);
        let cls = classify(&cs, &d, &m, &PhaseState::on_surface(&m, &d, &x, &v).unwrap(), RANK_TOL).unwrap();
        let on = PhaseState::on_surface(&m, &d, &x, &v).unwrap();
        let r = dirac(Observable::Expr(&f1), Observable::Expr(&f2), &cs, &cls, &m, &on).unwrap();
        let f2v = f2.evaluate(&on.binding(&m)).unwrap();
        assert!((r.value + f2v).abs() < 1e-8);
    }
}

#[test]
fn bubble_multiplier_family_and_gauge() {
    let m = load("bubble");
    let (d, cs) = setup(&m);
    let gauge = &m.gauges()["cosmic"];
    for (x, v) in configurations(&m, 4, 9) {
        let s = PhaseState::on_surface(&m, &d, &x, &v).unwrap();
        let free = multiplier_solve(&cs, &d, &m, &s, &[], 1e-8).unwrap();
        assert_eq!(free.family.len(), 1);
        let fixed = multiplier_solve(&cs, &d, &m, &s, gauge, 1e-8).unwrap();
        assert!(fixed.determined());
        assert!(fixed.u[0].abs() < 1e-10);
    }
}

#[test]
fn guard_violation_is_reported() {
    let m = load("bubble");
    let (_, cs) = setup(&m);
    let s = PhaseState::new(vec![0.0, 1.0], vec![0.5, 1.0], vec![0.0; 2], vec![0.0; 2]);
    assert!(matches!(cs.omega_at(&m, &s), Err(ConstraintError::GuardViolation { .. })));
}

#[test]
fn bracket_identities_hold() {
    let m = load("bubble");
    let (d, cs) = setup(&m);
    let t = m.table();
    let a = parse("t*p_r + rdot^2*P_t", t).unwrap();
    let b = parse("r^2*p_t - tdot*P_r", t).unwrap();
    let c = parse("sin(r)*rdot + P_r*p_t", t).unwrap();
    let leibniz = (poisson(&(&a * &b), &c, t) - &a * poisson(&b, &c, t) - poisson(&a, &c, t) * &b).simplify();
    let jacobi = (poisson(&a, &poisson(&b, &c, t), t) + poisson(&b, &poisson(&c, &a, t), t) + poisson(&c, &poisson(&a, &b, t), t))
        .simplify();
    for (x, v) in configurations(&m, 8, 10) {
        let mut s = PhaseState::on_surface(&m, &d, &x, &v).unwrap();
        s.p[0] += 0.5;
        s.big_p[1] -= 0.25;
        let bind = s.binding(&m);
        assert!(leibniz.evaluate(&bind).unwrap().abs() < 1e-8);
        assert!(jacobi.evaluate(&bind).unwrap().abs() < 1e-8);
        // Lower-left and lower-right blocks are M and X.
        let o = cs.omega_at(&m, &s).unwrap();
        for mu in 0..2 {
            for nu in 0..2 {
                assert!((o[(2 + mu, nu)] - d.mass[mu][nu].evaluate(&bind).unwrap()).abs() < 1e-10);
                assert!((o[(2 + mu, 2 + nu)] - d.x_curl[mu][nu].evaluate(&bind).unwrap()).abs() < 1e-10);
            }
        }
    }
}
