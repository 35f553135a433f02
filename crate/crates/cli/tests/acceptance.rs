//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use ostro_core::catalog;
use ostro_core::constraints::{
    classify, dirac, linalg, poisson, zero_modes_at, ConstraintSystem, Observable, PhaseState, StructureKind, RANK_TOL,
};
use ostro_core::dynamics::{integrate, monitor_noether, project_initial, Flow, IntegrateOptions, NoetherSpec};
use ostro_core::expr::rational::is_identically_zero;
use ostro_core::expr::{equal_probabilistic, parse, Binding, Expr};
use ostro_core::model::{
    check_affine_symmetry, derive, euler_lagrange_residual, surface_decompose, zermelo_check, AffineModel, DerivedTensors,
};
use ostro_core::verify::{all_passed, fd_crosscheck, helmholtz_suite, perturb_potential, FdPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn load(name: &str) -> AffineModel {
    AffineModel::load(catalog::source(name).expect("catalog model")).expect("catalog model loads")
}

fn points(m: &AffineModel, order: usize, n: usize, seed: u64) -> Result<Vec<Binding>, String> {
    m.sampler(seed).sample(&m.configuration_symbols(order), n).map_err(err)
}

fn state(m: &AffineModel, d: &DerivedTensors, b: &Binding) -> Result<PhaseState, String> {
    let t = m.table();
    let x: Vec<f64> = (0..m.dimension()).map(|mu| b.get(t.coordinate(mu)).unwrap()).collect();
    let v: Vec<f64> = (0..m.dimension()).map(|mu| b.get(t.velocity(mu)).unwrap()).collect();
    PhaseState::on_surface(m, d, &x, &v).map_err(err)
}

/// Exact match after simplification, else probabilistic equality.
fn same(m: &AffineModel, a: &Expr, b: &Expr, tol: f64) -> Result<bool, String> {
    let diff = (a - b).simplify();
    if is_identically_zero(&diff) {
        return Ok(true);
    }
    equal_probabilistic(a, b, &mut m.sampler(11), 8, tol).map_err(err)
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let spent = start.elapsed();
    ensure(spent < limit, || format!("runtime {spent:?} exceeds {limit:?}"))?;
    Ok(spent)
}

fn chiral() -> Outcome {
    let start = Instant::now();
    let m = load("chiral");
    let d = derive(&m);
    let sym = check_affine_symmetry(&m, 0).map_err(err)?;
    ensure(!sym.symmetric, || "affine symmetry reported as holding".into())?;
    let cs = ConstraintSystem::build(&m, &d, 0).map_err(err)?;
    let lambda = parse("lambda", m.table()).map_err(err)?;
    // {C_x, C_y} = λ ε_yx = −λ
    ensure(same(&m, &cs.omega[0][1], &(-&lambda), 1e-12)?, || format!("{{C_x,C_y}} = {}", cs.omega[0][1]))?;
    ensure(same(&m, &cs.omega[1][0], &lambda, 1e-12)?, || format!("{{C_y,C_x}} = {}", cs.omega[1][0]))?;
    for b in points(&m, 1, 4, 1)? {
        let cls = classify(&cs, &d, &m, &state(&m, &d, &b)?, RANK_TOL).map_err(err)?;
        ensure(cls.dof == 3, || format!("dof {}", cls.dof))?;
    }
    let spent = within(start, Duration::from_secs(1))?;
    Ok(format!("symmetry violated, {{C_x,C_y}} = {}, dof 3, {spent:.2?}", cs.omega[0][1]))
}

fn geodesic() -> Outcome {
    let start = Instant::now();
    let m = load("geodesic");
    let t = m.table();
    let d = derive(&m);
    let cs = ConstraintSystem::build(&m, &d, 0).map_err(err)?;
    let p = |s: &str| parse(s, t).map_err(err);
    let g = [
        [p("1 + k*x^2")?, p("c*x*y - (2*a + b)*y/2")?],
        [p("c*x*y - (2*a + b)*y/2")?, p("1 - b*x")?],
    ];
    for mu in 0..2 {
        for nu in 0..2 {
            let want = Expr::int(-2) * &g[mu][nu];
            ensure(same(&m, &d.mass[mu][nu], &want, 1e-12)?, || format!("M[{mu}][{nu}] = {}", d.mass[mu][nu]))?;
        }
    }
    // 𝒞_μ = p_μ − (2ω_μν − ∂_ν ω_μ) ẋ^ν with ω_μ = (a y², b x y).
    let secondary = [
        p("p_x - 2*(1 + k*x^2)*xdot - (2*c*x*y - 2*a*y)*ydot")?,
        p("p_y - (2*c*x*y - b*y)*xdot - (2 - b*x)*ydot")?,
    ];
    for (mu, want) in secondary.iter().enumerate() {
        ensure(same(&m, &cs.secondary[mu], want, 1e-12)?, || format!("S[{mu}] = {}", cs.secondary[mu]))?;
    }
    let mut worst = 0.0f64;
    for b in points(&m, 1, 8, 2)? {
        let s = state(&m, &d, &b)?;
        let o = cs.omega_at(&m, &s).map_err(err)?;
        let bind = s.binding(&m);
        let gm = DMatrix::from_fn(2, 2, |i, j| g[i][j].evaluate(&bind).unwrap());
        let xm = DMatrix::from_fn(2, 2, |i, j| d.x_curl[i][j].evaluate(&bind).unwrap());
        let gi = gm.clone().try_inverse().ok_or("metric not invertible")?;
        let mut want = DMatrix::zeros(4, 4);
        want.view_mut((0, 2), (2, 2)).copy_from(&(&gm * 2.0));
        want.view_mut((2, 0), (2, 2)).copy_from(&(&gm * -2.0));
        want.view_mut((2, 2), (2, 2)).copy_from(&xm);
        let mut want_inv = DMatrix::zeros(4, 4);
        want_inv.view_mut((0, 0), (2, 2)).copy_from(&(&gi * &xm * &gi * 0.25));
        want_inv.view_mut((0, 2), (2, 2)).copy_from(&(&gi * -0.5));
        want_inv.view_mut((2, 0), (2, 2)).copy_from(&(&gi * 0.5));
        let inv = o.clone().try_inverse().ok_or("Omega not invertible")?;
        for (have, want) in [(&o, &want), (&inv, &want_inv)] {
            for (h, w) in have.iter().zip(want.iter()) {
                worst = worst.max((h - w).abs() / w.abs().max(1.0));
            }
        }
        let cls = classify(&cs, &d, &m, &s, RANK_TOL).map_err(err)?;
        ensure(cls.kind == StructureKind::Regular && cls.dof == 2, || {
            format!("{:?} with dof {}", cls.kind, cls.dof)
        })?;
    }
    ensure(worst <= 1e-10, || format!("Omega block residual {worst:.3e}"))?;
    let spent = within(start, Duration::from_secs(2))?;
    Ok(format!("M = -2g, S matches, Omega and inverse residual {worst:.1e}, regular dof 2, {spent:.2?}"))
}

fn bubble() -> Outcome {
    let start = Instant::now();
    let m = load("bubble");
    let t = m.table();
    let d = derive(&m);
    let cs = ConstraintSystem::build(&m, &d, 0).map_err(err)?;
    let p = |s: &str| parse(s, t).map_err(err);
    let big_p = [p("alpha*r^2*rdot/(tdot^2 - rdot^2)")?, p("-alpha*r^2*tdot/(tdot^2 - rdot^2)")?];
    let small_p = [
        p("-2*alpha*r*tdot^2/(tdot^2 - rdot^2) - beta*q^2/r")?,
        p("2*alpha*r*rdot*tdot/(tdot^2 - rdot^2)")?,
    ];
    for mu in 0..2 {
        ensure(same(&m, &d.higher_momenta[mu], &big_p[mu], 1e-12)?, || format!("P[{mu}] = {}", d.higher_momenta[mu]))?;
        ensure(same(&m, &d.momenta[mu], &small_p[mu], 1e-12)?, || format!("p[{mu}] = {}", d.momenta[mu]))?;
    }

    let f1 = p("P_t*tdot + P_r*rdot")?;
    let f2 = p("p_t*tdot + p_r*rdot + (2*alpha*r + beta*q^2/r)*tdot")?;
    let s1 = p("P_t*rdot + P_r*tdot + alpha*r^2")?;
    let s2 = p("p_t*rdot + p_r*tdot + beta*q^2*rdot/r")?;
    let poisson_sum = (poisson(&f1, &f2, t) + &f2).simplify();
    let mut worst = 0.0f64;
    for (i, b) in points(&m, 1, 8, 3)?.into_iter().enumerate() {
        let s = state(&m, &d, &b)?;
        let bind = s.binding(&m);
        let at = |name: &str| bind.get(t.lookup(name).unwrap()).unwrap();
        let (r, td, rd) = (at("r"), at("tdot"), at("rdot"));
        let (alpha, beta, q) = (at("alpha"), at("beta"), at("q"));
        let n2 = td * td - rd * rd;
        let pre = -4.0 * alpha * r * td / (n2 * n2);
        let want_m = [[pre * rd * rd, -pre * rd * td], [-pre * rd * td, pre * td * td]];
        for mu in 0..2 {
            for nu in 0..2 {
                let have = d.mass[mu][nu].evaluate(&bind).map_err(err)?;
                worst = worst.max((have - want_m[mu][nu]).abs() / want_m[mu][nu].abs().max(1.0));
            }
        }
        let want_x = 2.0 * alpha * td * td / n2 - beta * q * q / (r * r);
        let have_x = d.x_curl[0][1].evaluate(&bind).map_err(err)?;
        worst = worst.max((have_x - want_x).abs() / want_x.abs().max(1.0));

        let z = zero_modes_at(&d, &m, &s, RANK_TOL).map_err(err)?;
        let dir = DVector::from_vec(vec![td, rd]).normalize();
        ensure(z.len() == 1 && (z[0].dot(&dir).abs() - 1.0).abs() < 1e-9, || {
            format!("zero modes {z:?} at point {i}")
        })?;

        let cls = classify(&cs, &d, &m, &s, RANK_TOL).map_err(err)?;
        ensure(cls.kind == StructureKind::Singular && cls.dof == 1, || format!("{:?} dof {}", cls.kind, cls.dof))?;
        ensure(cls.first_class.len() == 2 && cls.second_class.len() == 2, || {
            format!("{} first class, {} second class", cls.first_class.len(), cls.second_class.len())
        })?;
        for (c, want) in cls.first_class.iter().chain(&cls.second_class).zip([&f1, &f2, &s1, &s2]) {
            let have = c.symbolic.as_ref().ok_or("classified constraint has no symbolic form")?;
            ensure(same(&m, have, want, 1e-12)?, || format!("{} = {have}", c.label))?;
        }

        // Poisson bracket off the secondary surface, Dirac bracket on it.
        let mut off = s.clone();
        off.p = vec![0.7 * i as f64 - 2.0, 1.3 - 0.4 * i as f64];
        let pb = poisson_sum.evaluate(&off.binding(&m)).map_err(err)?;
        ensure(pb.abs() < 1e-8, || format!("{{f1,f2}} + f2 = {pb:.3e} (Poisson)"))?;
        let db = dirac(Observable::Expr(&f1), Observable::Expr(&f2), &cs, &cls, &m, &s).map_err(err)?;
        let f2v = f2.evaluate(&bind).map_err(err)?;
        ensure((db.value + f2v).abs() < 1e-8, || format!("{{f1,f2}}* + f2 = {:.3e} (Dirac)", db.value + f2v))?;
    }
    ensure(worst <= 1e-10, || format!("M or X residual {worst:.3e}"))?;

    let split = surface_decompose(&m, 0).map_err(err)?;
    let lambda = p("-alpha*r^2*atanh(rdot/tdot)")?;
    ensure(same(&m, &split.lambda, &lambda, 1e-12)?, || format!("Lambda = {}", split.lambda))?;

    let pts = points(&m, 2, 8, 4)?;
    let z = zermelo_check(&m, &pts, 1e-10).map_err(err)?;
    ensure(z.covariant, || format!("Zermelo residuals {:.3e} {:.3e}", z.i1_residual, z.i2_residual))?;
    for b in &pts {
        let e1 = d.e1.evaluate(b).map_err(err)?;
        let e2 = d.e2.evaluate(b).map_err(err)?;
        ensure(e1.abs() <= 1e-10 && e2.abs() <= 1e-10, || format!("E1 = {e1:.3e}, E2 = {e2:.3e}"))?;
    }
    let spent = within(start, Duration::from_secs(5))?;
    Ok(format!(
        "momenta, M, X, zero mode, f1 f2 s1 s2, brackets, Lambda = {}, Zermelo and E1 = E2 = 0 all match, {spent:.2?}",
        split.lambda
    ))
}

/// Regular three-dimensional model with `K = ∂Λ/∂ẋ` and small random couplings.
fn random_regular(rng: &mut ChaCha8Rng) -> Result<AffineModel, String> {
    let mut c = || format!("({:.4})", rng.gen_range(-0.1..0.1));
    let (c0, c1, c2, c3) = (c(), c(), c(), c());
    let k = [
        format!("2*{c0}*x*xdot + {c3}*y*ydot^2"),
        format!("{c1}*y*z*zdot + 2*{c3}*y*xdot*ydot"),
        format!("{c1}*y*z*ydot + {c2}*x^2"),
    ];
    let v = format!(
        "(1 + x^2)*xdot^2/2 + (1 + {}*z)*ydot^2/2 + zdot^2/2 + {}*x*y*zdot + {}*xdot*ydot - {}*x*y*z",
        c(),
        c(),
        c(),
        c()
    );
    let src = format!(
        "[model]\nname = \"random\"\ndimension = 3\ncoordinates = [\"x\", \"y\", \"z\"]\n\n[lagrangian]\nK = [\"{}\", \"{}\", \"{}\"]\nV = \"{v}\"\n\n[sampling]\nbox = [-1, 1]\nseed = 0\n",
        k[0], k[1], k[2]
    );
    AffineModel::load(&src).map_err(err)
}

fn regular_dof_law() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..3 {
        let m = random_regular(&mut rng)?;
        let d = derive(&m);
        let cs = ConstraintSystem::build(&m, &d, 0).map_err(err)?;
        ensure(cs.symmetric, || format!("model {i}: dK/dxdot not symmetric"))?;
        for b in points(&m, 1, 4, i)? {
            let s = state(&m, &d, &b)?;
            let rank = linalg::rank(&cs.omega_at(&m, &s).map_err(err)?, RANK_TOL);
            let cls = classify(&cs, &d, &m, &s, RANK_TOL).map_err(err)?;
            ensure(rank == 6 && cls.dof == 3 && cls.kind == StructureKind::Regular, || {
                format!("model {i}: rank {rank}, dof {}, {:?}", cls.dof, cls.kind)
            })?;
        }
    }
    let spent = within(start, Duration::from_secs(10))?;
    Ok(format!("3 models x 4 points: rank 2N = 6, dof N = 3, {spent:.2?}"))
}

fn gauge_invariance() -> Outcome {
    let mut checked = 0;
    for name in catalog::names() {
        let m = load(name);
        let t = m.table();
        let (x0, x1) = (Expr::sym(t.coordinate(0)), Expr::sym(t.coordinate(1)));
        let (v0, v1) = (Expr::sym(t.velocity(0)), Expr::sym(t.velocity(1)));
        let ys = [
            x0.powi(2) * &x1,
            Expr::apply(ostro_core::expr::Func::Sin, x0.clone()) * &v1,
            &x1 * &v0 * &v1,
        ];
        let d = derive(&m);
        for (k, y) in ys.iter().enumerate() {
            let shifted = m.gauge_shift(y).map_err(err)?;
            let e = derive(&shifted);
            let pairs = [
                ("M", d.mass.iter().flatten().zip(e.mass.iter().flatten()).collect::<Vec<_>>()),
                ("F", d.force.iter().zip(&e.force).collect()),
                ("N", d.n_curl.iter().flatten().zip(e.n_curl.iter().flatten()).collect()),
                ("X", d.x_curl.iter().flatten().zip(e.x_curl.iter().flatten()).collect()),
            ];
            for (label, entries) in pairs {
                for (a, b) in entries {
                    let eq = equal_probabilistic(a, b, &mut m.sampler(k as u64), 8, 1e-9).map_err(err)?;
                    ensure(eq, || format!("{name}: {label} changed under Y = {y}"))?;
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} tensor entries unchanged over 3 models x 3 gauge functions"))
}

fn conservation() -> Outcome {
    let m = load("geodesic").apply_setting("omega=diag").map_err(err)?;
    let d = derive(&m);
    let cs = ConstraintSystem::build(&m, &d, 0).map_err(err)?;
    let flow = Flow::new(&m, &d, &cs, Vec::new(), false);
    let s0 = project_initial(&m, &d, &[0.1, -0.2], &[0.7, 0.4], None).map_err(err)?;
    let opts = IntegrateOptions {
        rtol: 1e-8,
        ..IntegrateOptions::default()
    };
    let traj = integrate(&flow, &s0, 0.0, 10.0, &opts).map_err(err)?;
    let drift = traj.e2_drift();
    ensure(drift <= 1e-6, || format!("E2 drift {drift:.3e}"))?;
    let res = euler_lagrange_residual(&m, &d, true, &traj.samples_with_jerk(&m)).map_err(err)?;
    let el = res.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    ensure(el <= 1e-6, || format!("Euler-Lagrange residual {el:.3e}"))?;
    let rep = monitor_noether(&traj, &NoetherSpec::time_translation(2), &m, &d).map_err(err)?;
    let track = rep
        .values
        .iter()
        .zip(&traj.diagnostics)
        .fold(0.0f64, |a, (g, diag)| a.max((g + diag.e2).abs()));
    ensure(track < 1e-12, || format!("max |G + E2| = {track:.3e}"))?;
    Ok(format!(
        "{} samples: E2 drift {drift:.2e}, EL residual {el:.2e}, max |G + E2| {track:.1e}",
        traj.len()
    ))
}

fn helmholtz() -> Outcome {
    let mut passed = Vec::new();
    for name in catalog::names() {
        let m = load(name);
        if !check_affine_symmetry(&m, 0).map_err(err)?.symmetric {
            continue;
        }
        let d = derive(&m);
        let reports = helmholtz_suite(&m, &d, 8, 0, 1).map_err(err)?;
        ensure(all_passed(&reports), || {
            let failing: Vec<_> = reports.iter().filter(|r| r.required && !r.passed).map(|r| r.name.clone()).collect();
            format!("{name}: {failing:?}")
        })?;
        passed.push(name);
    }
    for (name, delta) in [("geodesic", "y*xdot^3"), ("bubble", "r*tdot^3")] {
        let m = load(name);
        let d = derive(&m);
        let bad = perturb_potential(&m, &d, &parse(delta, m.table()).map_err(err)?);
        let reports = helmholtz_suite(&m, &bad, 8, 0, 1).map_err(err)?;
        ensure(!all_passed(&reports), || format!("{name} with V + {delta} passed"))?;
    }
    Ok(format!("passes on {}; corrupted geodesic and bubble fail", passed.join(", ")))
}

fn finite_differences() -> Outcome {
    let mut detail = Vec::new();
    for name in catalog::names() {
        let m = load(name);
        let d = derive(&m);
        let reports = fd_crosscheck(&m, &d, 8, 0, &FdPolicy::default(), 1).map_err(err)?;
        ensure(all_passed(&reports), || {
            let failing: Vec<_> = reports.iter().filter(|r| !r.passed).map(|r| r.to_string()).collect();
            format!("{name}: {}", failing.join("; "))
        })?;
        let samples: usize = reports.iter().map(|r| r.samples).sum();
        detail.push(format!("{name} {} tensors over {samples} samples", reports.len()));
    }
    Ok(format!("all entries within rel 1e-5 at 8 points ({})", detail.join(", ")))
}

fn run_cli(args: &[&str]) -> Result<(Vec<u8>, Vec<u8>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ostro"))
        .args(args)
        .env_remove("OSTRO_SEED")
        .output()
        .map_err(err)?;
    ensure(out.status.success(), || format!("ostro {} exited {:?}", args.join(" "), out.status.code()))?;
    Ok((out.stdout, out.stderr))
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 4] = [
        &["analyze", "catalog:bubble", "--jobs", "2"],
        &["verify", "catalog:geodesic", "--jobs", "3"],
        &["decompose", "catalog:geodesic"],
        &["integrate", "catalog:geodesic", "--set", "omega=diag", "--ic", "0.1,-0.2;0.7,0.4", "--span", "0,10"],
    ];
    let mut bytes = 0;
    for args in runs {
        let first = run_cli(args)?;
        let second = run_cli(args)?;
        ensure(first == second, || format!("ostro {} differs between runs", args.join(" ")))?;
        bytes += first.0.len() + first.1.len();
    }
    Ok(format!("analyze, verify, decompose and integrate repeat byte for byte ({bytes} bytes)"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("chiral oscillator", chiral),
        ("geodesic model", geodesic),
        ("charged bubble", bubble),
        ("regular dof law", regular_dof_law),
        ("gauge invariance", gauge_invariance),
        ("conservation", conservation),
        ("Helmholtz suite", helmholtz),
        ("finite-difference oracle", finite_differences),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS: {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {}: FAIL: {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
