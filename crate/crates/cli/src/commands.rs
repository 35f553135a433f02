use std::fmt::Write;
use std::path::Path;

use ostro_core::catalog;
use ostro_core::constraints::{
    classify, multiplier_solve, ClassifiedConstraint, ConstraintError, ConstraintSystem, PhaseState, StructureKind,
    BRACKET_TOL,
};
use ostro_core::dynamics::{
    integrate as run_flow, monitor_noether, project_initial, DynamicsError, Flow, IntegrateOptions, NoetherSpec,
    MULTIPLIER_TOL,
};
use ostro_core::expr::{parse, Expr, DEFAULT_TOL, DEFAULT_TRIALS};
use ostro_core::model::{
    check_affine_symmetry, derive, euler_lagrange_residual, surface_decompose, zermelo_check, AffineModel,
    DerivedTensors, GaugeCondition, ModelError,
};
use ostro_core::verify::{all_passed, fd_crosscheck, helmholtz_suite, perturb_potential, FdPolicy, IdentityReport};

use crate::render::{self, heading, sci};
use crate::{Failure, ModelArgs};

/// Zermelo residual tolerance, relative to `1 + |L|`.
const ZERMELO_TOL: f64 = 1e-9;

fn validation(e: impl std::fmt::Display) -> Failure {
    Failure::new(Failure::VALIDATION, e.to_string())
}

fn model_failure(e: ModelError) -> Failure {
    match e {
        ModelError::AntiderivativeNotFound { .. } | ModelError::AntiderivativeResidual { .. } => {
            Failure::new(Failure::NUMERICAL, e.to_string())
        }
        _ => validation(e),
    }
}

fn constraint_failure(e: ConstraintError) -> Failure {
    let code = match &e {
        ConstraintError::InconsistentClassification { .. }
        | ConstraintError::MixedRankCurl { .. }
        | ConstraintError::SingularOmega { .. }
        | ConstraintError::HamiltonianConsistency { .. } => Failure::CLASSIFICATION,
        ConstraintError::NoSolution { .. } => Failure::MULTIPLIER,
        _ => Failure::VALIDATION,
    };
    Failure::new(code, e.to_string())
}

fn dynamics_failure(e: DynamicsError) -> Failure {
    match e {
        DynamicsError::Constraint(c) => constraint_failure(c),
        DynamicsError::GaugeRequired { .. } => Failure::new(Failure::MULTIPLIER, e.to_string()),
        DynamicsError::StepUnderflow { ref last, .. } => {
            let msg = format!(
                "{e}; last accepted state x = {}, xdot = {}",
                render::list(&last.x),
                render::list(&last.xdot)
            );
            Failure::new(Failure::NUMERICAL, msg)
        }
        DynamicsError::StepLimit { .. } => Failure::new(Failure::NUMERICAL, e.to_string()),
        DynamicsError::Span(_) | DynamicsError::Io(_) => validation(e),
    }
}

/// Resolve `catalog:NAME` or a path, then apply `--set` in order.
pub fn load_model(args: &ModelArgs) -> Result<AffineModel, Failure> {
    let text = match args.model.strip_prefix("catalog:") {
        Some(name) => catalog::source(name)
            .ok_or_else(|| unknown_catalog(name))?
            .to_string(),
        None => std::fs::read_to_string(&args.model).map_err(|e| validation(format!("{}: {e}", args.model)))?,
    };
    let mut m = AffineModel::load(&text).map_err(validation)?;
    for s in &args.settings {
        m = m.apply_setting(s).map_err(validation)?;
    }
    Ok(m)
}

fn unknown_catalog(name: &str) -> Failure {
    let known: Vec<&str> = catalog::names().collect();
    validation(format!("unknown catalog model '{name}' (available: {})", known.join(", ")))
}

fn header(out: &mut String, m: &AffineModel, seed: u64) {
    let _ = writeln!(out, "model: {}", m.name());
    let _ = writeln!(out, "coordinates: {}", m.table().coordinate_names().join(", "));
    let params: Vec<String> = m.parameters().iter().map(|(k, v)| format!("{k} = {}", render::num(*v))).collect();
    let _ = writeln!(
        out,
        "parameters: {}",
        if params.is_empty() { "none".into() } else { params.join(", ") }
    );
    let _ = writeln!(out, "signature: {}", render::list(m.signature()));
    let _ = writeln!(out, "seed: {seed}");
}

fn names(m: &AffineModel) -> Vec<String> {
    m.table().coordinate_names().to_vec()
}

fn sample_state(m: &AffineModel, d: &DerivedTensors, seed: u64) -> Result<PhaseState, Failure> {
    let mut sampler = m.sampler(seed);
    let b = sampler
        .sample(&m.configuration_symbols(1), 1)
        .map_err(|e| validation(format!("no admissible sample point: {e}")))?
        .remove(0);
    let t = m.table();
    let n = m.dimension();
    let x: Vec<f64> = (0..n).map(|mu| b.get(t.coordinate(mu)).unwrap_or(0.0)).collect();
    let xdot: Vec<f64> = (0..n).map(|mu| b.get(t.velocity(mu)).unwrap_or(0.0)).collect();
    PhaseState::on_surface(m, d, &x, &xdot).map_err(constraint_failure)
}

fn combination(c: &ClassifiedConstraint, labels: &[String]) -> String {
    if let Some(e) = &c.symbolic {
        return e.to_string();
    }
    let terms: Vec<String> = c
        .coefficients
        .iter()
        .zip(labels)
        .filter(|(v, _)| v.abs() > 1e-12)
        .map(|(v, l)| format!("{}*{l}", render::num(*v)))
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

pub fn analyze(args: &ModelArgs, rank_tol: f64, points: usize, jobs: usize) -> Result<String, Failure> {
    let m = load_model(args)?;
    let seed = args.seed;
    let names = names(&m);
    let mut out = String::new();
    header(&mut out, &m, seed);

    heading(&mut out, "affine symmetry");
    let sym = check_affine_symmetry(&m, seed).map_err(model_failure)?;
    let _ = writeln!(
        out,
        "  symmetric: {} (dK_mu/dxdot^nu; probabilistic zero test, {DEFAULT_TRIALS} trials, tol {DEFAULT_TOL:e}, seed {seed})",
        sym.symmetric
    );

    let d = derive(&m);
    heading(&mut out, "derived tensors");
    render::components(&mut out, "P", &names, &d.higher_momenta);
    render::components(&mut out, "p", &names, &d.momenta);
    render::components(&mut out, "F", &names, &d.force);
    let _ = writeln!(out, "  mass matrix:");
    render::expr_matrix(&mut out, "M", &names, &d.mass);
    for (label, title, t) in [("N", "velocity curl of K", &d.n_curl), ("X", "curl of p", &d.x_curl), ("Theta", "curl of P", &d.theta)] {
        if render::all_zero(t) {
            let _ = writeln!(out, "  {title}: {label} = 0");
        } else {
            let _ = writeln!(out, "  {title}:");
            render::expr_matrix(&mut out, label, &names, t);
        }
    }
    let _ = writeln!(out, "  E1 = {}", d.e1);
    let _ = writeln!(out, "  E2 = {}", d.e2);
    let _ = writeln!(out, "  H0 = {}", d.h0);

    heading(&mut out, "constraints");
    let cs = ConstraintSystem::build(&m, &d, seed).map_err(constraint_failure)?;
    let labels = cs.labels(m.table());
    let n = m.dimension();
    for (l, e) in labels.iter().zip(cs.all()) {
        let _ = writeln!(out, "  {l} = {e}");
    }
    let _ = writeln!(out, "  primary brackets {{C_mu, C_nu}}:");
    render::matrix(&mut out, "{C,C}", &names, |i, j| cs.omega[i][j].to_string());
    let _ = writeln!(out, "  mixed brackets {{C_mu, S_nu}}:");
    render::matrix(&mut out, "{C,S}", &names, |i, j| cs.omega[i][n + j].to_string());

    heading(&mut out, "classification");
    let s = sample_state(&m, &d, seed)?;
    let cls = classify(&cs, &d, &m, &s, rank_tol).map_err(constraint_failure)?;
    let kind = match cls.kind {
        StructureKind::Regular => "regular (M invertible)",
        StructureKind::Singular => "singular (M has zero modes)",
        StructureKind::Chiral => "chiral (dK/dxdot not symmetric, curl N invertible)",
    };
    let _ = writeln!(out, "  structure: {kind}");
    let _ = writeln!(out, "  point: x = {}, xdot = {}", render::list(&s.x), render::list(&s.xdot));
    let _ = writeln!(out, "  velocity is a zero mode of M: {}", cs.velocity_zero_mode);
    for (k, z) in cls.zero_modes.iter().enumerate() {
        let v: Vec<f64> = z.iter().copied().collect();
        let _ = writeln!(out, "  zero mode {k}: {}", render::list(&v));
    }
    let _ = writeln!(out, "  first class ({}):", cls.first_class.len());
    for c in &cls.first_class {
        let _ = writeln!(out, "    {} = {}", c.label, combination(c, &labels));
    }
    let _ = writeln!(out, "  second class ({}, bracket rank {}):", cls.second_class.len(), cls.second_class_rank);
    for c in &cls.second_class {
        let _ = writeln!(out, "    {} = {}", c.label, combination(c, &labels));
    }
    let _ = writeln!(out, "  dof: {}", cls.dof);
    let _ = writeln!(
        out,
        "  tolerances: rank {:e}, first-class bracket {BRACKET_TOL:e} (worst residual {})",
        cls.rank_tol,
        sci(cls.bracket_residual)
    );
    if !cls.lagrangian_constraints.is_empty() {
        let _ = writeln!(
            out,
            "  Lagrangian constraints (zero mode . F) at the point: {}",
            render::list(&cls.lagrangian_constraints)
        );
    }
    let gauge_cases = std::iter::once(("without gauge".to_string(), Vec::new()))
        .chain(m.gauges().iter().map(|(k, g)| (format!("with gauge '{k}'"), g.clone())));
    for (what, g) in gauge_cases {
        match multiplier_solve(&cs, &d, &m, &s, &g, MULTIPLIER_TOL) {
            Ok(sol) => {
                let _ = writeln!(out, "  multipliers {what}: {} free direction(s)", sol.family.len());
            }
            Err(e @ ConstraintError::NoSolution { .. }) => {
                let _ = writeln!(out, "  multipliers {what}: none at this point ({e})");
            }
            Err(e) => return Err(constraint_failure(e)),
        }
    }

    heading(&mut out, "surface split");
    match surface_decompose(&m, seed) {
        Ok(split) => {
            let _ = writeln!(out, "  Lambda = {}", split.lambda);
            let _ = writeln!(out, "  L_d = {}", split.l_d);
        }
        Err(e) => {
            let _ = writeln!(out, "  none: {e}");
        }
    }

    heading(&mut out, "Zermelo conditions");
    let zpts = m
        .sampler(seed)
        .sample(&m.configuration_symbols(2), points)
        .map_err(|e| validation(format!("sampling for the Zermelo check: {e}")))?;
    let z = zermelo_check(&m, &zpts, ZERMELO_TOL).map_err(model_failure)?;
    let _ = writeln!(
        out,
        "  covariant: {} (max |I1| {}, max |I2 - L| {}; tol {:e} relative to 1 + |L|, {} points, seed {seed})",
        z.covariant,
        sci(z.i1_residual),
        sci(z.i2_residual),
        z.tol,
        z.points
    );

    heading(&mut out, "Helmholtz conditions");
    if cs.symmetric {
        let reports = helmholtz_suite(&m, &d, points, seed, jobs).map_err(|e| validation(e))?;
        for r in &reports {
            let _ = writeln!(
                out,
                "  {}: {} (worst rel {}, {}, {} points, seed {seed})",
                r.name,
                r.verdict(),
                sci(r.max_rel),
                r.tolerance,
                r.samples
            );
        }
    } else {
        let _ = writeln!(out, "  skipped: affine symmetry violated");
    }
    Ok(out)
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| validation(format!("{what}: '{}' is not a finite number", v.trim())))
        })
        .collect()
}

fn gauges(m: &AffineModel, specs: &[String]) -> Result<Vec<GaugeCondition>, Failure> {
    let mut out = Vec::new();
    for spec in specs {
        if spec.contains('=') {
            out.push(GaugeCondition::parse(spec, m.table()).map_err(|e| Failure::new(Failure::MULTIPLIER, e.to_string()))?);
        } else {
            let g = m.gauges().get(spec.as_str()).ok_or_else(|| {
                let known: Vec<&str> = m.gauges().keys().map(String::as_str).collect();
                Failure::new(
                    Failure::MULTIPLIER,
                    format!(
                        "model '{}' declares no gauge '{spec}' (declared: {})",
                        m.name(),
                        if known.is_empty() { "none".into() } else { known.join(", ") }
                    ),
                )
            })?;
            out.extend(g.iter().cloned());
        }
    }
    Ok(out)
}

pub fn integrate(
    args: &ModelArgs,
    ic: &str,
    span: &str,
    gauge: &[String],
    min_norm: bool,
    rtol: f64,
    out_path: Option<&Path>,
) -> Result<String, Failure> {
    let m = load_model(args)?;
    let n = m.dimension();
    let blocks: Vec<&str> = ic.split(';').collect();
    if !(2..=3).contains(&blocks.len()) {
        return Err(validation("--ic expects 'x;xdot' or 'x;xdot;xddot'"));
    }
    let x = parse_list(blocks[0], "--ic x")?;
    let xdot = parse_list(blocks[1], "--ic xdot")?;
    let xddot = blocks.get(2).map(|b| parse_list(b, "--ic xddot")).transpose()?;
    for (what, v) in [("x", Some(&x)), ("xdot", Some(&xdot)), ("xddot", xddot.as_ref())] {
        if let Some(v) = v {
            if v.len() != n {
                return Err(validation(format!("--ic {what} has {} entries, expected {n}", v.len())));
            }
        }
    }
    let tau = parse_list(span, "--span")?;
    if tau.len() != 2 {
        return Err(validation("--span expects 'tau0,tau1'"));
    }
    if !(rtol > 0.0) {
        return Err(validation("--tol must be positive"));
    }

    let d = derive(&m);
    let cs = ConstraintSystem::build(&m, &d, args.seed).map_err(constraint_failure)?;
    let g = gauges(&m, gauge)?;
    let flow = Flow::new(&m, &d, &cs, g, min_norm);
    let s0 = project_initial(&m, &d, &x, &xdot, xddot.as_deref()).map_err(constraint_failure)?;
    let opts = IntegrateOptions {
        rtol,
        ..IntegrateOptions::default()
    };
    let traj = run_flow(&flow, &s0, tau[0], tau[1], &opts).map_err(dynamics_failure)?;

    let mut out = String::new();
    header(&mut out, &m, args.seed);
    heading(&mut out, "integration");
    let gauge_text: Vec<String> = flow.gauge.iter().map(|g| g.text.clone()).collect();
    let _ = writeln!(
        out,
        "  span: [{}, {}], rtol {:e}, atol {:e}",
        render::num(tau[0]),
        render::num(tau[1]),
        opts.rtol,
        opts.atol
    );
    let _ = writeln!(
        out,
        "  gauge: {}{}",
        if gauge_text.is_empty() { "none".into() } else { gauge_text.join("; ") },
        if min_norm { " (minimum-norm fallback)" } else { "" }
    );
    let _ = writeln!(out, "  samples: {} ({} rejected steps)", traj.len(), traj.rejected);
    let last = traj.last();
    let _ = writeln!(
        out,
        "  final: tau = {}, x = {}, xdot = {}",
        render::num(*traj.times.last().expect("trajectory has a sample")),
        render::list(&last.x),
        render::list(&last.xdot)
    );
    heading(&mut out, "conservation");
    let e1: Vec<f64> = traj.diagnostics.iter().map(|d| d.e1).collect();
    let e1_drift = e1.iter().map(|v| (v - e1[0]).abs()).fold(0.0, f64::max);
    let _ = writeln!(out, "  E1 drift: {}", sci(e1_drift));
    let _ = writeln!(out, "  E2 drift: {}", sci(traj.e2_drift()));
    let (c, s) = traj.max_constraint_drift();
    let _ = writeln!(out, "  constraint drift: C {}, S {}", sci(c), sci(s));
    let noether = monitor_noether(&traj, &NoetherSpec::time_translation(n), &m, &d).map_err(dynamics_failure)?;
    let _ = writeln!(out, "  Noether charge (tau translation) drift: {}", sci(noether.drift));
    let samples = if cs.symmetric {
        (0..traj.len()).map(|i| traj.binding(i, &m)).collect()
    } else {
        traj.samples_with_jerk(&m)
    };
    let el = euler_lagrange_residual(&m, &d, cs.symmetric, &samples).map_err(model_failure)?;
    let el_max = el.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let _ = writeln!(out, "  Euler-Lagrange residual: {}", sci(el_max));

    match out_path {
        Some(p) => {
            traj.write_csv(p).map_err(dynamics_failure)?;
            let _ = writeln!(out, "  csv: {} ({} rows)", p.display(), traj.len());
            Ok(out)
        }
        None => {
            eprint!("{out}");
            Ok(traj.to_csv())
        }
    }
}

pub fn decompose(args: &ModelArgs) -> Result<String, Failure> {
    let m = load_model(args)?;
    let names = names(&m);
    let mut out = String::new();
    header(&mut out, &m, args.seed);
    heading(&mut out, "surface split");
    match surface_decompose(&m, args.seed) {
        Ok(split) => {
            let _ = writeln!(out, "  Lambda = {}", split.lambda);
            match &split.separable {
                Some((g, h)) => {
                    let _ = writeln!(out, "  separable: g = {g}, h = {h}");
                }
                None => {
                    let _ = writeln!(out, "  separable: no");
                }
            }
            let _ = writeln!(out, "  L_s = dLambda/dtau = {}", split.l_s);
            let _ = writeln!(out, "  L_d = {}", split.l_d);
            render::components(&mut out, "pbold", &names, &split.p_bold);
            render::components(&mut out, "pfrak", &names, &split.p_frak);
            Ok(out)
        }
        Err(e @ ModelError::SymmetryViolated) => {
            let _ = writeln!(out, "  no surface term: {e}");
            Ok(out)
        }
        Err(e) => Err(model_failure(e)),
    }
}

fn report_block(out: &mut String, reports: &[IdentityReport]) {
    for r in reports {
        let _ = write!(out, "{r}");
    }
}

pub fn verify(args: &ModelArgs, points: usize, tol: f64, jobs: usize, perturb: Option<&str>) -> Result<String, Failure> {
    let m = load_model(args)?;
    let seed = args.seed;
    if points == 0 {
        return Err(validation("--points must be positive"));
    }
    if !(tol > 0.0) {
        return Err(validation("--tol must be positive"));
    }
    let mut d = derive(&m);
    let mut out = String::new();
    header(&mut out, &m, seed);
    if let Some(text) = perturb {
        let delta: Expr = parse(text, m.table()).map_err(|e| validation(format!("--perturb-v: {e}")))?;
        d = perturb_potential(&m, &d, &delta);
        let _ = writeln!(out, "perturbation: V + {delta} after derivation");
    }
    let symmetric = check_affine_symmetry(&m, seed).map_err(model_failure)?.symmetric;

    heading(&mut out, "Helmholtz conditions");
    let mut ok = true;
    if symmetric {
        let h = helmholtz_suite(&m, &d, points, seed, jobs).map_err(|e| validation(e))?;
        ok &= all_passed(&h);
        report_block(&mut out, &h);
    } else {
        let _ = writeln!(out, "skipped: affine symmetry violated");
    }

    heading(&mut out, "finite-difference cross-check");
    let policy = FdPolicy {
        rel_tol: tol,
        ..FdPolicy::default()
    };
    let fd = fd_crosscheck(&m, &d, points, seed, &policy, jobs).map_err(|e| validation(e))?;
    ok &= all_passed(&fd);
    report_block(&mut out, &fd);

    let _ = writeln!(out, "\nverdict: {}", if ok { "pass" } else { "FAIL" });
    if ok {
        Ok(out)
    } else {
        Err(Failure::new(Failure::VERIFY, out))
    }
}

pub fn catalog_list() -> String {
    let mut out = String::new();
    for name in catalog::names() {
        let src = catalog::source(name).expect("listed entry exists");
        let summary = src
            .lines()
            .find_map(|l| l.strip_prefix('#'))
            .map(str::trim)
            .unwrap_or("");
        let _ = writeln!(out, "{name:<10} {summary}");
    }
    out
}

pub fn catalog_show(name: &str) -> Result<String, Failure> {
    catalog::source(name).map(str::to_string).ok_or_else(|| unknown_catalog(name))
}
