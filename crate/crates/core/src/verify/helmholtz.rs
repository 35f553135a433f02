use super::{par_map, sample_points, IdentityReport, VerifyError};
use crate::expr::{rational::is_identically_zero, Binding, Expr};
use crate::model::{snap, AffineModel, DerivedTensors, ModelError};

/// Relative tolerance for entries with a non-zero reference side.
pub const HELMHOLTZ_REL_TOL: f64 = 1e-8;
/// Absolute tolerance when the reference side is a symbolic zero.
pub const HELMHOLTZ_ABS_TOL: f64 = 1e-10;
/// Below this both sides count as an exact floating-point zero.
const EXACT_FLOOR: f64 = 1e-14;

struct Entry {
    indices: Vec<usize>,
    lhs: Expr,
    rhs: Expr,
    absolute: bool,
}

struct Identity {
    name: &'static str,
    required: bool,
    entries: Vec<Entry>,
    note: Option<String>,
}

impl Identity {
    fn new(name: &'static str, required: bool) -> Identity {
        Identity {
            name,
            required,
            entries: Vec::new(),
            note: None,
        }
    }

    fn push(&mut self, indices: Vec<usize>, lhs: Expr, rhs: Expr) {
        let (lhs, rhs) = (snap(&lhs), snap(&rhs));
        let absolute = rhs.is_zero() || is_identically_zero(&rhs);
        self.entries.push(Entry {
            indices,
            lhs,
            rhs,
            absolute,
        });
    }

    /// `(abs, rel, ok)` for every entry at `b`.
    fn residuals(&self, b: &Binding) -> Result<Vec<(f64, f64, bool)>, VerifyError> {
        self.entries
            .iter()
            .map(|e| {
                let l = e.lhs.evaluate(b)?;
                let rv = e.rhs.evaluate(b)?;
                let abs = (l - rv).abs();
                let scale = l.abs().max(rv.abs());
                let rel = if scale > 0.0 { abs / scale } else { 0.0 };
                let ok = if e.absolute {
                    abs <= HELMHOLTZ_ABS_TOL
                } else {
                    abs <= HELMHOLTZ_REL_TOL * scale || abs <= EXACT_FLOOR
                };
                Ok((abs, rel, ok))
            })
            .collect()
    }

    fn report(&self, per_point: &[Vec<(f64, f64, bool)>], seed: u64) -> IdentityReport {
        let tol = if self.entries.iter().all(|e| e.absolute) {
            format!("abs {HELMHOLTZ_ABS_TOL:e}")
        } else if self.entries.iter().any(|e| e.absolute) {
            format!("rel {HELMHOLTZ_REL_TOL:e}, abs {HELMHOLTZ_ABS_TOL:e} on symbolic zeros")
        } else {
            format!("rel {HELMHOLTZ_REL_TOL:e}")
        };
        let mut r = IdentityReport::new(self.name, self.required, tol, seed);
        r.samples = per_point.len();
        r.note = self.note.clone();
        for (i, row) in per_point.iter().enumerate() {
            for (e, &(abs, rel, ok)) in self.entries.iter().zip(row) {
                r.record(&e.indices, i, abs, rel, ok);
            }
        }
        r
    }
}

fn model_not_symmetric() -> VerifyError {
    VerifyError::Model(ModelError::Validation {
        field: "K".into(),
        message: "the Helmholtz conditions apply only when dK/dxdot is symmetric".into(),
    })
}

/// Check the Helmholtz integrability conditions of a symmetric model at
/// `points` sampled configurations, spread over `jobs` threads.
///
/// The six required identities are the symmetry of `M` and of `∂M/∂ẋ`, the
/// curl condition `∂X_μρ/∂ẋ^ν = ∂_ρM_μν − ∂_μM_ρν`, the mass-transport
/// condition, the antisymmetric force condition and the Bianchi identity
/// of `X`. The curl condition with `ρ` and `ν` swapped on the left and the
/// force condition with a symmetrised right-hand side are reported for
/// reference but do not hold in general.
pub fn helmholtz_suite(
    m: &AffineModel,
    tensors: &DerivedTensors,
    points: usize,
    seed: u64,
    jobs: usize,
) -> Result<Vec<IdentityReport>, VerifyError> {
    let n = m.dimension();
    let t = m.table();
    if !tensors.n_curl.iter().flatten().all(|e| snap(e).is_zero()) {
        return Err(model_not_symmetric());
    }
    let x = |mu: usize| t.coordinate(mu);
    let xd = |mu: usize| t.velocity(mu);
    let mm = &tensors.mass;
    let xc = &tensors.x_curl;
    let f = &tensors.force;
    let transport = |e: &Expr| Expr::sum((0..n).map(|a| Expr::sym(xd(a)) * e.diff(x(a))).collect());

    let mut ids = Vec::new();

    let mut id = Identity::new("M symmetric", true);
    for mu in 0..n {
        for nu in mu + 1..n {
            id.push(vec![mu, nu], mm[mu][nu].clone(), mm[nu][mu].clone());
        }
    }
    ids.push(id);

    let mut id = Identity::new("dM/dxdot symmetric", true);
    for mu in 0..n {
        for nu in 0..n {
            for rho in 0..n {
                if nu != rho {
                    id.push(vec![mu, nu, rho], mm[mu][nu].diff(xd(rho)), mm[rho][mu].diff(xd(nu)));
                }
            }
        }
    }
    ids.push(id);

    let mut id = Identity::new("h-1 curl", true);
    let mut printed = Identity::new("h-1 curl (indices nu, rho swapped on the left)", false);
    for mu in 0..n {
        for rho in 0..n {
            if mu == rho {
                continue;
            }
            for nu in 0..n {
                let rhs = mm[mu][nu].diff(x(rho)) - mm[rho][nu].diff(x(mu));
                id.push(vec![mu, nu, rho], xc[mu][rho].diff(xd(nu)), rhs.clone());
                printed.push(vec![mu, nu, rho], xc[mu][nu].diff(xd(rho)), rhs);
            }
        }
    }
    ids.push(id);

    let mut id = Identity::new("h-2 mass transport", true);
    for mu in 0..n {
        for nu in mu..n {
            id.push(
                vec![mu, nu],
                Expr::int(2) * transport(&mm[mu][nu]),
                -(f[mu].diff(xd(nu)) + f[nu].diff(xd(mu))),
            );
        }
    }
    ids.push(id);

    let mut id = Identity::new("h-3 force curl", true);
    let mut sym = Identity::new("h-3 force curl (symmetrised right-hand side)", false);
    for mu in 0..n {
        for nu in 0..n {
            let lhs = transport(&xc[mu][nu]);
            if mu < nu {
                id.push(vec![mu, nu], lhs.clone(), f[nu].diff(x(mu)) - f[mu].diff(x(nu)));
            }
            if mu <= nu {
                sym.push(vec![mu, nu], lhs, f[nu].diff(x(mu)) + f[mu].diff(x(nu)));
            }
        }
    }
    ids.push(id);

    let mut id = Identity::new("Bianchi identity of X", true);
    for mu in 0..n {
        for nu in mu + 1..n {
            for rho in nu + 1..n {
                let cyc = xc[mu][nu].diff(x(rho)) + xc[nu][rho].diff(x(mu)) + xc[rho][mu].diff(x(nu));
                id.push(vec![mu, nu, rho], cyc, Expr::zero());
            }
        }
    }
    if n < 3 {
        id.note = Some("no index triples for N < 3; holds vacuously".into());
    }
    ids.push(id);
    ids.push(printed);
    ids.push(sym);

    let pts = sample_points(m, points, seed, |b| {
        ids.iter()
            .flat_map(|id| &id.entries)
            .all(|e| e.lhs.evaluate(b).is_ok_and(f64::is_finite) && e.rhs.evaluate(b).is_ok_and(f64::is_finite))
    })?;
    let rows = par_map(&pts, jobs, |b| ids.iter().map(|id| id.residuals(b)).collect::<Result<Vec<_>, _>>());
    let rows: Vec<Vec<Vec<(f64, f64, bool)>>> = rows.into_iter().collect::<Result<_, _>>()?;
    Ok(ids
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let per_point: Vec<_> = rows.iter().map(|r| r[k].clone()).collect();
            id.report(&per_point, seed)
        })
        .collect())
}

/// Tensors of `m` with the potential shifted by `delta` in the momenta,
/// the force and `E2` only; the mass matrix and curls keep their original
/// values. Used as a negative control for the Helmholtz suite.
pub fn perturb_potential(m: &AffineModel, tensors: &DerivedTensors, delta: &Expr) -> DerivedTensors {
    let n = m.dimension();
    let t = m.table();
    let xd = |mu: usize| Expr::sym(t.velocity(mu));
    let mut out = tensors.clone();
    for mu in 0..n {
        let dp = delta.diff(t.velocity(mu));
        let mut terms: Vec<Expr> = (0..n).map(|nu| dp.diff(t.coordinate(nu)) * xd(nu)).collect();
        terms.push(-delta.diff(t.coordinate(mu)));
        out.force[mu] = snap(&(&tensors.force[mu] + Expr::sum(terms)));
        out.momenta[mu] = snap(&(&tensors.momenta[mu] + dp));
    }
    let mut e2 = vec![tensors.e2.clone(), -delta.clone()];
    for mu in 0..n {
        e2.push(delta.diff(t.velocity(mu)) * xd(mu));
    }
    out.e2 = snap(&Expr::sum(e2));
    out
}
