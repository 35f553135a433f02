use nalgebra::{DMatrix, DVector};

use super::{par_map, sample_points, IdentityReport, VerifyError};
use crate::expr::{Binding, Expr, Symbol};
use crate::model::{AffineModel, DerivedTensors};

/// Step sizes and acceptance thresholds of the finite-difference check.
///
/// Steps scale as `h·(1 + |z|)` per coordinate. First derivatives use
/// `first_step`, second derivatives the larger `second_step` so that the
/// `ε/h²` roundoff stays near `1e-8`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdPolicy {
    pub first_step: f64,
    pub second_step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for FdPolicy {
    fn default() -> Self {
        FdPolicy {
            first_step: 1e-5,
            second_step: 1e-4,
            rel_tol: 1e-5,
            abs_tol: 1e-10,
        }
    }
}

/// One finite-difference estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FdValue {
    pub value: f64,
    /// `Σ|term|` over the terms that were added to form `value`.
    pub magnitude: f64,
    /// Bound on the floating-point roundoff carried by the stencils.
    pub roundoff: f64,
}

/// Finite-difference estimates of the derived tensors at one point.
#[derive(Clone, Debug)]
pub struct FdTensors {
    pub higher_momenta: Vec<FdValue>,
    pub momenta: Vec<FdValue>,
    pub mass: Vec<Vec<FdValue>>,
    pub force: Vec<FdValue>,
    pub n_curl: Vec<Vec<FdValue>>,
    pub x_curl: Vec<Vec<FdValue>>,
    pub theta: Vec<Vec<FdValue>>,
}

impl FdTensors {
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        let n = self.mass.len();
        DMatrix::from_fn(n, n, |i, j| self.mass[i][j].value)
    }

    pub fn force_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.force.len(), self.force.iter().map(|f| f.value))
    }

    /// Richardson combination `(4·fine − coarse)/3` of two estimates taken
    /// with steps `h` and `h/2`.
    fn richardson(coarse: &FdTensors, fine: &FdTensors) -> FdTensors {
        let v = |a: &[FdValue], b: &[FdValue]| -> Vec<FdValue> {
            a.iter()
                .zip(b)
                .map(|(c, f)| FdValue {
                    value: (4.0 * f.value - c.value) / 3.0,
                    magnitude: f.magnitude.max(c.magnitude),
                    roundoff: (4.0 * f.roundoff + c.roundoff) / 3.0,
                })
                .collect()
        };
        let mtx = |a: &[Vec<FdValue>], b: &[Vec<FdValue>]| a.iter().zip(b).map(|(c, f)| v(c, f)).collect();
        FdTensors {
            higher_momenta: v(&coarse.higher_momenta, &fine.higher_momenta),
            momenta: v(&coarse.momenta, &fine.momenta),
            mass: mtx(&coarse.mass, &fine.mass),
            force: v(&coarse.force, &fine.force),
            n_curl: mtx(&coarse.n_curl, &fine.n_curl),
            x_curl: mtx(&coarse.x_curl, &fine.x_curl),
            theta: mtx(&coarse.theta, &fine.theta),
        }
    }
}

/// Stencil result with its roundoff bound.
#[derive(Clone, Copy)]
struct Est(f64, f64);

impl std::ops::Mul<f64> for Est {
    type Output = Est;
    fn mul(self, k: f64) -> Est {
        Est(self.0 * k, self.1 * k.abs())
    }
}

/// Roundoff in a stencil `Σ w_k g_k / d`: a few ulps of each sample.
fn roundoff(weighted: f64, denominator: f64) -> f64 {
    8.0 * f64::EPSILON * weighted / denominator
}

/// Running sum tracking `Σ|term|` and accumulated roundoff.
#[derive(Clone, Copy, Default)]
struct Acc(FdValue);

impl Acc {
    fn add(&mut self, e: Est) {
        self.0.value += e.0;
        self.0.magnitude += e.0.abs();
        self.0.roundoff += e.1;
    }
    fn sub(&mut self, e: Est) {
        self.add(e * -1.0);
    }
    fn done(self) -> FdValue {
        self.0
    }
}

/// Evaluates `L` numerically with accelerations pinned, so that `K` and
/// `V` are recovered from the Lagrangian alone.
struct Probe<'a> {
    model: &'a AffineModel,
    lagrangian: Expr,
    vars: Vec<Symbol>,
    acc: Vec<Symbol>,
    base: Binding,
    n: usize,
}

impl<'a> Probe<'a> {
    fn new(model: &'a AffineModel) -> Probe<'a> {
        let n = model.dimension();
        let t = model.table();
        Probe {
            model,
            lagrangian: model.lagrangian(),
            vars: model.configuration_symbols(1),
            acc: (0..n).map(|mu| t.acceleration(mu).clone()).collect(),
            base: model.parameter_binding(),
            n,
        }
    }

    fn lag(&self, z: &[f64], unit: Option<usize>) -> Option<f64> {
        let mut b = self.base.clone();
        for (s, v) in self.vars.iter().zip(z) {
            b.set(s, *v);
        }
        if !self.model.admissible(&b) {
            return None;
        }
        for (mu, s) in self.acc.iter().enumerate() {
            b.set(s, if unit == Some(mu) { 1.0 } else { 0.0 });
        }
        self.lagrangian.evaluate(&b).ok().filter(|v| v.is_finite())
    }

    /// `V` with the magnitude that bounds its evaluation error.
    fn v(&self, z: &[f64]) -> Option<(f64, f64)> {
        let v = self.lag(z, None)?;
        Some((v, v.abs()))
    }

    /// `K_μ`, recovered as a difference of two Lagrangian values.
    fn k(&self, mu: usize, z: &[f64]) -> Option<(f64, f64)> {
        let (a, b) = (self.lag(z, Some(mu))?, self.lag(z, None)?);
        Some((a - b, a.abs() + b.abs()))
    }

    fn step(z: &[f64], i: usize, h: f64) -> f64 {
        h * (1.0 + z[i].abs())
    }

    fn d1(&self, g: &dyn Fn(&[f64]) -> Option<(f64, f64)>, z: &[f64], i: usize, h: f64) -> Option<Est> {
        let hi = Self::step(z, i, h);
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[i] += hi;
        zm[i] -= hi;
        let (a, b) = (g(&zp)?, g(&zm)?);
        Some(Est((a.0 - b.0) / (2.0 * hi), roundoff(a.1 + b.1, 2.0 * hi)))
    }

    fn d2(&self, g: &dyn Fn(&[f64]) -> Option<(f64, f64)>, z: &[f64], i: usize, j: usize, h: f64) -> Option<Est> {
        let hi = Self::step(z, i, h);
        if i == j {
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[i] += hi;
            zm[i] -= hi;
            let (a, c, b) = (g(&zp)?, g(z)?, g(&zm)?);
            let d = hi * hi;
            return Some(Est((a.0 - 2.0 * c.0 + b.0) / d, roundoff(a.1 + 2.0 * c.1 + b.1, d)));
        }
        let hj = Self::step(z, j, h);
        let at = |si: f64, sj: f64| {
            let mut w = z.to_vec();
            w[i] += si * hi;
            w[j] += sj * hj;
            g(&w)
        };
        let (pp, pm, mp, mm) = (at(1.0, 1.0)?, at(1.0, -1.0)?, at(-1.0, 1.0)?, at(-1.0, -1.0)?);
        let d = 4.0 * hi * hj;
        Some(Est(
            (pp.0 - pm.0 - mp.0 + mm.0) / d,
            roundoff(pp.1 + pm.1 + mp.1 + mm.1, d),
        ))
    }

    /// `∂p_ν/∂x^μ`.
    fn dp_dx(&self, nu: usize, mu: usize, z: &[f64], h: f64) -> Option<Acc> {
        let n = self.n;
        let v = |w: &[f64]| self.v(w);
        let kn = |w: &[f64]| self.k(nu, w);
        let mut a = Acc::default();
        a.add(self.d2(&v, z, n + nu, mu, h)?);
        for al in 0..n {
            a.sub(self.d2(&kn, z, al, mu, h)? * z[n + al]);
        }
        Some(a)
    }

    fn tensors(&self, z: &[f64], p: &FdPolicy, scale: f64) -> Option<FdTensors> {
        let n = self.n;
        let (h1, h2) = (p.first_step * scale, p.second_step * scale);
        let v = |w: &[f64]| self.v(w);
        let kf = |mu: usize| move |w: &[f64]| self.k(mu, w);

        let mut higher = Vec::with_capacity(n);
        let mut momenta = Vec::with_capacity(n);
        for mu in 0..n {
            let (k, scale) = self.k(mu, z)?;
            higher.push(FdValue {
                value: k,
                magnitude: k.abs(),
                roundoff: roundoff(scale, 1.0),
            });
            let mut a = Acc::default();
            a.add(self.d1(&v, z, n + mu, h1)?);
            for nu in 0..n {
                a.sub(self.d1(&kf(mu), z, nu, h1)? * z[n + nu]);
            }
            momenta.push(a.done());
        }

        let mut mass = vec![vec![FdValue::default(); n]; n];
        let mut n_curl = vec![vec![FdValue::default(); n]; n];
        let mut theta = vec![vec![FdValue::default(); n]; n];
        let mut x_curl = vec![vec![FdValue::default(); n]; n];
        for mu in 0..n {
            for nu in 0..n {
                // M_μν = ∂K_ν/∂x^μ − ∂p_μ/∂ẋ^ν
                let mut a = Acc::default();
                a.add(self.d1(&kf(nu), z, mu, h1)?);
                a.sub(self.d2(&v, z, n + mu, n + nu, h2)?);
                a.add(self.d1(&kf(mu), z, nu, h1)?);
                for al in 0..n {
                    a.add(self.d2(&kf(mu), z, al, n + nu, h2)? * z[n + al]);
                }
                mass[mu][nu] = a.done();

                let mut a = Acc::default();
                a.add(self.d1(&kf(nu), z, n + mu, h1)?);
                a.sub(self.d1(&kf(mu), z, n + nu, h1)?);
                n_curl[mu][nu] = a.done();

                let mut a = Acc::default();
                a.add(self.d1(&kf(mu), z, nu, h1)?);
                a.sub(self.d1(&kf(nu), z, mu, h1)?);
                theta[mu][nu] = a.done();

                let (pnm, pmn) = (self.dp_dx(nu, mu, z, h2)?.done(), self.dp_dx(mu, nu, z, h2)?.done());
                x_curl[mu][nu] = FdValue {
                    value: pnm.value - pmn.value,
                    magnitude: pnm.magnitude + pmn.magnitude,
                    roundoff: pnm.roundoff + pmn.roundoff,
                };
            }
        }

        let mut force = Vec::with_capacity(n);
        for mu in 0..n {
            let mut a = Acc::default();
            for nu in 0..n {
                let d = self.dp_dx(mu, nu, z, h2)?.done();
                let w = z[n + nu];
                a.0.value += d.value * w;
                a.0.magnitude += d.magnitude * w.abs();
                a.0.roundoff += d.roundoff * w.abs();
            }
            a.sub(self.d1(&v, z, mu, h1)?);
            force.push(a.done());
        }

        Some(FdTensors {
            higher_momenta: higher,
            momenta,
            mass,
            force,
            n_curl,
            x_curl,
            theta,
        })
    }

    fn point(&self, b: &Binding) -> Option<Vec<f64>> {
        self.vars.iter().map(|s| b.get(s)).collect()
    }
}

/// Finite-difference estimates of the derived tensors at `point`, computed
/// from numerical evaluations of the Lagrangian only. `None` when some
/// perturbed evaluation leaves the domain.
pub fn fd_tensors_at(m: &AffineModel, point: &Binding, policy: &FdPolicy) -> Option<FdTensors> {
    let probe = Probe::new(m);
    probe.tensors(&probe.point(point)?, policy, 1.0)
}

/// Richardson pairs `(h·2^-k, h·2^-(k+1))` tried for an entry that misses.
const RICHARDSON_LEVELS: usize = 4;

struct Comparison<'a> {
    name: &'static str,
    symbolic: Vec<(Vec<usize>, &'a Expr)>,
    pick: fn(&FdTensors, &[usize]) -> FdValue,
}

fn vector<'a>(v: &'a [Expr]) -> Vec<(Vec<usize>, &'a Expr)> {
    v.iter().enumerate().map(|(i, e)| (vec![i], e)).collect()
}

fn matrix<'a>(m: &'a [Vec<Expr>]) -> Vec<(Vec<usize>, &'a Expr)> {
    m.iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, e)| (vec![i, j], e)))
        .collect()
}

/// Compare the symbolic tensors against finite differences of `L` at
/// `points` admissible points, spread over `jobs` threads.
///
/// Points where a perturbed evaluation fails (a guard or the domain of
/// some function is crossed within the stencil) are skipped and counted;
/// sampling continues until enough usable points are found. An entry
/// passes when `|Δ| ≤ rel_tol·max(|symbolic|, Σ|terms|) + roundoff` or
/// `|Δ| ≤ abs_tol`, where `roundoff` bounds the cancellation error of the
/// stencils. A plain central difference that misses is retried with
/// Richardson extrapolations over successively halved step pairs.
pub fn fd_crosscheck(
    m: &AffineModel,
    tensors: &DerivedTensors,
    points: usize,
    seed: u64,
    policy: &FdPolicy,
    jobs: usize,
) -> Result<Vec<IdentityReport>, VerifyError> {
    let probe = Probe::new(m);
    let comparisons = [
        Comparison {
            name: "P (higher momenta)",
            symbolic: vector(&tensors.higher_momenta),
            pick: |t, i| t.higher_momenta[i[0]],
        },
        Comparison {
            name: "p (momenta)",
            symbolic: vector(&tensors.momenta),
            pick: |t, i| t.momenta[i[0]],
        },
        Comparison {
            name: "M (mass matrix)",
            symbolic: matrix(&tensors.mass),
            pick: |t, i| t.mass[i[0]][i[1]],
        },
        Comparison {
            name: "F (force)",
            symbolic: vector(&tensors.force),
            pick: |t, i| t.force[i[0]],
        },
        Comparison {
            name: "N (velocity curl of K)",
            symbolic: matrix(&tensors.n_curl),
            pick: |t, i| t.n_curl[i[0]][i[1]],
        },
        Comparison {
            name: "X (curl of p)",
            symbolic: matrix(&tensors.x_curl),
            pick: |t, i| t.x_curl[i[0]][i[1]],
        },
        Comparison {
            name: "Theta (curl of P)",
            symbolic: matrix(&tensors.theta),
            pick: |t, i| t.theta[i[0]][i[1]],
        },
    ];

    let mut skipped = 0usize;
    let pts = sample_points(m, points, seed, |b| {
        let symbolic_ok = comparisons
            .iter()
            .flat_map(|c| &c.symbolic)
            .all(|(_, e)| e.evaluate(b).is_ok_and(f64::is_finite));
        let stencil_ok = probe
            .point(b)
            .is_some_and(|z| probe.tensors(&z, policy, 1.0).is_some() && probe.tensors(&z, policy, 0.5).is_some());
        if symbolic_ok && !stencil_ok {
            skipped += 1;
        }
        symbolic_ok && stencil_ok
    })?;

    let tol = format!(
        "rel {:e} of max(|value|, sum of term magnitudes) plus stencil roundoff, or abs {:e}",
        policy.rel_tol, policy.abs_tol
    );
    let mut reports: Vec<IdentityReport> = comparisons
        .iter()
        .map(|c| {
            let mut r = IdentityReport::new(c.name, true, tol.clone(), seed);
            r.samples = pts.len();
            r.skipped = skipped;
            r
        })
        .collect();
    let mut extrapolated = vec![0usize; comparisons.len()];

    // per point: (comparison, entry, abs, rel, ok, extrapolated)
    let rows = par_map(&pts, jobs, |b| -> Result<Vec<(usize, usize, f64, f64, bool, bool)>, VerifyError> {
        let z = probe.point(b).expect("sampled point binds every variable");
        // steps h·2^-k, filled lazily; levels 0 and 1 are checked at sampling
        let mut ladder: Vec<Option<FdTensors>> = vec![probe.tensors(&z, policy, 1.0)];
        let mut extrapolations: Vec<Option<FdTensors>> = Vec::new();
        let mut out = Vec::new();
        for (ci, c) in comparisons.iter().enumerate() {
            for (ei, (idx, e)) in c.symbolic.iter().enumerate() {
                let s = e.evaluate(b)?;
                let judge = |fv: FdValue| {
                    let d = (fv.value - s).abs();
                    let scale = s.abs().max(fv.magnitude);
                    let rel = if scale > 0.0 { d / scale } else { 0.0 };
                    (d, rel, d <= policy.rel_tol * scale + fv.roundoff || d <= policy.abs_tol)
                };
                let coarse = ladder[0].as_ref().expect("checked at sampling");
                let (mut d, mut rel, mut ok) = judge((c.pick)(coarse, idx));
                let mut level = 0;
                while !ok && level < RICHARDSON_LEVELS {
                    while ladder.len() < level + 2 {
                        ladder.push(probe.tensors(&z, policy, 0.5f64.powi(ladder.len() as i32)));
                    }
                    if extrapolations.len() <= level {
                        let r = match (&ladder[level], &ladder[level + 1]) {
                            (Some(c), Some(f)) => Some(FdTensors::richardson(c, f)),
                            _ => None,
                        };
                        extrapolations.push(r);
                    }
                    let Some(r) = &extrapolations[level] else { break };
                    (d, rel, ok) = judge((c.pick)(r, idx));
                    level += 1;
                }
                out.push((ci, ei, d, rel, ok, level > 0));
            }
        }
        Ok(out)
    });
    for (pi, row) in rows.into_iter().enumerate() {
        for (ci, ei, d, rel, ok, extra) in row? {
            extrapolated[ci] += usize::from(extra);
            reports[ci].record(&comparisons[ci].symbolic[ei].0, pi, d, rel, ok);
        }
    }
    for (r, k) in reports.iter_mut().zip(extrapolated) {
        if k > 0 {
            r.note = Some(format!("{k} entr{} needed Richardson extrapolation", if k == 1 { "y" } else { "ies" }));
        }
    }
    Ok(reports)
}
