use nalgebra::{DMatrix, DVector};

use super::linalg::{condition_number, lstsq, max_abs, null_space, rank};
use super::{eval_dvector, eval_matrix, poisson, ConstraintError, ConstraintSystem, PhaseState};
use crate::expr::{Binding, Expr};
use crate::model::{snap, AffineModel, DerivedTensors};

/// Relative tolerance for first-class bracket tests, scaled by `1 + max|Ω|`.
pub const BRACKET_TOL: f64 = 1e-8;
/// Second-class blocks above this condition number count as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureKind {
    /// `M` invertible: all `2N` constraints second class.
    Regular,
    /// Symmetric `∂K/∂ẋ` with zero modes of `M`.
    Singular,
    /// Invertible curl `N`: the primaries alone are second class.
    Chiral,
}

/// A constraint as a fixed linear combination `c·Φ` of `Φ = (C, 𝒞)` at
/// the classification point, with a closed form where one is known.
#[derive(Clone, Debug)]
pub struct ClassifiedConstraint {
    pub label: String,
    pub coefficients: DVector<f64>,
    pub symbolic: Option<Expr>,
}

#[derive(Clone, Debug)]
pub struct Classification {
    pub kind: StructureKind,
    pub point: PhaseState,
    pub first_class: Vec<ClassifiedConstraint>,
    pub second_class: Vec<ClassifiedConstraint>,
    pub zero_modes: Vec<DVector<f64>>,
    /// `φ_(n) = ξ_(n)·F` at the point.
    pub lagrangian_constraints: Vec<f64>,
    pub dof: usize,
    /// Largest first-class bracket residual seen.
    pub bracket_residual: f64,
    /// Rank of the second-class bracket block.
    pub second_class_rank: usize,
    pub rank_tol: f64,
}

impl Classification {
    /// Columns are the second-class coefficient vectors.
    pub fn second_class_matrix(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self.second_class.iter().map(|c| c.coefficients.clone()).collect();
        if cols.is_empty() {
            DMatrix::zeros(self.point.x.len() * 2, 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }
}

/// Null-space basis of `M(s)`.
pub fn zero_modes_at(tensors: &DerivedTensors, m: &AffineModel, s: &PhaseState, tol: f64) -> Result<Vec<DVector<f64>>, ConstraintError> {
    let b = s.admissible_binding(m)?;
    Ok(null_space(&eval_matrix(&tensors.mass, &b)?, tol))
}

/// `φ_(n) = ξ_(n)·F(s)`.
pub fn lagrangian_constraints_at(
    tensors: &DerivedTensors,
    m: &AffineModel,
    s: &PhaseState,
    zero_modes: &[DVector<f64>],
) -> Result<Vec<f64>, ConstraintError> {
    let b = s.admissible_binding(m)?;
    let f = eval_dvector(&tensors.force, &b)?;
    Ok(zero_modes.iter().map(|xi| xi.dot(&f)).collect())
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })
}

fn stack(top: &DVector<f64>, bottom: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(top.len() + bottom.len(), top.iter().chain(bottom.iter()).copied())
}

fn labelled(base: &str, k: usize, count: usize) -> String {
    if count == 1 {
        base.to_string()
    } else {
        format!("{base}_({})", k + 1)
    }
}

/// `c^μ (S_μ − formula_μ)` with the formula part simplified on its own so
/// cancellations like `ẋ·K ≡ 0` show up.
fn contract(c: &[Expr], symbols: &[Expr], formulas: &[Expr]) -> Expr {
    let sym = Expr::sum(c.iter().zip(symbols).map(|(a, s)| a * s).collect()).simplify();
    let form = snap(&Expr::sum(c.iter().zip(formulas).map(|(a, f)| a * f).collect()));
    (sym - form).simplify()
}

/// Complete `xi` to an orthonormal frame under `diag(signature)` and return
/// the normals. Null directions fall back to the Euclidean product.
fn normals(xi: &[DVector<f64>], signature: &[f64], n: usize) -> Vec<DVector<f64>> {
    let g = DMatrix::from_diagonal(&DVector::from_column_slice(signature));
    let dot = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::new();
    let candidates = xi.iter().cloned().chain((0..n).map(|i| unit(n, i)));
    for (idx, c) in candidates.enumerate() {
        let mut v = c;
        for e in &basis {
            let ee = dot(e, e);
            v -= e * (dot(e, &v) / ee);
        }
        let norm2 = dot(&v, &v).abs();
        if norm2 <= 1e-8 * v.norm_squared().max(1e-300) || norm2 < 1e-20 {
            continue;
        }
        v /= norm2.sqrt();
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        basis.push(v.clone());
        if idx >= xi.len() {
            out.push(v);
        }
        if basis.len() == n {
            break;
        }
    }
    if basis.len() < n {
        // Degenerate metric frame: use the Euclidean complement.
        let mut m = DMatrix::zeros(xi.len().max(1), n);
        for (k, x) in xi.iter().enumerate() {
            m.set_row(k, &x.transpose());
        }
        return null_space(&m, 1e-12);
    }
    out
}

/// Pointwise classification at an admissible state.
pub fn classify(
    cs: &ConstraintSystem,
    tensors: &DerivedTensors,
    m: &AffineModel,
    s: &PhaseState,
    rank_tol: f64,
) -> Result<Classification, ConstraintError> {
    let b = s.admissible_binding(m)?;
    let n = m.dimension();
    let t = m.table();
    let omega = eval_matrix(&cs.omega, &b)?;
    let scale = 1.0 + max_abs(&omega);
    let mut first_class = Vec::new();
    let mut second_class = Vec::new();
    let mut zero_modes = Vec::new();
    let mut bracket_residual: f64 = 0.0;

    let kind = if !cs.symmetric {
        let curl = omega.view((0, 0), (n, n)).into_owned();
        let r = rank(&curl, rank_tol);
        if r < n {
            return Err(ConstraintError::MixedRankCurl { rank: r, dimension: n });
        }
        for mu in 0..n {
            second_class.push(ClassifiedConstraint {
                label: format!("C_{}", t.coordinate_names()[mu]),
                coefficients: unit(2 * n, mu),
                symbolic: Some(cs.primary[mu].clone()),
            });
        }
        StructureKind::Chiral
    } else {
        let mass = eval_matrix(&tensors.mass, &b)?;
        zero_modes = null_space(&mass, rank_tol);
        if zero_modes.is_empty() {
            let labels = cs.labels(t);
            for (i, phi) in cs.all().into_iter().enumerate() {
                second_class.push(ClassifiedConstraint {
                    label: labels[i].clone(),
                    coefficients: unit(2 * n, i),
                    symbolic: Some(phi),
                });
            }
            StructureKind::Regular
        } else {
            let lower = omega.view((n, 0), (n, n)).into_owned();
            let curl_x = omega.view((n, n), (n, n)).into_owned();
            let k = zero_modes.len();
            let symbolic_velocity = cs.velocity_zero_mode && k == 1;
            let vel: Vec<Expr> = (0..n).map(|mu| Expr::sym(t.velocity(mu))).collect();
            let big_p: Vec<Expr> = (0..n).map(|mu| Expr::sym(t.higher_momentum(mu))).collect();
            let p: Vec<Expr> = (0..n).map(|mu| Expr::sym(t.momentum(mu))).collect();
            for (idx, xi) in zero_modes.iter().enumerate() {
                let c1 = stack(xi, &DVector::zeros(n));
                let lambda = lstsq(&lower, &(-(&curl_x * xi)), rank_tol);
                let c2 = stack(&lambda, xi);
                for (label, c) in [(labelled("f1", idx, k), c1), (labelled("f2", idx, k), c2)] {
                    let r = (&omega * &c).amax();
                    let tol = BRACKET_TOL * scale * (1.0 + c.amax());
                    bracket_residual = bracket_residual.max(r);
                    if r > tol {
                        return Err(ConstraintError::InconsistentClassification {
                            candidate: label,
                            residual: r,
                            tol,
                        });
                    }
                    let symbolic = symbolic_velocity.then(|| {
                        if label.starts_with("f1") {
                            contract(&vel, &big_p, &tensors.higher_momenta)
                        } else {
                            contract(&vel, &p, &tensors.momenta)
                        }
                    });
                    first_class.push(ClassifiedConstraint {
                        label,
                        coefficients: c,
                        symbolic,
                    });
                }
            }
            let sig = m.signature();
            let normal_vecs = normals(&zero_modes, sig, n);
            let count = normal_vecs.len();
            // Unnormalized normal G⁻¹εẋ in two dimensions.
            let n_un = (n == 2 && symbolic_velocity).then(|| {
                vec![
                    (Expr::real(1.0 / sig[0]) * &vel[1]).simplify(),
                    (Expr::real(-1.0 / sig[1]) * &vel[0]).simplify(),
                ]
            });
            for (j, nv) in normal_vecs.iter().enumerate() {
                second_class.push(ClassifiedConstraint {
                    label: labelled("s1", j, count),
                    coefficients: stack(nv, &DVector::zeros(n)),
                    symbolic: n_un.as_ref().map(|c| contract(c, &big_p, &tensors.higher_momenta)),
                });
            }
            for (j, nv) in normal_vecs.iter().enumerate() {
                second_class.push(ClassifiedConstraint {
                    label: labelled("s2", j, count),
                    coefficients: stack(&DVector::zeros(n), nv),
                    symbolic: n_un.as_ref().map(|c| contract(c, &p, &tensors.momenta)),
                });
            }
            StructureKind::Singular
        }
    };

    let lagrangian_constraints = if zero_modes.is_empty() {
        Vec::new()
    } else {
        let f = eval_dvector(&tensors.force, &b)?;
        zero_modes.iter().map(|xi| xi.dot(&f)).collect()
    };
    let removed = 2 * first_class.len() + second_class.len();
    let dof = (4 * n).saturating_sub(removed) / 2;
    let mut cls = Classification {
        kind,
        point: s.clone(),
        first_class,
        second_class,
        zero_modes,
        lagrangian_constraints,
        dof,
        bracket_residual,
        second_class_rank: 0,
        rank_tol,
    };
    let cm = cls.second_class_matrix();
    cls.second_class_rank = rank(&(cm.transpose() * &omega * &cm), rank_tol);
    Ok(cls)
}

/// Argument of a Dirac bracket: an expression, or a frozen combination `c·Φ`.
#[derive(Clone, Copy, Debug)]
pub enum Observable<'a> {
    Expr(&'a Expr),
    Combination(&'a DVector<f64>),
}

/// `{A, Φ_j}(s)` for every constraint.
fn bracket_with_constraints(obs: Observable<'_>, cs: &ConstraintSystem, omega: &DMatrix<f64>, m: &AffineModel, b: &Binding) -> Result<DVector<f64>, ConstraintError> {
    match obs {
        Observable::Expr(e) => {
            let v: Result<Vec<f64>, _> = cs.all().iter().map(|phi| poisson(e, phi, m.table()).evaluate(b)).collect();
            Ok(DVector::from_vec(v?))
        }
        Observable::Combination(c) => Ok(omega.transpose() * c),
    }
}

fn bracket(a: Observable<'_>, g: Observable<'_>, cs: &ConstraintSystem, omega: &DMatrix<f64>, m: &AffineModel, b: &Binding) -> Result<f64, ConstraintError> {
    match (a, g) {
        (Observable::Expr(f), Observable::Expr(g)) => Ok(poisson(f, g, m.table()).evaluate(b)?),
        (Observable::Combination(c), other) => Ok(-c.dot(&bracket_with_constraints(other, cs, omega, m, b)?)),
        (Observable::Expr(_), Observable::Combination(c)) => Ok(c.dot(&bracket_with_constraints(a, cs, omega, m, b)?)),
    }
}

/// Dirac bracket value and the condition number of the second-class block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiracValue {
    pub value: f64,
    pub condition: f64,
}

/// `{F,G}* = {F,G} − {F,χ_i} (Ω_χ⁻¹)_ij {χ_j,G}` over the second-class set.
pub fn dirac(
    f: Observable<'_>,
    g: Observable<'_>,
    cs: &ConstraintSystem,
    cls: &Classification,
    m: &AffineModel,
    s: &PhaseState,
) -> Result<DiracValue, ConstraintError> {
    let b = s.admissible_binding(m)?;
    let omega = eval_matrix(&cs.omega, &b)?;
    let cm = cls.second_class_matrix();
    let base = bracket(f, g, cs, &omega, m, &b)?;
    if cm.ncols() == 0 {
        return Ok(DiracValue { value: base, condition: 1.0 });
    }
    let block = cm.transpose() * &omega * &cm;
    let condition = condition_number(&block);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(ConstraintError::SingularOmega { condition });
    }
    let inv = block.try_inverse().ok_or(ConstraintError::SingularOmega { condition })?;
    // {F, χ_i} = c_i·{F, Φ}; {χ_j, G} = −c_j·{G, Φ} written via the same helper.
    let f_chi = cm.transpose() * bracket_with_constraints(f, cs, &omega, m, &b)?;
    let chi_g = -(cm.transpose() * bracket_with_constraints(g, cs, &omega, m, &b)?);
    Ok(DiracValue {
        value: base - (f_chi.transpose() * inv * chi_g)[(0, 0)],
        condition,
    })
}
