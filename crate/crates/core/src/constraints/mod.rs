//! Ostrogradski phase space `Γ = {x, p; ẋ, P}`, the constraint chain, the
//! generalized Poisson bracket and pointwise classification.

mod classify;
pub mod linalg;
mod multiplier;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::expr::rational::is_identically_zero;
use crate::expr::{equal_probabilistic, Binding, Expr, ExprError, Sampler, SymbolTable, DEFAULT_TOL, DEFAULT_TRIALS};
use crate::model::{check_affine_symmetry, snap, AffineModel, DerivedTensors, ModelError};

pub use classify::{
    classify, dirac, lagrangian_constraints_at, zero_modes_at, Classification, ClassifiedConstraint, DiracValue, Observable,
    StructureKind, BRACKET_TOL, MAX_CONDITION,
};
pub use multiplier::{multiplier_solve, MultiplierSolution};

/// Null-space threshold relative to the largest singular value.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("state violates guard '{guard}'")]
    GuardViolation { guard: String },
    #[error("state has {found} entries in {field}, expected {expected}")]
    Shape { field: &'static str, found: usize, expected: usize },
    #[error("state entry {field}[{index}] is not finite")]
    NonFinite { field: &'static str, index: usize },
    #[error("{{C_{component}, H0}} does not reproduce -S_{component}")]
    HamiltonianConsistency { component: usize },
    #[error("inconsistent classification: {candidate} has bracket residual {residual:.3e} > {tol:.1e}")]
    InconsistentClassification { candidate: String, residual: f64, tol: f64 },
    #[error("curl N has rank {rank} of {dimension}; mixed chiral/covariant structure is not supported")]
    MixedRankCurl { rank: usize, dimension: usize },
    #[error("second-class bracket matrix is singular (condition number {condition:.3e})")]
    SingularOmega { condition: f64 },
    #[error("multiplier equation has no solution: residual {residual:.3e} > {tol:.1e}")]
    NoSolution { residual: f64, tol: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] ExprError),
}

/// A point of the Ostrogradski phase space.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState {
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    pub p: Vec<f64>,
    pub big_p: Vec<f64>,
}

impl PhaseState {
    pub fn new(x: Vec<f64>, xdot: Vec<f64>, p: Vec<f64>, big_p: Vec<f64>) -> PhaseState {
        PhaseState { x, xdot, p, big_p }
    }

    pub fn validate(&self, n: usize) -> Result<(), ConstraintError> {
        for (field, v) in [("x", &self.x), ("xdot", &self.xdot), ("p", &self.p), ("P", &self.big_p)] {
            if v.len() != n {
                return Err(ConstraintError::Shape {
                    field,
                    found: v.len(),
                    expected: n,
                });
            }
            if let Some(index) = v.iter().position(|e| !e.is_finite()) {
                return Err(ConstraintError::NonFinite { field, index });
            }
        }
        Ok(())
    }

    /// Phase symbols bound to this state, plus the model's parameters.
    pub fn binding(&self, m: &AffineModel) -> Binding {
        let t = m.table();
        let mut b = m.parameter_binding();
        for mu in 0..m.dimension() {
            b.set(t.coordinate(mu), self.x[mu]);
            b.set(t.velocity(mu), self.xdot[mu]);
            b.set(t.momentum(mu), self.p[mu]);
            b.set(t.higher_momentum(mu), self.big_p[mu]);
        }
        b
    }

    /// Validated binding; fails on shape, non-finite entries or guards.
    pub fn admissible_binding(&self, m: &AffineModel) -> Result<Binding, ConstraintError> {
        self.validate(m.dimension())?;
        let b = self.binding(m);
        if let Some(g) = m.guards().iter().find(|g| !g.holds(&b)) {
            return Err(ConstraintError::GuardViolation { guard: g.text().to_string() });
        }
        Ok(b)
    }

    /// State on the full constraint surface: `P = K`, `p` from its formula.
    pub fn on_surface(m: &AffineModel, tensors: &DerivedTensors, x: &[f64], xdot: &[f64]) -> Result<PhaseState, ConstraintError> {
        let n = m.dimension();
        let t = m.table();
        let mut b = m.parameter_binding();
        for mu in 0..n {
            b.set(t.coordinate(mu), x[mu]);
            b.set(t.velocity(mu), xdot[mu]);
        }
        let p = eval_vec(&tensors.momenta, &b)?;
        let big_p = eval_vec(&tensors.higher_momenta, &b)?;
        Ok(PhaseState::new(x.to_vec(), xdot.to_vec(), p, big_p))
    }
}

pub(crate) fn eval_vec(es: &[Expr], b: &Binding) -> Result<Vec<f64>, ExprError> {
    es.iter().map(|e| e.evaluate(b)).collect()
}

pub(crate) fn eval_matrix(es: &[Vec<Expr>], b: &Binding) -> Result<DMatrix<f64>, ExprError> {
    let r = es.len();
    let c = es.first().map_or(0, Vec::len);
    let mut out = DMatrix::zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            out[(i, j)] = es[i][j].evaluate(b)?;
        }
    }
    Ok(out)
}

pub(crate) fn eval_dvector(es: &[Expr], b: &Binding) -> Result<DVector<f64>, ExprError> {
    Ok(DVector::from_vec(eval_vec(es, b)?))
}

/// `{F,G} = ∂F/∂x^μ ∂G/∂p_μ + ∂F/∂ẋ^μ ∂G/∂P_μ − (F↔G)`.
pub fn poisson(f: &Expr, g: &Expr, table: &SymbolTable) -> Expr {
    let mut terms = Vec::with_capacity(4 * table.dimension());
    for mu in 0..table.dimension() {
        let (x, xd, p, pp) = (table.coordinate(mu), table.velocity(mu), table.momentum(mu), table.higher_momentum(mu));
        terms.push(f.diff(x) * g.diff(p));
        terms.push(f.diff(xd) * g.diff(pp));
        terms.push(-(g.diff(x) * f.diff(p)));
        terms.push(-(g.diff(xd) * f.diff(pp)));
    }
    Expr::sum(terms).simplify()
}

/// Whether `e` vanishes: exact test first, sampling as fallback.
pub(crate) fn vanishes(e: &Expr, sampler: &mut Sampler) -> Result<bool, ExprError> {
    if e.is_zero() || is_identically_zero(e) {
        return Ok(true);
    }
    equal_probabilistic(e, &Expr::zero(), sampler, DEFAULT_TRIALS, DEFAULT_TOL)
}

/// Symbolic constraint data of a model.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    /// `C_μ = P_μ − K_μ`.
    pub primary: Vec<Expr>,
    /// `𝒞_μ = p_μ − ∂V/∂ẋ^μ + (∂K_μ/∂x^ν) ẋ^ν`.
    pub secondary: Vec<Expr>,
    /// `Ω_ij = {Φ_i, Φ_j}` over `Φ = (C, 𝒞)`.
    pub omega: Vec<Vec<Expr>>,
    /// `∂K_μ/∂ẋ^ν` symmetric (the covariant branch).
    pub symmetric: bool,
    /// `M_μν ẋ^ν ≡ 0`, so the velocity is a zero mode everywhere.
    pub velocity_zero_mode: bool,
    pub seed: u64,
}

impl ConstraintSystem {
    pub fn dimension(&self) -> usize {
        self.primary.len()
    }

    /// `Φ = (C_0..C_{N−1}, 𝒞_0..𝒞_{N−1})`.
    pub fn all(&self) -> Vec<Expr> {
        self.primary.iter().chain(&self.secondary).cloned().collect()
    }

    pub fn labels(&self, table: &SymbolTable) -> Vec<String> {
        let names = table.coordinate_names();
        names
            .iter()
            .map(|c| format!("C_{c}"))
            .chain(names.iter().map(|c| format!("S_{c}")))
            .collect()
    }

    /// Build `C`, `𝒞` and `Ω`, checking `{C_μ, H0} ≡ −𝒞_μ`.
    pub fn build(m: &AffineModel, tensors: &DerivedTensors, seed: u64) -> Result<ConstraintSystem, ConstraintError> {
        let n = m.dimension();
        let t = m.table();
        let primary: Vec<Expr> = (0..n)
            .map(|mu| (Expr::sym(t.higher_momentum(mu)) - &tensors.higher_momenta[mu]).simplify())
            .collect();
        let secondary: Vec<Expr> = (0..n)
            .map(|mu| (Expr::sym(t.momentum(mu)) - &tensors.momenta[mu]).simplify())
            .collect();
        let mut sampler = m.sampler(seed);
        for mu in 0..n {
            let r = snap(&(poisson(&primary[mu], &tensors.h0, t) + &secondary[mu]));
            if !vanishes(&r, &mut sampler)? {
                return Err(ConstraintError::HamiltonianConsistency { component: mu });
            }
        }
        let phi: Vec<Expr> = primary.iter().chain(&secondary).cloned().collect();
        let mut omega = vec![vec![Expr::zero(); 2 * n]; 2 * n];
        for i in 0..2 * n {
            for j in i + 1..2 * n {
                let e = snap(&poisson(&phi[i], &phi[j], t));
                omega[j][i] = (-&e).simplify();
                omega[i][j] = e;
            }
        }
        let symmetric = check_affine_symmetry(m, seed)?.symmetric;
        let mut velocity_zero_mode = symmetric;
        if symmetric {
            for mu in 0..n {
                let c = snap(&Expr::sum((0..n).map(|nu| &tensors.mass[mu][nu] * Expr::sym(t.velocity(nu))).collect()));
                if !vanishes(&c, &mut sampler)? {
                    velocity_zero_mode = false;
                    break;
                }
            }
        }
        Ok(ConstraintSystem {
            primary,
            secondary,
            omega,
            symmetric,
            velocity_zero_mode,
            seed,
        })
    }

    /// Numeric `Ω` at an admissible state.
    pub fn omega_at(&self, m: &AffineModel, s: &PhaseState) -> Result<DMatrix<f64>, ConstraintError> {
        let b = s.admissible_binding(m)?;
        Ok(eval_matrix(&self.omega, &b)?)
    }

    /// `(C(s), 𝒞(s))`.
    pub fn values_at(&self, m: &AffineModel, s: &PhaseState) -> Result<DVector<f64>, ConstraintError> {
        let b = s.admissible_binding(m)?;
        Ok(eval_dvector(&self.all(), &b)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn canonical_pairs() {
        let t = SymbolTable::new(&["x", "y"], &[] as &[&str]).unwrap();
        let x = Expr::sym(t.coordinate(1));
        let p = Expr::sym(t.momentum(1));
        assert!(poisson(&x, &p, &t).is_one());
        assert!(poisson(&Expr::sym(t.velocity(0)), &Expr::sym(t.higher_momentum(0)), &t).is_one());
        assert!(poisson(&x, &Expr::sym(t.momentum(0)), &t).is_zero());
        let f = parse("x*p_y + xdot^2", &t).unwrap();
        let g = parse("y*P_x", &t).unwrap();
        assert_eq!(poisson(&f, &g, &t), (-poisson(&g, &f, &t)).simplify());
    }

    #[test]
    fn free_particle_constraints() {
        let t = SymbolTable::new(&["x"], &["m"]).unwrap();
        let m = AffineModel::new("free", t.clone(), vec![Expr::zero()], parse("m/2*xdot^2", &t).unwrap(), vec![("m".into(), 2.0)])
            .unwrap();
        let d = crate::model::derive(&m);
        let cs = ConstraintSystem::build(&m, &d, 0).unwrap();
        assert_eq!(cs.primary[0], parse("P_x", &t).unwrap());
        assert_eq!(cs.secondary[0], parse("p_x - m*xdot", &t).unwrap());
        let s = PhaseState::new(vec![0.0], vec![1.0], vec![0.0], vec![0.0]);
        let o = cs.omega_at(&m, &s).unwrap();
        assert_eq!(o, DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]));
    }

    #[test]
    fn state_shape_is_checked() {
        let s = PhaseState::new(vec![0.0], vec![1.0, 2.0], vec![0.0], vec![f64::NAN]);
        assert!(matches!(s.validate(1), Err(ConstraintError::Shape { field: "xdot", .. })));
        let s = PhaseState::new(vec![0.0], vec![1.0], vec![0.0], vec![f64::NAN]);
        assert!(matches!(s.validate(1), Err(ConstraintError::NonFinite { field: "P", index: 0 })));
    }
}
