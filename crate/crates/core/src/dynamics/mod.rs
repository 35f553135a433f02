//! Hamilton equations on the Ostrogradski phase space, integrated in τ.

mod integrate;
mod noether;

use nalgebra::DVector;
use thiserror::Error;

use crate::constraints::{eval_dvector, eval_matrix, multiplier_solve, ConstraintError, ConstraintSystem, PhaseState};
use crate::expr::{Expr, ExprError};
use crate::model::{AffineModel, DerivedTensors, GaugeCondition, ModelError};

pub use integrate::{integrate, Diagnostics, IntegrateOptions, Trajectory};
pub use noether::{e1_identity_residuals, monitor_noether, NoetherReport, NoetherSpec};

/// Relative residual accepted in the multiplier equations along the flow.
pub const MULTIPLIER_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error("multipliers are underdetermined at tau = {tau}: M has {free} zero mode(s); declare a gauge or allow the minimum-norm solution")]
    GaugeRequired { tau: f64, free: usize },
    #[error("step size underflow at tau = {tau} (h = {step:.3e}): {reason}")]
    StepUnderflow {
        tau: f64,
        step: f64,
        reason: String,
        last: Box<PhaseState>,
    },
    #[error("step limit {limit} reached at tau = {tau}")]
    StepLimit { tau: f64, limit: usize },
    #[error("invalid span: {0}")]
    Span(String),
    #[error("{0}")]
    Io(String),
}

impl From<ExprError> for DynamicsError {
    fn from(e: ExprError) -> Self {
        DynamicsError::Constraint(e.into())
    }
}

impl From<ModelError> for DynamicsError {
    fn from(e: ModelError) -> Self {
        DynamicsError::Constraint(e.into())
    }
}

/// Place `(x, ẋ)` on the constraint surface: `P = K`, `p = p(x, ẋ)`.
///
/// For a non-symmetric `∂K/∂ẋ` the acceleration is not fixed by `(x, ẋ)`;
/// the state then carries `p = p(x, ẋ) + N ẍ` for the given `ẍ` (zero if
/// omitted), which the multiplier solve recovers as `u = ẍ`.
pub fn project_initial(
    m: &AffineModel,
    tensors: &DerivedTensors,
    x: &[f64],
    xdot: &[f64],
    xddot: Option<&[f64]>,
) -> Result<PhaseState, ConstraintError> {
    let n = m.dimension();
    let probe = PhaseState::new(x.to_vec(), xdot.to_vec(), vec![0.0; n], vec![0.0; n]);
    probe.admissible_binding(m)?;
    let mut s = PhaseState::on_surface(m, tensors, x, xdot)?;
    if let Some(acc) = xddot {
        if acc.len() != n {
            return Err(ConstraintError::Shape {
                field: "xddot",
                found: acc.len(),
                expected: n,
            });
        }
        let curl = eval_matrix(&tensors.n_curl, &s.binding(m))?;
        let shift = curl * DVector::from_column_slice(acc);
        for mu in 0..n {
            s.p[mu] += shift[mu];
        }
    }
    Ok(s)
}

/// Right-hand side generator with precomputed partial derivatives.
#[derive(Clone, Debug)]
pub struct Flow<'a> {
    pub model: &'a AffineModel,
    pub tensors: &'a DerivedTensors,
    pub constraints: &'a ConstraintSystem,
    pub gauge: Vec<GaugeCondition>,
    pub min_norm: bool,
    /// `[μ][ν] = ∂K_ν/∂ẋ^μ`.
    dk_dxdot: Vec<Vec<Expr>>,
    /// `[μ][ν] = ∂K_ν/∂x^μ`.
    dk_dx: Vec<Vec<Expr>>,
    dv_dxdot: Vec<Expr>,
    dv_dx: Vec<Expr>,
}

impl<'a> Flow<'a> {
    pub fn new(
        model: &'a AffineModel,
        tensors: &'a DerivedTensors,
        constraints: &'a ConstraintSystem,
        gauge: Vec<GaugeCondition>,
        min_norm: bool,
    ) -> Flow<'a> {
        let n = model.dimension();
        let t = model.table();
        let k = model.k();
        let dk_dxdot = (0..n).map(|mu| (0..n).map(|nu| k[nu].diff(t.velocity(mu)).simplify()).collect()).collect();
        let dk_dx = (0..n).map(|mu| (0..n).map(|nu| k[nu].diff(t.coordinate(mu)).simplify()).collect()).collect();
        Flow {
            model,
            tensors,
            constraints,
            gauge,
            min_norm,
            dk_dxdot,
            dk_dx,
            dv_dxdot: (0..n).map(|mu| model.v().diff(t.velocity(mu)).simplify()).collect(),
            dv_dx: (0..n).map(|mu| model.v().diff(t.coordinate(mu)).simplify()).collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.model.dimension()
    }

    /// Multipliers `u` at `s`, enforcing the gauge policy.
    pub fn multipliers(&self, s: &PhaseState, tau: f64) -> Result<DVector<f64>, DynamicsError> {
        let sol = multiplier_solve(self.constraints, self.tensors, self.model, s, &self.gauge, MULTIPLIER_TOL)?;
        if !sol.determined() && !self.min_norm {
            return Err(DynamicsError::GaugeRequired {
                tau,
                free: sol.family.len(),
            });
        }
        Ok(sol.u)
    }

    /// `(d/dτ (x, ẋ, p, P), u)` at `s`.
    pub fn rhs(&self, s: &PhaseState, tau: f64) -> Result<(Vec<f64>, DVector<f64>), DynamicsError> {
        let n = self.dimension();
        let u = self.multipliers(s, tau)?;
        let b = s.binding(self.model);
        let dk_dxdot = eval_matrix(&self.dk_dxdot, &b)?;
        let dk_dx = eval_matrix(&self.dk_dx, &b)?;
        let dv_dxdot = eval_dvector(&self.dv_dxdot, &b)?;
        let dv_dx = eval_dvector(&self.dv_dx, &b)?;
        let big_p_dot = -DVector::from_column_slice(&s.p) + dv_dxdot + &dk_dxdot * &u;
        let p_dot = dv_dx + &dk_dx * &u;
        let mut out = Vec::with_capacity(4 * n);
        out.extend_from_slice(&s.xdot);
        out.extend(u.iter());
        out.extend(p_dot.iter());
        out.extend(big_p_dot.iter());
        Ok((out, u))
    }
}

/// One evaluation of the Hamilton equations.
pub fn hamilton_rhs(flow: &Flow<'_>, s: &PhaseState) -> Result<Vec<f64>, DynamicsError> {
    Ok(flow.rhs(s, 0.0)?.0)
}

pub(crate) fn pack(s: &PhaseState) -> Vec<f64> {
    s.x.iter().chain(&s.xdot).chain(&s.p).chain(&s.big_p).copied().collect()
}

pub(crate) fn unpack(y: &[f64], n: usize) -> PhaseState {
    PhaseState::new(y[..n].to_vec(), y[n..2 * n].to_vec(), y[2 * n..3 * n].to_vec(), y[3 * n..].to_vec())
}
