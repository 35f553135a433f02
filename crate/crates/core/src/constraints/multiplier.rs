use nalgebra::{DMatrix, DVector};

use super::linalg::{lstsq, null_space, rank};
use super::{eval_dvector, eval_matrix, ConstraintError, ConstraintSystem, PhaseState, RANK_TOL};
use crate::model::{AffineModel, DerivedTensors, GaugeCondition};

/// Solution of the multiplier (acceleration) equations at a state.
#[derive(Clone, Debug)]
pub struct MultiplierSolution {
    /// Minimum-norm particular solution.
    pub u: DVector<f64>,
    /// `‖A u − b‖` of the stacked system.
    pub residual: f64,
    /// Directions left free (`u + span`).
    pub family: Vec<DVector<f64>>,
}

impl MultiplierSolution {
    pub fn determined(&self) -> bool {
        self.family.is_empty()
    }
}

/// Solve `M u = F` (covariant branch) or `N u = 𝒞` (chiral branch), with
/// optional gauge rows `a·u = b` stacked underneath.
pub fn multiplier_solve(
    cs: &ConstraintSystem,
    tensors: &DerivedTensors,
    m: &AffineModel,
    s: &PhaseState,
    gauge: &[GaugeCondition],
    tol: f64,
) -> Result<MultiplierSolution, ConstraintError> {
    let b = s.admissible_binding(m)?;
    let n = m.dimension();
    let (lhs, rhs) = if cs.symmetric {
        (eval_matrix(&tensors.mass, &b)?, eval_dvector(&tensors.force, &b)?)
    } else {
        let curl: Vec<Vec<_>> = cs.omega[..n].iter().map(|row| row[..n].to_vec()).collect();
        (eval_matrix(&curl, &b)?, eval_dvector(&cs.secondary, &b)?)
    };
    let rows = n + gauge.len();
    let mut a = DMatrix::zeros(rows, n);
    let mut rhs_all = DVector::zeros(rows);
    a.view_mut((0, 0), (n, n)).copy_from(&lhs);
    rhs_all.rows_mut(0, n).copy_from(&rhs);
    for (k, gc) in gauge.iter().enumerate() {
        for mu in 0..n {
            a[(n + k, mu)] = gc.a[mu].evaluate(&b)?;
        }
        rhs_all[n + k] = gc.b.evaluate(&b)?;
    }
    let u = if gauge.is_empty() && rank(&lhs, RANK_TOL) == n {
        lhs.clone().lu().solve(&rhs).unwrap_or_else(|| lstsq(&lhs, &rhs, RANK_TOL))
    } else {
        lstsq(&a, &rhs_all, RANK_TOL)
    };
    let residual = (&a * &u - &rhs_all).norm();
    let limit = tol * (1.0 + rhs_all.norm());
    if residual > limit {
        return Err(ConstraintError::NoSolution { residual, tol: limit });
    }
    Ok(MultiplierSolution {
        u,
        residual,
        family: null_space(&a, RANK_TOL),
    })
}
