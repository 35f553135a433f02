use super::derive::snap;
use super::{AffineModel, DerivedTensors, ModelError};
use crate::expr::rational::is_identically_zero;
use crate::expr::{Binding, Expr};

/// Euler-Lagrange operator `E^(0)_μ(L) = ∂L/∂x^μ − d/dτ ∂L/∂ẋ^μ + d²/dτ² K_μ`.
/// Depends on jerks unless the affine symmetry holds.
pub fn euler_lagrange_operator(m: &AffineModel) -> Result<Vec<Expr>, ModelError> {
    let t = m.table();
    let l = m.lagrangian();
    (0..m.dimension())
        .map(|mu| {
            let dl_dv = l.diff(t.velocity(mu));
            let dk = m.k()[mu].total_derivative(2, t)?;
            let e = l.diff(t.coordinate(mu)) - dl_dv.total_derivative(3, t)? + dk.total_derivative(3, t)?;
            Ok(snap(&e))
        })
        .collect()
}

/// Residual of the equations of motion at points of a curve.
///
/// Symmetric models use `M_μν ẍ^ν − F_μ`; otherwise the third-order
/// `E^(0)_μ(L)` is evaluated, which needs jerks in each sample.
pub fn euler_lagrange_residual(
    m: &AffineModel,
    tensors: &DerivedTensors,
    symmetric: bool,
    samples: &[Binding],
) -> Result<Vec<Vec<f64>>, ModelError> {
    let n = m.dimension();
    let t = m.table();
    let (order, exprs) = if symmetric {
        let e: Vec<Expr> = (0..n)
            .map(|mu| {
                let mut terms: Vec<Expr> = (0..n)
                    .map(|nu| &tensors.mass[mu][nu] * Expr::sym(t.acceleration(nu)))
                    .collect();
                terms.push(-tensors.force[mu].clone());
                Expr::sum(terms).simplify()
            })
            .collect();
        (2, e)
    } else {
        (3, euler_lagrange_operator(m)?)
    };
    let needed_by = if symmetric { "M xddot - F" } else { "the third-order Euler-Lagrange operator" };
    let params = m.parameter_binding();
    samples
        .iter()
        .map(|s| {
            for k in 2..=order {
                if (0..n).any(|mu| s.get(t.derivative(k, mu).expect("order within table")).is_none()) {
                    return Err(ModelError::MissingDerivativeOrder {
                        order: k,
                        needed_by: needed_by.into(),
                    });
                }
            }
            let mut b = params.clone();
            b.extend(s);
            exprs.iter().map(|e| e.evaluate(&b).map_err(ModelError::from)).collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ZermeloReport {
    /// `max |I1|` with `I1 = 2 ẋ^μ K_μ`.
    pub i1_residual: f64,
    /// `max |I2 − L|`.
    pub i2_residual: f64,
    pub covariant: bool,
    pub points: usize,
    pub tol: f64,
}

/// `(I1, I2)` of the Zermelo conditions `I1 = 0`, `I2 = L`.
pub fn zermelo_invariants(m: &AffineModel) -> (Expr, Expr) {
    let t = m.table();
    let n = m.dimension();
    let xd = |mu: usize| Expr::sym(t.velocity(mu));
    let i1 = Expr::sum((0..n).map(|mu| Expr::int(2) * xd(mu) * &m.k()[mu]).collect());
    let mut i2_terms = Vec::new();
    for mu in 0..n {
        let mut inner: Vec<Expr> = (0..n).map(|nu| m.k()[mu].diff(t.velocity(nu)) * xd(nu)).collect();
        inner.push(Expr::int(2) * &m.k()[mu]);
        i2_terms.push(Expr::sum(inner) * Expr::sym(t.acceleration(mu)));
        i2_terms.push(m.v().diff(t.velocity(mu)) * xd(mu));
    }
    (snap(&i1), snap(&Expr::sum(i2_terms)))
}

/// Evaluate the Zermelo conditions at `points` (which must bind accelerations).
pub fn zermelo_check(m: &AffineModel, points: &[Binding], tol: f64) -> Result<ZermeloReport, ModelError> {
    let (i1, i2) = zermelo_invariants(m);
    let l = m.lagrangian();
    let params = m.parameter_binding();
    let mut report = ZermeloReport {
        i1_residual: 0.0,
        i2_residual: 0.0,
        covariant: true,
        points: points.len(),
        tol,
    };
    for p in points {
        let mut b = params.clone();
        b.extend(p);
        let lv = l.evaluate(&b)?;
        let r1 = i1.evaluate(&b)?.abs();
        let r2 = (i2.evaluate(&b)? - lv).abs();
        report.i1_residual = report.i1_residual.max(r1);
        report.i2_residual = report.i2_residual.max(r2);
        if r1 > tol * (1.0 + lv.abs()) || r2 > tol * (1.0 + lv.abs()) {
            report.covariant = false;
        }
    }
    Ok(report)
}

/// `d(ẋ^μ K_μ)/dτ` and whether it provably vanishes. Reported only; it is
/// not used to gate the surface split.
pub fn velocity_contraction_diagnostic(m: &AffineModel) -> Result<(Expr, bool), ModelError> {
    let t = m.table();
    let contraction = Expr::sum(
        (0..m.dimension())
            .map(|mu| Expr::sym(t.velocity(mu)) * &m.k()[mu])
            .collect(),
    );
    let d = snap(&contraction.total_derivative(2, t)?);
    let zero = d.is_zero() || is_identically_zero(&d);
    Ok((d, zero))
}
