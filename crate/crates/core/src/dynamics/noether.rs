use super::{DynamicsError, Trajectory};
use crate::expr::Expr;
use crate::model::{snap, zermelo_invariants, AffineModel, DerivedTensors, ModelError};

/// Infinitesimal transformation `x → x + εW(x,τ)`, `τ → τ + εη(x,τ)` with
/// boundary term `εφ(x,ẋ)`.
#[derive(Clone, Debug)]
pub struct NoetherSpec {
    pub w: Vec<Expr>,
    pub eta: Expr,
    pub phi: Expr,
}

impl NoetherSpec {
    /// `W = 0`, `η = 1`, `φ = 0`: τ-translation.
    pub fn time_translation(n: usize) -> NoetherSpec {
        NoetherSpec {
            w: vec![Expr::zero(); n],
            eta: Expr::one(),
            phi: Expr::zero(),
        }
    }

    fn validate(&self, m: &AffineModel) -> Result<(), ModelError> {
        let t = m.table();
        let field = |f: &str, e: &Expr, max: usize| -> Result<(), ModelError> {
            match e.max_derivative_order() {
                Some(k) if k > max => Err(ModelError::Validation {
                    field: f.into(),
                    message: format!("depends on order-{k} derivatives"),
                }),
                _ if e.contains_kind(crate::expr::SymbolKind::Momentum)
                    || e.contains_kind(crate::expr::SymbolKind::HigherMomentum) =>
                {
                    Err(ModelError::Validation {
                        field: f.into(),
                        message: "must not contain momenta".into(),
                    })
                }
                _ => Ok(()),
            }
        };
        if self.w.len() != t.dimension() {
            return Err(ModelError::Validation {
                field: "W".into(),
                message: format!("expected {} components, found {}", t.dimension(), self.w.len()),
            });
        }
        for (mu, w) in self.w.iter().enumerate() {
            field(&format!("W[{mu}]"), w, 0)?;
        }
        field("eta", &self.eta, 0)?;
        field("phi", &self.phi, 1)
    }
}

#[derive(Clone, Debug)]
pub struct NoetherReport {
    /// `G = I_W^(2)(L) − ½ d/dτ I_W^(1)(L) − η E2 + η̇ E1 − φ`.
    pub charge: Expr,
    /// `G' = W·p − Ẇ·P − η E1 + η̇ E2 − φ` in phase variables.
    pub variant: Expr,
    pub values: Vec<f64>,
    pub variant_values: Vec<f64>,
    pub drift: f64,
    pub variant_drift: f64,
}

fn drift(v: &[f64]) -> f64 {
    v.iter().map(|x| (x - v[0]).abs()).fold(0.0, f64::max)
}

/// Evaluate both forms of the Noether charge along a trajectory.
pub fn monitor_noether(
    traj: &Trajectory,
    spec: &NoetherSpec,
    m: &AffineModel,
    tensors: &DerivedTensors,
) -> Result<NoetherReport, DynamicsError> {
    spec.validate(m)?;
    let t = m.table();
    let n = m.dimension();
    let l = m.lagrangian();
    let k = m.k();
    let wdot: Vec<Expr> = spec.w.iter().map(|w| w.total_derivative(2, t)).collect::<Result<_, _>>().map_err(ModelError::from)?;
    let etadot = spec.eta.total_derivative(2, t).map_err(ModelError::from)?;
    let w_dot_k = Expr::sum((0..n).map(|mu| &spec.w[mu] * &k[mu]).collect());
    let mut terms = Vec::new();
    for mu in 0..n {
        terms.push(&spec.w[mu] * l.diff(t.velocity(mu)));
        terms.push(Expr::int(2) * &wdot[mu] * &k[mu]);
    }
    terms.push(-w_dot_k.total_derivative(2, t).map_err(ModelError::from)?);
    terms.push(-(&spec.eta * &tensors.e2));
    terms.push(&etadot * &tensors.e1);
    terms.push(-spec.phi.clone());
    let charge = snap(&Expr::sum(terms));

    let mut vterms = Vec::new();
    for mu in 0..n {
        vterms.push(&spec.w[mu] * Expr::sym(t.momentum(mu)));
        vterms.push(-(&wdot[mu] * Expr::sym(t.higher_momentum(mu))));
    }
    vterms.push(-(&spec.eta * &tensors.e1));
    vterms.push(&etadot * &tensors.e2);
    vterms.push(-spec.phi.clone());
    let variant = snap(&Expr::sum(vterms));

    let mut values = Vec::with_capacity(traj.len());
    let mut variant_values = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        let b = traj.binding(i, m);
        values.push(charge.evaluate(&b)?);
        variant_values.push(variant.evaluate(&b)?);
    }
    Ok(NoetherReport {
        drift: drift(&values),
        variant_drift: drift(&variant_values),
        charge,
        variant,
        values,
        variant_values,
    })
}

/// Residual of `dE1/dτ + ½ I2 + ½ ẋ^μ E^(1)_μ` at each sample, with
/// `E^(1)_μ = −∂L/∂ẋ^μ + 2 dK_μ/dτ`. Vanishes for symmetric `∂K/∂ẋ`.
pub fn e1_identity_residuals(traj: &Trajectory, m: &AffineModel, tensors: &DerivedTensors) -> Result<Vec<f64>, DynamicsError> {
    let t = m.table();
    let n = m.dimension();
    let l = m.lagrangian();
    let (_, i2) = zermelo_invariants(m);
    let mut terms = vec![tensors.e1.total_derivative(2, t).map_err(ModelError::from)?, Expr::ratio(1, 2) * i2];
    for mu in 0..n {
        let dk = m.k()[mu].total_derivative(2, t).map_err(ModelError::from)?;
        let e1_cov = -l.diff(t.velocity(mu)) + Expr::int(2) * dk;
        terms.push(Expr::ratio(1, 2) * Expr::sym(t.velocity(mu)) * e1_cov);
    }
    let r = snap(&Expr::sum(terms));
    (0..traj.len()).map(|i| Ok(r.evaluate(&traj.binding(i, m))?)).collect()
}
