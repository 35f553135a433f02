//! Validated Lagrangians `L = K_μ(x,ẋ) ẍ^μ + V(x,ẋ)` and everything built
//! symbolically from them.

mod checks;
mod derive;
mod file;
mod surface;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::expr::{parse, Binding, Expr, ExprError, Guard, Number, Sampler, Symbol, SymbolKind, SymbolTable};

pub use checks::{
    euler_lagrange_operator, euler_lagrange_residual, velocity_contraction_diagnostic, zermelo_check, zermelo_invariants,
    ZermeloReport,
};
pub use derive::{check_affine_symmetry, derive, DerivedTensors, SymmetryReport};
pub(crate) use derive::snap;
pub use file::ModelFile;
pub use surface::{surface_decompose, SurfaceSplit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model file: {0}")]
    File(String),
    #[error("{field}: {source}")]
    Expr {
        field: String,
        #[source]
        source: ExprError,
    },
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("affine symmetry violated: dK_mu/dxdot^nu is not symmetric, so no boundary function exists")]
    SymmetryViolated,
    #[error("no rule integrates {term} in {variable}")]
    AntiderivativeNotFound { term: String, variable: String },
    #[error("boundary function check failed: K_{component} - dLambda/d{variable} does not vanish")]
    AntiderivativeResidual { component: usize, variable: String },
    #[error("trajectory sample lacks order-{order} derivatives needed by {needed_by}")]
    MissingDerivativeOrder { order: usize, needed_by: String },
    #[error(transparent)]
    Eval(#[from] ExprError),
}

/// Linear condition `a_μ(x,ẋ) u^μ = b(x,ẋ)` on the multipliers (accelerations).
#[derive(Clone, Debug)]
pub struct GaugeCondition {
    pub text: String,
    pub a: Vec<Expr>,
    pub b: Expr,
}

impl GaugeCondition {
    /// Parse `lhs = rhs`, which must be affine in the accelerations.
    pub fn parse(text: &str, table: &SymbolTable) -> Result<GaugeCondition, ModelError> {
        let field = format!("gauge condition '{text}'");
        let (lhs, rhs) = text.split_once('=').ok_or_else(|| ModelError::Validation {
            field: field.clone(),
            message: "expected 'lhs = rhs'".into(),
        })?;
        let wrap = |source| ModelError::Expr {
            field: field.clone(),
            source,
        };
        let e = (parse(lhs, table).map_err(wrap)? - parse(rhs, table).map_err(wrap)?).simplify();
        let n = table.dimension();
        let a: Vec<Expr> = (0..n).map(|mu| e.diff(table.acceleration(mu))).collect();
        if a.iter().any(|c| c.contains_kind(SymbolKind::Acceleration) || c.contains_kind(SymbolKind::Jerk))
            || e.contains_kind(SymbolKind::Jerk)
        {
            return Err(ModelError::Validation {
                field,
                message: "condition must be linear in the accelerations".into(),
            });
        }
        if a.iter().all(Expr::is_zero) {
            return Err(ModelError::Validation {
                field,
                message: "condition does not involve any acceleration".into(),
            });
        }
        let zero_acc: HashMap<Symbol, Expr> =
            (0..n).map(|mu| (table.acceleration(mu).clone(), Expr::zero())).collect();
        let b = (-e.substitute(&zero_acc)).simplify();
        Ok(GaugeCondition {
            text: text.trim().to_string(),
            a,
            b,
        })
    }

    fn substitute(&self, map: &HashMap<Symbol, Expr>) -> GaugeCondition {
        GaugeCondition {
            text: self.text.clone(),
            a: self.a.iter().map(|e| e.substitute(map)).collect(),
            b: self.b.substitute(map),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingSpec {
    pub default_box: (f64, f64),
    pub bounds: BTreeMap<String, (f64, f64)>,
    pub seed: u64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            default_box: crate::expr::DEFAULT_BOX,
            bounds: BTreeMap::new(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AffineModel {
    name: String,
    table: SymbolTable,
    k: Vec<Expr>,
    v: Expr,
    parameters: Vec<(String, f64)>,
    signature: Vec<f64>,
    guards: Vec<Guard>,
    gauges: BTreeMap<String, Vec<GaugeCondition>>,
    sampling: SamplingSpec,
    presets: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
}

fn validate_acceleration_free(field: &str, e: &Expr) -> Result<(), ModelError> {
    for s in e.free_symbols() {
        match s.kind() {
            SymbolKind::Acceleration | SymbolKind::Jerk => {
                return Err(ModelError::Validation {
                    field: field.to_string(),
                    message: format!("depends on '{}'; K and V must be functions of x and xdot only", s.name()),
                })
            }
            SymbolKind::Momentum | SymbolKind::HigherMomentum | SymbolKind::Time => {
                return Err(ModelError::Validation {
                    field: field.to_string(),
                    message: format!("depends on '{}', which is not a configuration variable", s.name()),
                })
            }
            _ => {}
        }
    }
    Ok(())
}

impl AffineModel {
    /// Build a model from already-parsed pieces.
    pub fn new(
        name: &str,
        table: SymbolTable,
        k: Vec<Expr>,
        v: Expr,
        parameters: Vec<(String, f64)>,
    ) -> Result<AffineModel, ModelError> {
        let n = table.dimension();
        if n == 0 {
            return Err(ModelError::Validation {
                field: "model.coordinates".into(),
                message: "at least one coordinate is required".into(),
            });
        }
        if k.len() != n {
            return Err(ModelError::Validation {
                field: "lagrangian.K".into(),
                message: format!("expected {n} components, found {}", k.len()),
            });
        }
        for (mu, kmu) in k.iter().enumerate() {
            validate_acceleration_free(&format!("lagrangian.K[{mu}]"), kmu)?;
        }
        validate_acceleration_free("lagrangian.V", &v)?;
        Ok(AffineModel {
            name: name.to_string(),
            table,
            k: k.iter().map(Expr::simplify).collect(),
            v: v.simplify(),
            parameters,
            signature: vec![1.0; n],
            guards: Vec::new(),
            gauges: BTreeMap::new(),
            sampling: SamplingSpec::default(),
            presets: BTreeMap::new(),
        })
    }

    /// Parse and validate a model file.
    pub fn load(text: &str) -> Result<AffineModel, ModelError> {
        ModelFile::from_toml(text)?.into_model()
    }

    pub fn with_signature(mut self, signature: Vec<f64>) -> Result<AffineModel, ModelError> {
        if signature.len() != self.dimension() || signature.iter().any(|s| s.abs() != 1.0) {
            return Err(ModelError::Validation {
                field: "metric.signature".into(),
                message: format!("expected {} entries of +1 or -1", self.dimension()),
            });
        }
        self.signature = signature;
        Ok(self)
    }

    pub fn with_guards(mut self, guards: Vec<Guard>) -> AffineModel {
        self.guards = guards;
        self
    }

    pub fn with_gauge(mut self, name: &str, conditions: Vec<GaugeCondition>) -> AffineModel {
        self.gauges.insert(name.to_string(), conditions);
        self
    }

    pub fn with_sampling(mut self, sampling: SamplingSpec) -> AffineModel {
        self.sampling = sampling;
        self
    }

    pub(crate) fn with_presets(
        mut self,
        presets: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
    ) -> AffineModel {
        self.presets = presets;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    pub fn dimension(&self) -> usize {
        self.table.dimension()
    }

    pub fn k(&self) -> &[Expr] {
        &self.k
    }

    pub fn v(&self) -> &Expr {
        &self.v
    }

    /// `K_μ ẍ^μ + V`.
    pub fn lagrangian(&self) -> Expr {
        let mut terms: Vec<Expr> = (0..self.dimension())
            .map(|mu| &self.k[mu] * Expr::sym(self.table.acceleration(mu)))
            .collect();
        terms.push(self.v.clone());
        Expr::sum(terms).simplify()
    }

    pub fn parameters(&self) -> &[(String, f64)] {
        &self.parameters
    }

    pub fn signature(&self) -> &[f64] {
        &self.signature
    }

    pub fn guards(&self) -> &[Guard] {
        &self.guards
    }

    pub fn gauges(&self) -> &BTreeMap<String, Vec<GaugeCondition>> {
        &self.gauges
    }

    pub fn sampling(&self) -> &SamplingSpec {
        &self.sampling
    }

    pub fn presets(&self) -> &BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>> {
        &self.presets
    }

    /// Parameter values as a binding.
    pub fn parameter_binding(&self) -> Binding {
        let mut b = Binding::new();
        for (name, value) in &self.parameters {
            if let Some(s) = self.table.parameter(name) {
                b.set(s, *value);
            }
        }
        b
    }

    /// Whether all guards hold at `b` (symbols missing from `b` are ignored).
    pub fn admissible(&self, b: &Binding) -> bool {
        self.guards.iter().all(|g| g.holds(b))
    }

    /// Sampler over the model's box and guards with parameters fixed.
    pub fn sampler(&self, seed: u64) -> Sampler {
        let (lo, hi) = self.sampling.default_box;
        let mut s = Sampler::new(seed)
            .with_box(lo, hi)
            .with_guards(self.guards.clone())
            .with_fixed(self.parameter_binding());
        for (name, (lo, hi)) in &self.sampling.bounds {
            if let Some(sym) = self.table.lookup(name) {
                s = s.with_bounds(sym, *lo, *hi);
            }
        }
        s
    }

    /// Coordinates and their derivatives up to `order`.
    pub fn configuration_symbols(&self, order: usize) -> Vec<Symbol> {
        (0..=order)
            .flat_map(|k| (0..self.dimension()).map(move |mu| (k, mu)))
            .filter_map(|(k, mu)| self.table.derivative(k, mu).cloned())
            .collect()
    }

    /// Gauge shift by a total derivative `dY/dτ`:
    /// `K̃ = K + ∂Y/∂ẋ`, `Ṽ = V + (∂Y/∂x)·ẋ`.
    pub fn gauge_shift(&self, y: &Expr) -> Result<AffineModel, ModelError> {
        validate_acceleration_free("gauge function Y", y)?;
        let n = self.dimension();
        let k = (0..n)
            .map(|mu| (&self.k[mu] + y.diff(self.table.velocity(mu))).simplify())
            .collect();
        let mut v_terms = vec![self.v.clone()];
        for mu in 0..n {
            v_terms.push(y.diff(self.table.coordinate(mu)) * Expr::sym(self.table.velocity(mu)));
        }
        let mut out = self.clone();
        out.k = k;
        out.v = Expr::sum(v_terms).simplify();
        Ok(out)
    }

    /// Replace parameters by numeric values in every expression. The values
    /// become the new defaults.
    pub fn with_values(&self, values: &[(String, f64)]) -> Result<AffineModel, ModelError> {
        let mut map = HashMap::new();
        let mut out = self.clone();
        for (name, value) in values {
            let sym = self.table.parameter(name).ok_or_else(|| ModelError::Validation {
                field: format!("--set {name}"),
                message: format!("model '{}' has no parameter '{name}'", self.name),
            })?;
            map.insert(sym.clone(), Expr::num(Number::from_f64(*value)));
            for slot in out.parameters.iter_mut().filter(|(n, _)| n == name) {
                slot.1 = *value;
            }
        }
        out.k = self.k.iter().map(|e| e.substitute(&map)).collect();
        out.v = self.v.substitute(&map);
        out.guards = self.guards.iter().map(|g| g.substitute(&map)).collect();
        out.gauges = self
            .gauges
            .iter()
            .map(|(k, cs)| (k.clone(), cs.iter().map(|c| c.substitute(&map)).collect()))
            .collect();
        Ok(out)
    }

    /// Apply `name=value` for a parameter or `group=preset` for a preset.
    pub fn apply_setting(&self, setting: &str) -> Result<AffineModel, ModelError> {
        let field = format!("--set {setting}");
        let (name, value) = setting.split_once('=').ok_or_else(|| ModelError::Validation {
            field: field.clone(),
            message: "expected name=value".into(),
        })?;
        let (name, value) = (name.trim(), value.trim());
        if let Some(group) = self.presets.get(name) {
            let preset = group.get(value).ok_or_else(|| ModelError::Validation {
                field: field.clone(),
                message: format!(
                    "unknown preset '{value}' for '{name}' (known: {})",
                    group.keys().cloned().collect::<Vec<_>>().join(", ")
                ),
            })?;
            let values: Vec<(String, f64)> = preset.iter().map(|(k, v)| (k.clone(), *v)).collect();
            return self.with_values(&values);
        }
        let number = parse(value, &SymbolTable::new::<&str>(&[], &[]).expect("empty table"))
            .ok()
            .and_then(|e| e.as_number())
            .ok_or_else(|| ModelError::Validation {
                field: field.clone(),
                message: format!("'{value}' is not a number"),
            })?;
        self.with_values(&[(name.to_string(), number.to_f64())])
    }
}
