//! TOML model description.
//!
//! ```toml
//! [model]
//! name = "bubble"
//! dimension = 2
//! coordinates = ["t", "r"]
//!
//! [parameters]
//! alpha = 1
//!
//! [lagrangian]
//! K = ["alpha*r^2*rdot/(tdot^2 - rdot^2)", "-alpha*r^2*tdot/(tdot^2 - rdot^2)"]
//! V = "-2*alpha*r*tdot"
//!
//! [metric]
//! signature = [1, -1]
//!
//! [guards]
//! conditions = ["tdot^2 - rdot^2 > 0", "r > 0"]
//!
//! [gauge]
//! cosmic = ["tddot = 0"]
//!
//! [sampling]
//! box = [-2, 2]
//! seed = 0
//! bounds = { r = [0.2, 2] }
//!
//! [presets.alpha]
//! small = { alpha = 0.1 }
//! ```

use std::collections::BTreeMap;

use serde::Deserialize;

use super::{AffineModel, GaugeCondition, ModelError, SamplingSpec};
use crate::expr::{parse, Guard, SymbolTable};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    name: String,
    dimension: usize,
    coordinates: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LagrangianSection {
    #[serde(rename = "K")]
    k: Vec<String>,
    #[serde(rename = "V")]
    v: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricSection {
    signature: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GuardSection {
    conditions: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplingSection {
    #[serde(rename = "box")]
    bounding_box: Option<[f64; 2]>,
    #[serde(default)]
    bounds: BTreeMap<String, [f64; 2]>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    model: ModelSection,
    #[serde(default)]
    parameters: BTreeMap<String, f64>,
    lagrangian: LagrangianSection,
    metric: Option<MetricSection>,
    guards: Option<GuardSection>,
    #[serde(default)]
    gauge: BTreeMap<String, Vec<String>>,
    sampling: Option<SamplingSection>,
    #[serde(default)]
    presets: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
}

impl ModelFile {
    pub fn from_toml(text: &str) -> Result<ModelFile, ModelError> {
        toml::from_str(text).map_err(|e| ModelError::File(e.to_string().trim_end().to_string()))
    }

    pub fn into_model(self) -> Result<AffineModel, ModelError> {
        let m = &self.model;
        if m.dimension != m.coordinates.len() {
            return Err(ModelError::Validation {
                field: "model.dimension".into(),
                message: format!("is {} but {} coordinates are listed", m.dimension, m.coordinates.len()),
            });
        }
        let param_names: Vec<&str> = self.parameters.keys().map(String::as_str).collect();
        let table = SymbolTable::new(&m.coordinates.iter().map(String::as_str).collect::<Vec<_>>(), &param_names)
            .map_err(|message| ModelError::Validation {
                field: "model.coordinates".into(),
                message,
            })?;
        let parse_field = |field: String, text: &str| {
            parse(text, &table).map_err(|source| ModelError::Expr { field, source })
        };
        let k = self
            .lagrangian
            .k
            .iter()
            .enumerate()
            .map(|(mu, text)| parse_field(format!("lagrangian.K[{mu}]"), text))
            .collect::<Result<Vec<_>, _>>()?;
        let v = parse_field("lagrangian.V".into(), &self.lagrangian.v)?;
        let parameters = self.parameters.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let mut model = AffineModel::new(&m.name, table.clone(), k, v, parameters)?;
        if let Some(metric) = &self.metric {
            model = model.with_signature(metric.signature.clone())?;
        }
        if let Some(g) = &self.guards {
            let guards = g
                .conditions
                .iter()
                .enumerate()
                .map(|(i, text)| {
                    Guard::parse(text, &table).map_err(|source| ModelError::Expr {
                        field: format!("guards.conditions[{i}]"),
                        source,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            model = model.with_guards(guards);
        }
        for (name, conditions) in &self.gauge {
            let parsed = conditions
                .iter()
                .map(|c| GaugeCondition::parse(c, &table))
                .collect::<Result<Vec<_>, _>>()?;
            model = model.with_gauge(name, parsed);
        }
        let mut sampling = SamplingSpec::default();
        if let Some(s) = &self.sampling {
            if let Some([lo, hi]) = s.bounding_box {
                if lo >= hi {
                    return Err(ModelError::Validation {
                        field: "sampling.box".into(),
                        message: "lower bound must be below upper bound".into(),
                    });
                }
                sampling.default_box = (lo, hi);
            }
            for (name, [lo, hi]) in &s.bounds {
                if table.lookup(name).is_none() {
                    return Err(ModelError::Validation {
                        field: format!("sampling.bounds.{name}"),
                        message: "unknown symbol".into(),
                    });
                }
                sampling.bounds.insert(name.clone(), (*lo, *hi));
            }
            if let Some(seed) = s.seed {
                sampling.seed = seed;
            }
        }
        for (group, presets) in &self.presets {
            for (preset, values) in presets {
                if let Some(bad) = values.keys().find(|k| table.parameter(k).is_none()) {
                    return Err(ModelError::Validation {
                        field: format!("presets.{group}.{preset}"),
                        message: format!("'{bad}' is not a parameter"),
                    });
                }
            }
        }
        Ok(model.with_sampling(sampling).with_presets(self.presets))
    }
}
