use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{canonical_json, read, write, IoError};
use crate::context::{CausalRelation, Context, PhenomenonBinding};
use crate::graph::{CausalStructure, NodeId, NodeSpec};
use crate::model::{Cpd, DiscreteModel, ModelError, VariableSpec};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    variables: Vec<VariableEntry>,
    #[serde(default)]
    edges: Vec<(NodeId, NodeId)>,
    #[serde(default)]
    bidirected: Vec<(NodeId, NodeId)>,
    phenomenon: PhenomenonBinding,
    metric: MetricEntry,
    #[serde(default)]
    context: Context,
    #[serde(default)]
    cpds: Vec<Cpd>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableEntry {
    name: NodeId,
    domain: Vec<String>,
    codes: Vec<f64>,
    unit: String,
    #[serde(default)]
    latent: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    range: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricEntry {
    variable: NodeId,
}

/// Reads a model file; see [`parse_model`].
pub fn load_model(path: impl AsRef<Path>) -> Result<(CausalRelation, DiscreteModel), IoError> {
    let path = path.as_ref();
    parse_model(&read(path)?, &path.display().to_string())
}

/// Parses model-file text. Syntax and schema errors carry line and column;
/// structural problems (cycles, bad CPDs, unknown nodes) are validation
/// errors. Causal-relation clauses are not checked here.
pub fn parse_model(text: &str, origin: &str) -> Result<(CausalRelation, DiscreteModel), IoError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| IoError::Parse {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let invalid = |source: ModelError| IoError::Validation { path: origin.to_string(), source };
    if file.format_version != FORMAT_VERSION {
        return Err(invalid(ModelError::InvalidSpec {
            variable: "format_version".into(),
            reason: format!("unsupported version {}, expected {FORMAT_VERSION}", file.format_version),
        }));
    }
    let nodes = file.variables.iter().map(|v| NodeSpec { name: v.name.clone(), latent: v.latent });
    let structure = CausalStructure::new(nodes, file.edges, file.bidirected).map_err(|e| invalid(e.into()))?;
    let specs: Vec<VariableSpec> = file
        .variables
        .into_iter()
        .map(|v| VariableSpec { name: v.name, domain: v.domain, codes: v.codes, unit: v.unit, range: v.range })
        .collect();
    let model = DiscreteModel::new(structure.clone(), specs.clone(), file.cpds).map_err(invalid)?;
    let relation = CausalRelation {
        structure,
        specs,
        context: file.context,
        phenomenon: file.phenomenon,
        metric: file.metric.variable,
    };
    Ok((relation, model))
}

/// Canonical text: variables, edges and CPDs sorted by name; context
/// statements keep their order.
pub fn render_model(relation: &CausalRelation, model: &DiscreteModel) -> String {
    let s = model.structure();
    let variables = model
        .specs()
        .iter()
        .map(|spec| VariableEntry {
            name: spec.name.clone(),
            domain: spec.domain.clone(),
            codes: spec.codes.clone(),
            unit: spec.unit.clone(),
            latent: s.is_latent(&spec.name).unwrap_or(false),
            range: spec.range.clone(),
        })
        .collect();
    let pairs = |edges: Vec<(&str, &str)>| {
        let mut out: Vec<(NodeId, NodeId)> = edges.into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        out.sort();
        out
    };
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        variables,
        edges: pairs(s.edges()),
        bidirected: pairs(s.bidirected_edges()),
        phenomenon: relation.phenomenon.clone(),
        metric: MetricEntry { variable: relation.metric.clone() },
        context: relation.context.clone(),
        cpds: model.cpds().cloned().collect(),
    };
    canonical_json(&serde_json::to_value(&file).expect("model file serializes"))
}

pub fn save_model(path: impl AsRef<Path>, relation: &CausalRelation, model: &DiscreteModel) -> Result<(), IoError> {
    write(path.as_ref(), &render_model(relation, model))
}
