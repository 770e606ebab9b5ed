//! Contexts and causal relations.
//!
//! A context is a list of statements over individuals of a small domain
//! vocabulary, each tagged with the layer (1..=6) of the six-layer scenario
//! model it belongs to. Statements assert that an individual (or one of its
//! properties) exists, that it is absent, or that a comparison between
//! property values holds. Contexts are checked structurally; there is no
//! description-logic reasoning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{CausalStructure, NodeId};
use crate::model::VariableSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    Existence,
    Absence,
    Constraint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=", alias = "≤")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=", alias = "≥")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "!=", alias = "≠")]
    Ne,
}

impl Operator {
    fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Operator::Lt => ord == Less,
            Operator::Le => ord != Greater,
            Operator::Eq => ord == Equal,
            Operator::Ge => ord != Less,
            Operator::Gt => ord == Greater,
            Operator::Ne => ord != Equal,
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operator::Lt => "<",
            Operator::Le => "<=",
            Operator::Eq => "=",
            Operator::Ge => ">=",
            Operator::Gt => ">",
            Operator::Ne => "!=",
        })
    }
}

/// A property value: number or symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Operand {
    Literal {
        value: Value,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unit: Option<String>,
    },
    Property { individual: String, property: String },
}

/// `subject.property <operator> rhs`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub property: String,
    pub operator: Operator,
    pub rhs: Operand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextStatement {
    pub layer: u8,
    /// An individual, or `individual.property` for existence/absence of a
    /// single property.
    pub subject: String,
    pub kind: StatementKind,
    /// Required class of the individual (existence statements only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Comparison>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl ContextStatement {
    pub fn exists(layer: u8, subject: impl Into<String>) -> Self {
        ContextStatement { layer, subject: subject.into(), kind: StatementKind::Existence, class: None, constraint: None, note: String::new() }
    }

    pub fn absent(layer: u8, subject: impl Into<String>) -> Self {
        ContextStatement { kind: StatementKind::Absence, ..Self::exists(layer, subject) }
    }

    pub fn constraint(layer: u8, subject: impl Into<String>, comparison: Comparison) -> Self {
        ContextStatement { kind: StatementKind::Constraint, constraint: Some(comparison), ..Self::exists(layer, subject) }
    }

    pub fn of_class(mut self, class: impl Into<String>) -> Self {
        self.class = Some(class.into());
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    fn split_subject(&self) -> (&str, Option<&str>) {
        match self.subject.split_once('.') {
            Some((ind, prop)) => (ind, Some(prop)),
            None => (&self.subject, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyDecl {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub unit: String,
}

/// An individual of the vocabulary with its declared properties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndividualDecl {
    pub name: String,
    pub class: String,
    #[serde(default)]
    pub properties: Vec<PropertyDecl>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Context {
    #[serde(default)]
    pub individuals: Vec<IndividualDecl>,
    #[serde(default)]
    pub statements: Vec<ContextStatement>,
}

impl Context {
    fn declared_unit(&self, individual: &str, property: &str) -> Option<&str> {
        self.individuals
            .iter()
            .find(|i| i.name == individual)?
            .properties
            .iter()
            .find(|p| p.name == property)
            .map(|p| p.unit.as_str())
            .filter(|u| !u.is_empty())
    }

    fn declares(&self, individual: &str, property: Option<&str>) -> bool {
        self.individuals.iter().any(|i| {
            i.name == individual && property.is_none_or(|p| i.properties.iter().any(|d| d.name == p))
        })
    }

    /// Structural problems with the statements themselves.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, st) in self.statements.iter().enumerate() {
            if !(1..=6).contains(&st.layer) {
                out.push(format!("statement {k}: layer {} outside 1..=6", st.layer));
            }
            let (ind, prop) = st.split_subject();
            if !self.declares(ind, prop) {
                out.push(format!("statement {k}: `{}` is not declared in the vocabulary", st.subject));
            }
            match (st.kind, &st.constraint) {
                (StatementKind::Constraint, None) => out.push(format!("statement {k}: constraint without comparison")),
                (StatementKind::Constraint, Some(c)) => {
                    if prop.is_some() {
                        out.push(format!("statement {k}: constraint subject must be an individual"));
                    }
                    if !self.declares(ind, Some(&c.property)) {
                        out.push(format!("statement {k}: property `{ind}.{}` is not declared", c.property));
                    }
                    if let Operand::Property { individual, property } = &c.rhs {
                        if !self.declares(individual, Some(property)) {
                            out.push(format!("statement {k}: property `{individual}.{property}` is not declared"));
                        }
                    }
                }
                (_, Some(_)) => out.push(format!("statement {k}: {:?} statement carries a comparison", st.kind)),
                (_, None) => {}
            }
        }
        out
    }
}

/// Which variable encodes the phenomenon and which category is "CP".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhenomenonBinding {
    pub variable: NodeId,
    pub cp_label: String,
}

impl PhenomenonBinding {
    pub fn new(variable: impl Into<NodeId>, cp_label: impl Into<String>) -> Self {
        PhenomenonBinding { variable: variable.into(), cp_label: cp_label.into() }
    }
}

/// A causal structure with its context, phenomenon variable and metric
/// sink.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalRelation {
    pub structure: CausalStructure,
    pub specs: Vec<VariableSpec>,
    pub context: Context,
    pub phenomenon: PhenomenonBinding,
    pub metric: NodeId,
}

/// Clause of the causal-relation definition a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clause {
    /// binary phenomenon variable
    I,
    /// metric node without outgoing edges
    Ii,
    /// exogenous terms / node bookkeeping
    Iii,
    /// value range and unit per variable
    Iv,
    /// well-formed context
    V,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clause::I => "(i)",
            Clause::Ii => "(ii)",
            Clause::Iii => "(iii)",
            Clause::Iv => "(iv)",
            Clause::V => "(v)",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationViolation {
    pub clause: Clause,
    pub message: String,
}

impl fmt::Display for RelationViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "clause {}: {}", self.clause, self.message)
    }
}

/// Checks every clause; an empty list means the relation is well formed.
pub fn validate_causal_relation(cr: &CausalRelation) -> Vec<RelationViolation> {
    let mut out = Vec::new();
    let mut push = |clause, message: String| out.push(RelationViolation { clause, message });
    let s = &cr.structure;
    let spec_of = |name: &str| cr.specs.iter().find(|v| v.name == name);

    let x = &cr.phenomenon.variable;
    match spec_of(x) {
        _ if !s.contains(x) => push(Clause::I, format!("phenomenon variable `{x}` is not a node")),
        None => push(Clause::I, format!("phenomenon variable `{x}` has no spec")),
        Some(spec) => {
            if spec.cardinality() != 2 {
                push(Clause::I, format!("phenomenon variable `{x}` has {} categories, expected 2", spec.cardinality()));
            }
            if !spec.domain.contains(&cr.phenomenon.cp_label) {
                push(Clause::I, format!("`{}` is not a category of `{x}`", cr.phenomenon.cp_label));
            }
        }
    }

    let phi = &cr.metric;
    if !s.contains(phi) {
        push(Clause::Ii, format!("metric `{phi}` is not a node"));
    } else {
        let children = s.children(phi).unwrap_or_default();
        if !children.is_empty() {
            push(Clause::Ii, format!("metric `{phi}` has outgoing edges to {}", children.join(", ")));
        }
        if phi == x {
            push(Clause::Ii, "metric and phenomenon are the same node".into());
        }
        if s.is_latent(phi).unwrap_or(false) {
            push(Clause::Ii, format!("metric `{phi}` is marked latent"));
        }
        if let Some(spec) = spec_of(phi) {
            if spec.codes.iter().any(|&c| c < 0.0) {
                push(Clause::Ii, format!("metric `{phi}` has negative codes"));
            }
        }
    }

    let mut seen = BTreeSet::new();
    for spec in &cr.specs {
        if !s.contains(&spec.name) {
            push(Clause::Iii, format!("spec for unknown variable `{}`", spec.name));
        }
        if !seen.insert(spec.name.as_str()) {
            push(Clause::Iii, format!("variable `{}` specified twice", spec.name));
        }
    }

    for name in s.node_names() {
        match spec_of(name) {
            None => push(Clause::Iv, format!("variable `{name}` declares no value range")),
            Some(spec) => {
                if let Err(e) = spec.validate() {
                    push(Clause::Iv, e.to_string());
                }
                if spec.unit.trim().is_empty() {
                    push(Clause::Iv, format!("variable `{name}` declares no unit"));
                }
            }
        }
    }

    for p in cr.context.problems() {
        push(Clause::V, p);
    }
    out
}

/// A numeric or symbolic value with an optional unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantity {
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl Quantity {
    pub fn number(value: f64, unit: impl Into<String>) -> Self {
        Quantity { value: Value::Number(value), unit: Some(unit.into()) }
    }

    pub fn text(value: impl Into<String>) -> Self {
        Quantity { value: Value::Text(value.into()), unit: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservedIndividual {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default)]
    pub properties: BTreeMap<String, Quantity>,
}

/// One observed scenario: which individuals are present and their
/// property values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Record {
    pub individuals: BTreeMap<String, ObservedIndividual>,
}

impl Record {
    pub fn with_individual(mut self, name: impl Into<String>) -> Self {
        self.individuals.entry(name.into()).or_default();
        self
    }

    pub fn with_class(mut self, name: impl Into<String>, class: impl Into<String>) -> Self {
        self.individuals.entry(name.into()).or_default().class = Some(class.into());
        self
    }

    /// Sets `individual.property`, creating the individual if needed.
    pub fn with(mut self, key: &str, value: Quantity) -> Self {
        let (ind, prop) = key.split_once('.').unwrap_or((key, ""));
        self.individuals.entry(ind.to_string()).or_default().properties.insert(prop.to_string(), value);
        self
    }

    fn get(&self, individual: &str, property: &str) -> Option<&Quantity> {
        self.individuals.get(individual)?.properties.get(property)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordViolationKind {
    MissingIndividual,
    ClassMismatch,
    ForbiddenIndividual,
    MissingProperty,
    ConstraintFailed,
    UnitMismatch,
    TypeMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordViolation {
    pub statement: usize,
    pub layer: u8,
    pub kind: RecordViolationKind,
    pub message: String,
}

/// Checks a scenario record against every statement of the context.
/// Statements are evaluated independently, so adding a statement can only
/// add violations.
pub fn validate_record(context: &Context, record: &Record) -> Vec<RecordViolation> {
    let mut out = Vec::new();
    for (k, st) in context.statements.iter().enumerate() {
        let mut fail = |kind, message: String| out.push(RecordViolation { statement: k, layer: st.layer, kind, message });
        let (ind, prop) = st.split_subject();
        let present = match prop {
            None => record.individuals.contains_key(ind),
            Some(p) => record.get(ind, p).is_some(),
        };
        match st.kind {
            StatementKind::Existence => {
                if !present {
                    fail(RecordViolationKind::MissingIndividual, format!("`{}` must exist", st.subject));
                } else if let (Some(want), Some(obs)) = (&st.class, record.individuals.get(ind)) {
                    if obs.class.as_deref().is_some_and(|c| c != want) {
                        fail(RecordViolationKind::ClassMismatch, format!("`{ind}` must be of class {want}"));
                    }
                }
            }
            StatementKind::Absence => {
                if present {
                    fail(RecordViolationKind::ForbiddenIndividual, format!("`{}` must not exist", st.subject));
                }
            }
            StatementKind::Constraint => {
                let Some(cmp) = &st.constraint else { continue };
                let Some(lhs) = record.get(ind, &cmp.property) else {
                    fail(RecordViolationKind::MissingProperty, format!("`{ind}.{}` is not recorded", cmp.property));
                    continue;
                };
                let lhs_unit = lhs.unit.as_deref().or(context.declared_unit(ind, &cmp.property));
                let (rhs_value, rhs_unit, rhs_name) = match &cmp.rhs {
                    Operand::Literal { value, unit } => (value, unit.as_deref().or(lhs_unit), value.to_string()),
                    Operand::Property { individual, property } => match record.get(individual, property) {
                        Some(q) => (
                            &q.value,
                            q.unit.as_deref().or(context.declared_unit(individual, property)),
                            format!("{individual}.{property}"),
                        ),
                        None => {
                            fail(RecordViolationKind::MissingProperty, format!("`{individual}.{property}` is not recorded"));
                            continue;
                        }
                    },
                };
                if let (Some(a), Some(b)) = (lhs_unit, rhs_unit) {
                    if a != b {
                        fail(RecordViolationKind::UnitMismatch, format!("`{ind}.{}` in {a} compared with {rhs_name} in {b}", cmp.property));
                        continue;
                    }
                }
                let ord = match (&lhs.value, rhs_value) {
                    (Value::Number(a), Value::Number(b)) => a.partial_cmp(b),
                    (Value::Text(a), Value::Text(b)) if matches!(cmp.operator, Operator::Eq | Operator::Ne) => Some(a.cmp(b)),
                    _ => None,
                };
                match ord {
                    None => fail(RecordViolationKind::TypeMismatch, format!("cannot compare `{ind}.{}` {} {rhs_name}", cmp.property, cmp.operator)),
                    Some(o) if !cmp.operator.holds(o) => fail(
                        RecordViolationKind::ConstraintFailed,
                        format!("`{ind}.{}` = {} violates {} {rhs_name}", cmp.property, lhs.value, cmp.operator),
                    ),
                    Some(_) => {}
                }
            }
        }
    }
    out
}
