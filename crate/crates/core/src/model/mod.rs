//! Categorical variables, conditional probability tables and exact
//! inference by enumeration.
//!
//! A model may be partially instantiated: only the nodes carrying a CPD
//! take part in the Markov factorization. Observational queries are
//! answered from the CPD product whenever the queried nodes' ancestral set
//! is instantiated, and otherwise from the dataset the model was estimated
//! from (if it covers the queried columns).

mod dataset;
mod enumerate;
mod estimate;

pub use dataset::{Dataset, Provenance};
pub use estimate::{estimate_cpds, Estimation, EstimationWarning};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CausalStructure, GraphError, NodeId};

pub(crate) use enumerate::{increment, product_joint, Factor};

/// Models whose enumerated state space exceeds this are rejected.
pub const DEFAULT_STATE_LIMIT: u64 = 1 << 24;

/// Tolerance on CPD row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("model is not fully instantiated; missing CPDs for {}", .missing.join(", "))]
    NotFullyInstantiated { missing: Vec<NodeId> },
    #[error("query needs CPDs or data for {}", .missing.join(", "))]
    InsufficientInstantiation { missing: Vec<NodeId> },
    #[error("structure has bidirected arcs; the Markov factorization does not apply")]
    NotMarkovian,
    #[error("`{label}` is not a category of `{variable}`")]
    UnknownCategory { variable: NodeId, label: String },
    #[error("invalid variable spec for `{variable}`: {reason}")]
    InvalidSpec { variable: NodeId, reason: String },
    #[error("invalid CPD for `{child}`: {reason}")]
    InvalidCpd { child: NodeId, reason: String },
    #[error("conditioning event has probability zero")]
    ZeroProbabilityCondition,
    #[error("state space of {states} configurations exceeds the limit of {limit}")]
    StateSpaceTooLarge { states: u128, limit: u64 },
    #[error("assignment does not cover `{0}`")]
    IncompleteAssignment(NodeId),
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("row {row}, column `{column}`: unknown label `{label}`")]
    UnknownLabel { row: usize, column: NodeId, label: String },
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("duplicate dataset column `{0}`")]
    DuplicateColumn(NodeId),
}

/// A categorical variable: ordered category labels, one numeric code per
/// label (used in expectations), and a unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: NodeId,
    pub domain: Vec<String>,
    pub codes: Vec<f64>,
    pub unit: String,
    /// Value range of the underlying quantity before discretization.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub range: String,
}

impl VariableSpec {
    /// Spec whose codes are the category positions 0, 1, 2, ...
    pub fn new<S: Into<String>>(name: impl Into<NodeId>, domain: impl IntoIterator<Item = S>) -> Self {
        let domain: Vec<String> = domain.into_iter().map(Into::into).collect();
        let codes = (0..domain.len()).map(|i| i as f64).collect();
        VariableSpec { name: name.into(), domain, codes, unit: "1".into(), range: String::new() }
    }

    pub fn with_codes(mut self, codes: impl Into<Vec<f64>>) -> Self {
        self.codes = codes.into();
        self
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn with_range(mut self, range: impl Into<String>) -> Self {
        self.range = range.into();
        self
    }

    pub fn cardinality(&self) -> usize {
        self.domain.len()
    }

    pub fn category(&self, label: &str) -> Result<usize, ModelError> {
        self.domain.iter().position(|l| l == label).ok_or_else(|| ModelError::UnknownCategory {
            variable: self.name.clone(),
            label: label.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |reason: String| Err(ModelError::InvalidSpec { variable: self.name.clone(), reason });
        if self.domain.is_empty() {
            return fail("empty domain".into());
        }
        let unique: BTreeSet<&String> = self.domain.iter().collect();
        if unique.len() != self.domain.len() {
            return fail("duplicate category label".into());
        }
        if self.codes.len() != self.domain.len() {
            return fail(format!("{} codes for {} categories", self.codes.len(), self.domain.len()));
        }
        if self.codes.iter().any(|c| !c.is_finite()) {
            return fail("non-finite code".into());
        }
        Ok(())
    }
}

/// Conditional distribution of `child` given `parents` (sorted by name).
/// Rows enumerate parent assignments with the rightmost parent varying
/// fastest; each row lists the child's categories in domain order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cpd {
    pub child: NodeId,
    pub parents: Vec<NodeId>,
    pub table: Vec<f64>,
}

impl Cpd {
    pub fn new<S: Into<NodeId>>(child: impl Into<NodeId>, parents: impl IntoIterator<Item = S>, table: impl Into<Vec<f64>>) -> Self {
        Cpd { child: child.into(), parents: parents.into_iter().map(Into::into).collect(), table: table.into() }
    }

    /// Unconditional distribution of a root node.
    pub fn prior(child: impl Into<NodeId>, table: impl Into<Vec<f64>>) -> Self {
        Cpd { child: child.into(), parents: Vec::new(), table: table.into() }
    }

    pub fn rows(&self, child_card: usize) -> impl Iterator<Item = &[f64]> {
        self.table.chunks(child_card)
    }
}

/// A causal structure with per-node variable specs and CPDs for the
/// instantiated nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    structure: CausalStructure,
    specs: Vec<VariableSpec>,
    cpds: Vec<Option<Cpd>>,
    observed: Option<Dataset>,
    state_limit: u64,
}

impl DiscreteModel {
    /// Every node needs exactly one spec; CPDs are optional per node.
    pub fn new(
        structure: CausalStructure,
        specs: impl IntoIterator<Item = VariableSpec>,
        cpds: impl IntoIterator<Item = Cpd>,
    ) -> Result<Self, ModelError> {
        let n = structure.len();
        let mut slots: Vec<Option<VariableSpec>> = vec![None; n];
        for spec in specs {
            spec.validate()?;
            let i = structure.index_of(&spec.name)?;
            if slots[i].is_some() {
                return Err(ModelError::InvalidSpec { variable: spec.name, reason: "declared twice".into() });
            }
            slots[i] = Some(spec);
        }
        let specs: Vec<VariableSpec> = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                s.ok_or_else(|| ModelError::InvalidSpec {
                    variable: structure.name(i).to_string(),
                    reason: "no variable spec".into(),
                })
            })
            .collect::<Result<_, _>>()?;

        let mut model = DiscreteModel {
            structure,
            specs,
            cpds: vec![None; n],
            observed: None,
            state_limit: DEFAULT_STATE_LIMIT,
        };
        for cpd in cpds {
            model.insert_cpd(cpd)?;
        }
        Ok(model)
    }

    /// Structure and specs only; no node instantiated.
    pub fn uninstantiated(structure: CausalStructure, specs: impl IntoIterator<Item = VariableSpec>) -> Result<Self, ModelError> {
        Self::new(structure, specs, Vec::new())
    }

    fn insert_cpd(&mut self, cpd: Cpd) -> Result<(), ModelError> {
        let i = self.structure.index_of(&cpd.child)?;
        let fail = |reason: String| Err(ModelError::InvalidCpd { child: cpd.child.clone(), reason });
        if self.cpds[i].is_some() {
            return fail("declared twice".into());
        }
        let expected: Vec<&str> = self.structure.parents_at(i).iter().map(|&p| self.structure.name(p)).collect();
        if cpd.parents.iter().map(String::as_str).ne(expected.iter().copied()) {
            return fail(format!("parents {:?} differ from graph parents {:?}", cpd.parents, expected));
        }
        let card = self.specs[i].cardinality();
        let rows: usize = self.structure.parents_at(i).iter().map(|&p| self.specs[p].cardinality()).product();
        if cpd.table.len() != card * rows {
            return fail(format!("table has {} entries, expected {}", cpd.table.len(), card * rows));
        }
        if let Some(bad) = cpd.table.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return fail(format!("entry {bad} outside [0, 1]"));
        }
        for (r, row) in cpd.rows(card).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return fail(format!("row {r} sums to {sum}"));
            }
        }
        self.cpds[i] = Some(cpd);
        Ok(())
    }

    pub fn with_state_limit(mut self, limit: u64) -> Self {
        self.state_limit = limit;
        self
    }

    pub(crate) fn with_observations(mut self, data: Dataset) -> Self {
        self.observed = Some(data);
        self
    }

    pub fn structure(&self) -> &CausalStructure {
        &self.structure
    }

    pub fn specs(&self) -> &[VariableSpec] {
        &self.specs
    }

    pub fn spec(&self, name: &str) -> Result<&VariableSpec, ModelError> {
        Ok(&self.specs[self.structure.index_of(name)?])
    }

    pub(crate) fn spec_at(&self, i: usize) -> &VariableSpec {
        &self.specs[i]
    }

    pub fn cpd(&self, name: &str) -> Result<Option<&Cpd>, ModelError> {
        Ok(self.cpds[self.structure.index_of(name)?].as_ref())
    }

    pub(crate) fn cpd_at(&self, i: usize) -> Option<&Cpd> {
        self.cpds[i].as_ref()
    }

    pub fn cpds(&self) -> impl Iterator<Item = &Cpd> {
        self.cpds.iter().flatten()
    }

    /// The dataset this model was estimated from, if any.
    pub fn observations(&self) -> Option<&Dataset> {
        self.observed.as_ref()
    }

    /// Nodes carrying a CPD.
    pub fn instantiated(&self) -> BTreeSet<NodeId> {
        (0..self.structure.len())
            .filter(|&i| self.cpds[i].is_some())
            .map(|i| self.structure.name(i).to_string())
            .collect()
    }

    /// Every observed (non-latent) node carries a CPD.
    pub fn is_fully_instantiated(&self) -> bool {
        (0..self.structure.len()).all(|i| self.cpds[i].is_some() || self.structure.latent_at(i))
    }

    fn missing_cpds(&self, mask: &[bool]) -> Vec<NodeId> {
        (0..self.structure.len())
            .filter(|&i| mask[i] && self.cpds[i].is_none())
            .map(|i| self.structure.name(i).to_string())
            .collect()
    }

    /// Every node carries a CPD and the structure is Markovian, so the
    /// full joint is the product of the CPDs.
    pub(crate) fn require_complete(&self) -> Result<(), ModelError> {
        if !self.structure.is_markovian() {
            return Err(ModelError::NotMarkovian);
        }
        let missing = self.missing_cpds(&vec![true; self.structure.len()]);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(ModelError::NotFullyInstantiated { missing })
        }
    }

    /// Category indices for a full `node -> label` assignment.
    fn resolve<S: AsRef<str>, L: AsRef<str>>(&self, assignment: &[(S, L)]) -> Result<Vec<(usize, usize)>, ModelError> {
        assignment
            .iter()
            .map(|(n, l)| {
                let i = self.structure.index_of(n.as_ref())?;
                Ok((i, self.specs[i].category(l.as_ref())?))
            })
            .collect()
    }

    /// `P(v)` for a full assignment, as the product of CPD entries.
    pub fn joint_probability<S: AsRef<str>, L: AsRef<str>>(&self, assignment: &[(S, L)]) -> Result<f64, ModelError> {
        self.require_complete()?;
        let mut states = vec![usize::MAX; self.structure.len()];
        for (i, c) in self.resolve(assignment)? {
            states[i] = c;
        }
        if let Some(i) = states.iter().position(|&s| s == usize::MAX) {
            return Err(ModelError::IncompleteAssignment(self.structure.name(i).to_string()));
        }
        Ok((0..states.len()).map(|i| self.cpd_entry(i, &states)).product())
    }

    /// `P(child = states[child] | parents = states[parents])`.
    pub(crate) fn cpd_entry(&self, i: usize, states: &[usize]) -> f64 {
        let cpd = self.cpds[i].as_ref().expect("instantiated node");
        let mut row = 0;
        for &p in self.structure.parents_at(i) {
            row = row * self.specs[p].cardinality() + states[p];
        }
        cpd.table[row * self.specs[i].cardinality() + states[i]]
    }

    /// Exact joint of `nodes` (sorted indices) from observational
    /// information: the CPD product over their ancestral set, or failing
    /// that, the empirical distribution of the estimation dataset.
    pub(crate) fn observational_joint(&self, nodes: &[usize]) -> Result<Factor, ModelError> {
        let ancestral = self.structure.ancestor_mask(nodes);
        let missing = self.missing_cpds(&ancestral);
        let confounded = self.structure.bidirected_at().iter().any(|&(a, b)| ancestral[a] || ancestral[b]);
        if missing.is_empty() && !confounded {
            let members: Vec<usize> = (0..ancestral.len()).filter(|&i| ancestral[i]).collect();
            return Ok(enumerate::product_joint(self, &members)?.marginalize(nodes));
        }
        if let Some(data) = &self.observed {
            if let Some(f) = data.empirical_joint(&self.structure, nodes) {
                return Ok(f);
            }
        }
        if !missing.is_empty() {
            Err(ModelError::InsufficientInstantiation { missing })
        } else {
            Err(ModelError::NotMarkovian)
        }
    }

    /// `P(targets | given)` by exact marginalization.
    pub fn marginal<S, G, L>(&self, targets: &[S], given: &[(G, L)]) -> Result<Distribution, ModelError>
    where
        S: AsRef<str>,
        G: AsRef<str>,
        L: AsRef<str>,
    {
        let target_idx = self.structure.indices_of(targets)?;
        let evidence = self.resolve(given)?;
        self.conditional(&target_idx, &evidence)
    }

    pub(crate) fn conditional(&self, targets: &[usize], evidence: &[(usize, usize)]) -> Result<Distribution, ModelError> {
        let mut all: Vec<usize> = targets.iter().copied().chain(evidence.iter().map(|e| e.0)).collect();
        all.sort_unstable();
        all.dedup();
        let joint = self.observational_joint(&all)?;
        let reduced = joint.condition(evidence).marginalize(targets);
        let total: f64 = reduced.values.iter().sum();
        if total <= 0.0 {
            return Err(ModelError::ZeroProbabilityCondition);
        }
        Ok(self.distribution(reduced.scale(1.0 / total)))
    }

    pub(crate) fn distribution(&self, f: Factor) -> Distribution {
        Distribution {
            variables: f.vars.iter().map(|&v| self.structure.name(v).to_string()).collect(),
            labels: f.vars.iter().map(|&v| self.specs[v].domain.clone()).collect(),
            probs: f.values,
        }
    }

    /// Forward sampling in topological order; pure in `(model, n, seed)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset, ModelError> {
        estimate::forward_sample(self, n, seed)
    }

    pub(crate) fn state_limit(&self) -> u64 {
        self.state_limit
    }

    /// Copy with the given nodes clamped: incoming arcs removed and the CPD
    /// replaced by a point mass. Estimation data is dropped because it is
    /// observational.
    pub(crate) fn surgered(&self, clamp: &[(usize, usize)]) -> Result<DiscreteModel, ModelError> {
        let names: Vec<&str> = clamp.iter().map(|&(i, _)| self.structure.name(i)).collect();
        let structure = self.structure.do_surgery(&names)?;
        let mut cpds = self.cpds.clone();
        for &(i, c) in clamp {
            let mut table = vec![0.0; self.specs[i].cardinality()];
            table[c] = 1.0;
            cpds[i] = Some(Cpd::prior(self.structure.name(i), table));
        }
        Ok(DiscreteModel { structure, specs: self.specs.clone(), cpds, observed: None, state_limit: self.state_limit })
    }
}

/// A table over one or more variables. Row-major with the last variable
/// varying fastest; variables in sorted name order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub variables: Vec<NodeId>,
    pub labels: Vec<Vec<String>>,
    pub probs: Vec<f64>,
}

impl Distribution {
    /// Probability of one joint configuration, labels in variable order.
    pub fn prob<L: AsRef<str>>(&self, labels: &[L]) -> Option<f64> {
        if labels.len() != self.variables.len() {
            return None;
        }
        let mut index = 0;
        for (dom, l) in self.labels.iter().zip(labels) {
            index = index * dom.len() + dom.iter().position(|d| d == l.as_ref())?;
        }
        Some(self.probs[index])
    }

    /// Largest absolute difference; `None` when the tables are not over
    /// the same variables.
    pub fn max_abs_diff(&self, other: &Distribution) -> Option<f64> {
        if self.variables != other.variables || self.labels != other.labels {
            return None;
        }
        Some(self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Iterates `(labels, probability)` pairs in table order.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<&str>, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(mut idx, &p)| {
            let mut labels = vec![""; self.labels.len()];
            for (k, dom) in self.labels.iter().enumerate().rev() {
                labels[k] = &dom[idx % dom.len()];
                idx /= dom.len();
            }
            (labels, p)
        })
    }
}

/// Convenience for building `node -> label` maps.
pub fn assignment<'a>(pairs: &[(&'a str, &'a str)]) -> BTreeMap<&'a str, &'a str> {
    pairs.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const NO_EVIDENCE: &[(&str, &str)] = &[];

    fn binary(name: &str) -> VariableSpec {
        VariableSpec::new(name, ["a", "b"])
    }

    fn chain_model() -> DiscreteModel {
        let s = CausalStructure::builder().nodes(["A", "B"]).edge("A", "B").build().unwrap();
        DiscreteModel::new(
            s,
            [binary("A"), binary("B")],
            [Cpd::prior("A", [0.3, 0.7]), Cpd::new("B", ["A"], [0.9, 0.1, 0.2, 0.8])],
        )
        .unwrap()
    }

    #[test]
    fn single_node_joint() {
        let s = CausalStructure::builder().node("A").build().unwrap();
        let m = DiscreteModel::new(s, [binary("A")], [Cpd::prior("A", [0.3, 0.7])]).unwrap();
        assert!((m.joint_probability(&[("A", "a")]).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn joint_sums_to_one() {
        let m = chain_model();
        let mut total = 0.0;
        for a in ["a", "b"] {
            for b in ["a", "b"] {
                total += m.joint_probability(&[("A", a), ("B", b)]).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_and_conditional() {
        let m = chain_model();
        let pb = m.marginal(&["B"], NO_EVIDENCE).unwrap();
        // 0.3*0.1 + 0.7*0.8
        assert!((pb.prob(&["b"]).unwrap() - 0.59).abs() < 1e-12);
        let pa = m.marginal(&["A"], &[("B", "b")]).unwrap();
        assert!((pa.prob(&["a"]).unwrap() - 0.03 / 0.59).abs() < 1e-12);
        let prior = m.marginal(&["A"], NO_EVIDENCE).unwrap();
        assert_eq!(prior.probs, vec![0.3, 0.7]);
    }

    #[test]
    fn zero_probability_condition() {
        let s = CausalStructure::builder().nodes(["A", "B"]).edge("A", "B").build().unwrap();
        let m = DiscreteModel::new(
            s,
            [binary("A"), binary("B")],
            [Cpd::prior("A", [1.0, 0.0]), Cpd::new("B", ["A"], [0.5, 0.5, 0.5, 0.5])],
        )
        .unwrap();
        assert_eq!(m.marginal(&["B"], &[("A", "b")]).unwrap_err(), ModelError::ZeroProbabilityCondition);
    }

    #[test]
    fn cpd_validation() {
        let s = CausalStructure::builder().nodes(["A", "B"]).edge("A", "B").build().unwrap();
        let bad_sum = DiscreteModel::new(s.clone(), [binary("A"), binary("B")], [Cpd::prior("A", [0.3, 0.6])]);
        assert!(matches!(bad_sum, Err(ModelError::InvalidCpd { .. })));
        let bad_parents = DiscreteModel::new(s.clone(), [binary("A"), binary("B")], [Cpd::prior("B", [0.5, 0.5])]);
        assert!(matches!(bad_parents, Err(ModelError::InvalidCpd { .. })));
        let bad_size = DiscreteModel::new(s.clone(), [binary("A"), binary("B")], [Cpd::new("B", ["A"], [1.0, 0.0])]);
        assert!(matches!(bad_size, Err(ModelError::InvalidCpd { .. })));
        let negative = DiscreteModel::new(s.clone(), [binary("A"), binary("B")], [Cpd::prior("A", [1.5, -0.5])]);
        assert!(matches!(negative, Err(ModelError::InvalidCpd { .. })));
        let missing_spec = DiscreteModel::new(s, [binary("A")], Vec::<Cpd>::new());
        assert!(matches!(missing_spec, Err(ModelError::InvalidSpec { .. })));
    }

    #[test]
    fn spec_validation() {
        assert!(VariableSpec::new("A", ["x", "x"]).validate().is_err());
        assert!(VariableSpec::new("A", ["x"]).with_codes([f64::NAN]).validate().is_err());
        assert!(VariableSpec::new("A", ["x", "y"]).with_codes([1.0]).validate().is_err());
        assert!(VariableSpec::new("A", Vec::<String>::new()).validate().is_err());
        assert!(VariableSpec::new("A", ["x"]).validate().is_ok());
    }

    #[test]
    fn partial_instantiation_answers_ancestral_queries() {
        let s = CausalStructure::builder().nodes(["A", "B"]).edge("A", "B").build().unwrap();
        let m = DiscreteModel::new(s, [binary("A"), binary("B")], [Cpd::prior("A", [0.3, 0.7])]).unwrap();
        assert!(!m.is_fully_instantiated());
        assert!(m.marginal(&["A"], NO_EVIDENCE).is_ok());
        assert_eq!(
            m.marginal(&["B"], NO_EVIDENCE).unwrap_err(),
            ModelError::InsufficientInstantiation { missing: vec!["B".into()] }
        );
        assert!(matches!(m.joint_probability(&[("A", "a"), ("B", "a")]), Err(ModelError::NotFullyInstantiated { .. })));
    }

    #[test]
    fn state_limit_is_enforced() {
        let m = chain_model().with_state_limit(2);
        assert!(matches!(m.marginal(&["B"], NO_EVIDENCE), Err(ModelError::StateSpaceTooLarge { states: 4, limit: 2 })));
    }

    #[test]
    fn unknown_category() {
        let m = chain_model();
        assert!(matches!(m.joint_probability(&[("A", "z"), ("B", "a")]), Err(ModelError::UnknownCategory { .. })));
    }

    #[test]
    fn distribution_entries_follow_table_order() {
        let m = chain_model();
        let d = m.marginal(&["A", "B"], NO_EVIDENCE).unwrap();
        let labels: Vec<Vec<&str>> = d.entries().map(|(l, _)| l).collect();
        assert_eq!(labels, vec![vec!["a", "a"], vec!["a", "b"], vec!["b", "a"], vec!["b", "b"]]);
        assert!((d.prob(&["b", "b"]).unwrap() - 0.56).abs() < 1e-12);
    }
}
