//! Interventional distributions and safety-principle evaluation.
//!
//! Three routes compute `P(target | do(x))`:
//!
//! * truncated factorization on the surgered model (needs a fully
//!   instantiated Markovian model, allows multi-node interventions);
//! * parent adjustment `Σ_pa P(t | x, pa) P(pa)`;
//! * back-door adjustment `Σ_s P(t | x, s) P(s)` over a checked admissible
//!   set.
//!
//! The adjustment routes only need the joint of `{x, t} ∪ set`, so they
//! also work on partially instantiated models (CPD products over
//! instantiated ancestral sets, or the estimation data).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::PhenomenonBinding;
use crate::graph::{GraphError, NodeId};
use crate::model::{DiscreteModel, Distribution, ModelError};

/// Adjustment sets tried before giving up on identification.
const ADJUSTMENT_SEARCH_LIMIT: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("parents of `{node}` lack CPDs or data: {}", .missing.join(", "))]
    ParentsNotInstantiated { node: NodeId, missing: Vec<NodeId> },
    #[error("{{{}}} is not back-door admissible for ({x}, {target})", .set.join(", "))]
    NotAdmissible { set: Vec<NodeId>, x: NodeId, target: NodeId },
    #[error("route `{0}` supports single-node interventions only")]
    MultiNodeIntervention(Route),
    #[error("effect of `{x}` on `{target}` is not identifiable from the instantiated nodes")]
    NotIdentifiable { x: NodeId, target: NodeId },
    #[error("invalid intervention `{0}`; expected node=label[,node=label...]")]
    InvalidIntervention(String),
    #[error("phenomenon variable `{variable}` has {categories} categories; exactly 2 are required")]
    NotBinary { variable: NodeId, categories: usize },
    #[error("safety principle `{0}` does not intervene on anything")]
    EmptyIntervention(String),
}

impl From<GraphError> for EngineError {
    fn from(e: GraphError) -> Self {
        EngineError::Model(ModelError::Graph(e))
    }
}

/// Atomic `do(node = label, ...)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Intervention {
    assignments: BTreeMap<NodeId, String>,
}

impl Intervention {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(node: impl Into<NodeId>, label: impl Into<String>) -> Self {
        Self::new().set(node, label)
    }

    pub fn set(mut self, node: impl Into<NodeId>, label: impl Into<String>) -> Self {
        self.assignments.insert(node.into(), label.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.assignments.iter().map(|(n, l)| (n.as_str(), l.as_str()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.assignments.keys().map(String::as_str)
    }

    /// Node and category indices, checked against the model.
    fn resolve(&self, m: &DiscreteModel) -> Result<Vec<(usize, usize)>, EngineError> {
        self.iter()
            .map(|(n, l)| {
                let i = m.structure().index_of(n)?;
                Ok((i, m.spec_at(i).category(l)?))
            })
            .collect()
    }
}

impl FromStr for Intervention {
    type Err = EngineError;

    /// Parses `node=label,node=label`; the empty string is the empty
    /// intervention.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Intervention::new();
        if s.trim().is_empty() {
            return Ok(out);
        }
        for part in s.split(',') {
            let (node, label) = part.split_once('=').ok_or_else(|| EngineError::InvalidIntervention(s.to_string()))?;
            let (node, label) = (node.trim(), label.trim());
            if node.is_empty() || label.is_empty() || out.assignments.contains_key(node) {
                return Err(EngineError::InvalidIntervention(s.to_string()));
            }
            out.assignments.insert(node.to_string(), label.to_string());
        }
        Ok(out)
    }
}

impl fmt::Display for Intervention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(n, l)| format!("{n}={l}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// An intervention proposed to reduce the phenomenon or its effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyPrinciple {
    pub name: String,
    pub intervention: Intervention,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// Truncated factorization when possible, else parent adjustment, else
    /// the first computable back-door set.
    #[default]
    Auto,
    Truncated,
    ParentAdjust,
    Backdoor,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Auto => "auto",
            Route::Truncated => "truncated",
            Route::ParentAdjust => "parent-adjust",
            Route::Backdoor => "backdoor",
        })
    }
}

impl FromStr for Route {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Route::Auto),
            "truncated" => Ok(Route::Truncated),
            "parent-adjust" => Ok(Route::ParentAdjust),
            "backdoor" => Ok(Route::Backdoor),
            other => Err(format!("unknown route `{other}`")),
        }
    }
}

/// `P(target | do(i))` by surgery and exact enumeration of the truncated
/// product.
pub fn interventional_truncated(m: &DiscreteModel, i: &Intervention, target: &str) -> Result<Distribution, EngineError> {
    m.require_complete()?;
    let t = m.structure().index_of(target)?;
    let clamp = i.resolve(m)?;
    Ok(m.surgered(&clamp)?.conditional(&[t], &[])?)
}

/// `Σ_pa P(target | x, pa) P(pa)` for a single-node intervention.
pub fn interventional_parent_adjust(m: &DiscreteModel, i: &Intervention, target: &str) -> Result<Distribution, EngineError> {
    let (x, xc) = single(m, i, Route::ParentAdjust)?;
    let s = m.structure();
    let t = s.index_of(target)?;
    let parents = s.parents_at(x).to_vec();
    if t == x {
        return point_mass(m, x, xc);
    }
    // A parent of x is not affected by do(x).
    if parents.contains(&t) {
        return Ok(m.conditional(&[t], &[])?);
    }
    let latent: Vec<NodeId> = parents.iter().filter(|&&p| s.latent_at(p)).map(|&p| s.name(p).to_string()).collect();
    if !latent.is_empty() {
        return Err(EngineError::ParentsNotInstantiated { node: s.name(x).to_string(), missing: latent });
    }
    let names: Vec<&str> = parents.iter().map(|&p| s.name(p)).collect();
    if !s.backdoor_admissible(&names, s.name(x), target)? {
        return Err(not_admissible(m, &parents, x, t));
    }
    adjust(m, x, xc, t, &parents).map_err(|e| match e {
        EngineError::Model(ModelError::InsufficientInstantiation { missing }) => {
            EngineError::ParentsNotInstantiated { node: s.name(x).to_string(), missing }
        }
        other => other,
    })
}

/// `Σ_s P(target | x, s) P(s)` after checking that `set` is back-door
/// admissible.
pub fn interventional_backdoor<S: AsRef<str>>(
    m: &DiscreteModel,
    i: &Intervention,
    target: &str,
    set: &[S],
) -> Result<Distribution, EngineError> {
    let (x, xc) = single(m, i, Route::Backdoor)?;
    let s = m.structure();
    let t = s.index_of(target)?;
    let members = s.indices_of(set)?;
    if t == x && members.is_empty() {
        return point_mass(m, x, xc);
    }
    if !s.backdoor_admissible(set, s.name(x), target)? {
        return Err(not_admissible(m, &members, x, t));
    }
    adjust(m, x, xc, t, &members)
}

/// Dispatches on `route`; the empty intervention yields the observational
/// marginal on every route.
pub fn interventional(m: &DiscreteModel, i: &Intervention, target: &str, route: Route) -> Result<Distribution, EngineError> {
    if i.is_empty() {
        let t = m.structure().index_of(target)?;
        return Ok(m.conditional(&[t], &[])?);
    }
    match route {
        Route::Truncated => interventional_truncated(m, i, target),
        Route::ParentAdjust => interventional_parent_adjust(m, i, target),
        Route::Backdoor => first_backdoor(m, i, target),
        Route::Auto => {
            if m.require_complete().is_ok() {
                return interventional_truncated(m, i, target);
            }
            if i.len() > 1 {
                m.require_complete()?;
            }
            match interventional_parent_adjust(m, i, target) {
                Ok(d) => Ok(d),
                Err(EngineError::ParentsNotInstantiated { .. } | EngineError::NotAdmissible { .. }) => {
                    first_backdoor(m, i, target)
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// `Σ_c code(c) P(target = c | do(i))` via the automatic route.
pub fn interventional_expectation(m: &DiscreteModel, i: &Intervention, target: &str) -> Result<f64, EngineError> {
    expectation_via(m, i, target, Route::Auto)
}

pub fn expectation_via(m: &DiscreteModel, i: &Intervention, target: &str, route: Route) -> Result<f64, EngineError> {
    let d = interventional(m, i, target, route)?;
    Ok(expectation_of(m, &d, target)?)
}

/// Expectation of a single-variable distribution under the variable's
/// codes.
pub fn expectation_of(m: &DiscreteModel, d: &Distribution, target: &str) -> Result<f64, ModelError> {
    let codes = &m.spec(target)?.codes;
    Ok(d.probs.iter().zip(codes).map(|(p, c)| p * c).sum())
}

/// Category indices `(variable, cp, not_cp)` of a binary phenomenon.
pub(crate) fn phenomenon_categories(m: &DiscreteModel, cp: &PhenomenonBinding) -> Result<(usize, usize, usize), EngineError> {
    let x = m.structure().index_of(&cp.variable)?;
    let spec = m.spec_at(x);
    if spec.cardinality() != 2 {
        return Err(EngineError::NotBinary { variable: cp.variable.clone(), categories: spec.cardinality() });
    }
    let c = spec.category(&cp.cp_label)?;
    Ok((x, c, 1 - c))
}

/// Label of the category that is not the phenomenon.
pub fn not_cp_label(m: &DiscreteModel, cp: &PhenomenonBinding) -> Result<String, EngineError> {
    let (x, _, not_cp) = phenomenon_categories(m, cp)?;
    Ok(m.spec_at(x).domain[not_cp].clone())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SafetyWarning {
    /// The intervened node is neither an ancestor of the phenomenon nor of
    /// the metric (it may still act downstream of the phenomenon).
    TargetNotAncestor { node: NodeId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub principle: String,
    pub intervention: Intervention,
    pub p_cp: f64,
    pub p_cp_do: f64,
    pub delta_p_cp: f64,
    pub e_phi: f64,
    pub e_phi_do: f64,
    pub delta_e_phi: f64,
    pub warnings: Vec<SafetyWarning>,
}

/// `ΔP(CP) = P(X=CP | do(sp)) − P(X=CP)` and `ΔE(φ) = E(φ | do(sp)) − E(φ)`.
pub fn evaluate_safety_principle(
    m: &DiscreteModel,
    sp: &SafetyPrinciple,
    cp: &PhenomenonBinding,
    metric: &str,
) -> Result<SafetyReport, EngineError> {
    if sp.intervention.is_empty() {
        return Err(EngineError::EmptyIntervention(sp.name.clone()));
    }
    let (x, c, _) = phenomenon_categories(m, cp)?;
    let s = m.structure();
    let phi = s.index_of(metric)?;
    let upstream = s.ancestor_mask(&[x, phi]);
    let mut warnings = Vec::new();
    for (node, _) in sp.intervention.resolve(m)? {
        if !upstream[node] {
            warnings.push(SafetyWarning::TargetNotAncestor { node: s.name(node).to_string() });
        }
    }
    let none = Intervention::new();
    let p_cp = interventional(m, &none, &cp.variable, Route::Auto)?.probs[c];
    let p_cp_do = interventional(m, &sp.intervention, &cp.variable, Route::Auto)?.probs[c];
    let e_phi = expectation_via(m, &none, metric, Route::Auto)?;
    let e_phi_do = expectation_via(m, &sp.intervention, metric, Route::Auto)?;
    Ok(SafetyReport {
        principle: sp.name.clone(),
        intervention: sp.intervention.clone(),
        p_cp,
        p_cp_do,
        delta_p_cp: p_cp_do - p_cp,
        e_phi,
        e_phi_do,
        delta_e_phi: e_phi_do - e_phi,
        warnings,
    })
}

fn single(m: &DiscreteModel, i: &Intervention, route: Route) -> Result<(usize, usize), EngineError> {
    match i.resolve(m)?.as_slice() {
        [one] => Ok(*one),
        _ => Err(EngineError::MultiNodeIntervention(route)),
    }
}

fn point_mass(m: &DiscreteModel, x: usize, xc: usize) -> Result<Distribution, EngineError> {
    let mut probs = vec![0.0; m.spec_at(x).cardinality()];
    probs[xc] = 1.0;
    let spec = m.spec_at(x);
    Ok(Distribution { variables: vec![spec.name.clone()], labels: vec![spec.domain.clone()], probs })
}

fn not_admissible(m: &DiscreteModel, set: &[usize], x: usize, t: usize) -> EngineError {
    let s = m.structure();
    EngineError::NotAdmissible {
        set: set.iter().map(|&v| s.name(v).to_string()).collect(),
        x: s.name(x).to_string(),
        target: s.name(t).to_string(),
    }
}

fn first_backdoor(m: &DiscreteModel, i: &Intervention, target: &str) -> Result<Distribution, EngineError> {
    let (x, _) = single(m, i, Route::Backdoor)?;
    let s = m.structure();
    let x_name = s.name(x);
    if x_name == target {
        return interventional_backdoor(m, i, target, &[] as &[&str]);
    }
    for set in s.enumerate_adjustment_sets(x_name, target, ADJUSTMENT_SEARCH_LIMIT)? {
        let set: Vec<&str> = set.iter().map(String::as_str).collect();
        match interventional_backdoor(m, i, target, &set) {
            Err(EngineError::Model(ModelError::InsufficientInstantiation { .. } | ModelError::NotMarkovian)) => continue,
            other => return other,
        }
    }
    Err(EngineError::NotIdentifiable { x: x_name.to_string(), target: target.to_string() })
}

/// Adjustment formula over the observational joint of `{x, t} ∪ z`.
/// Positivity is required: a `z` configuration with `P(z) > 0` but
/// `P(x, z) = 0` raises [`ModelError::ZeroProbabilityCondition`].
fn adjust(m: &DiscreteModel, x: usize, xc: usize, t: usize, z: &[usize]) -> Result<Distribution, EngineError> {
    let vars: Vec<usize> = [x, t].into_iter().chain(z.iter().copied()).collect::<BTreeSet<_>>().into_iter().collect();
    let joint = m.observational_joint(&vars)?;
    let pos = |v: usize| vars.iter().position(|&w| w == v).expect("variable in joint");
    let (px, pt) = (pos(x), pos(t));
    let pz: Vec<usize> = z.iter().map(|&v| pos(v)).collect();
    let z_cards: Vec<usize> = pz.iter().map(|&p| joint.cards[p]).collect();
    let n_z: usize = z_cards.iter().product();
    let t_card = joint.cards[pt];

    let mut p_z = vec![0.0; n_z];
    let mut p_xz = vec![0.0; n_z];
    let mut p_txz = vec![0.0; n_z * t_card];
    let mut state = vec![0usize; vars.len()];
    for &p in &joint.values {
        let zi = pz.iter().zip(&z_cards).fold(0, |acc, (&k, &c)| acc * c + state[k]);
        p_z[zi] += p;
        if state[px] == xc {
            p_xz[zi] += p;
            p_txz[zi * t_card + state[pt]] += p;
        }
        crate::model::increment(&mut state, &joint.cards);
    }

    let mut probs = vec![0.0; t_card];
    for zi in 0..n_z {
        if p_z[zi] == 0.0 {
            continue;
        }
        if p_xz[zi] == 0.0 {
            return Err(ModelError::ZeroProbabilityCondition.into());
        }
        for (tc, prob) in probs.iter_mut().enumerate() {
            *prob += p_z[zi] * p_txz[zi * t_card + tc] / p_xz[zi];
        }
    }
    let spec = m.spec_at(t);
    Ok(Distribution { variables: vec![spec.name.clone()], labels: vec![spec.domain.clone()], probs })
}
