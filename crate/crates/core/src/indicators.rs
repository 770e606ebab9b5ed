//! Causality indicators: effect sizes of the phenomenon on the metric
//! (ACE, RCE, σ) and divergences between a candidate model and a reference
//! (ρ1, ρ2, ρ3).
//!
//! Every report records the conventions it used (log base, KL argument
//! order, metric codes) so a value can be reproduced from the report alone.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::PhenomenonBinding;
use crate::engine::{self, EngineError, Intervention, Route};
use crate::graph::{GraphError, NodeId};
use crate::model::{Cpd, DiscreteModel, Distribution, ModelError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndicatorError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("KL divergence is infinite: p > 0 where q = 0 at {0}")]
    InfiniteDivergence(String),
    #[error("distributions are over different supports: {0}")]
    SupportMismatch(String),
    #[error("E(metric | do(not CP)) is zero; RCE is undefined")]
    DivisionByZeroEffect,
    #[error("E(metric) is zero; sigma is undefined")]
    ZeroMeanCriticality,
    #[error("`{from} -> {to}` is not an edge of the model")]
    UnknownEdge { from: NodeId, to: NodeId },
}

impl From<ModelError> for IndicatorError {
    fn from(e: ModelError) -> Self {
        IndicatorError::Engine(e.into())
    }
}

impl From<GraphError> for IndicatorError {
    fn from(e: GraphError) -> Self {
        IndicatorError::Engine(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    /// Natural logarithm; values in nats.
    #[default]
    Nats,
    /// Base 2; values in bits.
    Bits,
}

impl LogBase {
    fn scale(self, nats: f64) -> f64 {
        match self {
            LogBase::Nats => nats,
            LogBase::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IndicatorName {
    #[serde(rename = "ACE")]
    Ace,
    #[serde(rename = "RCE")]
    Rce,
    #[serde(rename = "sigma")]
    Sigma,
    #[serde(rename = "rho1")]
    Rho1,
    #[serde(rename = "rho2")]
    Rho2,
    #[serde(rename = "rho3")]
    Rho3,
}

impl fmt::Display for IndicatorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndicatorName::Ace => "ACE",
            IndicatorName::Rce => "RCE",
            IndicatorName::Sigma => "sigma",
            IndicatorName::Rho1 => "rho1",
            IndicatorName::Rho2 => "rho2",
            IndicatorName::Rho3 => "rho3",
        })
    }
}

/// Which edges ρ3 cuts and over which variables the divergence is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rho3Semantics {
    /// `out(n)` in each model's full graph, KL over the full joint.
    #[default]
    FullGraph,
    /// `out(n)` in each model's full graph, KL over the marginal on `N`.
    RestrictToN,
}

/// Conventions behind a reported value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Conventions {
    pub log_base: LogBase,
    /// Argument order of the divergence, e.g. `candidate||reference`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl_order: Option<String>,
    /// The divergence in the other argument order; `None` if infinite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse_value: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metric_codes: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho3_semantics: Option<Rho3Semantics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub name: IndicatorName,
    pub value: f64,
    pub node_set: Vec<NodeId>,
    /// Per-node terms of vector-valued indicators.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub components: BTreeMap<NodeId, f64>,
    pub conventions: Conventions,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Reference ("assumed reality") and candidate model of it.
#[derive(Debug, Clone, Copy)]
pub struct ModelPair<'a> {
    pub reference: &'a DiscreteModel,
    pub candidate: &'a DiscreteModel,
}

/// `Σ p log(p / q)` with `0 log(0 / q) = 0`, in nats.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, IndicatorError> {
    if p.len() != q.len() {
        return Err(IndicatorError::SupportMismatch(format!("{} vs {} entries", p.len(), q.len())));
    }
    let mut total = 0.0;
    for (k, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(IndicatorError::InfiniteDivergence(format!("entry {k}")));
            }
            total += a * (a / b).ln();
        }
    }
    // Rounding can leave tiny negatives for equal inputs.
    Ok(total.max(0.0))
}

/// KL between two tables over the same variables and labels.
pub fn kl_distributions(p: &Distribution, q: &Distribution) -> Result<f64, IndicatorError> {
    if p.variables != q.variables || p.labels != q.labels {
        return Err(IndicatorError::SupportMismatch(format!("{:?} vs {:?}", p.variables, q.variables)));
    }
    kl_divergence(&p.probs, &q.probs).map_err(|e| match e {
        IndicatorError::InfiniteDivergence(_) => {
            let at = p.entries().zip(&q.probs).find(|((_, a), &b)| *a > 0.0 && b <= 0.0);
            IndicatorError::InfiniteDivergence(at.map(|((l, _), _)| l.join(",")).unwrap_or_default())
        }
        other => other,
    })
}

struct Effects {
    e_cp: f64,
    e_not_cp: f64,
    conventions: Conventions,
}

fn effects(m: &DiscreteModel, cp: &PhenomenonBinding, metric: &str) -> Result<Effects, IndicatorError> {
    let not_cp = engine::not_cp_label(m, cp)?;
    let spec = m.spec(metric)?;
    let e = |label: &str| engine::interventional_expectation(m, &Intervention::single(&cp.variable, label), metric);
    Ok(Effects {
        e_cp: e(&cp.cp_label)?,
        e_not_cp: e(&not_cp)?,
        conventions: Conventions {
            metric_codes: spec.domain.iter().cloned().zip(spec.codes.iter().copied()).collect(),
            cp_label: Some(cp.cp_label.clone()),
            route: Some(Route::Auto),
            ..Conventions::default()
        },
    })
}

fn effect_report(name: IndicatorName, value: f64, cp: &PhenomenonBinding, metric: &str, conventions: Conventions) -> IndicatorReport {
    IndicatorReport {
        name,
        value,
        node_set: vec![cp.variable.clone(), metric.to_string()],
        components: BTreeMap::new(),
        conventions,
        warnings: Vec::new(),
    }
}

/// Average causal effect `E(φ | do(CP)) − E(φ | do(¬CP))`.
pub fn ace(m: &DiscreteModel, cp: &PhenomenonBinding, metric: &str) -> Result<IndicatorReport, IndicatorError> {
    let fx = effects(m, cp, metric)?;
    Ok(effect_report(IndicatorName::Ace, fx.e_cp - fx.e_not_cp, cp, metric, fx.conventions))
}

/// Relative causal effect `E(φ | do(CP)) / E(φ | do(¬CP))`.
pub fn rce(m: &DiscreteModel, cp: &PhenomenonBinding, metric: &str) -> Result<IndicatorReport, IndicatorError> {
    let fx = effects(m, cp, metric)?;
    if fx.e_not_cp == 0.0 {
        return Err(IndicatorError::DivisionByZeroEffect);
    }
    Ok(effect_report(IndicatorName::Rce, fx.e_cp / fx.e_not_cp, cp, metric, fx.conventions))
}

/// Extent of explanation `1 − E(φ | do(¬CP)) / E(φ)`. When
/// `E(φ | do(¬CP)) > E(φ | do(CP))` the value is still reported, with a
/// warning.
pub fn sigma(m: &DiscreteModel, cp: &PhenomenonBinding, metric: &str) -> Result<IndicatorReport, IndicatorError> {
    let fx = effects(m, cp, metric)?;
    let mean = engine::interventional_expectation(m, &Intervention::new(), metric)?;
    if mean == 0.0 {
        return Err(IndicatorError::ZeroMeanCriticality);
    }
    let mut report = effect_report(IndicatorName::Sigma, 1.0 - fx.e_not_cp / mean, cp, metric, fx.conventions);
    if fx.e_not_cp > fx.e_cp {
        report.warnings.push(format!(
            "precondition violated: E(metric | do(not CP)) = {} exceeds E(metric | do(CP)) = {}",
            fx.e_not_cp, fx.e_cp
        ));
    }
    Ok(report)
}

fn divergence_report(name: IndicatorName, nodes: Vec<NodeId>, forward: f64, reverse: Option<f64>, base: LogBase) -> IndicatorReport {
    let mut warnings = Vec::new();
    if reverse.is_none() {
        warnings.push("reference||candidate divergence is infinite".to_string());
    }
    IndicatorReport {
        name,
        value: base.scale(forward),
        node_set: nodes,
        components: BTreeMap::new(),
        conventions: Conventions {
            log_base: base,
            kl_order: Some("candidate||reference".into()),
            reverse_value: reverse.map(|r| base.scale(r)),
            ..Conventions::default()
        },
        warnings,
    }
}

fn pair_divergence(pair: ModelPair<'_>, nodes: &[String]) -> Result<(f64, Option<f64>), IndicatorError> {
    let p = pair.candidate.marginal(nodes, &[] as &[(&str, &str)])?;
    let q = pair.reference.marginal(nodes, &[] as &[(&str, &str)])?;
    let forward = kl_distributions(&p, &q)?;
    let reverse = match kl_distributions(&q, &p) {
        Ok(r) => Some(r),
        Err(IndicatorError::InfiniteDivergence(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((forward, reverse))
}

/// `KL(P_candidate(X) ‖ P_reference(X))` of the phenomenon variable.
pub fn rho1(pair: ModelPair<'_>, cp: &PhenomenonBinding, base: LogBase) -> Result<IndicatorReport, IndicatorError> {
    let nodes = vec![cp.variable.clone()];
    let (forward, reverse) = pair_divergence(pair, &nodes)?;
    let mut r = divergence_report(IndicatorName::Rho1, nodes, forward, reverse, base);
    r.conventions.cp_label = Some(cp.cp_label.clone());
    Ok(r)
}

/// `KL(P_candidate(N) ‖ P_reference(N))`; the reverse order is in the
/// conventions.
pub fn rho2<S: AsRef<str>>(pair: ModelPair<'_>, nodes: &[S], base: LogBase) -> Result<IndicatorReport, IndicatorError> {
    let mut nodes: Vec<String> = nodes.iter().map(|n| n.as_ref().to_string()).collect();
    nodes.sort();
    nodes.dedup();
    let (forward, reverse) = pair_divergence(pair, &nodes)?;
    Ok(divergence_report(IndicatorName::Rho2, nodes, forward, reverse, base))
}

/// Causal influence of `edges`: `KL(P ‖ P_cut)`, where `P_cut` feeds each
/// cut edge's child an independent copy of the parent drawn from the
/// parent's marginal. With `over`, both joints are first marginalized to
/// those nodes. Result in nats.
pub fn causal_influence<S: AsRef<str>>(
    m: &DiscreteModel,
    edges: &[(S, S)],
    over: Option<&[S]>,
) -> Result<f64, IndicatorError> {
    m.require_complete()?;
    let s = m.structure();
    let mut cut: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (from, to) in edges {
        let (f, t) = (s.index_of(from.as_ref())?, s.index_of(to.as_ref())?);
        if !s.parents_at(t).contains(&f) {
            return Err(IndicatorError::UnknownEdge { from: from.as_ref().into(), to: to.as_ref().into() });
        }
        let list = cut.entry(t).or_default();
        if !list.contains(&f) {
            list.push(f);
        }
    }
    let all: Vec<usize> = (0..s.len()).collect();
    let keep = match over {
        Some(names) => s.indices_of(names)?,
        None => all.clone(),
    };
    let p = crate::model::product_joint(m, &all)?.marginalize(&keep);
    if cut.is_empty() {
        return Ok(0.0);
    }
    let cut_model = cut_edges(m, &cut)?;
    let q = crate::model::product_joint(&cut_model, &all)?.marginalize(&keep);
    kl_divergence(&p.values, &q.values)
}

/// Copy of `m` whose CPDs average the cut parents out against their
/// marginals.
fn cut_edges(m: &DiscreteModel, cut: &BTreeMap<usize, Vec<usize>>) -> Result<DiscreteModel, IndicatorError> {
    let s = m.structure();
    let mut marginals: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &p in cut.values().flatten() {
        if let Entry::Vacant(e) = marginals.entry(p) {
            e.insert(m.conditional(&[p], &[])?.probs);
        }
    }
    let mut cpds: Vec<Cpd> = Vec::new();
    for i in 0..s.len() {
        let cpd = m.cpd_at(i).expect("complete model").clone();
        let Some(cut_parents) = cut.get(&i) else {
            cpds.push(cpd);
            continue;
        };
        let parents = s.parents_at(i);
        let cards: Vec<usize> = parents.iter().map(|&p| m.spec_at(p).cardinality()).collect();
        let card = m.spec_at(i).cardinality();
        let slots: Vec<usize> = cut_parents.iter().map(|c| parents.iter().position(|p| p == c).unwrap()).collect();
        let mut table = vec![0.0; cpd.table.len()];
        let mut row_state = vec![0usize; parents.len()];
        for row in 0..cpd.table.len() / card {
            // Average over every replacement of the cut parents' values.
            let mut sub = vec![0usize; slots.len()];
            let sub_cards: Vec<usize> = slots.iter().map(|&k| cards[k]).collect();
            loop {
                let mut state = row_state.clone();
                let mut weight = 1.0;
                for (k, &slot) in slots.iter().enumerate() {
                    state[slot] = sub[k];
                    weight *= marginals[&parents[slot]][sub[k]];
                }
                let src = state.iter().zip(&cards).fold(0, |acc, (&v, &c)| acc * c + v);
                for c in 0..card {
                    table[row * card + c] += weight * cpd.table[src * card + c];
                }
                if !advance(&mut sub, &sub_cards) {
                    break;
                }
            }
            advance(&mut row_state, &cards);
        }
        for row in table.chunks_mut(card) {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
        }
        cpds.push(Cpd { table, ..cpd });
    }
    Ok(DiscreteModel::new(s.clone(), m.specs().to_vec(), cpds)?.with_state_limit(m.state_limit()))
}

/// Odometer increment; `false` after wrapping around.
fn advance(state: &mut [usize], cards: &[usize]) -> bool {
    for k in (0..state.len()).rev() {
        state[k] += 1;
        if state[k] < cards[k] {
            return true;
        }
        state[k] = 0;
    }
    false
}

fn out_edges(m: &DiscreteModel, n: &str) -> Result<Vec<(String, String)>, IndicatorError> {
    Ok(m.structure().children(n)?.into_iter().map(|c| (n.to_string(), c.to_string())).collect())
}

/// `ρ3_n = I_reference(out(n)) − I_candidate(out(n))` for `n ∈ N ∖ {X}`;
/// the value is the Euclidean norm of that vector.
pub fn rho3<S: AsRef<str>>(
    pair: ModelPair<'_>,
    nodes: &[S],
    cp: &PhenomenonBinding,
    semantics: Rho3Semantics,
    base: LogBase,
) -> Result<IndicatorReport, IndicatorError> {
    let mut names: Vec<String> = nodes.iter().map(|n| n.as_ref().to_string()).collect();
    names.sort();
    names.dedup();
    let over = match semantics {
        Rho3Semantics::FullGraph => None,
        Rho3Semantics::RestrictToN => Some(names.as_slice()),
    };
    let mut components = BTreeMap::new();
    for n in names.iter().filter(|n| **n != cp.variable) {
        let reference = causal_influence(pair.reference, &out_edges(pair.reference, n)?, over)?;
        let candidate = causal_influence(pair.candidate, &out_edges(pair.candidate, n)?, over)?;
        components.insert(n.clone(), base.scale(reference - candidate));
    }
    let value = components.values().map(|v| v * v).sum::<f64>().sqrt();
    Ok(IndicatorReport {
        name: IndicatorName::Rho3,
        value,
        node_set: names,
        components,
        conventions: Conventions {
            log_base: base,
            kl_order: Some("P||P_cut".into()),
            cp_label: Some(cp.cp_label.clone()),
            rho3_semantics: Some(semantics),
            ..Conventions::default()
        },
        warnings: Vec::new(),
    })
}

/// ACE, RCE and σ of one model, followed by ρ1–ρ3 of the pair. Indicators
/// that cannot be computed are skipped with their error message.
pub fn indicator_table<S: AsRef<str>>(
    pair: ModelPair<'_>,
    nodes: &[S],
    cp: &PhenomenonBinding,
    metric: &str,
    semantics: Rho3Semantics,
    base: LogBase,
) -> (Vec<IndicatorReport>, Vec<(IndicatorName, IndicatorError)>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    let mut push = |name, r: Result<IndicatorReport, IndicatorError>| match r {
        Ok(r) => ok.push(r),
        Err(e) => failed.push((name, e)),
    };
    push(IndicatorName::Ace, ace(pair.reference, cp, metric));
    push(IndicatorName::Rce, rce(pair.reference, cp, metric));
    push(IndicatorName::Sigma, sigma(pair.reference, cp, metric));
    push(IndicatorName::Rho1, rho1(pair, cp, base));
    push(IndicatorName::Rho2, rho2(pair, nodes, base));
    push(IndicatorName::Rho3, rho3(pair, nodes, cp, semantics, base));
    (ok, failed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_basics() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        let v = kl_divergence(&[0.6, 0.4], &[0.68, 0.32]).unwrap();
        let want = 0.6 * (0.6f64 / 0.68).ln() + 0.4 * (0.4f64 / 0.32).ln();
        assert!((v - want).abs() < 1e-15);
        assert!((v - 0.014160).abs() < 5e-7);
        assert!(matches!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), Err(IndicatorError::InfiniteDivergence(_))));
        assert_eq!(kl_divergence(&[0.0, 1.0], &[0.5, 0.5]).unwrap(), 2f64.ln());
    }

    #[test]
    fn bits_convert_from_nats() {
        assert!((LogBase::Bits.scale(2f64.ln()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn advance_wraps() {
        let mut s = vec![1, 1];
        assert!(!advance(&mut s, &[2, 2]));
        assert_eq!(s, [0, 0]);
    }
}
