//! Causal structures: directed acyclic graphs over named variables, with
//! optional bidirected arcs standing for correlated error terms.
//!
//! Nodes are stored sorted by name, so node index order and name order
//! coincide. Every set-valued query returns names in that order.

mod adjust;
mod dsep;

pub use dsep::PathQueryResult;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use dsep::Expanded;

/// Variable name. Unique within a structure, case-sensitive.
pub type NodeId = String;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("cycle detected: {}", .cycle.join(" -> "))]
    CycleDetected { cycle: Vec<NodeId> },
    #[error("duplicate node `{0}`")]
    DuplicateNode(NodeId),
    #[error("edge endpoint `{0}` is not a declared node")]
    UnknownEndpoint(NodeId),
    #[error("self-loop on `{0}`")]
    SelfLoop(NodeId),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("node `{0}` appears in more than one of the query sets")]
    OverlappingSets(NodeId),
    #[error("node names must be non-empty")]
    EmptyName,
}

/// A node declaration: name plus whether the variable is unobserved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: NodeId,
    pub latent: bool,
}

impl NodeSpec {
    pub fn observed(name: impl Into<NodeId>) -> Self {
        NodeSpec { name: name.into(), latent: false }
    }

    pub fn latent(name: impl Into<NodeId>) -> Self {
        NodeSpec { name: name.into(), latent: true }
    }
}

/// Validated causal structure. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalStructure {
    names: Vec<NodeId>,
    latent: Vec<bool>,
    index: BTreeMap<NodeId, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    // (a, b) with a < b, sorted, deduplicated
    bidirected: Vec<(usize, usize)>,
}

/// Incremental construction of a [`CausalStructure`].
#[derive(Debug, Clone, Default)]
pub struct StructureBuilder {
    nodes: Vec<NodeSpec>,
    directed: Vec<(NodeId, NodeId)>,
    bidirected: Vec<(NodeId, NodeId)>,
}

impl StructureBuilder {
    pub fn node(mut self, name: impl Into<NodeId>) -> Self {
        self.nodes.push(NodeSpec::observed(name));
        self
    }

    pub fn latent(mut self, name: impl Into<NodeId>) -> Self {
        self.nodes.push(NodeSpec::latent(name));
        self
    }

    pub fn nodes<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<NodeId>,
    {
        self.nodes.extend(names.into_iter().map(NodeSpec::observed));
        self
    }

    pub fn edge(mut self, from: impl Into<NodeId>, to: impl Into<NodeId>) -> Self {
        self.directed.push((from.into(), to.into()));
        self
    }

    pub fn bidirected(mut self, a: impl Into<NodeId>, b: impl Into<NodeId>) -> Self {
        self.bidirected.push((a.into(), b.into()));
        self
    }

    pub fn build(self) -> Result<CausalStructure, GraphError> {
        CausalStructure::new(self.nodes, self.directed, self.bidirected)
    }
}

impl CausalStructure {
    pub fn builder() -> StructureBuilder {
        StructureBuilder::default()
    }

    /// Validates and builds a structure. Duplicate edges collapse; everything
    /// else that violates the structure invariants is an error.
    pub fn new<A, B>(
        nodes: impl IntoIterator<Item = NodeSpec>,
        directed: impl IntoIterator<Item = (A, B)>,
        bidirected: impl IntoIterator<Item = (A, B)>,
    ) -> Result<Self, GraphError>
    where
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut specs: BTreeMap<NodeId, bool> = BTreeMap::new();
        for spec in nodes {
            if spec.name.is_empty() {
                return Err(GraphError::EmptyName);
            }
            if specs.insert(spec.name.clone(), spec.latent).is_some() {
                return Err(GraphError::DuplicateNode(spec.name));
            }
        }
        let names: Vec<NodeId> = specs.keys().cloned().collect();
        let latent: Vec<bool> = specs.values().copied().collect();
        let index: BTreeMap<NodeId, usize> =
            names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| GraphError::UnknownEndpoint(name.to_string()))
        };

        let n = names.len();
        let mut edge_set = BTreeSet::new();
        for (a, b) in directed {
            let (a, b) = (a.as_ref(), b.as_ref());
            if a == b {
                return Err(GraphError::SelfLoop(a.to_string()));
            }
            edge_set.insert((lookup(a)?, lookup(b)?));
        }
        let mut bi_set = BTreeSet::new();
        for (a, b) in bidirected {
            let (a, b) = (a.as_ref(), b.as_ref());
            if a == b {
                return Err(GraphError::SelfLoop(a.to_string()));
            }
            let (ia, ib) = (lookup(a)?, lookup(b)?);
            bi_set.insert((ia.min(ib), ia.max(ib)));
        }

        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(a, b) in &edge_set {
            parents[b].push(a);
            children[a].push(b);
        }

        let structure = CausalStructure {
            names,
            latent,
            index,
            parents,
            children,
            bidirected: bi_set.into_iter().collect(),
        };
        if let Some(cycle) = structure.find_cycle() {
            return Err(GraphError::CycleDetected { cycle });
        }
        Ok(structure)
    }

    fn find_cycle(&self) -> Option<Vec<NodeId>> {
        let n = self.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut removed = vec![false; n];
        while let Some(v) = stack.pop() {
            removed[v] = true;
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    stack.push(c);
                }
            }
        }
        let start = (0..n).find(|&i| !removed[i])?;
        // Every remaining node keeps a remaining parent, so walking parents
        // must revisit a node.
        let mut seen_at = vec![usize::MAX; n];
        let mut walk = Vec::new();
        let mut v = start;
        while seen_at[v] == usize::MAX {
            seen_at[v] = walk.len();
            walk.push(v);
            v = *self.parents[v].iter().find(|&&p| !removed[p]).expect("remaining parent");
        }
        let mut cycle: Vec<usize> = walk[seen_at[v]..].to_vec();
        cycle.reverse();
        // rotate so the smallest name leads, then close the loop
        let lead = cycle.iter().enumerate().min_by_key(|(_, &i)| i).map(|(k, _)| k).unwrap();
        cycle.rotate_left(lead);
        cycle.push(cycle[0]);
        Some(cycle.into_iter().map(|i| self.names[i].clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Node names in sorted order.
    pub fn node_names(&self) -> &[NodeId] {
        &self.names
    }

    pub fn node_specs(&self) -> Vec<NodeSpec> {
        self.names
            .iter()
            .zip(&self.latent)
            .map(|(name, &latent)| NodeSpec { name: name.clone(), latent })
            .collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize, GraphError> {
        self.index.get(name).copied().ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub(crate) fn indices_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>, GraphError> {
        let mut out: Vec<usize> =
            names.iter().map(|n| self.index_of(n.as_ref())).collect::<Result<_, _>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn is_latent(&self, name: &str) -> Result<bool, GraphError> {
        Ok(self.latent[self.index_of(name)?])
    }

    pub(crate) fn latent_at(&self, index: usize) -> bool {
        self.latent[index]
    }

    pub fn parents(&self, name: &str) -> Result<Vec<&str>, GraphError> {
        Ok(self.parents[self.index_of(name)?].iter().map(|&i| self.name(i)).collect())
    }

    pub fn children(&self, name: &str) -> Result<Vec<&str>, GraphError> {
        Ok(self.children[self.index_of(name)?].iter().map(|&i| self.name(i)).collect())
    }

    pub(crate) fn parents_at(&self, index: usize) -> &[usize] {
        &self.parents[index]
    }

    pub(crate) fn children_at(&self, index: usize) -> &[usize] {
        &self.children[index]
    }

    /// Directed edges, sorted by (from, to).
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let mut out: Vec<(usize, usize)> = self
            .children
            .iter()
            .enumerate()
            .flat_map(|(a, cs)| cs.iter().map(move |&b| (a, b)))
            .collect();
        out.sort_unstable();
        out.into_iter().map(|(a, b)| (self.name(a), self.name(b))).collect()
    }

    pub fn bidirected_edges(&self) -> Vec<(&str, &str)> {
        self.bidirected.iter().map(|&(a, b)| (self.name(a), self.name(b))).collect()
    }

    pub(crate) fn bidirected_at(&self) -> &[(usize, usize)] {
        &self.bidirected
    }

    /// No bidirected arcs: every error term is independent.
    pub fn is_markovian(&self) -> bool {
        self.bidirected.is_empty()
    }

    /// Deterministic topological order (smallest available name first).
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }

    /// Marks every node reachable from `seeds` along directed edges
    /// (seeds included).
    pub(crate) fn descendant_mask(&self, seeds: &[usize]) -> Vec<bool> {
        closure(seeds, self.len(), |v| &self.children[v])
    }

    /// Marks `seeds` and all their ancestors.
    pub(crate) fn ancestor_mask(&self, seeds: &[usize]) -> Vec<bool> {
        closure(seeds, self.len(), |v| &self.parents[v])
    }

    /// Strict descendants of `name`.
    pub fn descendants(&self, name: &str) -> Result<BTreeSet<NodeId>, GraphError> {
        let i = self.index_of(name)?;
        Ok(self.mask_to_names(&self.descendant_mask(&[i]), Some(i)))
    }

    /// Strict ancestors of `name`.
    pub fn ancestors(&self, name: &str) -> Result<BTreeSet<NodeId>, GraphError> {
        let i = self.index_of(name)?;
        Ok(self.mask_to_names(&self.ancestor_mask(&[i]), Some(i)))
    }

    fn mask_to_names(&self, mask: &[bool], skip: Option<usize>) -> BTreeSet<NodeId> {
        mask.iter()
            .enumerate()
            .filter(|&(i, &m)| m && Some(i) != skip)
            .map(|(i, _)| self.names[i].clone())
            .collect()
    }

    /// Graph-level `do(targets)`: removes every arc pointing into a target,
    /// including bidirected arcs touching one.
    pub fn do_surgery<S: AsRef<str>>(&self, targets: &[S]) -> Result<Self, GraphError> {
        let targets = self.indices_of(targets)?;
        let mut hit = vec![false; self.len()];
        for &t in &targets {
            hit[t] = true;
        }
        let mut out = self.clone();
        for t in targets {
            for p in std::mem::take(&mut out.parents[t]) {
                out.children[p].retain(|&c| c != t);
            }
        }
        out.bidirected.retain(|&(a, b)| !hit[a] && !hit[b]);
        Ok(out)
    }
}

fn closure<'a, F>(seeds: &[usize], n: usize, next: F) -> Vec<bool>
where
    F: Fn(usize) -> &'a [usize],
{
    let mut mark = vec![false; n];
    let mut stack = Vec::new();
    for &s in seeds {
        if !mark[s] {
            mark[s] = true;
            stack.push(s);
        }
    }
    while let Some(v) = stack.pop() {
        for &w in next(v) {
            if !mark[w] {
                mark[w] = true;
                stack.push(w);
            }
        }
    }
    mark
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> CausalStructure {
        CausalStructure::builder().nodes(["A", "B", "C"]).edge("A", "B").edge("B", "C").build().unwrap()
    }

    #[test]
    fn single_node_is_valid() {
        let s = CausalStructure::builder().node("A").build().unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.edges().is_empty());
    }

    #[test]
    fn two_cycle_is_rejected_and_named() {
        let err = CausalStructure::builder()
            .nodes(["A", "B"])
            .edge("A", "B")
            .edge("B", "A")
            .build()
            .unwrap_err();
        assert_eq!(err, GraphError::CycleDetected { cycle: vec!["A".into(), "B".into(), "A".into()] });
    }

    #[test]
    fn longer_cycle_reported_in_edge_direction() {
        let err = CausalStructure::builder()
            .nodes(["A", "B", "C", "D"])
            .edge("D", "A")
            .edge("A", "B")
            .edge("B", "C")
            .edge("C", "A")
            .build()
            .unwrap_err();
        match err {
            GraphError::CycleDetected { cycle } => assert_eq!(cycle, ["A", "B", "C", "A"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            CausalStructure::builder().nodes(["A", "A"]).build().unwrap_err(),
            GraphError::DuplicateNode("A".into())
        );
        assert_eq!(
            CausalStructure::builder().node("A").edge("A", "Z").build().unwrap_err(),
            GraphError::UnknownEndpoint("Z".into())
        );
        assert_eq!(
            CausalStructure::builder().node("A").edge("A", "A").build().unwrap_err(),
            GraphError::SelfLoop("A".into())
        );
        assert_eq!(
            CausalStructure::builder().node("A").bidirected("A", "A").build().unwrap_err(),
            GraphError::SelfLoop("A".into())
        );
        assert_eq!(CausalStructure::builder().node("").build().unwrap_err(), GraphError::EmptyName);
    }

    #[test]
    fn names_are_case_sensitive() {
        let s = CausalStructure::builder().nodes(["a", "A"]).edge("a", "A").build().unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn descendants_and_ancestors_of_chain() {
        let s = chain();
        let d: Vec<_> = s.descendants("A").unwrap().into_iter().collect();
        assert_eq!(d, ["B", "C"]);
        assert!(s.descendants("C").unwrap().is_empty());
        let a: Vec<_> = s.ancestors("C").unwrap().into_iter().collect();
        assert_eq!(a, ["A", "B"]);
        assert_eq!(s.descendants("Q").unwrap_err(), GraphError::UnknownNode("Q".into()));
    }

    #[test]
    fn surgery_removes_incoming_arcs_only() {
        let s = CausalStructure::builder().nodes(["A", "B"]).edge("A", "B").build().unwrap();
        let cut = s.do_surgery(&["B"]).unwrap();
        assert!(cut.edges().is_empty());
        assert_eq!(s.do_surgery::<&str>(&[]).unwrap(), s);

        let s = CausalStructure::builder()
            .nodes(["A", "B", "C"])
            .edge("A", "B")
            .edge("B", "C")
            .bidirected("A", "C")
            .build()
            .unwrap();
        let cut = s.do_surgery(&["B"]).unwrap();
        assert_eq!(cut.edges(), [("B", "C")]);
        assert_eq!(cut.bidirected_edges(), [("A", "C")]);
    }

    #[test]
    fn topological_order_respects_edges() {
        let s = CausalStructure::builder()
            .nodes(["d", "c", "b", "a"])
            .edge("d", "a")
            .edge("c", "a")
            .edge("b", "c")
            .build()
            .unwrap();
        let order: Vec<&str> = s.topological_order().into_iter().map(|i| s.name(i)).collect();
        assert_eq!(order, ["b", "c", "d", "a"]);
    }
}
