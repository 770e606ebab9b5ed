//! d-separation by reachability over (node, arrival direction) states.
//!
//! Bidirected arcs are expanded into an explicit latent parent shared by
//! both endpoints, so one traversal handles semi-Markovian structures.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{CausalStructure, GraphError, NodeId};

/// Outcome of a d-separation query. `witness_path` is an unblocked path
/// (source first) exactly when `separated` is false.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathQueryResult {
    pub separated: bool,
    pub witness_path: Option<Vec<NodeId>>,
}

/// The structure with bidirected arcs replaced by latent parents.
/// Indices `0..n_real` are structure nodes; the rest are confounders.
#[derive(Debug, Clone)]
pub(crate) struct Expanded {
    pub(crate) n_real: usize,
    pub(crate) parents: Vec<Vec<usize>>,
    pub(crate) children: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Arrival {
    // reached from a child (or the walk starts here)
    Up,
    // reached from a parent
    Down,
}

impl Expanded {
    /// `drop_out_of`: node whose outgoing directed edges are removed
    /// (the back-door graph of that node).
    pub(crate) fn new(s: &CausalStructure, drop_out_of: Option<usize>) -> Self {
        let n_real = s.len();
        let total = n_real + s.bidirected_at().len();
        let mut parents = vec![Vec::new(); total];
        let mut children = vec![Vec::new(); total];
        for (v, kids) in children.iter_mut().enumerate().take(n_real) {
            if Some(v) == drop_out_of {
                continue;
            }
            for &c in s.children_at(v) {
                kids.push(c);
                parents[c].push(v);
            }
        }
        for (k, &(a, b)) in s.bidirected_at().iter().enumerate() {
            let u = n_real + k;
            children[u] = vec![a, b];
            parents[a].push(u);
            parents[b].push(u);
        }
        Expanded { n_real, parents, children }
    }

    pub(crate) fn len(&self) -> usize {
        self.parents.len()
    }

    pub(crate) fn ancestor_mask(&self, seeds: &[bool]) -> Vec<bool> {
        let mut mark = seeds.to_vec();
        mark.resize(self.len(), false);
        let mut stack: Vec<usize> = (0..mark.len()).filter(|&i| mark[i]).collect();
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if !mark[p] {
                    mark[p] = true;
                    stack.push(p);
                }
            }
        }
        mark
    }

    /// Shortest active walk from any of `sources` to a node in `targets`
    /// given conditioning set `z` (masks over real nodes). A shortest
    /// active walk never repeats a node, so the result is a simple path.
    pub(crate) fn connecting_path(
        &self,
        sources: &[usize],
        targets: &[bool],
        z: &[bool],
    ) -> Option<Vec<usize>> {
        let total = self.len();
        let in_z = |v: usize| v < self.n_real && z[v];
        let an_z = self.ancestor_mask(z);

        let state = |v: usize, d: Arrival| 2 * v + (d == Arrival::Down) as usize;
        let mut pred = vec![usize::MAX; 2 * total];
        let mut seen = vec![false; 2 * total];
        let mut queue = VecDeque::new();
        for &s in sources {
            let st = state(s, Arrival::Up);
            if !seen[st] {
                seen[st] = true;
                queue.push_back(st);
            }
        }
        while let Some(st) = queue.pop_front() {
            let v = st / 2;
            let arrival = if st % 2 == 0 { Arrival::Up } else { Arrival::Down };
            if v < self.n_real && targets[v] && pred[st] != usize::MAX {
                return Some(self.unwind(&pred, st));
            }
            let mut push = |w: usize, d: Arrival, queue: &mut VecDeque<usize>| {
                let next = state(w, d);
                if !seen[next] {
                    seen[next] = true;
                    pred[next] = st;
                    queue.push_back(next);
                }
            };
            match arrival {
                Arrival::Up if !in_z(v) => {
                    for &p in &self.parents[v] {
                        push(p, Arrival::Up, &mut queue);
                    }
                    for &c in &self.children[v] {
                        push(c, Arrival::Down, &mut queue);
                    }
                }
                Arrival::Up => {}
                Arrival::Down => {
                    if !in_z(v) {
                        for &c in &self.children[v] {
                            push(c, Arrival::Down, &mut queue);
                        }
                    }
                    if an_z[v] {
                        for &p in &self.parents[v] {
                            push(p, Arrival::Up, &mut queue);
                        }
                    }
                }
            }
        }
        None
    }

    fn unwind(&self, pred: &[usize], mut st: usize) -> Vec<usize> {
        let mut path = vec![st / 2];
        while pred[st] != usize::MAX {
            st = pred[st];
            path.push(st / 2);
        }
        path.reverse();
        path
    }
}

impl CausalStructure {
    /// Tests whether `z` d-separates `x` from `y`. When it does not, the
    /// result carries one unblocked path; a bidirected arc shows up as two
    /// adjacent endpoints.
    pub fn d_separated<S: AsRef<str>>(
        &self,
        x: &[S],
        y: &[S],
        z: &[S],
    ) -> Result<PathQueryResult, GraphError> {
        let (xs, ys, zs) = (self.indices_of(x)?, self.indices_of(y)?, self.indices_of(z)?);
        let mut owner = vec![0u8; self.len()];
        for (tag, set) in [(1u8, &xs), (2, &ys), (3, &zs)] {
            for &v in set {
                if owner[v] != 0 && owner[v] != tag {
                    return Err(GraphError::OverlappingSets(self.name(v).to_string()));
                }
                owner[v] = tag;
            }
        }
        let expanded = Expanded::new(self, None);
        let targets: Vec<bool> = owner.iter().map(|&o| o == 2).collect();
        let z_mask: Vec<bool> = owner.iter().map(|&o| o == 3).collect();
        Ok(self.path_result(expanded.connecting_path(&xs, &targets, &z_mask)))
    }

    pub(crate) fn path_result(&self, path: Option<Vec<usize>>) -> PathQueryResult {
        match path {
            None => PathQueryResult { separated: true, witness_path: None },
            Some(p) => PathQueryResult {
                separated: false,
                witness_path: Some(
                    p.into_iter()
                        .filter(|&v| v < self.len())
                        .map(|v| self.name(v).to_string())
                        .collect(),
                ),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NONE: &[&str] = &[];

    fn build(nodes: &[&str], edges: &[(&str, &str)]) -> CausalStructure {
        let mut b = CausalStructure::builder().nodes(nodes.iter().copied());
        for &(a, c) in edges {
            b = b.edge(a, c);
        }
        b.build().unwrap()
    }

    #[test]
    fn chain_blocked_by_middle() {
        let s = build(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        assert!(s.d_separated(&["A"], &["C"], &["B"]).unwrap().separated);
        let open = s.d_separated(&["A"], &["C"], NONE).unwrap();
        assert!(!open.separated);
        assert_eq!(open.witness_path.unwrap(), ["A", "B", "C"]);
    }

    #[test]
    fn collider_rule() {
        let s = build(&["A", "B", "C"], &[("A", "C"), ("B", "C")]);
        assert!(s.d_separated(&["A"], &["B"], NONE).unwrap().separated);
        let r = s.d_separated(&["A"], &["B"], &["C"]).unwrap();
        assert!(!r.separated);
        assert_eq!(r.witness_path.unwrap(), ["A", "C", "B"]);
    }

    #[test]
    fn conditioning_on_collider_descendant_opens() {
        let s = build(&["A", "B", "C", "D"], &[("A", "C"), ("B", "C"), ("C", "D")]);
        assert!(!s.d_separated(&["A"], &["B"], &["D"]).unwrap().separated);
    }

    #[test]
    fn heavy_rain_reality_shape() {
        // V1 -> X <- V3, X -> phi <- V2
        let s = build(
            &["V1", "V2", "V3", "X", "phi"],
            &[("V1", "X"), ("V3", "X"), ("X", "phi"), ("V2", "phi")],
        );
        assert!(s.d_separated(&["X"], &["V2"], NONE).unwrap().separated);
        assert!(!s.d_separated(&["X"], &["V2"], &["phi"]).unwrap().separated);
    }

    #[test]
    fn bidirected_arc_acts_as_latent_fork() {
        let s = CausalStructure::builder().nodes(["A", "B"]).bidirected("A", "B").build().unwrap();
        let r = s.d_separated(&["A"], &["B"], NONE).unwrap();
        assert!(!r.separated);
        assert_eq!(r.witness_path.unwrap(), ["A", "B"]);
    }

    #[test]
    fn overlapping_sets_rejected() {
        let s = build(&["A", "B"], &[("A", "B")]);
        assert_eq!(
            s.d_separated(&["A"], &["A"], NONE).unwrap_err(),
            GraphError::OverlappingSets("A".into())
        );
        assert_eq!(
            s.d_separated(&["A"], &["B"], &["B"]).unwrap_err(),
            GraphError::OverlappingSets("B".into())
        );
    }

    #[test]
    fn witness_is_simple_path_along_edges() {
        // M-graph plus a collider that forces the shortest walk to detour
        let s = build(
            &["A", "B", "C", "D", "E", "F"],
            &[("A", "B"), ("C", "B"), ("C", "D"), ("E", "D"), ("B", "F"), ("D", "F")],
        );
        let r = s.d_separated(&["A"], &["E"], &["F"]).unwrap();
        assert!(!r.separated);
        let path = r.witness_path.unwrap();
        let mut dedup = path.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), path.len());
        for w in path.windows(2) {
            let adjacent = s.edges().iter().any(|&(a, b)| (a == w[0] && b == w[1]) || (a == w[1] && b == w[0]));
            assert!(adjacent, "{w:?} not adjacent");
        }
    }
}
