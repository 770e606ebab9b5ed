//! Back-door admissibility and ordered enumeration of adjustment sets.
//!
//! Enumeration walks subsets in (size, lexicographic) order and prunes a
//! branch when a vertex-cut lower bound on the moralized ancestral graph
//! shows the remaining budget cannot separate treatment from outcome.

use std::collections::{BTreeSet, VecDeque};

use super::{CausalStructure, Expanded, GraphError, NodeId};

const INF: u32 = u32::MAX / 4;

impl CausalStructure {
    /// Back-door criterion: no member of `set` descends from `x`, no member
    /// is latent, and `set` blocks every path from `x` to `y` that starts
    /// with an arrow into `x`.
    pub fn backdoor_admissible<S: AsRef<str>>(
        &self,
        set: &[S],
        x: &str,
        y: &str,
    ) -> Result<bool, GraphError> {
        let (xi, yi) = (self.index_of(x)?, self.index_of(y)?);
        let members = self.indices_of(set)?;
        if let Some(&clash) = members.iter().find(|&&m| m == xi || m == yi) {
            return Err(GraphError::OverlappingSets(self.name(clash).to_string()));
        }
        if xi == yi {
            return Err(GraphError::OverlappingSets(x.to_string()));
        }
        let ctx = BackdoorContext::new(self, xi, yi);
        Ok(ctx.admissible(&members))
    }

    /// Back-door admissible sets of observed nodes, ordered by size and
    /// then by sorted member names, at most `max_count` of them. The parent
    /// set of `x` is always part of the result when it is admissible and
    /// fully observed (it replaces the last entry if the limit would
    /// otherwise cut it off).
    pub fn enumerate_adjustment_sets(
        &self,
        x: &str,
        y: &str,
        max_count: usize,
    ) -> Result<Vec<BTreeSet<NodeId>>, GraphError> {
        let (xi, yi) = (self.index_of(x)?, self.index_of(y)?);
        if xi == yi {
            return Err(GraphError::OverlappingSets(x.to_string()));
        }
        if max_count == 0 {
            return Ok(Vec::new());
        }
        let ctx = BackdoorContext::new(self, xi, yi);
        let mut found: Vec<Vec<usize>> = Vec::new();
        for size in 0..=ctx.candidates.len() {
            let mut chosen = Vec::with_capacity(size);
            ctx.search(0, size, &mut chosen, &mut found, max_count);
            if found.len() >= max_count {
                break;
            }
        }

        let parents = self.parents_at(xi).to_vec();
        let parents_usable = parents.iter().all(|&p| !self.latent_at(p) && p != yi);
        if parents_usable && !found.contains(&parents) && ctx.admissible(&parents) {
            if found.len() >= max_count {
                found.pop();
            }
            found.push(parents);
        }
        Ok(found
            .into_iter()
            .map(|set| set.into_iter().map(|i| self.name(i).to_string()).collect())
            .collect())
    }
}

struct BackdoorContext<'a> {
    structure: &'a CausalStructure,
    x: usize,
    y: usize,
    graph: Expanded,
    // observed, not x or y, not a descendant of x; ascending index = name order
    candidates: Vec<usize>,
    forbidden: Vec<bool>,
}

impl<'a> BackdoorContext<'a> {
    fn new(structure: &'a CausalStructure, x: usize, y: usize) -> Self {
        let descendants = structure.descendant_mask(&[x]);
        let forbidden: Vec<bool> = (0..structure.len())
            .map(|v| v == x || v == y || descendants[v] || structure.latent_at(v))
            .collect();
        let candidates = (0..structure.len()).filter(|&v| !forbidden[v]).collect();
        BackdoorContext { structure, x, y, graph: Expanded::new(structure, Some(x)), candidates, forbidden }
    }

    fn admissible(&self, set: &[usize]) -> bool {
        if set.iter().any(|&v| self.forbidden[v]) {
            return false;
        }
        let n = self.structure.len();
        let mut z = vec![false; n];
        for &v in set {
            z[v] = true;
        }
        let mut target = vec![false; n];
        target[self.y] = true;
        self.graph.connecting_path(&[self.x], &target, &z).is_none()
    }

    fn search(
        &self,
        start: usize,
        size: usize,
        chosen: &mut Vec<usize>,
        found: &mut Vec<Vec<usize>>,
        max_count: usize,
    ) {
        if found.len() >= max_count {
            return;
        }
        if chosen.len() == size {
            if self.admissible(chosen) {
                found.push(chosen.clone());
            }
            return;
        }
        let budget = size - chosen.len();
        if self.candidates.len() - start < budget {
            return;
        }
        if self.cut_lower_bound(chosen, &self.candidates[start..], budget) > budget {
            return;
        }
        for i in start..self.candidates.len() {
            if self.candidates.len() - i < budget {
                break;
            }
            chosen.push(self.candidates[i]);
            self.search(i + 1, size, chosen, found, max_count);
            chosen.pop();
            if found.len() >= max_count {
                return;
            }
        }
    }

    /// Minimum number of `allowed` nodes that must be added to `chosen` to
    /// separate x from y in the moral graph of An({x, y} ∪ chosen) of the
    /// back-door graph. Any completion that d-separates restricts to such a
    /// cut, so this bounds the size of every completion from below.
    /// Returns `budget + 1` as soon as the bound exceeds `budget`.
    fn cut_lower_bound(&self, chosen: &[usize], allowed: &[usize], budget: usize) -> usize {
        let g = &self.graph;
        let total = g.len();
        let mut seeds = vec![false; total];
        seeds[self.x] = true;
        seeds[self.y] = true;
        for &c in chosen {
            seeds[c] = true;
        }
        let keep = g.ancestor_mask(&seeds);
        let mut removed = vec![false; total];
        for &c in chosen {
            removed[c] = true;
        }
        let mut cuttable = vec![false; total];
        for &a in allowed {
            cuttable[a] = true;
        }
        let alive = |v: usize| keep[v] && !removed[v];

        // node v -> in = 2v, out = 2v + 1
        let mut net = FlowNet::new(2 * total);
        for (v, &cut) in cuttable.iter().enumerate() {
            if !alive(v) {
                continue;
            }
            let cap = if cut { 1 } else { INF };
            net.add(2 * v, 2 * v + 1, cap);
        }
        let link = |a: usize, b: usize, net: &mut FlowNet| {
            if alive(a) && alive(b) {
                net.add(2 * a + 1, 2 * b, INF);
                net.add(2 * b + 1, 2 * a, INF);
            }
        };
        for (v, &kept) in keep.iter().enumerate() {
            if !kept {
                continue;
            }
            let ps = &g.parents[v];
            for (i, &p) in ps.iter().enumerate() {
                link(p, v, &mut net);
                for &q in &ps[i + 1..] {
                    link(p, q, &mut net);
                }
            }
        }
        net.max_flow(2 * self.x + 1, 2 * self.y, budget as u32 + 1) as usize
    }
}

struct FlowNet {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u32>,
}

impl FlowNet {
    fn new(n: usize) -> Self {
        FlowNet { head: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new() }
    }

    fn add(&mut self, a: usize, b: usize, cap: u32) {
        self.head[a].push(self.to.len());
        self.to.push(b);
        self.cap.push(cap);
        self.head[b].push(self.to.len());
        self.to.push(a);
        self.cap.push(0);
    }

    /// Edmonds-Karp, stopping once the flow reaches `limit`.
    fn max_flow(&mut self, s: usize, t: usize, limit: u32) -> u32 {
        let mut flow = 0;
        while flow < limit {
            let mut via = vec![usize::MAX; self.head.len()];
            let mut queue = VecDeque::from([s]);
            let mut reached = false;
            'bfs: while let Some(v) = queue.pop_front() {
                for &e in &self.head[v] {
                    let w = self.to[e];
                    if self.cap[e] > 0 && via[w] == usize::MAX && w != s {
                        via[w] = e;
                        if w == t {
                            reached = true;
                            break 'bfs;
                        }
                        queue.push_back(w);
                    }
                }
            }
            if !reached {
                break;
            }
            let mut push = INF;
            let mut w = t;
            while w != s {
                let e = via[w];
                push = push.min(self.cap[e]);
                w = self.to[e ^ 1];
            }
            if push >= INF {
                return limit;
            }
            let mut w = t;
            while w != s {
                let e = via[w];
                self.cap[e] -= push;
                self.cap[e ^ 1] += push;
                w = self.to[e ^ 1];
            }
            flow += push;
        }
        flow.min(limit)
    }
}
