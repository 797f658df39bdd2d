//! Directed graphs with causal semantics.
//!
//! Vertices are 0-based internally; constructors and error messages use the
//! caller's 1-based labels. A [`Dag`] keeps the caller's labeling and records
//! a topological order, so "sorted" notions (prefixes `1:i-1`, parents in
//! ascending order) are expressed through [`Dag::position`] instead of by
//! renumbering vertices.

use std::collections::{BTreeSet, BinaryHeap};
use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A validated directed acyclic graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    order: Vec<usize>,
    position: Vec<usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

/// Special graph structures, determined in the sorted labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureClass {
    Full,
    Empty,
    Linear,
    Markov,
    General,
}

impl Dag {
    /// Validates an edge list given in 1-based labels.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Dag> {
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            for v in [i, j] {
                if v == 0 || v > n {
                    return Err(Error::InvalidVertex { vertex: v, n });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            set.insert((i - 1, j - 1));
        }
        Self::from_zero_based(n, set)
    }

    pub(crate) fn from_zero_based(n: usize, edges: BTreeSet<(usize, usize)>) -> Result<Dag> {
        let mut children = vec![Vec::new(); n];
        let mut indegree = vec![0usize; n];
        for &(i, j) in &edges {
            children[i].push(j);
            indegree[j] += 1;
        }
        // Kahn's algorithm, smallest label first, so sorted inputs keep their order.
        let mut heap: BinaryHeap<Reverse<usize>> = (0..n)
            .filter(|&v| indegree[v] == 0)
            .map(Reverse)
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(v)) = heap.pop() {
            order.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    heap.push(Reverse(c));
                }
            }
        }
        if order.len() < n {
            return Err(Error::CycleDetected(find_cycle(n, &children, &indegree)));
        }
        let mut position = vec![0; n];
        for (p, &v) in order.iter().enumerate() {
            position[v] = p;
        }
        let mut parents = vec![Vec::new(); n];
        for &(i, j) in &edges {
            parents[j].push(i);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_by_key(|&v| position[v]);
        }
        Ok(Dag {
            n,
            edges,
            order,
            position,
            parents,
            children,
        })
    }

    pub fn empty(n: usize) -> Dag {
        Self::from_zero_based(n, BTreeSet::new()).expect("empty graph is acyclic")
    }

    /// `E = {(i, j) : i < j}`.
    pub fn linear(n: usize) -> Dag {
        let edges = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::from_zero_based(n, edges).expect("linear graph is acyclic")
    }

    /// `E = {(i - 1, i)}`.
    pub fn markov(n: usize) -> Dag {
        let edges = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_zero_based(n, edges).expect("markov chain is acyclic")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as 0-based pairs.
    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    /// Topological order (0-based vertices).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Rank of a vertex in the topological order.
    pub fn position(&self, v: usize) -> usize {
        self.position[v]
    }

    /// Parents of `v`, ascending in the sorted labeling.
    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Vertices preceding `v` in the topological order (the sorted `1:i-1`).
    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.order[..self.position[v]]
    }

    /// Whether every vertex has at most one parent.
    pub fn is_forest(&self) -> bool {
        self.parents.iter().all(|p| p.len() <= 1)
    }

    pub fn classify(&self) -> StructureClass {
        let n = self.n;
        if self.edges.is_empty() {
            return StructureClass::Empty;
        }
        if self.edges.len() == n * (n - 1) / 2 {
            return StructureClass::Linear;
        }
        let markov = n >= 2
            && self.edges.len() == n - 1
            && (1..n).all(|p| self.edges.contains(&(self.order[p - 1], self.order[p])));
        if markov {
            StructureClass::Markov
        } else {
            StructureClass::General
        }
    }

    /// 1-based edge list, for reports.
    pub fn labeled_edges(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|&(i, j)| (i + 1, j + 1)).collect()
    }
}

fn find_cycle(n: usize, children: &[Vec<usize>], indegree: &[usize]) -> Vec<usize> {
    // Vertices left with positive indegree all lie on or downstream of a cycle;
    // walking backwards along remaining in-edges must revisit a vertex.
    let remaining: Vec<bool> = indegree.iter().map(|&d| d > 0).collect();
    let mut incoming = vec![Vec::new(); n];
    for (i, cs) in children.iter().enumerate() {
        for &j in cs {
            if remaining[i] && remaining[j] {
                incoming[j].push(i);
            }
        }
    }
    let start = (0..n).find(|&v| remaining[v]).unwrap_or(0);
    let mut seen = vec![usize::MAX; n];
    let mut path = Vec::new();
    let mut v = start;
    while seen[v] == usize::MAX {
        seen[v] = path.len();
        path.push(v);
        v = match incoming[v].first() {
            Some(&u) => u,
            None => break,
        };
    }
    let mut cycle: Vec<usize> = path[seen[v].min(path.len())..].to_vec();
    cycle.reverse();
    if let Some(&first) = cycle.first() {
        cycle.push(first);
    }
    cycle.into_iter().map(|v| v + 1).collect()
}

/// The graph a transport problem is posed on: either a DAG or the complete
/// directed graph (all ordered pairs), whose causal couplings are all couplings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CausalGraph {
    Complete(usize),
    Acyclic(Dag),
}

impl CausalGraph {
    pub fn n(&self) -> usize {
        match self {
            CausalGraph::Complete(n) => *n,
            CausalGraph::Acyclic(d) => d.n(),
        }
    }

    pub fn dag(&self) -> Option<&Dag> {
        match self {
            CausalGraph::Complete(_) => None,
            CausalGraph::Acyclic(d) => Some(d),
        }
    }

    pub fn class(&self) -> StructureClass {
        match self {
            CausalGraph::Complete(_) => StructureClass::Full,
            CausalGraph::Acyclic(d) => d.classify(),
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        match self {
            CausalGraph::Complete(n) => i != j && i < *n && j < *n,
            CausalGraph::Acyclic(d) => d.edges().contains(&(i, j)),
        }
    }

    /// Whether the edge set of `self` is contained in that of `other`.
    pub fn is_subgraph_of(&self, other: &CausalGraph) -> bool {
        if self.n() != other.n() {
            return false;
        }
        match self {
            CausalGraph::Complete(_) => matches!(other, CausalGraph::Complete(_)),
            CausalGraph::Acyclic(d) => d.edges().iter().all(|&(i, j)| other.has_edge(i, j)),
        }
    }

    /// Named presets `full`, `empty`, `linear`, `markov`.
    pub fn preset(name: &str, n: usize) -> Option<CausalGraph> {
        Some(match name {
            "full" | "complete" => CausalGraph::Complete(n),
            "empty" => CausalGraph::Acyclic(Dag::empty(n)),
            "linear" => CausalGraph::Acyclic(Dag::linear(n)),
            "markov" => CausalGraph::Acyclic(Dag::markov(n)),
            _ => return None,
        })
    }
}

impl From<Dag> for CausalGraph {
    fn from(d: Dag) -> Self {
        CausalGraph::Acyclic(d)
    }
}

pub fn validate_dag(n: usize, edges: &[(usize, usize)]) -> Result<Dag> {
    Dag::new(n, edges)
}

pub fn classify_structure(graph: &CausalGraph) -> StructureClass {
    graph.class()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_topological(d: &Dag) -> bool {
        d.edges().iter().all(|&(i, j)| d.position(i) < d.position(j))
    }

    #[test]
    fn markov_chain_keeps_identity_order() {
        let d = Dag::new(3, &[(1, 2), (2, 3)]).unwrap();
        assert_eq!(d.order(), &[0, 1, 2]);
        assert_eq!(d.classify(), StructureClass::Markov);
        assert_eq!(d.parents(2), &[1]);
    }

    #[test]
    fn two_cycle_is_rejected() {
        match Dag::new(2, &[(1, 2), (2, 1)]) {
            Err(Error::CycleDetected(c)) => {
                assert_eq!(c.first(), c.last());
                assert_eq!(c.len(), 3);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn longer_cycle_is_named() {
        match Dag::new(4, &[(1, 2), (2, 3), (3, 4), (4, 2)]) {
            Err(Error::CycleDetected(c)) => {
                let body: BTreeSet<usize> = c.iter().copied().collect();
                assert_eq!(body, BTreeSet::from([2, 3, 4]));
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn reversed_edge_reorders() {
        let d = Dag::new(3, &[(3, 1)]).unwrap();
        assert!(d.position(2) < d.position(0));
        assert!(is_topological(&d));
    }

    #[test]
    fn invalid_vertices() {
        assert_eq!(
            Dag::new(2, &[(1, 3)]),
            Err(Error::InvalidVertex { vertex: 3, n: 2 })
        );
        assert_eq!(Dag::new(2, &[(1, 1)]), Err(Error::SelfLoop(1)));
    }

    #[test]
    fn classes() {
        assert_eq!(Dag::linear(3).classify(), StructureClass::Linear);
        assert_eq!(Dag::empty(3).classify(), StructureClass::Empty);
        let lin = Dag::new(3, &[(1, 2), (2, 3), (1, 3)]).unwrap();
        assert_eq!(lin.classify(), StructureClass::Linear);
        let diamond = Dag::new(4, &[(1, 2), (1, 3), (2, 4), (3, 4)]).unwrap();
        assert_eq!(diamond.classify(), StructureClass::General);
        assert_eq!(CausalGraph::Complete(3).class(), StructureClass::Full);
        // Markov structure in a relabeled graph.
        let relabeled = Dag::new(3, &[(3, 1), (1, 2)]).unwrap();
        assert_eq!(relabeled.classify(), StructureClass::Markov);
    }

    #[test]
    fn subgraph_chain() {
        let e = CausalGraph::preset("empty", 3).unwrap();
        let m = CausalGraph::preset("markov", 3).unwrap();
        let l = CausalGraph::preset("linear", 3).unwrap();
        let f = CausalGraph::preset("full", 3).unwrap();
        assert!(e.is_subgraph_of(&m) && m.is_subgraph_of(&l) && l.is_subgraph_of(&f));
        assert!(!l.is_subgraph_of(&m));
        assert!(!f.is_subgraph_of(&l));
    }
}
