//! Directed communication topologies.
//!
//! An edge `(j, i)` means agent `i` receives information from agent `j`.
//! Graphs are immutable after construction and shared read-only by the
//! weight constructors and the experiment runners.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph needs at least {min} nodes, got {got}")]
    InvalidSize { min: usize, got: usize },
    #[error("graphs have mismatched node counts ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("malformed edge list: {0}")]
    Parse(String),
}

/// A simple directed graph on nodes `0..n` without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl DirectedGraph {
    /// Build from an explicit edge list. Self-loops and out-of-range
    /// indices are rejected; duplicates collapse.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        if n < 1 {
            return Err(GraphError::InvalidSize { min: 1, got: n });
        }
        let mut set = BTreeSet::new();
        for (j, i) in edges {
            if j >= n || i >= n {
                return Err(GraphError::Parse(format!(
                    "edge ({j}, {i}) out of range for n={n}"
                )));
            }
            if j == i {
                return Err(GraphError::Parse(format!(
                    "self-loop ({j}, {j}) not allowed"
                )));
            }
            set.insert((j, i));
        }
        Ok(Self { n, edges: set })
    }

    /// Directed ring `i -> i+1 (mod n)` with every other ordered pair added
    /// independently with probability `p`. Pairs are visited in
    /// lexicographic order with one uniform draw each, so the result is a
    /// pure function of `(n, p, seed)`.
    pub fn ring_plus_random(n: usize, p: f64, seed: u64) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::InvalidSize { min: 2, got: n });
        }
        assert!((0.0..=1.0).contains(&p), "p must lie in [0, 1]");
        let mut edges = BTreeSet::new();
        for i in 0..n {
            edges.insert((i, (i + 1) % n));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for j in 0..n {
            for i in 0..n {
                if j == i || edges.contains(&(j, i)) {
                    continue;
                }
                if rng.random::<f64>() < p {
                    edges.insert((j, i));
                }
            }
        }
        Ok(Self { n, edges })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, j: usize, i: usize) -> bool {
        self.edges.contains(&(j, i))
    }

    /// In-neighbors of `i`: nodes `j` with an edge `(j, i)`.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.has_edge(j, i)).collect()
    }

    /// Out-neighbors of `i`: nodes `j` with an edge `(i, j)`.
    pub fn out_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.has_edge(i, j)).collect()
    }

    /// The graph with every edge reversed.
    pub fn transpose(&self) -> Self {
        Self {
            n: self.n,
            edges: self.edges.iter().map(|&(j, i)| (i, j)).collect(),
        }
    }

    /// Nodes reachable from `start` following edge direction, including
    /// `start` itself.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let out: Vec<Vec<usize>> = (0..self.n).map(|i| self.out_neighbors(i)).collect();
        let mut seen = vec![false; self.n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &w in &out[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Spanning-tree roots: nodes from which every other node is reachable.
    pub fn root_set(&self) -> BTreeSet<usize> {
        (0..self.n)
            .filter(|&r| self.reachable_from(r).iter().all(|&s| s))
            .collect()
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.root_set().len() == self.n
    }

    /// Edge-list text format: first line `n`, then one `j i` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for (j, i) in &self.edges {
            s.push_str(&format!("{j} {i}\n"));
        }
        s
    }

    /// Parse the [`to_edge_list`](Self::to_edge_list) format.
    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let n: usize = lines
            .next()
            .ok_or_else(|| GraphError::Parse("empty edge list".into()))?
            .trim()
            .parse()
            .map_err(|e| GraphError::Parse(format!("bad node count: {e}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let j: usize = it
                .next()
                .ok_or_else(|| GraphError::Parse(format!("bad edge line: {line:?}")))?
                .parse()
                .map_err(|e| GraphError::Parse(format!("bad edge line {line:?}: {e}")))?;
            let i: usize = it
                .next()
                .ok_or_else(|| GraphError::Parse(format!("bad edge line: {line:?}")))?
                .parse()
                .map_err(|e| GraphError::Parse(format!("bad edge line {line:?}: {e}")))?;
            if it.next().is_some() {
                return Err(GraphError::Parse(format!("trailing tokens in {line:?}")));
            }
            edges.push((j, i));
        }
        Self::new(n, edges)
    }
}

/// The topology half of the weight-matrix assumption: the pull graph and the
/// transpose of the push graph must share at least one spanning-tree root.
pub fn satisfies_assumption2_topology(
    g_pull: &DirectedGraph,
    g_push: &DirectedGraph,
) -> Result<bool, GraphError> {
    if g_pull.node_count() != g_push.node_count() {
        return Err(GraphError::DimensionMismatch(
            g_pull.node_count(),
            g_push.node_count(),
        ));
    }
    let roots_a = g_pull.root_set();
    let roots_bt = g_push.transpose().root_set();
    Ok(roots_a.intersection(&roots_bt).next().is_some())
}
