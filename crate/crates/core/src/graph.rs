//! Dense simple undirected graphs over vertex indices `0..n`, with bitset
//! adjacency rows and a small vertex-set algebra.
//!
//! Graphs never change after construction. Algorithms that "remove" vertices
//! do so by passing shrinking [`VertexSet`]s around.

use std::fmt;
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;

use crate::error::{input, Error, Result};

/// A subset of `0..universe`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VertexSet {
    bits: FixedBitSet,
}

impl VertexSet {
    pub fn empty(universe: usize) -> Self {
        VertexSet {
            bits: FixedBitSet::with_capacity(universe),
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(universe);
        bits.insert_range(..);
        VertexSet { bits }
    }

    /// Builds a set from vertex indices; panics if one is outside the universe.
    pub fn from_vertices<I: IntoIterator<Item = usize>>(universe: usize, vertices: I) -> Self {
        let mut set = Self::empty(universe);
        for v in vertices {
            set.insert(v);
        }
        set
    }

    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.bits.contains(v)
    }

    pub fn insert(&mut self, v: usize) {
        assert!(v < self.universe(), "vertex {v} outside universe {}", self.universe());
        self.bits.insert(v);
    }

    pub fn remove(&mut self, v: usize) {
        if v < self.universe() {
            self.bits.set(v, false);
        }
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn first(&self) -> Option<usize> {
        self.bits.minimum()
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        let mut bits = self.bits.clone();
        bits.union_with(&other.bits);
        VertexSet { bits }
    }

    pub fn intersection(&self, other: &VertexSet) -> VertexSet {
        let mut bits = self.bits.clone();
        bits.intersect_with(&other.bits);
        VertexSet { bits }
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        let mut bits = self.bits.clone();
        bits.difference_with(&other.bits);
        VertexSet { bits }
    }

    pub fn union_with(&mut self, other: &VertexSet) {
        self.bits.union_with(&other.bits);
    }

    pub fn difference_with(&mut self, other: &VertexSet) {
        self.bits.difference_with(&other.bits);
    }

    pub fn intersection_count(&self, other: &VertexSet) -> usize {
        self.bits.intersection_count(&other.bits)
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        self.bits.is_disjoint(&other.bits)
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub(crate) fn bits(&self) -> &FixedBitSet {
        &self.bits
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Immutable simple undirected graph on `0..n`.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<FixedBitSet>,
    degrees: Vec<usize>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from an edge list. Self-loops, duplicate edges (in
    /// either orientation) and out-of-range endpoints are rejected.
    pub fn from_edges<I: IntoIterator<Item = (usize, usize)>>(n: usize, edges: I) -> Result<Self> {
        let mut adjacency = vec![FixedBitSet::with_capacity(n); n];
        let mut edge_count = 0;
        for (u, v) in edges {
            if u >= n || v >= n {
                return input(format!("edge ({u}, {v}) has an endpoint outside 0..{n}"));
            }
            if u == v {
                return input(format!("self-loop at vertex {u}"));
            }
            if adjacency[u].contains(v) {
                return input(format!("duplicate edge ({u}, {v})"));
            }
            adjacency[u].insert(v);
            adjacency[v].insert(u);
            edge_count += 1;
        }
        let degrees = adjacency.iter().map(|row| row.count_ones(..)).collect();
        Ok(Graph {
            adjacency,
            degrees,
            edge_count,
        })
    }

    /// Builds a graph from a symmetric predicate evaluated on every pair `u < v`.
    pub fn from_fn(n: usize, mut adjacent: impl FnMut(usize, usize) -> bool) -> Self {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if adjacent(u, v) {
                    edges.push((u, v));
                }
            }
        }
        Graph::from_edges(n, edges).expect("pairs u < v are always simple")
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].contains(v)
    }

    pub(crate) fn row(&self, v: usize) -> &FixedBitSet {
        &self.adjacency[v]
    }

    /// Neighbours of `v` in ascending order.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[v].ones()
    }

    pub fn neighbor_set(&self, v: usize) -> VertexSet {
        VertexSet {
            bits: self.adjacency[v].clone(),
        }
    }

    /// Edges as pairs `u < v`, lexicographically ordered.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |u| self.adjacency[u].ones().filter(move |&v| v > u).map(move |v| (u, v)))
    }

    pub fn vertex_set(&self) -> VertexSet {
        VertexSet::full(self.n())
    }

    /// `e(X, Y) = sum over x in X of |N(x) ∩ Y|`. An edge with both ends in
    /// `X ∩ Y` is counted twice.
    pub fn edge_count_between(&self, x: &VertexSet, y: &VertexSet) -> usize {
        x.iter().map(|v| self.adjacency[v].intersection_count(y.bits())).sum()
    }

    /// `N(v) ∩ W`.
    pub fn neighbors_in(&self, v: usize, within: &VertexSet) -> Result<VertexSet> {
        if v >= self.n() {
            return input(format!("vertex {v} outside 0..{}", self.n()));
        }
        let mut bits = self.adjacency[v].clone();
        bits.intersect_with(within.bits());
        Ok(VertexSet { bits })
    }

    /// `|N(v) ∩ W|` without allocating.
    pub fn degree_into(&self, v: usize, within: &VertexSet) -> usize {
        self.adjacency[v].intersection_count(within.bits())
    }

    /// The induced subgraph `G[W]` together with the map from its vertices
    /// back to the vertices of `self` (ascending).
    pub fn induced_subgraph(&self, within: &VertexSet) -> (Graph, Vec<usize>) {
        let map: Vec<usize> = within.iter().collect();
        let sub = Graph::from_fn(map.len(), |a, b| self.has_edge(map[a], map[b]));
        (sub, map)
    }

    pub fn min_degree(&self) -> Result<usize> {
        self.degrees
            .iter()
            .copied()
            .min()
            .ok_or_else(|| Error::Input("minimum degree of a graph with no vertices".into()))
    }

    pub fn max_degree(&self) -> Result<usize> {
        self.degrees
            .iter()
            .copied()
            .max()
            .ok_or_else(|| Error::Input("maximum degree of a graph with no vertices".into()))
    }

    /// `Some(d)` when every vertex has degree `d`.
    pub fn regular_degree(&self) -> Option<usize> {
        let first = *self.degrees.first()?;
        self.degrees.iter().all(|&d| d == first).then_some(first)
    }

    /// `2|E| / (n(n-1))`, or 0 for graphs with fewer than two vertices.
    pub fn density(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        2.0 * self.edge_count as f64 / (n as f64 * (n as f64 - 1.0))
    }

    /// Serializes to the edge-list text format: a header `n m` followed by
    /// one `u v` line per edge with `u < v`, in lexicographic order.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(16 + self.edge_count * 10);
        writeln!(out, "{} {}", self.n(), self.edge_count).unwrap();
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }

    /// Parses the edge-list format. Blank lines are ignored; endpoint order
    /// within a line is not significant, but the declared edge count must match.
    pub fn parse_edge_list(text: &str) -> Result<Graph> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing `n m` header".into(),
        })?;
        let (n, m) = parse_pair(hline, header)?;
        let mut adjacency = vec![FixedBitSet::with_capacity(n); n];
        let mut seen = 0usize;
        for (line, body) in lines {
            let (u, v) = parse_pair(line, body)?;
            let msg = if u >= n || v >= n {
                Some(format!("endpoint outside 0..{n}"))
            } else if u == v {
                Some(format!("self-loop at vertex {u}"))
            } else if adjacency[u].contains(v) {
                Some(format!("duplicate edge {u} {v}"))
            } else {
                None
            };
            if let Some(msg) = msg {
                return Err(Error::Parse { line, msg });
            }
            adjacency[u].insert(v);
            adjacency[v].insert(u);
            seen += 1;
        }
        if seen != m {
            return Err(Error::Parse {
                line: hline,
                msg: format!("header declares {m} edges but {seen} were listed"),
            });
        }
        let degrees = adjacency.iter().map(|row| row.count_ones(..)).collect();
        Ok(Graph {
            adjacency,
            degrees,
            edge_count: m,
        })
    }
}

fn parse_pair(line: usize, body: &str) -> Result<(usize, usize)> {
    let mut parts = body.split_whitespace();
    let mut next = || -> Result<usize> {
        let tok = parts.next().ok_or(Error::Parse {
            line,
            msg: "expected two integers".into(),
        })?;
        tok.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("`{tok}` is not a non-negative integer"),
        })
    };
    let a = next()?;
    let b = next()?;
    if parts.next().is_some() {
        return Err(Error::Parse {
            line,
            msg: "trailing tokens".into(),
        });
    }
    Ok((a, b))
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n())
            .field("m", &self.edge_count)
            .finish()
    }
}
