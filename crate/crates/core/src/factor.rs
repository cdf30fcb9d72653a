//! Triangle factors and their verification.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{Graph, VertexSet};

/// A collection of vertex triples meant to be pairwise disjoint host triangles.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriangleFactor {
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleFactor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn push(&mut self, t: [usize; 3]) {
        self.triangles.push(t);
    }

    pub fn extend(&mut self, other: TriangleFactor) {
        self.triangles.extend(other.triangles);
    }

    /// Union of all triangle vertices (duplicates collapse).
    pub fn covered(&self, universe: usize) -> VertexSet {
        VertexSet::from_vertices(universe, self.triangles.iter().flatten().copied())
    }

    /// Sorts each triple and the list, for canonical output.
    pub fn normalized(mut self) -> Self {
        for t in &mut self.triangles {
            t.sort_unstable();
        }
        self.triangles.sort_unstable();
        self
    }
}

/// First reason a factor fails to be a triangle factor of `G[target]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FactorViolation {
    VertexOutOfRange { vertex: usize },
    Overlap { vertex: usize },
    NotATriangle { triangle: [usize; 3] },
    OutsideTarget { vertex: usize },
    Uncovered { vertex: usize },
}

impl fmt::Display for FactorViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorViolation::VertexOutOfRange { vertex } => write!(f, "vertex {vertex} is not in the graph"),
            FactorViolation::Overlap { vertex } => write!(f, "overlap: vertex {vertex} is used twice"),
            FactorViolation::NotATriangle { triangle: [a, b, c] } => {
                write!(f, "not a triangle: {{{a}, {b}, {c}}} is missing an edge")
            }
            FactorViolation::OutsideTarget { vertex } => write!(f, "vertex {vertex} lies outside the target set"),
            FactorViolation::Uncovered { vertex } => write!(f, "uncovered: vertex {vertex} is in no triangle"),
        }
    }
}

/// Checks that the triples are pairwise disjoint host triangles whose union
/// is exactly `target`.
pub fn check_triangle_factor(g: &Graph, factor: &TriangleFactor, target: &VertexSet) -> Result<(), FactorViolation> {
    let n = g.n();
    let mut used = vec![false; n];
    for t in &factor.triangles {
        for &v in t {
            if v >= n {
                return Err(FactorViolation::VertexOutOfRange { vertex: v });
            }
            if used[v] {
                return Err(FactorViolation::Overlap { vertex: v });
            }
            used[v] = true;
        }
        let [a, b, c] = *t;
        if !(g.has_edge(a, b) && g.has_edge(b, c) && g.has_edge(a, c)) {
            return Err(FactorViolation::NotATriangle { triangle: *t });
        }
    }
    for (v, &u) in used.iter().enumerate() {
        let wanted = v < target.universe() && target.contains(v);
        if u && !wanted {
            return Err(FactorViolation::OutsideTarget { vertex: v });
        }
        if wanted && !u {
            return Err(FactorViolation::Uncovered { vertex: v });
        }
    }
    Ok(())
}

pub fn verify_triangle_factor(g: &Graph, factor: &TriangleFactor, target: &VertexSet) -> bool {
    check_triangle_factor(g, factor, target).is_ok()
}
