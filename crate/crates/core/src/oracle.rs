//! Exact brute-force ground truth for small instances.

use fixedbitset::FixedBitSet;

use crate::error::{input, resource, Result};
use crate::factor::TriangleFactor;
use crate::graph::{Graph, VertexSet};

/// Default largest target size [`exact_triangle_factor`] accepts.
pub const DEFAULT_ORACLE_CAP: usize = 45;

/// Sorted, deduplicated triangles `a < b < c` in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangleList {
    pub triples: Vec<[usize; 3]>,
}

impl TriangleList {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

fn triangles_lex(g: &Graph) -> impl Iterator<Item = [usize; 3]> + '_ {
    (0..g.n()).flat_map(move |a| {
        g.neighbors(a).filter(move |&b| b > a).flat_map(move |b| {
            let mut common = g.row(a).clone();
            common.intersect_with(g.row(b));
            common.ones().filter(move |&c| c > b).map(move |c| [a, b, c]).collect::<Vec<_>>()
        })
    })
}

pub fn enumerate_triangles(g: &Graph) -> TriangleList {
    TriangleList {
        triples: triangles_lex(g).collect(),
    }
}

/// First triangle, in lexicographic order, meeting each of `a`, `b`, `c`.
/// The sets may overlap; one triangle vertex can serve several sets.
pub fn exists_traversing_triangle(g: &Graph, a: &VertexSet, b: &VertexSet, c: &VertexSet) -> Option<[usize; 3]> {
    if a.is_empty() || b.is_empty() || c.is_empty() {
        return None;
    }
    triangles_lex(g).find(|t| {
        let hits = |s: &VertexSet| t.iter().any(|&v| s.contains(v));
        hits(a) && hits(b) && hits(c)
    })
}

/// A triangle `[x, y, z]` with `x ∈ a`, `y ∈ b`, `z ∈ c`, scanning `x`, then
/// `y`, then `z` in ascending order. For pairwise disjoint sets this is the
/// same question as [`exists_traversing_triangle`].
pub fn transversal_triangle(g: &Graph, a: &VertexSet, b: &VertexSet, c: &VertexSet) -> Option<[usize; 3]> {
    for x in a.iter() {
        let mut ys = g.row(x).clone();
        ys.intersect_with(b.bits());
        for y in ys.ones() {
            let mut zs = g.row(x).clone();
            zs.intersect_with(g.row(y));
            zs.intersect_with(c.bits());
            if let Some(z) = zs.minimum() {
                return Some([x, y, z]);
            }
        }
    }
    None
}

pub fn exact_triangle_factor(g: &Graph, target: &VertexSet) -> Result<Option<TriangleFactor>> {
    exact_triangle_factor_capped(g, target, DEFAULT_ORACLE_CAP)
}

/// Exact decision: a triangle factor of `G[target]` or `None` if there is none.
///
/// Backtracking exact cover that always branches on the smallest uncovered
/// vertex over the triangles through it inside the uncovered set.
pub fn exact_triangle_factor_capped(g: &Graph, target: &VertexSet, cap: usize) -> Result<Option<TriangleFactor>> {
    let size = target.len();
    if !size.is_multiple_of(3) {
        return input(format!("target has {size} vertices, not a multiple of 3"));
    }
    if size > cap {
        return resource(format!("target has {size} vertices, oracle cap is {cap}"));
    }
    let mut free = target.bits().clone();
    free.grow(g.n());
    let mut chosen = Vec::with_capacity(size / 3);
    Ok(cover(g, &mut free, &mut chosen).then_some(TriangleFactor { triangles: chosen }))
}

fn cover(g: &Graph, free: &mut FixedBitSet, chosen: &mut Vec<[usize; 3]>) -> bool {
    let Some(v) = free.minimum() else {
        return true;
    };
    if !every_vertex_has_triangle(g, free) {
        return false;
    }
    let mut nv = g.row(v).clone();
    nv.intersect_with(free);
    for a in nv.ones() {
        let mut nb = nv.clone();
        nb.intersect_with(g.row(a));
        for b in nb.ones().filter(|&b| b > a) {
            for x in [v, a, b] {
                free.set(x, false);
            }
            chosen.push([v, a, b]);
            if cover(g, free, chosen) {
                return true;
            }
            chosen.pop();
            for x in [v, a, b] {
                free.insert(x);
            }
        }
    }
    false
}

fn every_vertex_has_triangle(g: &Graph, free: &FixedBitSet) -> bool {
    free.ones().all(|u| {
        let mut nu = g.row(u).clone();
        nu.intersect_with(free);
        nu.ones().any(|a| g.row(a).intersection_count(&nu) > 0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::verify_triangle_factor;
    use crate::generators::{complete, cycle, gnp};

    #[test]
    fn enumerate_small_cases() {
        assert_eq!(enumerate_triangles(&complete(4)).len(), 4);
        assert!(enumerate_triangles(&cycle(6)).is_empty());
        let list = enumerate_triangles(&complete(5));
        let mut sorted = list.triples.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, list.triples);
    }

    #[test]
    fn enumerate_matches_triple_loop() {
        let g = gnp(25, 0.5, 9);
        let mut naive = 0;
        for a in 0..25 {
            for b in a + 1..25 {
                for c in b + 1..25 {
                    if g.has_edge(a, b) && g.has_edge(b, c) && g.has_edge(a, c) {
                        naive += 1;
                    }
                }
            }
        }
        assert_eq!(enumerate_triangles(&g).len(), naive);
    }

    #[test]
    fn traversing_cases() {
        let k3 = complete(3);
        let s = |v| VertexSet::from_vertices(3, [v]);
        assert_eq!(exists_traversing_triangle(&k3, &s(0), &s(1), &s(2)), Some([0, 1, 2]));
        assert_eq!(exists_traversing_triangle(&k3, &VertexSet::empty(3), &s(1), &s(2)), None);
        // Overlapping sets: one vertex may satisfy two of them.
        assert_eq!(exists_traversing_triangle(&k3, &s(0), &s(0), &s(0)), Some([0, 1, 2]));
    }

    #[test]
    fn traversing_agrees_with_enumeration_filter() {
        let g = gnp(30, 0.3, 4);
        let all = enumerate_triangles(&g);
        for k in 0..10u64 {
            let pick = |off: u64| VertexSet::from_vertices(30, (0..30).filter(|&v| (v as u64 * 7 + k * 3 + off).is_multiple_of(5)));
            let (a, b, c) = (pick(0), pick(1), pick(2));
            let filtered = all.triples.iter().copied().find(|t| {
                [&a, &b, &c].iter().all(|s| t.iter().any(|&v| s.contains(v)))
            });
            assert_eq!(exists_traversing_triangle(&g, &a, &b, &c), filtered);
            // disjoint sets: transversal agrees on existence
            assert_eq!(transversal_triangle(&g, &a, &b, &c).is_some(), filtered.is_some());
        }
    }

    #[test]
    fn exact_factor_small_cases() {
        let k3 = complete(3);
        let f = exact_triangle_factor(&k3, &k3.vertex_set()).unwrap().unwrap();
        assert_eq!(f.triangles, vec![[0, 1, 2]]);
        let c6 = cycle(6);
        assert_eq!(exact_triangle_factor(&c6, &c6.vertex_set()).unwrap(), None);
        assert!(exact_triangle_factor(&c6, &VertexSet::from_vertices(6, [0, 1])).is_err());
        let k48 = complete(48);
        assert!(matches!(
            exact_triangle_factor(&k48, &k48.vertex_set()),
            Err(crate::Error::Resource(_))
        ));
        assert!(exact_triangle_factor_capped(&k48, &k48.vertex_set(), 48).unwrap().is_some());
    }

    #[test]
    fn exact_factor_output_verifies() {
        for seed in 0..10 {
            let g = gnp(18, 0.6, seed);
            if let Some(f) = exact_triangle_factor(&g, &g.vertex_set()).unwrap() {
                assert!(verify_triangle_factor(&g, &f, &g.vertex_set()));
            }
        }
    }
}
