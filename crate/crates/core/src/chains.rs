//! K4⁻ chains and the depth-first exploration that grows them.
//!
//! An `ℓ`-chain glues `ℓ` copies of K4⁻ end to end at their degree-2
//! vertices. It has `3ℓ + 1` vertices, `ℓ + 1` of which are *removable*:
//! deleting exactly one removable vertex leaves a graph with a triangle
//! factor, while deleting any other single vertex does not. A 0-chain is a
//! single vertex.

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::factor::TriangleFactor;
use crate::graph::{Graph, VertexSet};
use crate::oracle::exact_triangle_factor_capped;

/// Largest level whose removable semantics [`verify_chain`] re-checks with
/// the exact oracle.
pub const DEFAULT_VERIFY_LEVEL_CAP: usize = 6;

/// A chain inside a host graph.
///
/// Block `k` is `[r_k, a_k, b_k, r_{k+1}]`: the removable endpoints are the
/// K4⁻'s degree-2 vertices and `a_k, b_k` its adjacent middle pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub level: usize,
    pub vertices: Vec<usize>,
    pub removable: Vec<usize>,
    pub blocks: Vec<[usize; 4]>,
}

impl Chain {
    pub fn singleton(v: usize) -> Self {
        Chain {
            level: 0,
            vertices: vec![v],
            removable: vec![v],
            blocks: Vec::new(),
        }
    }

    /// Reassembles a chain from its blocks. Consecutive blocks must share
    /// their removable endpoint.
    pub fn from_blocks(blocks: Vec<[usize; 4]>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return input("a chain needs at least one block; use Chain::singleton for 0-chains");
        };
        let mut chain = Chain::singleton(first[0]);
        for block in &blocks {
            if block[0] != chain.last_removable() {
                return input(format!("block {block:?} does not start at removable {}", chain.last_removable()));
            }
            chain.push_block(block[1], block[2], block[3]);
        }
        Ok(chain)
    }

    pub fn last_removable(&self) -> usize {
        *self.removable.last().expect("chains are never empty")
    }

    fn push_block(&mut self, a: usize, b: usize, w: usize) {
        let r = self.last_removable();
        self.blocks.push([r, a, b, w]);
        self.vertices.extend([a, b, w]);
        self.removable.push(w);
        self.level += 1;
    }

    /// Drops the last block, returning `(removable, a, b)` that were removed.
    fn pop_block(&mut self) -> Option<(usize, usize, usize)> {
        let [_, a, b, w] = self.blocks.pop()?;
        self.vertices.truncate(self.vertices.len() - 3);
        self.removable.pop();
        self.level -= 1;
        Some((w, a, b))
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex_set(&self, universe: usize) -> VertexSet {
        VertexSet::from_vertices(universe, self.vertices.iter().copied())
    }

    pub fn removable_set(&self, universe: usize) -> VertexSet {
        VertexSet::from_vertices(universe, self.removable.iter().copied())
    }

    /// The chain's own graph (block edges only), relabelled onto
    /// `0..len()` in `self.vertices` order.
    pub fn as_graph(&self) -> Graph {
        let index = |v: usize| self.vertices.iter().position(|&x| x == v).expect("block vertex in chain");
        let edges = self.blocks.iter().flat_map(|&[r, a, b, w]| {
            [(r, a), (r, b), (a, b), (a, w), (b, w)].map(|(x, y)| (index(x), index(y)))
        });
        Graph::from_edges(self.len(), edges).expect("block edges are distinct")
    }
}

/// The exploration state `(C, D, D', U)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DfsState {
    /// The chain under construction; `None` when empty.
    pub chain: Option<Chain>,
    /// Abandoned removable vertices.
    pub abandoned_removable: Vec<usize>,
    /// Abandoned middle-pair vertices.
    pub abandoned_inner: Vec<usize>,
    pub unexplored: VertexSet,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainBuild {
    Built(Chain),
    Exhausted(DfsState),
}

impl ChainBuild {
    pub fn chain(self) -> Option<Chain> {
        match self {
            ChainBuild::Built(c) => Some(c),
            ChainBuild::Exhausted(_) => None,
        }
    }
}

/// `Some((x, y))` with `x < y` the non-adjacent pair when the four vertices
/// induce exactly five edges.
pub fn is_k4_minus(g: &Graph, four: [usize; 4]) -> Result<Option<(usize, usize)>> {
    for i in 0..4 {
        if four[i] >= g.n() {
            return input(format!("vertex {} outside 0..{}", four[i], g.n()));
        }
        if four[i + 1..].contains(&four[i]) {
            return input(format!("repeated vertex {} in {four:?}", four[i]));
        }
    }
    let mut missing = Vec::new();
    for i in 0..4 {
        for j in i + 1..4 {
            if !g.has_edge(four[i], four[j]) {
                missing.push((four[i].min(four[j]), four[i].max(four[j])));
            }
        }
    }
    Ok((missing.len() == 1).then(|| missing[0]))
}

/// A K4⁻ with `v` as a degree-2 vertex and its other vertices in `within`:
/// returns `[a, b, w]` with edges `va, vb, ab, aw, bw`, taking the
/// lexicographically first `(a, b, w)` with `a < b`.
pub fn find_k4_minus_extension(g: &Graph, v: usize, within: &VertexSet) -> Option<[usize; 3]> {
    let mut nv = g.row(v).clone();
    nv.intersect_with(within.bits());
    nv.set(v, false);
    for a in nv.ones() {
        let mut bs = nv.clone();
        bs.intersect_with(g.row(a));
        for b in bs.ones().filter(|&b| b > a) {
            let mut ws = g.row(a).clone();
            ws.intersect_with(g.row(b));
            ws.intersect_with(within.bits());
            ws.set(v, false);
            if let Some(w) = ws.minimum() {
                return Some([a, b, w]);
            }
        }
    }
    None
}

pub fn build_chain_dfs(g: &Graph, within: &VertexSet, target: usize) -> ChainBuild {
    build_chain_dfs_observed(g, within, target, |_| {})
}

/// Depth-first chain exploration inside `G[within]`, stopping as soon as the
/// chain reaches level `target`.
///
/// Each step does one of: start a singleton chain from the smallest
/// unexplored vertex; glue the first K4⁻ extension onto the last removable
/// vertex; or abandon the last removable vertex (to `D`) together with the
/// middle pair of the last block (to `D'`). `observe` sees the state after
/// every step. When the unexplored set runs out first, the final state is
/// returned.
pub fn build_chain_dfs_observed(
    g: &Graph,
    within: &VertexSet,
    target: usize,
    mut observe: impl FnMut(&DfsState),
) -> ChainBuild {
    let mut state = DfsState {
        chain: None,
        abandoned_removable: Vec::new(),
        abandoned_inner: Vec::new(),
        unexplored: within.clone(),
    };
    loop {
        if let Some(c) = &state.chain {
            if c.level == target {
                return ChainBuild::Built(state.chain.take().unwrap());
            }
        }
        if state.unexplored.is_empty() {
            return ChainBuild::Exhausted(state);
        }
        match state.chain.as_mut() {
            None => {
                let v = state.unexplored.first().expect("nonempty");
                state.unexplored.remove(v);
                state.chain = Some(Chain::singleton(v));
            }
            Some(c) => match find_k4_minus_extension(g, c.last_removable(), &state.unexplored) {
                Some([a, b, w]) => {
                    c.push_block(a, b, w);
                    for x in [a, b, w] {
                        state.unexplored.remove(x);
                    }
                }
                None => match c.pop_block() {
                    Some((w, a, b)) => {
                        state.abandoned_removable.push(w);
                        state.abandoned_inner.extend([a, b]);
                    }
                    None => {
                        state.abandoned_removable.push(c.last_removable());
                        state.chain = None;
                    }
                },
            },
        }
        debug_assert!(state.abandoned_inner.len() <= 2 * state.abandoned_removable.len());
        observe(&state);
    }
}

/// Builds `count` pairwise disjoint `level`-chains inside `within`, each from
/// a fresh exploration of what the previous chains left. Returns the chains
/// found so far on failure.
pub fn build_disjoint_chains(
    g: &Graph,
    within: &VertexSet,
    level: usize,
    count: usize,
) -> std::result::Result<Vec<Chain>, Vec<Chain>> {
    let mut free = within.clone();
    let mut chains = Vec::with_capacity(count);
    while chains.len() < count {
        match build_chain_dfs(g, &free, level) {
            ChainBuild::Built(c) => {
                for &v in &c.vertices {
                    free.remove(v);
                }
                chains.push(c);
            }
            ChainBuild::Exhausted(_) => return Err(chains),
        }
    }
    Ok(chains)
}

pub fn verify_chain(g: &Graph, chain: &Chain) -> bool {
    verify_chain_capped(g, chain, DEFAULT_VERIFY_LEVEL_CAP)
}

/// Structural check against the host graph, plus (for `level <= level_cap`)
/// an exact-oracle check of the removable semantics on the chain's own graph.
pub fn verify_chain_capped(g: &Graph, chain: &Chain, level_cap: usize) -> bool {
    structure_ok(g, chain) && (chain.level > level_cap || removable_semantics_ok(chain))
}

fn structure_ok(g: &Graph, chain: &Chain) -> bool {
    let l = chain.level;
    if chain.blocks.len() != l || chain.removable.len() != l + 1 || chain.vertices.len() != 3 * l + 1 {
        return false;
    }
    if chain.vertices.iter().any(|&v| v >= g.n()) {
        return false;
    }
    let mut sorted = chain.vertices.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != chain.vertices.len() {
        return false;
    }
    let mut listed: Vec<usize> = vec![chain.removable[0]];
    for (k, &[r, a, b, w]) in chain.blocks.iter().enumerate() {
        if r != chain.removable[k] || w != chain.removable[k + 1] {
            return false;
        }
        let edges = [(r, a), (r, b), (a, b), (a, w), (b, w)];
        if !edges.iter().all(|&(x, y)| g.has_edge(x, y)) {
            return false;
        }
        listed.extend([a, b, w]);
    }
    listed.sort_unstable();
    listed == sorted
}

fn removable_semantics_ok(chain: &Chain) -> bool {
    let h = chain.as_graph();
    let all = h.vertex_set();
    (0..chain.len()).all(|i| {
        let mut rest = all.clone();
        rest.remove(i);
        let has_factor = exact_triangle_factor_capped(&h, &rest, usize::MAX)
            .expect("3ℓ vertices remain")
            .is_some();
        has_factor == chain.removable.contains(&chain.vertices[i])
    })
}

/// Triangle factor of the chain minus removable vertex `r`, read off by
/// position: blocks before `r` use their left triangle `{r_k, a_k, b_k}`,
/// blocks after use their right triangle `{a_k, b_k, r_{k+1}}`.
pub fn chain_factor_after_removal(chain: &Chain, r: usize) -> Result<TriangleFactor> {
    let Some(pos) = chain.removable.iter().position(|&x| x == r) else {
        return input(format!("vertex {r} is not removable in this chain"));
    };
    let triangles = chain
        .blocks
        .iter()
        .enumerate()
        .map(|(k, &[left, a, b, right])| if k < pos { [left, a, b] } else { [a, b, right] })
        .collect();
    Ok(TriangleFactor { triangles })
}

/// Observation-chain tiling: `triangle[i]` must be a removable vertex of
/// `chains[i]`; the result covers the union of the three chains.
pub fn tile_with_triangle(chains: [&Chain; 3], triangle: [usize; 3]) -> Result<TriangleFactor> {
    let mut factor = TriangleFactor {
        triangles: vec![triangle],
    };
    for (chain, r) in chains.into_iter().zip(triangle) {
        factor.extend(chain_factor_after_removal(chain, r)?);
    }
    Ok(factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::verify_triangle_factor;
    use crate::generators::{complete, complete_multipartite, cycle, gnp};
    use crate::oracle::exact_triangle_factor;

    fn k4_minus() -> Graph {
        // degree-2 pair is {0, 3}
        Graph::from_edges(4, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn k4_minus_detection() {
        assert_eq!(is_k4_minus(&k4_minus(), [0, 1, 2, 3]).unwrap(), Some((0, 3)));
        assert_eq!(is_k4_minus(&complete(4), [0, 1, 2, 3]).unwrap(), None);
        assert_eq!(is_k4_minus(&cycle(4), [0, 1, 2, 3]).unwrap(), None);
        assert!(is_k4_minus(&complete(4), [0, 1, 1, 3]).is_err());
    }

    #[test]
    fn extension_cases() {
        let g = k4_minus();
        let u = VertexSet::from_vertices(4, [1, 2, 3]);
        assert_eq!(find_k4_minus_extension(&g, 0, &u), Some([1, 2, 3]));
        let bip = complete_multipartite(&[5, 5]);
        let rest = VertexSet::from_vertices(10, 1..10);
        assert_eq!(find_k4_minus_extension(&bip, 0, &rest), None);
    }

    #[test]
    fn extension_is_first_in_triple_scan() {
        let g = gnp(30, 0.6, 3);
        let u = VertexSet::from_vertices(30, 1..30);
        let found = find_k4_minus_extension(&g, 0, &u).unwrap();
        let mut brute = None;
        'scan: for a in 1..30 {
            for b in a + 1..30 {
                for w in 1..30 {
                    if w == a || w == b {
                        continue;
                    }
                    let e = |x, y| g.has_edge(x, y);
                    if e(0, a) && e(0, b) && e(a, b) && e(a, w) && e(b, w) {
                        brute = Some([a, b, w]);
                        break 'scan;
                    }
                }
            }
        }
        assert_eq!(Some(found), brute);
        let [a, b, w] = found;
        // present as a subgraph; induced it is K4⁻ unless 0 ~ w
        assert_eq!(is_k4_minus(&g, [0, a, b, w]).unwrap().is_some(), !g.has_edge(0, w));
    }

    #[test]
    fn dfs_simple_cases() {
        let g = complete(5);
        let c = build_chain_dfs(&g, &g.vertex_set(), 0).chain().unwrap();
        assert_eq!(c, Chain::singleton(0));

        let k13 = complete(13);
        let c = build_chain_dfs(&k13, &k13.vertex_set(), 4).chain().unwrap();
        assert_eq!((c.level, c.len(), c.removable.len()), (4, 13, 5));
        assert!(verify_chain(&k13, &c));

        let bip = complete_multipartite(&[6, 6]);
        assert!(matches!(build_chain_dfs(&bip, &bip.vertex_set(), 1), ChainBuild::Exhausted(_)));
        assert!(matches!(
            build_chain_dfs(&bip, &VertexSet::empty(12), 0),
            ChainBuild::Exhausted(_)
        ));
    }

    #[test]
    fn dfs_state_bounds_hold_each_step() {
        for seed in 0..6 {
            let g = gnp(40, 0.25, seed);
            let mut prev: Option<DfsState> = None;
            let _ = build_chain_dfs_observed(&g, &g.vertex_set(), 8, |s| {
                assert!(s.abandoned_inner.len() <= 2 * s.abandoned_removable.len());
                if let Some(p) = &prev {
                    let chain_len = |st: &DfsState| st.chain.as_ref().map_or(0, Chain::len) as isize;
                    assert!((chain_len(s) - chain_len(p)).abs() <= 3);
                    assert!((p.unexplored.len() as isize - s.unexplored.len() as isize).abs() <= 3);
                    assert!(s.abandoned_removable.len() - p.abandoned_removable.len() <= 1);
                    assert!(s.abandoned_inner.len() - p.abandoned_inner.len() <= 2);
                }
                prev = Some(s.clone());
            });
        }
    }

    #[test]
    fn verify_chain_cases() {
        let g = k4_minus();
        let one = Chain::from_blocks(vec![[0, 1, 2, 3]]).unwrap();
        assert!(verify_chain(&g, &one));
        let missing = Graph::from_edges(4, [(0, 1), (0, 2), (1, 2), (1, 3)]).unwrap();
        assert!(!verify_chain(&missing, &one));
        let mut bad = one.clone();
        bad.removable[1] = 2;
        assert!(!verify_chain(&g, &bad));
        assert!(Chain::from_blocks(vec![[0, 1, 2, 3], [4, 5, 6, 7]]).is_err());
    }

    #[test]
    fn positional_factor_matches_figure_pattern() {
        // removable f1..f5 = 0,3,6,9,12; middle pairs (1,2),(4,5),(7,8),(10,11)
        let blocks = vec![[0, 1, 2, 3], [3, 4, 5, 6], [6, 7, 8, 9], [9, 10, 11, 12]];
        let chain = Chain::from_blocks(blocks).unwrap();
        let f = chain_factor_after_removal(&chain, 9).unwrap();
        assert_eq!(f.triangles, vec![[0, 1, 2], [3, 4, 5], [6, 7, 8], [10, 11, 12]]);

        let h = chain.as_graph();
        let mut rest = h.vertex_set();
        rest.remove(9);
        assert!(exact_triangle_factor(&h, &rest).unwrap().is_some());
        assert!(verify_triangle_factor(&h, &f, &rest));
        assert!(chain_factor_after_removal(&chain, 1).is_err());
    }

    #[test]
    fn positional_factor_small_chains() {
        let one = Chain::from_blocks(vec![[0, 1, 2, 3]]).unwrap();
        assert_eq!(chain_factor_after_removal(&one, 0).unwrap().triangles, vec![[1, 2, 3]]);
        assert_eq!(chain_factor_after_removal(&one, 3).unwrap().triangles, vec![[0, 1, 2]]);
        let two = Chain::from_blocks(vec![[0, 1, 2, 3], [3, 4, 5, 6]]).unwrap();
        let f = chain_factor_after_removal(&two, 3).unwrap();
        let h = two.as_graph();
        let mut rest = h.vertex_set();
        rest.remove(3);
        assert!(verify_triangle_factor(&h, &f, &rest));
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn chain_json_keys() {
        let c = Chain::from_blocks(vec![[0, 1, 2, 3]]).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["level"], 1);
        assert_eq!(v["blocks"][0], serde_json::json!([0, 1, 2, 3]));
        assert_eq!(v["removable"], serde_json::json!([0, 3]));
    }
}
