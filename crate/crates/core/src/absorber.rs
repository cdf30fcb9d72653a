//! Absorption machinery: auxiliary graphs between chain levels, exact vertex
//! covers, Haxell's condition and the search for disjoint representative
//! edges, selection of absorbable chains, and resolution of one level.

use std::collections::{BTreeSet, HashMap};

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::chains::{tile_with_triangle, Chain};
use crate::error::{input, resource, Result};
use crate::factor::TriangleFactor;
use crate::graph::{Graph, VertexSet};
use crate::oracle::transversal_triangle;
use crate::rng::rng;

/// Largest vertex set the exact vertex-cover solver accepts.
pub const COVER_VERTEX_CAP: usize = 64;
/// Largest number of index subsets an exhaustive Haxell check enumerates
/// (every subset of a 20-graph family).
pub const HAXELL_SUBSET_CAP: u64 = 1 << 20;
pub const DEFAULT_SDR_BUDGET: u64 = 2_000_000;
/// Node budget for the packing search in [`resolve_level`] after the greedy
/// packing fails.
pub const RESOLVE_SEARCH_BUDGET: u64 = 20_000;

/// A graph on `0..vertex_count` attached to an owner index. In the level
/// cascade the owner is a lower chain and vertices index upper chains; edge
/// `{j, k}` carries a host triangle `[r, s, u]` with `r` removable in the
/// owner, `s` in upper `j` and `u` in upper `k` (`j < k`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxGraph {
    pub owner: usize,
    pub vertex_count: usize,
    pub edges: Vec<(usize, usize)>,
    /// One witness per edge, or empty for abstract graphs.
    pub witnesses: Vec<[usize; 3]>,
}

impl AuxGraph {
    pub fn abstract_graph(owner: usize, vertex_count: usize, edges: Vec<(usize, usize)>) -> Self {
        AuxGraph {
            owner,
            vertex_count,
            edges,
            witnesses: Vec::new(),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

fn check_disjoint(universe: usize, chains: &[&Chain]) -> Result<()> {
    let mut seen = VertexSet::empty(universe);
    for c in chains {
        for &v in &c.vertices {
            if v >= universe || seen.contains(v) {
                return input(format!("chains are not pairwise disjoint (vertex {v})"));
            }
            seen.insert(v);
        }
    }
    Ok(())
}

/// `G_i` for a lower chain: `{j, k}` is an edge iff some host triangle has
/// one vertex in each of `R(lower)`, `R(uppers[j])`, `R(uppers[k])`.
pub fn build_aux_graph(g: &Graph, owner: usize, lower: &Chain, uppers: &[Chain]) -> Result<AuxGraph> {
    let all: Vec<&Chain> = std::iter::once(lower).chain(uppers).collect();
    check_disjoint(g.n(), &all)?;
    Ok(aux_graph_unchecked(g, owner, lower, uppers))
}

fn aux_graph_unchecked(g: &Graph, owner: usize, lower: &Chain, uppers: &[Chain]) -> AuxGraph {
    let n = g.n();
    let lower_r = lower.removable_set(n);
    let upper_r: Vec<VertexSet> = uppers.iter().map(|c| c.removable_set(n)).collect();
    // uppers that see the lower chain's removable set at all
    let touching: Vec<bool> = upper_r
        .iter()
        .map(|r| lower_r.iter().any(|x| g.degree_into(x, r) > 0))
        .collect();
    let mut edges = Vec::new();
    let mut witnesses = Vec::new();
    for j in 0..uppers.len() {
        if !touching[j] {
            continue;
        }
        for k in j + 1..uppers.len() {
            if !touching[k] {
                continue;
            }
            if let Some(t) = transversal_triangle(g, &lower_r, &upper_r[j], &upper_r[k]) {
                edges.push((j, k));
                witnesses.push(t);
            }
        }
    }
    AuxGraph {
        owner,
        vertex_count: uppers.len(),
        edges,
        witnesses,
    }
}

/// The union of the edge sets (duplicates removed), on the largest vertex count.
pub fn union_edges<'a>(graphs: impl IntoIterator<Item = &'a AuxGraph>) -> (usize, Vec<(usize, usize)>) {
    let mut n = 0;
    let mut set = BTreeSet::new();
    for g in graphs {
        n = n.max(g.vertex_count);
        set.extend(g.edges.iter().map(|&(a, b)| (a.min(b), a.max(b))));
    }
    (n, set.into_iter().collect())
}

pub fn vertex_cover_size(vertex_count: usize, edges: &[(usize, usize)]) -> Result<usize> {
    min_vertex_cover(vertex_count, edges).map(|c| c.len())
}

/// Exact minimum vertex cover by branch and bound on bitmasks.
///
/// Isolated vertices are dropped, a degree-1 vertex forces its neighbour
/// into the cover, and otherwise a maximum-degree vertex `v` is branched on
/// (`v` in the cover, or all of `N(v)`). A greedy matching gives the lower
/// bound for pruning.
pub fn min_vertex_cover(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Vec<usize>> {
    if vertex_count > COVER_VERTEX_CAP {
        return resource(format!(
            "exact vertex cover on {vertex_count} vertices exceeds the cap of {COVER_VERTEX_CAP}"
        ));
    }
    let mut adj = vec![0u64; vertex_count];
    for &(a, b) in edges {
        if a >= vertex_count || b >= vertex_count {
            return input(format!("edge ({a}, {b}) outside 0..{vertex_count}"));
        }
        if a != b {
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
    }
    Ok(cover_of_masks(&adj))
}

fn cover_of_masks(adj: &[u64]) -> Vec<usize> {
    let vertex_count = adj.len();
    let alive = if vertex_count == 64 { u64::MAX } else { (1u64 << vertex_count) - 1 };
    // start from the trivial cover: every non-isolated vertex
    let mut best = (0..vertex_count).filter(|&v| adj[v] != 0).fold(0u64, |m, v| m | 1 << v);
    cover_search(adj, alive, 0, &mut best);
    (0..vertex_count).filter(|v| best >> v & 1 == 1).collect()
}

fn adjacency_masks(g: &AuxGraph, vertex_count: usize) -> Result<Vec<u64>> {
    if vertex_count > COVER_VERTEX_CAP {
        return resource(format!(
            "exact vertex cover on {vertex_count} vertices exceeds the cap of {COVER_VERTEX_CAP}"
        ));
    }
    let mut adj = vec![0u64; vertex_count];
    for &(a, b) in &g.edges {
        if a >= vertex_count || b >= vertex_count {
            return input(format!("edge ({a}, {b}) outside 0..{vertex_count}"));
        }
        if a != b {
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
    }
    Ok(adj)
}

fn cover_search(adj: &[u64], mut alive: u64, mut taken: u64, best: &mut u64) {
    // reductions
    loop {
        let mut changed = false;
        let mut rest = alive;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if alive >> v & 1 == 0 {
                continue;
            }
            let nbrs = adj[v] & alive;
            match nbrs.count_ones() {
                0 => {
                    alive &= !(1 << v);
                    changed = true;
                }
                1 => {
                    let u = nbrs.trailing_zeros();
                    taken |= 1 << u;
                    alive &= !(1 << u) & !(1 << v);
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    if taken.count_ones() >= best.count_ones() {
        return;
    }
    if alive == 0 {
        *best = taken;
        return;
    }
    if taken.count_ones() + greedy_matching(adj, alive) >= best.count_ones() {
        return;
    }
    let mut v = 0;
    let mut deg = 0;
    let mut rest = alive;
    while rest != 0 {
        let u = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        let d = (adj[u] & alive).count_ones();
        if d > deg {
            deg = d;
            v = u;
        }
    }
    let nbrs = adj[v] & alive;
    cover_search(adj, alive & !(1 << v), taken | 1 << v, best);
    cover_search(adj, alive & !nbrs & !(1 << v), taken | nbrs, best);
}

fn greedy_matching(adj: &[u64], mut alive: u64) -> u32 {
    let mut size = 0;
    while alive != 0 {
        let v = alive.trailing_zeros() as usize;
        alive &= !(1 << v);
        let nbrs = adj[v] & alive;
        if nbrs != 0 {
            alive &= !(1 << nbrs.trailing_zeros());
            size += 1;
        }
    }
    size
}

/// How [`haxell_condition_holds`] chooses index sets `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HaxellMode {
    /// Every nonempty `J` with `|J| <= max_subset`, smallest first.
    Exhaustive { max_subset: usize },
    /// `samples` random `J` with sizes uniform in `1..=max_subset`.
    Sampled { max_subset: usize, samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HaxellVerdict {
    /// Every enumerated `J` satisfies `τ(∪ G_i) >= 3|J|`.
    Holds { checked: u64 },
    /// Sampled mode found nothing; not a certificate.
    NoViolationFound { checked: u64 },
    Violated { subset: Vec<usize>, cover: Vec<usize> },
}

impl HaxellVerdict {
    pub fn is_violated(&self) -> bool {
        matches!(self, HaxellVerdict::Violated { .. })
    }
}

fn binomial_sum(m: usize, k: usize) -> u64 {
    let mut total = 0u64;
    let mut term = 1u64;
    for i in 1..=k.min(m) {
        term = term.saturating_mul((m - i + 1) as u64) / i as u64;
        total = total.saturating_add(term);
    }
    total
}

fn violation(masks: &[Vec<u64>], subset: &[usize]) -> Option<Vec<usize>> {
    let n = masks.first().map_or(0, Vec::len);
    let mut adj = vec![0u64; n];
    for &i in subset {
        for (row, m) in adj.iter_mut().zip(&masks[i]) {
            *row |= m;
        }
    }
    let cover = cover_of_masks(&adj);
    (cover.len() < 3 * subset.len()).then_some(cover)
}

/// Checks `τ(∪_{i∈J} G_i) >= 3|J|` over the chosen family of index sets `J`
/// (indices into `graphs`) and returns the first violation.
pub fn haxell_condition_holds(graphs: &[AuxGraph], mode: HaxellMode) -> Result<HaxellVerdict> {
    let m = graphs.len();
    let n = graphs.iter().map(|g| g.vertex_count).max().unwrap_or(0);
    let masks = graphs.iter().map(|g| adjacency_masks(g, n)).collect::<Result<Vec<_>>>()?;
    match mode {
        HaxellMode::Exhaustive { max_subset } => {
            let max_subset = max_subset.min(m);
            let count = binomial_sum(m, max_subset);
            if count > HAXELL_SUBSET_CAP {
                return resource(format!(
                    "{count} index subsets exceed the exhaustive cap of {HAXELL_SUBSET_CAP}"
                ));
            }
            let mut checked = 0;
            for k in 1..=max_subset {
                let mut subset: Vec<usize> = (0..k).collect();
                loop {
                    checked += 1;
                    if let Some(cover) = violation(&masks, &subset) {
                        return Ok(HaxellVerdict::Violated { subset, cover });
                    }
                    if !next_combination(&mut subset, m) {
                        break;
                    }
                }
            }
            Ok(HaxellVerdict::Holds { checked })
        }
        HaxellMode::Sampled {
            max_subset,
            samples,
            seed,
        } => {
            let max_subset = max_subset.min(m);
            if max_subset == 0 {
                return Ok(HaxellVerdict::NoViolationFound { checked: 0 });
            }
            let mut rng = rng(seed);
            for _ in 0..samples {
                let k = rng.gen_range(1..=max_subset);
                let mut subset = sample(&mut rng, m, k).into_vec();
                subset.sort_unstable();
                if let Some(cover) = violation(&masks, &subset) {
                    return Ok(HaxellVerdict::Violated { subset, cover });
                }
            }
            Ok(HaxellVerdict::NoViolationFound { checked: samples as u64 })
        }
    }
}

/// Advances a sorted k-combination of `0..m` in lexicographic order.
fn next_combination(c: &mut [usize], m: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < m - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// One chosen edge per graph, pairwise vertex-disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdrSolution {
    /// `assignment[i]` is the edge chosen from `graphs[i]`.
    pub assignment: Vec<(usize, usize)>,
    /// Position of that edge in `graphs[i].edges`.
    pub edge_index: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdrFailure {
    /// The search was exhaustive: no system of disjoint representatives exists.
    NoSdr,
    BudgetExceeded,
}

pub fn haxell_sdr(graphs: &[AuxGraph]) -> std::result::Result<SdrSolution, SdrFailure> {
    haxell_sdr_budgeted(graphs, DEFAULT_SDR_BUDGET)
}

/// Backtracking search for pairwise disjoint edges `e_i ∈ G_i`.
///
/// Always branches on the unassigned graph with the fewest edges still
/// disjoint from the chosen ones (initially: the fewest edges) and undoes a
/// choice as soon as some other graph is left without an available edge.
/// Exhaustive within `budget` search nodes.
pub fn haxell_sdr_budgeted(graphs: &[AuxGraph], budget: u64) -> std::result::Result<SdrSolution, SdrFailure> {
    let n = graphs.iter().map(|g| g.vertex_count).max().unwrap_or(0);
    let mut search = SdrSearch {
        graphs,
        used: vec![false; n],
        choice: vec![None; graphs.len()],
        nodes: 0,
        budget,
    };
    match search.run(graphs.len()) {
        Some(true) => {
            let edge_index: Vec<usize> = search.choice.iter().map(|c| c.expect("all assigned")).collect();
            let assignment = edge_index.iter().zip(graphs).map(|(&e, g)| g.edges[e]).collect();
            Ok(SdrSolution {
                assignment,
                edge_index,
            })
        }
        Some(false) => Err(SdrFailure::NoSdr),
        None => Err(SdrFailure::BudgetExceeded),
    }
}

struct SdrSearch<'a> {
    graphs: &'a [AuxGraph],
    used: Vec<bool>,
    choice: Vec<Option<usize>>,
    nodes: u64,
    budget: u64,
}

impl SdrSearch<'_> {
    fn available(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.graphs[i]
            .edges
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| !self.used[a] && !self.used[b])
            .map(|(e, _)| e)
    }

    /// `Some(found)` or `None` when the budget ran out.
    fn run(&mut self, remaining: usize) -> Option<bool> {
        if remaining == 0 {
            return Some(true);
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return None;
        }
        let mut pick = None;
        for i in (0..self.graphs.len()).filter(|&i| self.choice[i].is_none()) {
            let count = self.available(i).count();
            if count == 0 {
                return Some(false);
            }
            if pick.is_none_or(|(_, c)| count < c) {
                pick = Some((i, count));
            }
        }
        let (i, _) = pick.expect("remaining > 0");
        let options: Vec<usize> = self.available(i).collect();
        for e in options {
            let (a, b) = self.graphs[i].edges[e];
            self.used[a] = true;
            self.used[b] = true;
            self.choice[i] = Some(e);
            match self.run(remaining - 1) {
                Some(true) => return Some(true),
                Some(false) => {}
                None => return None,
            }
            self.choice[i] = None;
            self.used[a] = false;
            self.used[b] = false;
        }
        Some(false)
    }
}

/// Outcome of [`select_absorbable`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Indices into the candidate list, ascending.
    pub selected: Vec<usize>,
    /// Candidates removed by the deletion procedure, in removal order.
    pub removed: Vec<usize>,
    /// Aux graphs of the selected chains, re-owned by position in `selected`.
    pub aux: Vec<AuxGraph>,
    /// `false` when the condition could not be evaluated (too many uppers
    /// for the exact cover solver) and selection fell back to edge counts.
    pub condition_checked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionFailure {
    pub removed: Vec<usize>,
    pub survivors: usize,
    pub needed: usize,
}

/// Subset size bound used by the deletion procedure: `⌊t/12⌋`.
pub fn default_subset_cap(t: usize) -> usize {
    t / 12
}

/// Picks `2t` of `3t` candidate chains whose aux graphs against the `t`
/// uppers satisfy the Haxell condition on every index set of size at most
/// `subset_cap` (default `⌊t/12⌋`).
///
/// Violating sets are found smallest-first and deleted until none is left.
/// The `2t` survivors kept are those with the most aux edges (ties by index).
pub fn select_absorbable(
    g: &Graph,
    candidates: &[Chain],
    uppers: &[Chain],
    subset_cap: Option<usize>,
) -> Result<std::result::Result<Selection, SelectionFailure>> {
    let t = uppers.len();
    if candidates.len() < 3 * t {
        return input(format!("need 3·{t} candidates, got {}", candidates.len()));
    }
    let all: Vec<&Chain> = candidates.iter().chain(uppers).collect();
    check_disjoint(g.n(), &all)?;
    let aux: Vec<AuxGraph> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| aux_graph_unchecked(g, i, c, uppers))
        .collect();
    let cap = subset_cap.unwrap_or_else(|| default_subset_cap(t));
    let mut alive: Vec<usize> = (0..candidates.len()).collect();
    let mut removed = Vec::new();
    let condition_checked = t <= COVER_VERTEX_CAP;
    if condition_checked && cap > 0 {
        let mut round = 0u64;
        loop {
            let family: Vec<AuxGraph> = alive.iter().map(|&i| aux[i].clone()).collect();
            let count = binomial_sum(family.len(), cap);
            let mode = if count <= HAXELL_SUBSET_CAP {
                HaxellMode::Exhaustive { max_subset: cap }
            } else {
                HaxellMode::Sampled {
                    max_subset: cap,
                    samples: 20_000,
                    seed: round,
                }
            };
            match haxell_condition_holds(&family, mode)? {
                HaxellVerdict::Violated { subset, .. } => {
                    let gone: Vec<usize> = subset.iter().map(|&k| alive[k]).collect();
                    alive.retain(|i| !gone.contains(i));
                    removed.extend(gone);
                }
                _ => break,
            }
            round += 1;
        }
    }
    let needed = 2 * t;
    if alive.len() < needed {
        return Ok(Err(SelectionFailure {
            removed,
            survivors: alive.len(),
            needed,
        }));
    }
    alive.sort_by_key(|&i| (std::cmp::Reverse(aux[i].edge_count()), i));
    let mut selected = alive[..needed].to_vec();
    selected.sort_unstable();
    let aux = selected
        .iter()
        .enumerate()
        .map(|(pos, &i)| AuxGraph {
            owner: pos,
            ..aux[i].clone()
        })
        .collect();
    Ok(Ok(Selection {
        selected,
        removed,
        aux,
        condition_checked,
    }))
}

/// The factor piece produced for one level of the cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResolution {
    pub factor: TriangleFactor,
    /// Lower chains tiled three at a time (`L₁`), with their triangles.
    pub triples: Vec<([usize; 3], [usize; 3])>,
    /// Lower chains absorbed through disjoint representatives (`L₂`).
    pub absorbed: Vec<usize>,
    /// Upper chains consumed (`L'`), ascending.
    pub used_uppers: Vec<usize>,
    /// Whether the greedy packing already worked or the fallback search ran.
    pub greedy: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolveFailure {
    /// Size of `L₂` left by the greedy packing.
    pub greedy_leftover: usize,
    pub sdr: SdrFailure,
    pub search_exhausted: bool,
}

struct TripleCache<'a> {
    g: &'a Graph,
    removable: Vec<VertexSet>,
    memo: HashMap<[usize; 3], Option<[usize; 3]>>,
}

impl TripleCache<'_> {
    fn get(&mut self, i: usize, j: usize, k: usize) -> Option<[usize; 3]> {
        let (g, r) = (self.g, &self.removable);
        *self
            .memo
            .entry([i, j, k])
            .or_insert_with(|| transversal_triangle(g, &r[i], &r[j], &r[k]))
    }
}

/// Tiles `G[⋃_{i∈L} V(lower_i) ∪ ⋃_{j∈L'} V(upper_j)]` for some `L'`.
///
/// First the lexicographically-first traversing triples of leftover lower
/// chains are packed greedily (a maximal `L₁`); the rest (`L₂`) get disjoint
/// pairs of upper chains through their aux graphs. If that representative
/// search fails, other packings are searched (bounded) before giving up.
pub fn resolve_level(
    g: &Graph,
    leftover: &[usize],
    lowers: &[Chain],
    uppers: &[Chain],
    aux: &[AuxGraph],
) -> Result<std::result::Result<LevelResolution, ResolveFailure>> {
    if aux.len() != lowers.len() {
        return input(format!("{} aux graphs for {} lower chains", aux.len(), lowers.len()));
    }
    let mut pool: Vec<usize> = leftover.to_vec();
    pool.sort_unstable();
    pool.dedup();
    if let Some(&bad) = pool.iter().find(|&&i| i >= lowers.len()) {
        return input(format!("leftover index {bad} out of range"));
    }
    let mut cache = TripleCache {
        g,
        removable: lowers.iter().map(|c| c.removable_set(g.n())).collect(),
        memo: HashMap::new(),
    };

    let (triples, rest) = greedy_triples(&pool, &mut cache);
    let sdr = match solve_sdr(&rest, aux) {
        Ok(sol) => return Ok(Ok(assemble(lowers, uppers, aux, triples, rest, &sol, true)?)),
        Err(e) => e,
    };

    let mut search = PackingSearch {
        cache: &mut cache,
        aux,
        max_pool: uppers.len() / 2,
        nodes: 0,
        chosen: Vec::new(),
        pooled: Vec::new(),
        found: None,
    };
    search.run(&pool);
    let exhausted = search.nodes <= RESOLVE_SEARCH_BUDGET;
    match search.found.take() {
        Some((triples, rest, sol)) => Ok(Ok(assemble(lowers, uppers, aux, triples, rest, &sol, false)?)),
        None => Ok(Err(ResolveFailure {
            greedy_leftover: pool.len() - 3 * triples.len(),
            sdr,
            search_exhausted: exhausted,
        })),
    }
}

type Triple = ([usize; 3], [usize; 3]);

/// Repeatedly takes the lexicographically first traversing triple.
fn greedy_triples(pool: &[usize], cache: &mut TripleCache<'_>) -> (Vec<Triple>, Vec<usize>) {
    let mut rest = pool.to_vec();
    let mut triples = Vec::new();
    'outer: loop {
        let m = rest.len();
        for a in 0..m {
            for b in a + 1..m {
                for c in b + 1..m {
                    let (i, j, k) = (rest[a], rest[b], rest[c]);
                    if let Some(t) = cache.get(i, j, k) {
                        triples.push(([i, j, k], t));
                        rest.retain(|&x| x != i && x != j && x != k);
                        continue 'outer;
                    }
                }
            }
        }
        break;
    }
    (triples, rest)
}

fn solve_sdr(rest: &[usize], aux: &[AuxGraph]) -> std::result::Result<SdrSolution, SdrFailure> {
    let family: Vec<AuxGraph> = rest.iter().map(|&i| aux[i].clone()).collect();
    haxell_sdr(&family)
}

struct PackingSearch<'a, 'b> {
    cache: &'a mut TripleCache<'b>,
    aux: &'a [AuxGraph],
    max_pool: usize,
    nodes: u64,
    chosen: Vec<Triple>,
    pooled: Vec<usize>,
    found: Option<(Vec<Triple>, Vec<usize>, SdrSolution)>,
}

impl PackingSearch<'_, '_> {
    /// Branches on the smallest unassigned chain: into a triple with two
    /// later chains, or into the representative pool.
    fn run(&mut self, remaining: &[usize]) {
        if self.found.is_some() || self.nodes > RESOLVE_SEARCH_BUDGET {
            return;
        }
        self.nodes += 1;
        let Some(&i) = remaining.first() else {
            if let Ok(sol) = solve_sdr(&self.pooled, self.aux) {
                self.found = Some((self.chosen.clone(), self.pooled.clone(), sol));
            }
            return;
        };
        let m = remaining.len();
        for b in 1..m {
            for c in b + 1..m {
                let (j, k) = (remaining[b], remaining[c]);
                if let Some(t) = self.cache.get(i, j, k) {
                    let next: Vec<usize> = remaining.iter().copied().filter(|&x| x != i && x != j && x != k).collect();
                    self.chosen.push(([i, j, k], t));
                    self.run(&next);
                    self.chosen.pop();
                    if self.found.is_some() {
                        return;
                    }
                }
            }
        }
        if self.pooled.len() < self.max_pool && !self.aux[i].is_empty() {
            self.pooled.push(i);
            self.run(&remaining[1..]);
            self.pooled.pop();
        }
    }
}

fn assemble(
    lowers: &[Chain],
    uppers: &[Chain],
    aux: &[AuxGraph],
    triples: Vec<Triple>,
    absorbed: Vec<usize>,
    sol: &SdrSolution,
    greedy: bool,
) -> Result<LevelResolution> {
    let mut factor = TriangleFactor::new();
    for &([i, j, k], t) in &triples {
        factor.extend(tile_with_triangle([&lowers[i], &lowers[j], &lowers[k]], t)?);
    }
    let mut used_uppers = Vec::with_capacity(2 * absorbed.len());
    for (pos, &i) in absorbed.iter().enumerate() {
        let (j, k) = sol.assignment[pos];
        let witness = aux[i].witnesses[sol.edge_index[pos]];
        factor.extend(tile_with_triangle([&lowers[i], &uppers[j], &uppers[k]], witness)?);
        used_uppers.extend([j, k]);
    }
    used_uppers.sort_unstable();
    Ok(LevelResolution {
        factor,
        triples,
        absorbed,
        used_uppers,
        greedy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::build_disjoint_chains;
    use crate::factor::verify_triangle_factor;
    use crate::generators::{complete, complete_multipartite, cycle, gnp};
    use crate::oracle::enumerate_triangles;

    fn singletons(vs: impl IntoIterator<Item = usize>) -> Vec<Chain> {
        vs.into_iter().map(Chain::singleton).collect()
    }

    /// Exhaustive scan over all vertex subsets.
    fn cover_brute(n: usize, edges: &[(usize, usize)]) -> usize {
        (0u32..1 << n)
            .filter(|m| edges.iter().all(|&(a, b)| m >> a & 1 == 1 || m >> b & 1 == 1))
            .map(|m| m.count_ones() as usize)
            .min()
            .unwrap()
    }

    #[test]
    fn aux_graph_cases() {
        let g = complete(3);
        let aux = build_aux_graph(&g, 0, &Chain::singleton(0), &singletons([1, 2])).unwrap();
        assert_eq!(aux.edges, vec![(0, 1)]);
        assert_eq!(aux.witnesses, vec![[0, 1, 2]]);

        let bip = complete_multipartite(&[3, 3]);
        let aux = build_aux_graph(&bip, 0, &Chain::singleton(0), &singletons([1, 3, 4])).unwrap();
        assert!(aux.is_empty());

        assert!(build_aux_graph(&g, 0, &Chain::singleton(0), &singletons([0, 1])).is_err());
    }

    #[test]
    fn aux_graph_matches_triangle_scan() {
        let g = gnp(60, 0.6, 2);
        let uppers = singletons([10, 20, 30, 40]);
        let aux = build_aux_graph(&g, 0, &Chain::singleton(5), &uppers).unwrap();
        let tris = enumerate_triangles(&g);
        let mut expected = Vec::new();
        for j in 0..4 {
            for k in j + 1..4 {
                let want = [5, uppers[j].vertices[0], uppers[k].vertices[0]];
                if tris.triples.iter().any(|t| want.iter().all(|v| t.contains(v))) {
                    expected.push((j, k));
                }
            }
        }
        assert_eq!(aux.edges, expected);
        for (&(j, k), w) in aux.edges.iter().zip(&aux.witnesses) {
            assert_eq!(w[1], uppers[j].vertices[0]);
            assert_eq!(w[2], uppers[k].vertices[0]);
        }
    }

    #[test]
    fn vertex_cover_cases() {
        assert_eq!(vertex_cover_size(2, &[(0, 1)]).unwrap(), 1);
        let c5: Vec<(usize, usize)> = cycle(5).edges().collect();
        assert_eq!(vertex_cover_size(5, &c5).unwrap(), 3);
        assert_eq!(vertex_cover_size(4, &[]).unwrap(), 0);
        assert!(vertex_cover_size(65, &[]).is_err());
        let g = gnp(12, 0.5, 77);
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(vertex_cover_size(12, &edges).unwrap(), cover_brute(12, &edges));
        let k40: Vec<_> = complete(40).edges().collect();
        assert_eq!(vertex_cover_size(40, &k40).unwrap(), 39);
    }

    #[test]
    fn min_vertex_cover_is_a_cover() {
        for seed in 0..20 {
            let g = gnp(20, 0.3, seed);
            let edges: Vec<_> = g.edges().collect();
            let cover = min_vertex_cover(20, &edges).unwrap();
            assert!(edges.iter().all(|(a, b)| cover.contains(a) || cover.contains(b)));
        }
    }

    #[test]
    fn haxell_condition_cases() {
        let matching = AuxGraph::abstract_graph(0, 6, vec![(0, 1), (2, 3), (4, 5)]);
        let v = haxell_condition_holds(&[matching], HaxellMode::Exhaustive { max_subset: 1 }).unwrap();
        assert!(!v.is_violated());

        let single = AuxGraph::abstract_graph(0, 2, vec![(0, 1)]);
        let family = vec![single.clone(), single.clone(), single];
        match haxell_condition_holds(&family, HaxellMode::Exhaustive { max_subset: 3 }).unwrap() {
            HaxellVerdict::Violated { subset, cover } => {
                assert_eq!(subset, vec![0]);
                assert_eq!(cover.len(), 1);
            }
            other => panic!("expected a violation, got {other:?}"),
        }
        let many = vec![AuxGraph::abstract_graph(0, 2, vec![]); 30];
        assert!(haxell_condition_holds(&many, HaxellMode::Exhaustive { max_subset: 30 }).is_err());
    }

    #[test]
    fn haxell_condition_matches_full_enumeration() {
        let mut rng = rng(5);
        for _ in 0..5 {
            let family: Vec<AuxGraph> = (0..5)
                .map(|i| {
                    let edges = (0..30)
                        .flat_map(|a| (a + 1..30).map(move |b| (a, b)))
                        .filter(|_| rng.gen_bool(0.02))
                        .collect();
                    AuxGraph::abstract_graph(i, 30, edges)
                })
                .collect();
            let verdict = haxell_condition_holds(&family, HaxellMode::Exhaustive { max_subset: 5 }).unwrap();
            let mut any = false;
            for mask in 1u32..32 {
                let subset: Vec<usize> = (0..5).filter(|i| mask >> i & 1 == 1).collect();
                let (n, edges) = union_edges(subset.iter().map(|&i| &family[i]));
                if vertex_cover_size(n, &edges).unwrap() < 3 * subset.len() {
                    any = true;
                }
            }
            assert_eq!(verdict.is_violated(), any);
        }
    }

    #[test]
    fn sdr_cases() {
        let one = AuxGraph::abstract_graph(0, 4, vec![(0, 1)]);
        assert_eq!(haxell_sdr(std::slice::from_ref(&one)).unwrap().assignment, vec![(0, 1)]);

        let two = AuxGraph::abstract_graph(0, 4, vec![(0, 1), (2, 3)]);
        let sol = haxell_sdr(&[two.clone(), two]).unwrap();
        let mut picked = sol.assignment.clone();
        picked.sort();
        assert_eq!(picked, vec![(0, 1), (2, 3)]);

        assert_eq!(haxell_sdr(&[one.clone(), one.clone(), one]), Err(SdrFailure::NoSdr));
        assert_eq!(haxell_sdr(&[]).unwrap().assignment, vec![]);
    }

    #[test]
    fn sdr_budget_is_reported() {
        // 9 copies of K_6's edges cannot all be disjoint; a budget of 1 node stops early
        let k6: Vec<_> = complete(6).edges().collect();
        let family = vec![AuxGraph::abstract_graph(0, 6, k6); 4];
        assert_eq!(haxell_sdr_budgeted(&family, 1), Err(SdrFailure::BudgetExceeded));
        assert_eq!(haxell_sdr(&family), Err(SdrFailure::NoSdr));
    }

    #[test]
    fn selection_dense_keeps_first_candidates() {
        let t = 37;
        let g = complete(4 * t);
        let uppers = singletons(0..t);
        let candidates = singletons(t..4 * t);
        let sel = select_absorbable(&g, &candidates, &uppers, None).unwrap().unwrap();
        assert!(sel.removed.is_empty());
        assert_eq!(sel.selected, (0..2 * t).collect::<Vec<_>>());
    }

    #[test]
    fn selection_fails_on_triangle_free_host() {
        let g = complete_multipartite(&[30, 30]);
        let uppers = singletons(0..4);
        let candidates = singletons(30..42);
        let res = select_absorbable(&g, &candidates, &uppers, Some(1)).unwrap();
        let fail = res.unwrap_err();
        assert_eq!(fail.survivors, 0);
        assert!(select_absorbable(&g, &candidates[..11], &uppers, None).is_err());
    }

    #[test]
    fn selection_passes_recheck_on_dense_random_host() {
        let g = gnp(200, 0.5, 11);
        let all = g.vertex_set();
        let uppers = build_disjoint_chains(&g, &all, 2, 4).unwrap();
        let mut rest = all.clone();
        for c in &uppers {
            rest.difference_with(&c.vertex_set(200));
        }
        let candidates = build_disjoint_chains(&g, &rest, 1, 12).unwrap();
        let sel = select_absorbable(&g, &candidates, &uppers, Some(1)).unwrap();
        if let Ok(sel) = sel {
            let v = haxell_condition_holds(&sel.aux, HaxellMode::Exhaustive { max_subset: 1 }).unwrap();
            assert!(!v.is_violated());
            assert_eq!(sel.selected.len(), 8);
        }
    }

    #[test]
    fn resolve_trivial_cases() {
        let g = complete(6);
        let lowers = singletons([0, 1, 2]);
        let uppers = singletons([3, 4]);
        let aux: Vec<AuxGraph> = lowers
            .iter()
            .enumerate()
            .map(|(i, c)| build_aux_graph(&g, i, c, &uppers).unwrap())
            .collect();
        let empty = resolve_level(&g, &[], &lowers, &uppers, &aux).unwrap().unwrap();
        assert!(empty.factor.is_empty() && empty.used_uppers.is_empty());
        let one = resolve_level(&g, &[0, 1, 2], &lowers, &uppers, &aux).unwrap().unwrap();
        assert_eq!(one.factor.triangles, vec![[0, 1, 2]]);
        assert!(one.used_uppers.is_empty() && one.greedy);
        let absorbed = resolve_level(&g, &[0], &lowers, &uppers, &aux).unwrap().unwrap();
        assert_eq!(absorbed.used_uppers, vec![0, 1]);
        let target = VertexSet::from_vertices(6, [0, 3, 4]);
        assert!(verify_triangle_factor(&g, &absorbed.factor, &target));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_edges(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
            proptest::collection::vec((0..n, 0..n), 0..20)
                .prop_map(|v| v.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (a.min(b), a.max(b))).collect())
        }

        proptest! {
            #[test]
            fn cover_subadditive(e1 in arb_edges(10), e2 in arb_edges(10)) {
                let mut both = e1.clone();
                both.extend(e2.iter().copied());
                let t1 = vertex_cover_size(10, &e1).unwrap();
                let t2 = vertex_cover_size(10, &e2).unwrap();
                prop_assert!(vertex_cover_size(10, &both).unwrap() <= t1 + t2);
            }

            #[test]
            fn cover_matches_brute(e in arb_edges(9)) {
                prop_assert_eq!(vertex_cover_size(9, &e).unwrap(), cover_brute(9, &e));
            }
        }
    }
}
