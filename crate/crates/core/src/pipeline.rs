//! End-to-end triangle-factor construction.
//!
//! One attempt runs: a random equipartition `V₁ ∪ V₂`; levels of chains in
//! `V₂` (top level first, each lower level selected as absorbable against the
//! one above); triangles through the vertices with few neighbours in `U₀`;
//! a greedy packing of everything else; absorption of the packing's leftover
//! into pairs of `U₀`; the level-by-level cascade; and a final split of the
//! surviving top-level chains into traversing triples. Any stage failure
//! restarts with a derived seed. A factor is only returned after it passes
//! [`check_triangle_factor`].

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::absorber::{
    default_subset_cap, haxell_sdr_budgeted, resolve_level, select_absorbable, AuxGraph, SdrFailure, DEFAULT_SDR_BUDGET,
};
use crate::chains::{build_disjoint_chains, tile_with_triangle, verify_chain_capped, Chain, DEFAULT_VERIFY_LEVEL_CAP};
use crate::error::{input, Result};
use crate::factor::{check_triangle_factor, TriangleFactor};
use crate::graph::{Graph, VertexSet};
use crate::oracle::{exact_triangle_factor, exact_triangle_factor_capped, transversal_triangle, DEFAULT_ORACLE_CAP};
use crate::rng::{derive_indexed, rng};
use crate::spectral::{theorem_threshold_check, ThresholdVerdict, DEFAULT_EPSILON};

/// Node budget for splitting the surviving top-level chains into triples.
pub const FINAL_SEARCH_BUDGET: u64 = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub epsilon: f64,
    /// Number of top-level chains `t_q`; chosen to fit when absent.
    pub level_scale: Option<f64>,
    pub q_override: Option<usize>,
    pub seed: u64,
    pub max_restarts: usize,
    /// Edge density used for thresholds; the empirical density when absent.
    pub p: Option<f64>,
    /// Equipartition accepts when every vertex has `>= degree_fraction·np`
    /// neighbours in both halves.
    pub degree_fraction: f64,
    /// Random splits tried per attempt before the equipartition stage fails.
    pub equipartition_tries: usize,
    /// Fraction of `|V₂|` all chain vertices together may occupy.
    pub chain_budget: f64,
    /// Haxell subset bound for selection; `⌊t/12⌋` when absent.
    pub subset_cap: Option<usize>,
    pub sdr_budget: u64,
    /// Chains up to this level are re-verified with the exact oracle.
    pub chain_verify_cap: usize,
    /// After a failed search, graphs with at most this many vertices are
    /// settled by the exact oracle (reported, never returned as a factor).
    pub oracle_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            epsilon: DEFAULT_EPSILON,
            level_scale: None,
            q_override: None,
            seed: 0,
            max_restarts: 200,
            p: None,
            degree_fraction: 1.0 / 6.0,
            equipartition_tries: 20,
            chain_budget: 0.75,
            subset_cap: None,
            sdr_budget: DEFAULT_SDR_BUDGET,
            chain_verify_cap: DEFAULT_VERIFY_LEVEL_CAP,
            oracle_cap: DEFAULT_ORACLE_CAP,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return input(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if let Some(s) = self.level_scale {
            if !s.is_finite() || s <= 0.0 {
                return input(format!("level_scale must be positive, got {s}"));
            }
        }
        if self.max_restarts == 0 {
            return input("max_restarts must be at least 1");
        }
        if let Some(p) = self.p {
            if !(p > 0.0 && p <= 1.0) {
                return input(format!("p must lie in (0, 1], got {p}"));
            }
        }
        if !(self.degree_fraction >= 0.0 && self.degree_fraction <= 1.0) {
            return input(format!("degree_fraction must lie in [0, 1], got {}", self.degree_fraction));
        }
        if !(self.chain_budget > 0.0 && self.chain_budget <= 1.0) {
            return input(format!("chain_budget must lie in (0, 1], got {}", self.chain_budget));
        }
        if self.equipartition_tries == 0 {
            return input("equipartition_tries must be at least 1");
        }
        Ok(())
    }
}

/// Chain length at level `i`: 0-chains at level 0, `2^i`-chains above.
pub fn level_length(i: usize) -> usize {
    if i == 0 {
        0
    } else {
        1 << i
    }
}

fn chain_size(i: usize) -> usize {
    3 * level_length(i) + 1
}

/// `max(1, ⌈log₂(n / (16·10⁴·ln n))⌉)`.
pub fn default_level_count(n: usize) -> usize {
    let nf = n as f64;
    if n < 3 {
        return 1;
    }
    let q = (nf / (16e4 * nf.ln())).log2().ceil();
    if q.is_finite() && q > 1.0 {
        q as usize
    } else {
        1
    }
}

/// Level count and chain counts `t_0 ..= t_q` (`t_i = 2 t_{i+1}`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelPlan {
    pub q: usize,
    pub t: Vec<usize>,
}

impl LevelPlan {
    fn with_top(q: usize, tq: usize) -> Self {
        LevelPlan {
            q,
            t: (0..=q).map(|i| tq << (q - i)).collect(),
        }
    }

    pub fn chain_vertices(&self) -> usize {
        self.t.iter().enumerate().map(|(i, &t)| t * chain_size(i)).sum()
    }

    /// Vertices in use while the candidates of the busiest level are built.
    pub fn peak_vertices(&self) -> usize {
        let above = |i: usize| -> usize { (i + 1..=self.q).map(|j| self.t[j] * chain_size(j)).sum() };
        let top = self.t[self.q] * chain_size(self.q);
        (0..self.q)
            .map(|i| above(i) + 3 * self.t[i + 1] * chain_size(i))
            .max()
            .unwrap_or(0)
            .max(top)
    }

    fn fits(&self, v2: usize, budget: f64) -> bool {
        self.chain_vertices() as f64 <= budget * v2 as f64 && self.peak_vertices() <= v2
    }
}

/// Chooses `q` and `t_q`. Explicit values are kept as given; otherwise `q`
/// starts at the default formula and `t_q` is the largest count that fits in
/// `chain_budget·|V₂|`, lowering `q` (down to 0) while nothing fits.
pub fn plan_levels(n: usize, v2: usize, config: &PipelineConfig) -> Result<(LevelPlan, Vec<String>)> {
    let mut notes = Vec::new();
    let formula = default_level_count(n);
    let start = config.q_override.unwrap_or(formula);
    if let Some(scale) = config.level_scale {
        let tq = (scale.round() as usize).max(1);
        let plan = LevelPlan::with_top(start, tq);
        if !plan.fits(v2, config.chain_budget) {
            notes.push(format!(
                "explicit levels use {} chain vertices, above the budget for |V2| = {v2}",
                plan.chain_vertices()
            ));
        }
        return Ok((plan, notes));
    }
    let lowest = if config.q_override.is_some() { start } else { 0 };
    for q in (lowest..=start).rev() {
        let best = (1..=v2).take_while(|&tq| LevelPlan::with_top(q, tq).fits(v2, config.chain_budget)).last();
        if let Some(tq) = best {
            if q != formula {
                notes.push(format!("level count q = {q} (formula gives {formula}) to fit |V2| = {v2}"));
            }
            return Ok((LevelPlan::with_top(q, tq), notes));
        }
    }
    input(format!("no chain levels with q = {start} fit in |V2| = {v2}"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equipartition {
    pub v1: Vec<usize>,
    pub v2: Vec<usize>,
    pub min_degree_v1: usize,
    pub min_degree_v2: usize,
    pub tries: usize,
}

/// Random halves (`|V₂| - |V₁| ∈ {0, 1}`) in which every vertex has at least
/// `fraction·n·p` neighbours on each side; `None` after `tries` rejections.
pub fn equipartition(g: &Graph, p: f64, fraction: f64, seed: u64, tries: usize) -> Option<Equipartition> {
    let n = g.n();
    let threshold = fraction * n as f64 * p;
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..tries {
        let mut r = rng(derive_indexed(seed, "equipartition", k as u64));
        order.shuffle(&mut r);
        let mut v1 = order[..n / 2].to_vec();
        let mut v2 = order[n / 2..].to_vec();
        v1.sort_unstable();
        v2.sort_unstable();
        let s1 = VertexSet::from_vertices(n, v1.iter().copied());
        let s2 = VertexSet::from_vertices(n, v2.iter().copied());
        let min1 = (0..n).map(|v| g.degree_into(v, &s1)).min().unwrap_or(0);
        let min2 = (0..n).map(|v| g.degree_into(v, &s2)).min().unwrap_or(0);
        if min1 as f64 >= threshold && min2 as f64 >= threshold {
            return Some(Equipartition {
                v1,
                v2,
                min_degree_v1: min1,
                min_degree_v2: min2,
                tries: k + 1,
            });
        }
    }
    None
}

/// One level of chains and, below the top, their aux graphs against the
/// level above.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub chains: Vec<Chain>,
    pub aux: Vec<AuxGraph>,
    pub removed_candidates: usize,
    pub condition_checked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelFailure {
    pub level: usize,
    pub reason: String,
}

/// Builds the top level in `G[V₂]`, then for each lower level `3t_{i+1}`
/// candidates inside what the upper levels left, keeping the `2t_{i+1}`
/// chosen by [`select_absorbable`]. Index `i` of the result is level `i`.
pub fn build_levels(
    g: &Graph,
    v2: &VertexSet,
    plan: &LevelPlan,
    config: &PipelineConfig,
) -> std::result::Result<Vec<Level>, LevelFailure> {
    let q = plan.q;
    let fail = |level: usize, reason: String| LevelFailure { level, reason };
    let top = build_disjoint_chains(g, v2, level_length(q), plan.t[q]).map_err(|got| {
        fail(q, format!("built {} of {} top-level {}-chains", got.len(), plan.t[q], level_length(q)))
    })?;
    let mut levels: Vec<Option<Level>> = vec![None; q + 1];
    levels[q] = Some(Level {
        chains: top,
        aux: Vec::new(),
        removed_candidates: 0,
        condition_checked: true,
    });
    let mut free = v2.clone();
    for i in (0..q).rev() {
        for c in &levels[i + 1].as_ref().expect("built").chains {
            free.difference_with(&c.vertex_set(g.n()));
        }
        let want = 3 * plan.t[i + 1];
        let candidates = build_disjoint_chains(g, &free, level_length(i), want).map_err(|got| {
            fail(i, format!("built {} of {want} candidate {}-chains", got.len(), level_length(i)))
        })?;
        let uppers = &levels[i + 1].as_ref().expect("built").chains;
        let selection = select_absorbable(g, &candidates, uppers, config.subset_cap)
            .map_err(|e| fail(i, e.to_string()))?
            .map_err(|f| {
                fail(
                    i,
                    format!("{} candidates survive selection, {} needed", f.survivors, f.needed),
                )
            })?;
        let chains = selection.selected.iter().map(|&k| candidates[k].clone()).collect();
        levels[i] = Some(Level {
            chains,
            aux: selection.aux,
            removed_candidates: selection.removed.len(),
            condition_checked: selection.condition_checked,
        });
    }
    let levels: Vec<Level> = levels.into_iter().map(|l| l.expect("every level built")).collect();
    for (i, level) in levels.iter().enumerate() {
        if let Some(bad) = level.chains.iter().find(|c| !verify_chain_capped(g, c, config.chain_verify_cap)) {
            return Err(fail(i, format!("chain {:?} failed verification", bad.vertices)));
        }
    }
    Ok(levels)
}

/// For each `v ∈ B` in ascending order, the lexicographically first
/// triangle `{v, a, b}` with `a, b ∈ V₁ \ (B ∪ used)`, consuming `a, b`.
/// `Err(v)` names the first vertex with no available triangle.
pub fn cover_low_degree(
    g: &Graph,
    b: &VertexSet,
    v1: &VertexSet,
    used: &VertexSet,
) -> std::result::Result<Vec<[usize; 3]>, usize> {
    let mut avail = v1.difference(b).difference(used);
    let mut out = Vec::with_capacity(b.len());
    for v in b.iter() {
        avail.remove(v);
        let nv = g.neighbor_set(v).intersection(&avail);
        let found = nv.iter().find_map(|a| {
            let na = g.neighbor_set(a).intersection(&nv);
            let c = na.iter().find(|&c| c > a);
            c.map(|c| [v, a, c])
        });
        let Some(t) = found else {
            return Err(v);
        };
        avail.remove(t[1]);
        avail.remove(t[2]);
        out.push(t);
    }
    Ok(out)
}

/// Maximal set of disjoint triangles inside `M`, repeatedly taking the
/// lexicographically first triangle on the still-free vertices. The
/// leftover induces a triangle-free graph.
pub fn greedy_triangle_pack(g: &Graph, m: &VertexSet) -> (Vec<[usize; 3]>, VertexSet) {
    let mut free = m.clone();
    let mut out = Vec::new();
    for a in m.iter() {
        if !free.contains(a) {
            continue;
        }
        let na = g.neighbor_set(a).intersection(&free);
        let found = na.iter().filter(|&b| b > a).find_map(|b| {
            let nb = g.neighbor_set(b).intersection(&na);
            let c = nb.iter().find(|&c| c > b);
            c.map(|c| [a, b, c])
        });
        if let Some(t) = found {
            for x in t {
                free.remove(x);
            }
            out.push(t);
        }
    }
    (out, free)
}

/// Output of [`absorb_leftover`].
#[derive(Debug, Clone, PartialEq)]
pub struct Absorbed {
    pub triangles: Vec<[usize; 3]>,
    /// `U₀` indices left unused (`L₀`), ascending.
    pub unused: Vec<usize>,
    pub graphs: Vec<AuxGraph>,
}

/// Covers every `v ∈ L` with a triangle on two `U₀` vertices: `G_v` joins
/// `a, b` when `{v, u_a, u_b}` is a triangle, and disjoint representatives
/// pick the pairs.
pub fn absorb_leftover(
    g: &Graph,
    l: &VertexSet,
    u0: &[usize],
    sdr_budget: u64,
) -> std::result::Result<Absorbed, SdrFailure> {
    let graphs: Vec<AuxGraph> = l
        .iter()
        .map(|v| {
            let mut edges = Vec::new();
            let mut witnesses = Vec::new();
            let near: Vec<usize> = (0..u0.len()).filter(|&a| g.has_edge(v, u0[a])).collect();
            for (x, &a) in near.iter().enumerate() {
                for &b in &near[x + 1..] {
                    if g.has_edge(u0[a], u0[b]) {
                        edges.push((a, b));
                        witnesses.push([v, u0[a], u0[b]]);
                    }
                }
            }
            AuxGraph {
                owner: v,
                vertex_count: u0.len(),
                edges,
                witnesses,
            }
        })
        .collect();
    let sol = haxell_sdr_budgeted(&graphs, sdr_budget)?;
    let mut used = vec![false; u0.len()];
    let mut triangles = Vec::with_capacity(graphs.len());
    for (k, gv) in graphs.iter().enumerate() {
        let (a, b) = sol.assignment[k];
        used[a] = true;
        used[b] = true;
        triangles.push(gv.witnesses[sol.edge_index[k]]);
    }
    let unused = (0..u0.len()).filter(|&a| !used[a]).collect();
    Ok(Absorbed {
        triangles,
        unused,
        graphs,
    })
}

/// Splits `chains` into triples with a traversing triangle on their
/// removable sets. Tries consecutive triples first, then backtracks.
/// Returns `(indices, triangle)` per triple, or `None` if the search
/// exhausts (or exceeds `budget` nodes).
pub fn partition_into_triples(g: &Graph, chains: &[&Chain], budget: u64) -> Option<Vec<([usize; 3], [usize; 3])>> {
    if !chains.len().is_multiple_of(3) {
        return None;
    }
    let removable: Vec<VertexSet> = chains.iter().map(|c| c.removable_set(g.n())).collect();
    let mut memo: HashMap<[usize; 3], Option<[usize; 3]>> = HashMap::new();
    let mut nodes = 0u64;
    let mut chosen = Vec::new();
    let mut free = vec![true; chains.len()];
    fn go(
        g: &Graph,
        removable: &[VertexSet],
        memo: &mut HashMap<[usize; 3], Option<[usize; 3]>>,
        nodes: &mut u64,
        budget: u64,
        free: &mut [bool],
        chosen: &mut Vec<([usize; 3], [usize; 3])>,
    ) -> bool {
        let Some(i) = free.iter().position(|&f| f) else {
            return true;
        };
        *nodes += 1;
        if *nodes > budget {
            return false;
        }
        free[i] = false;
        let m = free.len();
        for j in i + 1..m {
            if !free[j] {
                continue;
            }
            for k in j + 1..m {
                if !free[k] {
                    continue;
                }
                let t = *memo
                    .entry([i, j, k])
                    .or_insert_with(|| transversal_triangle(g, &removable[i], &removable[j], &removable[k]));
                if let Some(t) = t {
                    free[j] = false;
                    free[k] = false;
                    chosen.push(([i, j, k], t));
                    if go(g, removable, memo, nodes, budget, free, chosen) {
                        return true;
                    }
                    chosen.pop();
                    free[j] = true;
                    free[k] = true;
                }
            }
        }
        free[i] = true;
        false
    }
    go(g, &removable, &mut memo, &mut nodes, budget, &mut free, &mut chosen).then_some(chosen)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Equipartition,
    BuildLevels,
    CoverLowDegree,
    GreedyPack,
    AbsorbLeftover,
    Cascade,
    FinalTriples,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub level: Option<usize>,
    pub reason: String,
}

impl StageFailure {
    fn new(stage: Stage, reason: impl Into<String>) -> Self {
        StageFailure {
            stage,
            level: None,
            reason: reason.into(),
        }
    }

    fn at(stage: Stage, level: usize, reason: impl Into<String>) -> Self {
        StageFailure {
            stage,
            level: Some(level),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub millis: f64,
}

/// Set sizes recorded during one attempt (filled in as stages complete).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetSizes {
    pub v1: usize,
    pub v2: usize,
    /// `|U_i|` per level.
    pub u: Vec<usize>,
    pub b: usize,
    pub m: usize,
    pub l: usize,
    /// `|L_i|` for `i = 0..=q`: chains of level `i` still to be covered when
    /// the cascade reaches that level.
    pub l_levels: Vec<usize>,
    /// `|L'_i|` for `i = 1..=q`: level-`i` chains consumed from below.
    pub l_prime: Vec<usize>,
    /// Candidates dropped by the deletion procedure, per level.
    pub removed_candidates: Vec<usize>,
    /// Levels whose resolution needed the fallback packing search.
    pub resolve_fallback: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptReport {
    pub attempt: usize,
    pub seed: u64,
    pub timings: Vec<StageTiming>,
    pub sizes: SetSizes,
    pub failure: Option<StageFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n: usize,
    pub edges: usize,
    pub p: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub plan: LevelPlan,
    pub advisories: Vec<String>,
    pub threshold: Option<ThresholdVerdict>,
    pub attempts: Vec<AttemptReport>,
    pub restarts: usize,
    pub success: bool,
    pub total_millis: f64,
    /// Whether `G` has a triangle factor at all, by the exact oracle; only
    /// evaluated after a failed search on a graph within the oracle cap.
    pub exact_factor_exists: Option<bool>,
    pub triangles: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    /// Present only for a factor that passed the verifier.
    pub factor: Option<TriangleFactor>,
    pub report: RunReport,
}

impl PipelineOutcome {
    pub fn is_success(&self) -> bool {
        self.factor.is_some()
    }
}

/// Triangles placed so far and the vertices they cover; rejects any
/// triangle that overlaps or is not a host triangle.
struct Placement<'a> {
    g: &'a Graph,
    factor: TriangleFactor,
    covered: VertexSet,
}

impl Placement<'_> {
    fn place(&mut self, stage: Stage, triangles: impl IntoIterator<Item = [usize; 3]>) -> std::result::Result<(), StageFailure> {
        for t in triangles {
            let [a, b, c] = t;
            if !(self.g.has_edge(a, b) && self.g.has_edge(b, c) && self.g.has_edge(a, c)) {
                return Err(StageFailure::new(stage, format!("{t:?} is not a triangle")));
            }
            for v in t {
                if self.covered.contains(v) {
                    return Err(StageFailure::new(stage, format!("vertex {v} covered twice")));
                }
                self.covered.insert(v);
            }
            self.factor.push(t);
        }
        Ok(())
    }
}

struct Attempt<'a> {
    g: &'a Graph,
    config: &'a PipelineConfig,
    p: f64,
    plan: &'a LevelPlan,
    report: AttemptReport,
    clock: Instant,
}

impl Attempt<'_> {
    fn lap(&mut self, stage: Stage) {
        let now = Instant::now();
        self.report.timings.push(StageTiming {
            stage,
            millis: (now - self.clock).as_secs_f64() * 1e3,
        });
        self.clock = now;
    }

    fn run(&mut self) -> std::result::Result<TriangleFactor, StageFailure> {
        let (g, config, plan) = (self.g, self.config, self.plan);
        let n = g.n();
        let seed = self.report.seed;

        let split = equipartition(g, self.p, config.degree_fraction, seed, config.equipartition_tries).ok_or_else(|| {
            StageFailure::new(
                Stage::Equipartition,
                format!("no split with {} neighbours per side in {} tries", config.degree_fraction * n as f64 * self.p, config.equipartition_tries),
            )
        })?;
        self.report.sizes.v1 = split.v1.len();
        self.report.sizes.v2 = split.v2.len();
        let v1 = VertexSet::from_vertices(n, split.v1.iter().copied());
        let v2 = VertexSet::from_vertices(n, split.v2.iter().copied());
        self.lap(Stage::Equipartition);

        let levels = build_levels(g, &v2, plan, config)
            .map_err(|f| StageFailure::at(Stage::BuildLevels, f.level, f.reason))?;
        let mut chain_vertices = VertexSet::empty(n);
        for level in &levels {
            let mut u = VertexSet::empty(n);
            for c in &level.chains {
                u.union_with(&c.vertex_set(n));
            }
            self.report.sizes.u.push(u.len());
            chain_vertices.union_with(&u);
        }
        self.report.sizes.removed_candidates = levels.iter().map(|l| l.removed_candidates).collect();
        self.lap(Stage::BuildLevels);

        let mut placed = Placement {
            g,
            factor: TriangleFactor::new(),
            covered: chain_vertices.clone(),
        };
        let u0: Vec<usize> = levels[0].chains.iter().map(|c| c.vertices[0]).collect();
        let u0_set = VertexSet::from_vertices(n, u0.iter().copied());
        let low = u0.len() as f64 * self.p / 2.0;
        let b = VertexSet::from_vertices(
            n,
            (0..n).filter(|&v| !chain_vertices.contains(v) && (g.degree_into(v, &u0_set) as f64) < low),
        );
        self.report.sizes.b = b.len();
        let b_tris = cover_low_degree(g, &b, &v1, &chain_vertices)
            .map_err(|v| StageFailure::new(Stage::CoverLowDegree, format!("no triangle left for vertex {v}")))?;
        placed.place(Stage::CoverLowDegree, b_tris)?;
        self.lap(Stage::CoverLowDegree);

        let m = VertexSet::full(n).difference(&placed.covered);
        self.report.sizes.m = m.len();
        let (packed, leftover) = greedy_triangle_pack(g, &m);
        placed.place(Stage::GreedyPack, packed)?;
        self.report.sizes.l = leftover.len();
        self.lap(Stage::GreedyPack);

        // chain vertices leave the covered set until their level is tiled
        placed.covered.difference_with(&chain_vertices);
        let absorbed = absorb_leftover(g, &leftover, &u0, config.sdr_budget).map_err(|e| {
            StageFailure::new(Stage::AbsorbLeftover, format!("{} leftover vertices: {e:?}", leftover.len()))
        })?;
        placed.place(Stage::AbsorbLeftover, absorbed.triangles)?;
        self.lap(Stage::AbsorbLeftover);

        let mut remaining = absorbed.unused;
        for i in 0..plan.q {
            self.report.sizes.l_levels.push(remaining.len());
            let (lowers, uppers) = (&levels[i].chains, &levels[i + 1].chains);
            let res = resolve_level(g, &remaining, lowers, uppers, &levels[i].aux)
                .map_err(|e| StageFailure::at(Stage::Cascade, i, e.to_string()))?
                .map_err(|f| {
                    StageFailure::at(
                        Stage::Cascade,
                        i,
                        format!(
                            "{} chains left after greedy triples, representatives {:?}",
                            f.greedy_leftover, f.sdr
                        ),
                    )
                })?;
            if !res.greedy {
                self.report.sizes.resolve_fallback.push(i);
            }
            placed.place(Stage::Cascade, res.factor.triangles)?;
            self.report.sizes.l_prime.push(res.used_uppers.len());
            remaining = (0..uppers.len()).filter(|j| res.used_uppers.binary_search(j).is_err()).collect();
        }
        self.report.sizes.l_levels.push(remaining.len());
        self.lap(Stage::Cascade);

        if remaining.len() % 3 != 0 {
            return Err(StageFailure::at(
                Stage::FinalTriples,
                plan.q,
                format!("{} top-level chains remain, not a multiple of 3", remaining.len()),
            ));
        }
        let top: Vec<&Chain> = remaining.iter().map(|&j| &levels[plan.q].chains[j]).collect();
        let triples = partition_into_triples(g, &top, FINAL_SEARCH_BUDGET).ok_or_else(|| {
            StageFailure::at(Stage::FinalTriples, plan.q, format!("no traversing triples for {} chains", top.len()))
        })?;
        for ([i, j, k], t) in triples {
            let tiles = tile_with_triangle([top[i], top[j], top[k]], t)
                .map_err(|e| StageFailure::new(Stage::FinalTriples, e.to_string()))?;
            placed.place(Stage::FinalTriples, tiles.triangles)?;
        }
        self.lap(Stage::FinalTriples);

        let factor = placed.factor;
        check_triangle_factor(g, &factor, &g.vertex_set())
            .map_err(|v| StageFailure::new(Stage::Verify, v.to_string()))?;
        self.lap(Stage::Verify);
        Ok(factor)
    }
}

/// Runs attempts with seeds derived from `config.seed` until one produces a
/// verified factor or `max_restarts` attempts have failed.
///
/// Graphs with fewer than 9 vertices are too small for any chain level and
/// go straight to the exact oracle. Errors only on invalid input (`n` not a
/// multiple of 3, bad configuration); an unsuccessful search is reported in
/// the outcome.
pub fn triangle_factor(g: &Graph, config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let n = g.n();
    if !n.is_multiple_of(3) {
        return input(format!("n = {n} is not divisible by 3"));
    }
    let start = Instant::now();
    let p = config.p.unwrap_or_else(|| g.density());
    if n < 9 {
        return small_instance(g, config, p, start);
    }
    let (plan, mut advisories) = plan_levels(n, n - n / 2, config)?;
    if config.subset_cap.is_none() {
        for i in (0..plan.q).filter(|&i| default_subset_cap(plan.t[i + 1]) == 0) {
            advisories.push(format!(
                "level {i}: t/12 < 1, selection keeps chains by aux edge count without a Haxell check"
            ));
        }
    }
    let threshold = if g.regular_degree().is_none() || n <= 2000 {
        theorem_threshold_check(g, config.epsilon, None).ok()
    } else {
        None
    };
    if let Some(v) = &threshold {
        if !v.pass {
            advisories.push(format!("density and jumbledness hypotheses not certified at epsilon = {}", config.epsilon));
        }
    }
    let mut attempts = Vec::new();
    let mut factor = None;
    for k in 0..config.max_restarts {
        let mut attempt = Attempt {
            g,
            config,
            p,
            plan: &plan,
            report: AttemptReport {
                attempt: k,
                seed: derive_indexed(config.seed, "attempt", k as u64),
                timings: Vec::new(),
                sizes: SetSizes::default(),
                failure: None,
            },
            clock: Instant::now(),
        };
        let result = attempt.run();
        let mut report = attempt.report;
        match result {
            Ok(f) => {
                attempts.push(report);
                factor = Some(f);
                break;
            }
            Err(e) => {
                report.failure = Some(e);
                attempts.push(report);
            }
        }
    }
    let success = factor.is_some();
    let exact_factor_exists = if success || n > config.oracle_cap {
        None
    } else {
        exact_triangle_factor_capped(g, &g.vertex_set(), config.oracle_cap)?.map(|_| true).or(Some(false))
    };
    let report = RunReport {
        n,
        edges: g.edge_count(),
        p,
        epsilon: config.epsilon,
        seed: config.seed,
        plan,
        advisories,
        threshold,
        restarts: attempts.len().saturating_sub(1),
        attempts,
        success,
        total_millis: start.elapsed().as_secs_f64() * 1e3,
        exact_factor_exists,
        triangles: factor.as_ref().map(|f: &TriangleFactor| f.triangles.clone()).unwrap_or_default(),
    };
    Ok(PipelineOutcome { factor, report })
}

fn small_instance(g: &Graph, config: &PipelineConfig, p: f64, start: Instant) -> Result<PipelineOutcome> {
    let n = g.n();
    let factor = exact_triangle_factor(g, &g.vertex_set())?.filter(|f| check_triangle_factor(g, f, &g.vertex_set()).is_ok());
    let report = RunReport {
        n,
        edges: g.edge_count(),
        p,
        epsilon: config.epsilon,
        seed: config.seed,
        plan: LevelPlan { q: 0, t: vec![0] },
        advisories: vec![format!("n = {n} < 9: solved by the exact oracle")],
        threshold: None,
        attempts: Vec::new(),
        restarts: 0,
        success: factor.is_some(),
        total_millis: start.elapsed().as_secs_f64() * 1e3,
        exact_factor_exists: Some(factor.is_some()),
        triangles: factor.as_ref().map(|f| f.triangles.clone()).unwrap_or_default(),
    };
    Ok(PipelineOutcome { factor, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::verify_triangle_factor;
    use crate::generators::{complete, complete_multipartite, cycle, gnp};
    use crate::oracle::enumerate_triangles;

    #[test]
    fn level_count_formula() {
        assert_eq!(default_level_count(99), 1);
        assert_eq!(default_level_count(10_000_000), 2);
    }

    #[test]
    fn plans_fit_their_budget() {
        let cfg = PipelineConfig::default();
        for n in [9, 30, 99, 150, 300, 1200] {
            let v2 = n - n / 2;
            let (plan, _) = plan_levels(n, v2, &cfg).unwrap();
            assert!(plan.chain_vertices() as f64 <= cfg.chain_budget * v2 as f64, "n = {n}: {plan:?}");
            assert!(plan.peak_vertices() <= v2);
            for i in 0..plan.q {
                assert_eq!(plan.t[i], 2 * plan.t[i + 1]);
            }
        }
        assert_eq!(plan_levels(9, 5, &cfg).unwrap().0.q, 0);
    }

    #[test]
    fn equipartition_cases() {
        let k = complete(12);
        let split = equipartition(&k, k.density(), 1.0 / 6.0, 1, 1).unwrap();
        assert_eq!(split.v1.len() + split.v2.len(), 12);
        let star = Graph::from_edges(10, (1..10).map(|v| (0, v))).unwrap();
        assert!(equipartition(&star, star.density(), 1.0 / 6.0, 1, 20).is_none());
        let g = gnp(120, 0.5, 7);
        let split = equipartition(&g, g.density(), 1.0 / 6.0, 3, 20).unwrap();
        let s1 = VertexSet::from_vertices(120, split.v1.iter().copied());
        let scan = (0..120).map(|v| g.degree_into(v, &s1)).min().unwrap();
        assert_eq!(scan, split.min_degree_v1);
    }

    #[test]
    fn build_levels_cases() {
        let g = gnp(300, 0.5, 3);
        let cfg = PipelineConfig::default();
        let v2 = g.vertex_set();
        let plan = LevelPlan::with_top(1, 2);
        let levels = build_levels(&g, &v2, &plan, &cfg).unwrap();
        assert_eq!(levels[1].chains.len(), 2);
        assert_eq!(levels[0].chains.len(), 4);
        let mut seen = VertexSet::empty(300);
        for c in levels.iter().flat_map(|l| &l.chains) {
            assert!(verify_chain_capped(&g, c, 6));
            assert!(seen.is_disjoint(&c.vertex_set(300)));
            seen.union_with(&c.vertex_set(300));
        }

        let bip = complete_multipartite(&[30, 30]);
        let err = build_levels(&bip, &bip.vertex_set(), &plan, &cfg).unwrap_err();
        assert_eq!(err.level, 1);

        let dense = complete(12);
        let flat = build_levels(&dense, &dense.vertex_set(), &LevelPlan::with_top(0, 3), &cfg).unwrap();
        assert_eq!(flat[0].chains.iter().map(|c| c.vertices[0]).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn cover_low_degree_cases() {
        let g = complete(9);
        let v1 = VertexSet::from_vertices(9, 0..6);
        let none = VertexSet::empty(9);
        assert!(cover_low_degree(&g, &none, &v1, &none).unwrap().is_empty());
        let b = VertexSet::from_vertices(9, [8]);
        assert_eq!(cover_low_degree(&g, &b, &v1, &none).unwrap(), vec![[8, 0, 1]]);

        let g = gnp(120, 0.6, 4);
        let v1 = VertexSet::from_vertices(120, 0..60);
        let b = VertexSet::from_vertices(120, 100..105);
        let tris = cover_low_degree(&g, &b, &v1, &none).unwrap();
        assert_eq!(tris.len(), 5);
        let f = TriangleFactor { triangles: tris };
        assert!(verify_triangle_factor(&g, &f, &f.covered(120)));
        assert!(f.covered(120).intersection(&b).len() == 5);

        let empty_v1 = VertexSet::empty(9);
        assert_eq!(cover_low_degree(&complete(9), &VertexSet::from_vertices(9, [3]), &empty_v1, &none), Err(3));
    }

    #[test]
    fn greedy_pack_cases() {
        let k3 = complete(3);
        let (t, l) = greedy_triangle_pack(&k3, &k3.vertex_set());
        assert_eq!(t, vec![[0, 1, 2]]);
        assert!(l.is_empty());
        let c6 = cycle(6);
        let (t, l) = greedy_triangle_pack(&c6, &c6.vertex_set());
        assert!(t.is_empty());
        assert_eq!(l.len(), 6);

        let g = gnp(60, 0.5, 11);
        let (t, l) = greedy_triangle_pack(&g, &g.vertex_set());
        let (h, _) = g.induced_subgraph(&l);
        assert!(enumerate_triangles(&h).is_empty());
        assert_eq!(3 * t.len() + l.len(), 60);
    }

    #[test]
    fn absorb_leftover_cases() {
        let g = complete(9);
        let none = VertexSet::empty(9);
        let out = absorb_leftover(&g, &none, &[0, 1, 2], DEFAULT_SDR_BUDGET).unwrap();
        assert!(out.triangles.is_empty());
        assert_eq!(out.unused, vec![0, 1, 2]);

        // v = 5 sees u0 = {0, 1, 2}, only {0, 1} adjacent
        let g = Graph::from_edges(6, [(5, 0), (5, 1), (5, 2), (0, 1)]).unwrap();
        let out = absorb_leftover(&g, &VertexSet::from_vertices(6, [5]), &[0, 1, 2], DEFAULT_SDR_BUDGET).unwrap();
        assert_eq!(out.triangles, vec![[5, 0, 1]]);
        assert_eq!(out.unused, vec![2]);

        let g = gnp(120, 0.6, 8);
        let u0: Vec<usize> = (0..40).collect();
        let l = VertexSet::from_vertices(120, [50, 60, 70, 80]);
        let out = absorb_leftover(&g, &l, &u0, DEFAULT_SDR_BUDGET).unwrap();
        let f = TriangleFactor { triangles: out.triangles };
        assert!(verify_triangle_factor(&g, &f, &f.covered(120)));
        assert_eq!(out.unused.len(), 32);
    }

    #[test]
    fn partition_prefers_consecutive_triples() {
        let g = complete(9);
        let chains: Vec<Chain> = (0..9).map(Chain::singleton).collect();
        let refs: Vec<&Chain> = chains.iter().collect();
        let triples = partition_into_triples(&g, &refs, 1000).unwrap();
        let idx: Vec<[usize; 3]> = triples.iter().map(|t| t.0).collect();
        assert_eq!(idx, vec![[0, 1, 2], [3, 4, 5], [6, 7, 8]]);
        assert!(partition_into_triples(&cycle(9), &refs, 1000).is_none());
    }

    #[test]
    fn pipeline_small_cases() {
        let k9 = complete(9);
        let out = triangle_factor(&k9, &PipelineConfig::default()).unwrap();
        let f = out.factor.unwrap();
        assert_eq!(f.len(), 3);
        assert!(verify_triangle_factor(&k9, &f, &k9.vertex_set()));

        let bip = complete_multipartite(&[6, 6]);
        let cfg = PipelineConfig {
            max_restarts: 5,
            ..PipelineConfig::default()
        };
        let out = triangle_factor(&bip, &cfg).unwrap();
        assert!(!out.is_success());
        assert_eq!(out.report.attempts.len(), 5);
        assert!(out.report.attempts.iter().all(|a| a.failure.is_some()));

        assert_eq!(out.report.exact_factor_exists, Some(false));
        assert!(triangle_factor(&complete(10), &cfg).is_err());
        assert!(triangle_factor(&complete(6), &cfg).unwrap().is_success());
        assert!(!triangle_factor(&cycle(6), &cfg).unwrap().is_success());
    }

    #[test]
    fn pipeline_gnp_99() {
        let g = gnp(99, 0.5, 1);
        let out = triangle_factor(&g, &PipelineConfig::default()).unwrap();
        let f = out.factor.expect("a verified factor");
        assert!(verify_triangle_factor(&g, &f, &g.vertex_set()));
        assert_eq!(out.report.triangles.len(), 33);
    }

    #[test]
    fn report_json_keys() {
        let out = triangle_factor(&complete(9), &PipelineConfig::default()).unwrap();
        let v = serde_json::to_value(&out.report).unwrap();
        for key in ["attempts", "restarts", "triangles", "plan", "advisories", "success"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let sizes = &v["attempts"][0]["sizes"];
        for key in ["b", "m", "l", "l_levels", "l_prime"] {
            assert!(sizes.get(key).is_some(), "{key}");
        }
        let cfg: PipelineConfig = serde_json::from_str(r#"{"seed": 4}"#).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.max_restarts, 200);
    }
}
