//! Seeded instance families: random, structured and pseudorandom graphs.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::graph::Graph;
use crate::rng::{derive_seed, rng};

/// A fully determined instance: family, parameters and (where relevant) seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GenSpec {
    Gnp { n: usize, p: f64, seed: u64 },
    RandomRegular { n: usize, d: usize, seed: u64 },
    Paley { q: usize },
    CompleteMultipartite { parts: Vec<usize> },
    Cycle { n: usize },
    Complete { n: usize },
}

impl GenSpec {
    pub fn family(&self) -> &'static str {
        match self {
            GenSpec::Gnp { .. } => "gnp",
            GenSpec::RandomRegular { .. } => "random_regular",
            GenSpec::Paley { .. } => "paley",
            GenSpec::CompleteMultipartite { .. } => "complete_multipartite",
            GenSpec::Cycle { .. } => "cycle",
            GenSpec::Complete { .. } => "complete",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GenSpec::Gnp { n, p, .. } => {
                if n == 0 || !(0.0..=1.0).contains(&p) {
                    return input(format!("gnp needs n >= 1 and p in [0, 1], got n = {n}, p = {p}"));
                }
            }
            GenSpec::RandomRegular { n, d, .. } => check_regular(n, d)?,
            GenSpec::Paley { q } => check_paley(q)?,
            GenSpec::CompleteMultipartite { ref parts } => {
                if parts.is_empty() {
                    return input("complete_multipartite needs at least one part");
                }
            }
            GenSpec::Cycle { n } => {
                if n < 3 {
                    return input(format!("cycle needs n >= 3, got {n}"));
                }
            }
            GenSpec::Complete { n } => {
                if n == 0 {
                    return input("complete needs n >= 1");
                }
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Graph> {
        self.validate()?;
        Ok(match *self {
            GenSpec::Gnp { n, p, seed } => gnp(n, p, seed),
            GenSpec::RandomRegular { n, d, seed } => random_regular(n, d, seed)?,
            GenSpec::Paley { q } => paley(q)?,
            GenSpec::CompleteMultipartite { ref parts } => complete_multipartite(parts),
            GenSpec::Cycle { n } => cycle(n),
            GenSpec::Complete { n } => complete(n),
        })
    }
}

/// Erdős–Rényi `G(n, p)`: pairs `u < v` in lexicographic order each draw one
/// uniform `f64` and become edges when it falls below `p`.
pub fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = rng(derive_seed(seed, "gnp"));
    Graph::from_fn(n, |_, _| rng.gen::<f64>() < p)
}

pub fn complete(n: usize) -> Graph {
    Graph::from_fn(n, |_, _| true)
}

pub fn cycle(n: usize) -> Graph {
    Graph::from_fn(n, |u, v| v - u == 1 || (u == 0 && v == n - 1 && n > 2))
}

/// Edge iff the endpoints lie in different parts; parts are consecutive
/// index ranges in the given order.
pub fn complete_multipartite(parts: &[usize]) -> Graph {
    let part_of: Vec<usize> = parts
        .iter()
        .enumerate()
        .flat_map(|(i, &size)| std::iter::repeat_n(i, size))
        .collect();
    Graph::from_fn(part_of.len(), |u, v| part_of[u] != part_of[v])
}

pub fn petersen() -> Graph {
    let outer = (0..5).map(|i| (i, (i + 1) % 5));
    let spokes = (0..5).map(|i| (i, i + 5));
    let inner = (0..5).map(|i| (5 + i, 5 + (i + 2) % 5));
    Graph::from_edges(10, outer.chain(spokes).chain(inner)).expect("petersen is simple")
}

fn check_regular(n: usize, d: usize) -> Result<()> {
    if d >= n || (n * d) % 2 == 1 {
        return input(format!("no simple {d}-regular graph on {n} vertices (need d < n and nd even)"));
    }
    Ok(())
}

fn is_prime(q: usize) -> bool {
    q >= 2 && (2..).take_while(|k| k * k <= q).all(|k| !q.is_multiple_of(k))
}

fn check_paley(q: usize) -> Result<()> {
    if !is_prime(q) || q % 4 != 1 {
        return input(format!("paley graphs need a prime q ≡ 1 (mod 4), got {q}"));
    }
    Ok(())
}

/// Paley graph on `Z_q`: `a ~ b` iff `a - b` is a nonzero square mod `q`.
pub fn paley(q: usize) -> Result<Graph> {
    check_paley(q)?;
    let mut residue = vec![false; q];
    for x in 1..q {
        residue[x * x % q] = true;
    }
    Ok(Graph::from_fn(q, |u, v| residue[v - u]))
}

const PAIRING_RESTARTS: usize = 1000;

/// Uniform-ish random `d`-regular graph.
///
/// Tries the pairing model up to 1000 times (a trial is abandoned at its
/// first loop or repeated pair). If every trial fails, starts from the
/// circulant `d`-regular graph instead. Either way the result is then
/// shuffled by `10·n·d` attempted double-edge swaps.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    check_regular(n, d)?;
    let mut rng = rng(derive_seed(seed, "random_regular"));
    let mut edges = (0..PAIRING_RESTARTS)
        .find_map(|_| pairing_trial(n, d, &mut rng))
        .unwrap_or_else(|| circulant(n, d));

    let mut adj = vec![vec![false; n]; n];
    for &(u, v) in &edges {
        adj[u][v] = true;
        adj[v][u] = true;
    }
    if edges.len() >= 2 {
        for _ in 0..10 * n * d {
            let i = rng.gen_range(0..edges.len());
            let j = rng.gen_range(0..edges.len());
            if i == j {
                continue;
            }
            let (a, b) = edges[i];
            let (c, e) = edges[j];
            let (x, y) = if rng.gen::<bool>() { (c, e) } else { (e, c) };
            // (a,b),(x,y) -> (a,x),(b,y)
            if a == x || b == y || adj[a][x] || adj[b][y] {
                continue;
            }
            adj[a][b] = false;
            adj[b][a] = false;
            adj[x][y] = false;
            adj[y][x] = false;
            adj[a][x] = true;
            adj[x][a] = true;
            adj[b][y] = true;
            adj[y][b] = true;
            edges[i] = (a.min(x), a.max(x));
            edges[j] = (b.min(y), b.max(y));
        }
    }
    edges.sort_unstable();
    Graph::from_edges(n, edges)
}

fn pairing_trial(n: usize, d: usize, rng: &mut crate::rng::Rng) -> Option<Vec<(usize, usize)>> {
    let mut points: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    points.shuffle(rng);
    let mut seen = vec![false; n * n];
    let mut edges = Vec::with_capacity(points.len() / 2);
    for pair in points.chunks_exact(2) {
        let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        if u == v || seen[u * n + v] {
            return None;
        }
        seen[u * n + v] = true;
        edges.push((u, v));
    }
    Some(edges)
}

/// `i ~ i ± 1..=d/2`, plus the antipodal matching when `d` is odd.
fn circulant(n: usize, d: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(n * d / 2);
    for i in 0..n {
        for k in 1..=d / 2 {
            let j = (i + k) % n;
            edges.push((i.min(j), i.max(j)));
        }
        if d % 2 == 1 && i < n / 2 {
            edges.push((i, i + n / 2));
        }
    }
    edges
}
