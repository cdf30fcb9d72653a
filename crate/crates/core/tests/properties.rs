use trifactor::chains::{build_disjoint_chains, chain_factor_after_removal, tile_with_triangle, verify_chain};
use trifactor::generators::{complete_multipartite, gnp, paley, random_regular};
use trifactor::oracle::{enumerate_triangles, exact_triangle_factor};
use trifactor::spectral::eigenvalues;
use trifactor::{check_triangle_factor, Graph, VertexSet};

/// Independent partition search: pair the smallest uncovered vertex with
/// every ordered pair of later vertices.
fn partition_exists(g: &Graph, remaining: &[usize]) -> bool {
    let Some(&v) = remaining.first() else {
        return true;
    };
    let rest: Vec<usize> = remaining[1..].to_vec();
    for i in 0..rest.len() {
        for j in i + 1..rest.len() {
            let (a, b) = (rest[i], rest[j]);
            if g.has_edge(v, a) && g.has_edge(v, b) && g.has_edge(a, b) {
                let next: Vec<usize> = rest.iter().copied().filter(|&x| x != a && x != b).collect();
                if partition_exists(g, &next) {
                    return true;
                }
            }
        }
    }
    false
}

#[test]
fn exact_oracle_agrees_with_partition_search() {
    let mut found = 0;
    let mut missing = 0;
    for seed in 0..60u64 {
        let n = [6, 9, 12][seed as usize % 3];
        let p = [0.35, 0.5, 0.65][(seed / 3) as usize % 3];
        let g = gnp(n, p, seed);
        let target = g.vertex_set();
        let expected = partition_exists(&g, &target.to_vec());
        match exact_triangle_factor(&g, &target).unwrap() {
            Some(f) => {
                assert!(expected, "seed {seed}: oracle factor where search finds none");
                assert!(check_triangle_factor(&g, &f, &target).is_ok());
                found += 1;
            }
            None => {
                assert!(!expected, "seed {seed}: oracle missed a factor");
                missing += 1;
            }
        }
    }
    assert!(found > 0 && missing > 0, "found {found}, missing {missing}");
}

#[test]
fn exact_oracle_on_proper_subsets() {
    let g = gnp(15, 0.5, 3);
    for mask in [0b111_111_000_111_000u32, 0b000_111_111_111_111, 0b101_010_101_010_101] {
        let target = VertexSet::from_vertices(15, (0..15).filter(|&v| mask >> v & 1 == 1));
        if !target.len().is_multiple_of(3) {
            continue;
        }
        let expected = partition_exists(&g, &target.to_vec());
        let got = exact_triangle_factor(&g, &target).unwrap();
        assert_eq!(got.is_some(), expected);
        if let Some(f) = got {
            assert!(check_triangle_factor(&g, &f, &target).is_ok());
        }
    }
}

#[test]
fn chain_removal_leaves_a_factor() {
    let g = gnp(120, 0.5, 11);
    let chains = build_disjoint_chains(&g, &g.vertex_set(), 4, 3).expect("dense graph holds three 4-chains");
    for chain in &chains {
        assert!(verify_chain(&g, chain));
        for &r in &chain.removable {
            let mut target = chain.vertex_set(g.n());
            target.remove(r);
            let f = chain_factor_after_removal(chain, r).unwrap();
            assert!(check_triangle_factor(&g, &f, &target).is_ok());
        }
        let inner = chain.vertices.iter().find(|v| !chain.removable.contains(v)).unwrap();
        assert!(chain_factor_after_removal(chain, *inner).is_err());
    }
}

#[test]
fn observation_tiling_matches_exact_oracle() {
    let g = gnp(90, 0.6, 5);
    let chains = build_disjoint_chains(&g, &g.vertex_set(), 2, 3).expect("three 2-chains");
    let union = chains.iter().fold(VertexSet::empty(g.n()), |acc, c| acc.union(&c.vertex_set(g.n())));
    let mut tiled = 0;
    for &x in &chains[0].removable {
        for &y in &chains[1].removable {
            for &z in &chains[2].removable {
                if !(g.has_edge(x, y) && g.has_edge(y, z) && g.has_edge(x, z)) {
                    continue;
                }
                let f = tile_with_triangle([&chains[0], &chains[1], &chains[2]], [x, y, z]).unwrap();
                assert!(check_triangle_factor(&g, &f, &union).is_ok());
                tiled += 1;
            }
        }
    }
    let exact = exact_triangle_factor(&g, &union).unwrap();
    assert!(tiled > 0);
    assert!(exact.is_some());
}

#[test]
fn generators_have_expected_shape() {
    for seed in 0..5 {
        let g = random_regular(60, 30, seed).unwrap();
        assert_eq!(g.regular_degree(), Some(30));
        let g = gnp(200, 0.3, seed);
        let m = g.edge_count() as f64;
        let mean = 0.3 * 19900.0;
        assert!((m - mean).abs() < 6.0 * (mean * 0.7).sqrt(), "seed {seed}: {m} edges");
    }
    for q in [5, 13, 17, 29] {
        let g = paley(q).unwrap();
        assert_eq!(g.regular_degree(), Some((q - 1) / 2));
    }
    let g = complete_multipartite(&[3, 4, 5]);
    assert_eq!(g.edge_count(), 3 * 4 + 3 * 5 + 4 * 5);
    assert_eq!(enumerate_triangles(&g).len(), 3 * 4 * 5);
}

#[test]
fn spectrum_moments_match_graph_counts() {
    for seed in 0..4 {
        let g = gnp(40, 0.4, seed);
        let spectrum = eigenvalues(&g).unwrap().eigenvalues;
        let trace: f64 = spectrum.iter().sum();
        let second: f64 = spectrum.iter().map(|x| x * x).sum();
        let third: f64 = spectrum.iter().map(|x| x * x * x).sum();
        assert!(trace.abs() < 1e-8);
        assert!((second - 2.0 * g.edge_count() as f64).abs() < 1e-6);
        assert!((third - 6.0 * enumerate_triangles(&g).len() as f64).abs() < 1e-6);
    }
}
