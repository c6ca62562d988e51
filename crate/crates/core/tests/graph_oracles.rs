use std::collections::BTreeSet;

use nrchain_core::cohesive::{
    core_numbers, enumerate_cliques, k_dbscan_with, truss_numbers, CoreRule,
};
use nrchain_core::graph::{
    build_graph, clustering_coefficient, compute_supports, connected_components, diameter_bfs,
    diameter_floyd_warshall, local_clustering, EventGraph, Scope,
};
use nrchain_testkit as oracle;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph(n: usize, edges: &[(u32, u32)]) -> EventGraph {
    build_graph(n, edges).unwrap()
}

fn instances(count: usize, seed: u64) -> Vec<(usize, Vec<(u32, u32)>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=40u32);
            let p = rng.gen_range(0.02..0.5);
            (n as usize, oracle::random_graph(&mut rng, n, p))
        })
        .collect()
}

#[test]
fn csr_rows_match_adjacency_matrix() {
    for (n, edges) in instances(60, 1) {
        let g = graph(n, &edges);
        let m = oracle::AdjMatrix::new(n, &edges);
        for u in 0..n as u32 {
            let row: Vec<u32> = (0..n as u32).filter(|&v| m.adj(u, v)).collect();
            assert_eq!(g.neighbors(u), row.as_slice());
            assert_eq!(g.degree(u), m.degree(u));
        }
        assert_eq!(g.edges(), m.edges().as_slice());
    }
}

#[test]
fn components_match_transitive_closure() {
    for (n, edges) in instances(80, 2) {
        let labeling = connected_components(&graph(n, &edges));
        assert_eq!(labeling.members, oracle::components_by_closure(n, &edges));
    }
}

#[test]
fn supports_match_triple_loop() {
    for (n, edges) in instances(80, 3) {
        assert_eq!(compute_supports(&graph(n, &edges)), oracle::supports_triple_loop(n, &edges));
    }
}

#[test]
fn core_numbers_match_fixpoint() {
    for (n, edges) in instances(80, 4) {
        assert_eq!(core_numbers(&graph(n, &edges)), oracle::core_numbers_fixpoint(n, &edges));
    }
}

#[test]
fn truss_numbers_match_recount() {
    for (n, edges) in instances(60, 5) {
        assert_eq!(truss_numbers(&graph(n, &edges)), oracle::truss_numbers_recount(n, &edges));
    }
}

#[test]
fn cliques_match_bitset_listing() {
    for (n, edges) in instances(80, 6) {
        for k_min in [2, 3, 4] {
            let found: BTreeSet<Vec<u32>> = enumerate_cliques(&graph(n, &edges), k_min, usize::MAX)
                .cliques
                .into_iter()
                .collect();
            assert_eq!(found, oracle::maximal_cliques_bitset(n, &edges, k_min as usize));
        }
    }
}

#[test]
fn dbscan_matches_set_definition() {
    for (n, edges) in instances(80, 7) {
        let g = graph(n, &edges);
        for (rule, closed) in [(CoreRule::ClosedNeighborhood, true), (CoreRule::Degree, false)] {
            let got = k_dbscan_with(&g, 3, rule);
            let got: std::collections::BTreeMap<u32, Vec<Vec<u32>>> = got
                .per_k
                .iter()
                .map(|(&k, subs)| (k, subs.iter().map(|s| s.vertices.clone()).collect()))
                .collect();
            assert_eq!(got, oracle::dbscan_by_definition(n, &edges, 3, closed), "{rule:?} on {edges:?}");
        }
    }
}

#[test]
fn local_clustering_matches_definition() {
    for (n, edges) in instances(40, 8) {
        let g = graph(n, &edges);
        let m = oracle::AdjMatrix::new(n, &edges);
        let local = local_clustering(&g);
        for v in 0..n as u32 {
            let nb: Vec<u32> = (0..n as u32).filter(|&w| m.adj(v, w)).collect();
            let d = nb.len();
            let expected = if d < 2 {
                0.0
            } else {
                let links = nb
                    .iter()
                    .enumerate()
                    .flat_map(|(i, &a)| nb[i + 1..].iter().map(move |&b| (a, b)))
                    .filter(|&(a, b)| m.adj(a, b))
                    .count();
                links as f64 / (d * (d - 1) / 2) as f64
            };
            assert!((local[v as usize] - expected).abs() < 1e-12);
        }
        if n > 0 {
            let mean = clustering_coefficient(&g, Scope::All).unwrap();
            assert!((0.0..=1.0).contains(&mean));
        }
    }
}

#[test]
fn diameters_agree() {
    for (n, edges) in instances(60, 9) {
        let g = graph(n, &edges);
        let labeling = connected_components(&g);
        if labeling.count() == 1 {
            assert_eq!(diameter_bfs(&g).unwrap(), diameter_floyd_warshall(&g).unwrap());
        } else {
            assert!(diameter_bfs(&g).is_err());
        }
    }
}

fn arb_graph() -> impl Strategy<Value = (usize, Vec<(u32, u32)>)> {
    (1usize..24).prop_flat_map(|n| {
        let all: Vec<(u32, u32)> = (0..n as u32).flat_map(|u| (u + 1..n as u32).map(move |v| (u, v))).collect();
        let m = all.len();
        (Just(n), proptest::sample::subsequence(all, 0..=m))
    })
}

proptest! {
    #[test]
    fn edge_ids_round_trip((n, edges) in arb_graph()) {
        let g = graph(n, &edges);
        for (id, &(u, v)) in g.edges().iter().enumerate() {
            prop_assert_eq!(g.edge_id(u, v), Some(id as u32));
            prop_assert_eq!(g.edge_id(v, u), Some(id as u32));
        }
        let degree_sum: usize = (0..n as u32).map(|v| g.degree(v)).sum();
        prop_assert_eq!(degree_sum, 2 * edges.len());
    }

    #[test]
    fn core_number_bounded_by_degree((n, edges) in arb_graph()) {
        let g = graph(n, &edges);
        let core = core_numbers(&g);
        for v in 0..n as u32 {
            prop_assert!(core[v as usize] as usize <= g.degree(v));
        }
    }

    #[test]
    fn truss_bounded_by_support((n, edges) in arb_graph()) {
        let g = graph(n, &edges);
        let sup = compute_supports(&g);
        for (t, s) in truss_numbers(&g).into_iter().zip(sup) {
            prop_assert!(t >= 2 && t <= s + 2);
        }
    }
}
