mod common;

use mtmcap_core::graphs::{self, Graph, SpanningTree};
use mtmcap_core::seed;
use proptest::prelude::*;

#[test]
fn class_counts_match_known_sequence() {
    let counts: Vec<usize> = (1..=6).map(|n| common::connected_graphs(n).len()).collect();
    assert_eq!(counts, vec![1, 1, 2, 6, 21, 112]);
}

#[test]
fn local_search_is_within_one_of_the_oracle() {
    for n in 2..=6 {
        for g in common::connected_graphs(n) {
            let (d, oracle_tree) = graphs::mdst_oracle(&g).unwrap();
            assert_eq!(oracle_tree.max_degree(), d);
            let t = graphs::mdst_local_search(&g).unwrap();
            assert!(t.max_degree() <= d + 1, "{:?}: local {} oracle {d}", g.edges(), t.max_degree());
        }
    }
}

#[test]
fn high_tree_degree_has_a_partition_witness() {
    for n in 2..=6 {
        for g in common::connected_graphs(n) {
            let (d, _) = graphs::mdst_oracle(&g).unwrap();
            for k in [3, 4] {
                if d > k {
                    let s = graphs::partition_witness(&g, k).unwrap().expect("witness");
                    let mut removed = vec![false; n];
                    for &v in &s {
                        removed[v] = true;
                    }
                    assert!(g.induced_without(&removed).count() > (k - 2) * s.len());
                }
            }
        }
    }
}

#[test]
fn toughness_witness_achieves_the_ratio() {
    for g in common::connected_graphs(5) {
        let rep = graphs::toughness(&g).unwrap();
        match (&rep.toughness, &rep.witness) {
            (graphs::Toughness::Finite(t), Some(s)) => {
                let mut removed = vec![false; 5];
                for &v in s {
                    removed[v] = true;
                }
                let c = g.induced_without(&removed).count();
                assert_eq!(c, rep.components);
                assert_eq!(*t, num::rational::Ratio::new(s.len() as u64, c as u64));
            }
            (graphs::Toughness::Infinite, None) => assert_eq!(g.m(), 10),
            other => panic!("inconsistent report {other:?}"),
        }
    }
}

#[test]
fn random_sample_local_search_quality() {
    let mut rng = seed::sub_rng(seed::DEFAULT_SEED, "mdst-sample", 0);
    for i in 0..200 {
        let n = 7 + i % 3;
        let g = common::random_connected_graph(n, 0.25, &mut rng);
        let (d, _) = graphs::mdst_oracle(&g).unwrap();
        assert!(graphs::mdst_local_search(&g).unwrap().max_degree() <= d + 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spanning_trees_are_trees(n in 2usize..14, p in 0.05f64..0.6, s in any::<u64>()) {
        let g = common::random_connected_graph(n, p, &mut seed::rng(s));
        for t in [graphs::mdst_local_search(&g).unwrap(), SpanningTree::bfs(&g, 0).unwrap()] {
            let edges = t.edges();
            prop_assert_eq!(edges.len(), n - 1);
            prop_assert!(edges.iter().all(|&(u, v)| g.has_edge(u, v)));
            let tg = Graph::from_edges(n, &edges).unwrap();
            prop_assert!(tg.is_connected());
            prop_assert_eq!(tg.max_degree(), t.max_degree());
            prop_assert_eq!(tg.diameter().unwrap(), t.diameter());
        }
    }

    #[test]
    fn upper_bounds_are_ordered(n in 2usize..12, p in 0.05f64..0.6, s in any::<u64>()) {
        let g = common::random_connected_graph(n, p, &mut seed::rng(s));
        let b = graphs::broadcast_upper_bound(&g).unwrap().ceiling();
        let a = graphs::all_to_all_upper_bound(&g).unwrap().ceiling();
        prop_assert!(a <= b);
        prop_assert!(a <= num::rational::Ratio::new(1, n as u64));
    }
}
