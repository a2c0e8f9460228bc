use std::collections::BTreeMap;

use graphviz_rust::dot_structures::{EdgeTy, Graph as DotGraph, Id, Stmt, Vertex};
use mtmcap_core::capacity::{self, EvalConfig, FlowSet, LinkMode};
use mtmcap_core::dot;
use mtmcap_core::geometric::*;
use mtmcap_core::graphs::{Graph, NodeId};
use mtmcap_core::protocols;
use mtmcap_core::seed;
use proptest::prelude::*;

fn id_text(id: &Id) -> String {
    match id {
        Id::Plain(s) | Id::Escaped(s) => s.trim_matches('"').to_string(),
        other => panic!("unexpected id {other:?}"),
    }
}

fn id_num(id: &Id) -> NodeId {
    id_text(id).parse().unwrap()
}

/// Parses DOT text back into (nodes, labelled edges).
fn parse_back(text: &str) -> (Vec<NodeId>, BTreeMap<(NodeId, NodeId), Option<String>>) {
    let DotGraph::Graph { stmts, .. } = graphviz_rust::parse(text).unwrap() else {
        panic!("expected an undirected graph");
    };
    let mut nodes = Vec::new();
    let mut edges = BTreeMap::new();
    for s in stmts {
        match s {
            Stmt::Node(n) => nodes.push(id_num(&n.id.0)),
            Stmt::Edge(e) => {
                let EdgeTy::Pair(Vertex::N(a), Vertex::N(b)) = e.ty else { panic!("edge chain") };
                let (u, v) = (id_num(&a.0), id_num(&b.0));
                let label = e.attributes.iter().find(|a| a.0 == Id::Plain("label".into())).map(|a| id_text(&a.1));
                edges.insert((u.min(v), u.max(v)), label);
            }
            _ => {}
        }
    }
    (nodes, edges)
}

fn good_instance(n: usize, mult: f64, s: u64) -> Option<(GeometricGraph, FlowSet)> {
    let r = (mult * connectivity_threshold(n, DEFAULT_ALPHA)).min(1.0);
    let gg = generate_gk(n, r, seed::derive_seed(s, "gk", 0)).unwrap();
    let f = FlowSet::random_pairwise(n, &mut seed::sub_rng(s, "pairs", 0));
    goodness_check(&gg, &f).unwrap().good.then_some((gg, f))
}

#[test]
fn threshold_curve_is_monotone() {
    let rows = threshold_experiment(200, &[0.5, 1.0, 2.0, 4.0], 40, DEFAULT_ALPHA, 9);
    assert!(rows.windows(2).all(|w| w[0].disconnected_fraction >= w[1].disconnected_fraction));
    assert!(rows[0].disconnected_fraction > rows[3].disconnected_fraction);
}

#[test]
fn grid_route_validates_in_both_modes() {
    let (gg, f) = good_instance(512, 8.0, 4).expect("seed 4 is good");
    for mode in [LinkMode::Duplex, LinkMode::Strict] {
        let route = grid_route_schedule(&gg, &f, mode).unwrap();
        let s = &route.schedule;
        assert_eq!(capacity::validate_schedule_prefix(&gg.graph, &f, s, 3 * s.period as u64).unwrap(), None);
        let rep = capacity::evaluate_throughput(&gg.graph, &f, s, EvalConfig { warmup_periods: None, measure_periods: 3 })
            .unwrap();
        assert_eq!(rep.throughput, capacity::Rate::new(1, s.period as u64));
        if mode == LinkMode::Duplex {
            assert_eq!(s.period, route.duplex_period);
        } else {
            assert!(s.period <= 3 * route.duplex_period);
        }
    }
}

#[test]
fn bad_instances_are_refused() {
    let gg = generate_gk(64, 0.3, 1).unwrap();
    let f = FlowSet::random_pairwise(64, &mut seed::rng(1));
    if !goodness_check(&gg, &f).unwrap().good {
        assert!(matches!(grid_route_schedule(&gg, &f, LinkMode::Strict), Err(GeoError::NotGood)));
    }
    let odd = FlowSet::pairwise(64, &[(0, 1)]).unwrap();
    assert!(goodness_check(&gg, &odd).is_err());
}

#[test]
fn grid_tree_has_degree_at_most_five_and_round_trips_through_dot() {
    let (gg, _) = good_instance(512, 8.0, 2).expect("seed 2 is good");
    let tree = grid_spanning_tree(&gg).unwrap();
    assert!(tree.max_degree() <= 5);
    let colors = protocols::tree_edge_coloring(&tree, 0);
    let text = dot::export_tree_dot(&tree, Some(&colors));
    let (nodes, edges) = parse_back(&text);
    assert_eq!(nodes, (0..gg.n()).collect::<Vec<_>>());
    assert_eq!(edges.len(), gg.n() - 1);
    let parsed = Graph::from_edges(gg.n(), &edges.keys().copied().collect::<Vec<_>>()).unwrap();
    assert!(parsed.is_connected());
    for (e, label) in &edges {
        assert!(tree.has_edge(e.0, e.1));
        assert_eq!(label.as_deref().map(|l| l.parse::<usize>().unwrap()), Some(colors[e] + 1));
    }
    let pinned = dot::export_geometric_dot(&gg, Some(&tree));
    assert_eq!(parse_back(&pinned).1.len(), gg.graph.m());
}

#[test]
fn small_dot_examples_parse() {
    let (nodes, edges) = parse_back(&dot::export_dot(&Graph::path(2), None, None));
    assert_eq!(nodes, vec![0, 1]);
    assert_eq!(edges, BTreeMap::from([((0, 1), None)]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn edges_follow_distance(n in 2usize..60, r in 0.01f64..1.0, s in any::<u64>()) {
        let gg = generate_gk(n, r, s).unwrap();
        for u in 0..n {
            let (x, y) = gg.positions[u];
            prop_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
            for v in u + 1..n {
                prop_assert_eq!(gg.graph.has_edge(u, v), distance(gg.positions[u], gg.positions[v]) <= r);
            }
        }
        let again = generate_gk(n, r, s).unwrap();
        prop_assert_eq!(gg.positions, again.positions);
    }

    #[test]
    fn strict_splits_are_matchings(n in 4usize..40, s in any::<u64>()) {
        let gg = generate_gk(n, 0.5, s).unwrap();
        let mut rng = seed::rng(s);
        let slots: Vec<_> = gg.graph.edges().into_iter().filter(|_| rand::Rng::gen_bool(&mut rng, 0.3))
            .map(|(u, v)| capacity::Slot::new(u, v, 0)).collect();
        let mut duplex = Vec::new();
        let (mut out, mut inc) = (vec![false; n], vec![false; n]);
        for sl in slots {
            if !out[sl.from] && !inc[sl.to] {
                out[sl.from] = true;
                inc[sl.to] = true;
                duplex.push(sl);
            }
        }
        let parts = split_into_matchings(&duplex);
        prop_assert!(parts.len() <= 3);
        prop_assert_eq!(parts.iter().map(Vec::len).sum::<usize>(), duplex.len());
        for p in parts {
            let mut used = vec![false; n];
            for sl in p {
                prop_assert!(!used[sl.from] && !used[sl.to]);
                used[sl.from] = true;
                used[sl.to] = true;
            }
        }
    }
}
