#![allow(dead_code)]

use std::collections::BTreeSet;

use mtmcap_core::graphs::{Graph, NodeId};
use rand::seq::SliceRandom;
use rand::Rng;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn pair_list(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect()
}

/// One representative of every isomorphism class of connected graphs on `n` nodes.
pub fn connected_graphs(n: usize) -> Vec<Graph> {
    let pairs = pair_list(n);
    let index = |u: usize, v: usize| pairs.iter().position(|&e| e == (u.min(v), u.max(v))).unwrap();
    let perms = permutations(n);
    let images: Vec<Vec<usize>> = perms
        .iter()
        .map(|p| pairs.iter().map(|&(u, v)| index(p[u], p[v])).collect())
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u32..1 << pairs.len() {
        let canon = images
            .iter()
            .map(|img| (0..pairs.len()).filter(|&i| mask >> i & 1 == 1).fold(0u32, |m, i| m | 1 << img[i]))
            .min()
            .unwrap();
        if !seen.insert(canon) {
            continue;
        }
        let edges: Vec<_> = (0..pairs.len()).filter(|&i| mask >> i & 1 == 1).map(|i| pairs[i]).collect();
        let g = Graph::from_edges(n, &edges).unwrap();
        if g.is_connected() {
            out.push(g);
        }
    }
    out
}

/// G(n, p) plus a random spanning tree, so the result is always connected.
pub fn random_connected_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let (u, v) = (order[i], order[j]);
        edges.insert((u.min(v), u.max(v)));
    }
    for (u, v) in pair_list(n) {
        if rng.gen_bool(p) {
            edges.insert((u, v));
        }
    }
    Graph::from_edges(n, &edges.into_iter().collect::<Vec<_>>()).unwrap()
}

pub fn random_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> Graph {
    let edges: Vec<_> = pair_list(n).into_iter().filter(|_| rng.gen_bool(p)).collect();
    Graph::from_edges(n, &edges).unwrap()
}
