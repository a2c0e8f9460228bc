//! Exact small-instance optimum for the concurrent flow, used as ground truth for the solver.

use std::collections::BTreeMap;

use mtmcap_core::capacity::FlowSet;
use mtmcap_core::flow::{self, Capacity, FlowPath, McmfFlow, McmfInstance, Q};
use mtmcap_core::graphs::Graph;
use mtmcap_core::seed;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn big(q: &Q) -> BigRational {
    BigRational::new(BigInt::from(*q.numer()), BigInt::from(*q.denom()))
}

fn simple_paths(g: &Graph, s: usize, t: usize) -> Vec<Vec<usize>> {
    fn go(g: &Graph, t: usize, path: &mut Vec<usize>, on: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        if v == t {
            out.push(path.clone());
            return;
        }
        for &w in g.neighbors(v) {
            if !on[w] {
                on[w] = true;
                path.push(w);
                go(g, t, path, on, out);
                path.pop();
                on[w] = false;
            }
        }
    }
    let mut on = vec![false; g.n()];
    on[s] = true;
    let mut out = Vec::new();
    go(g, t, &mut vec![s], &mut on, &mut out);
    out
}

/// Maximizes `c x` subject to `A x <= b`, `x >= 0`, with `b >= 0`. Bland's rule, exact.
fn simplex_max(a: &[Vec<BigRational>], b: &[BigRational], c: &[BigRational]) -> BigRational {
    let (rows, cols) = (a.len(), c.len());
    let width = cols + rows + 1;
    let mut t: Vec<Vec<BigRational>> = (0..rows)
        .map(|i| {
            let mut row = a[i].clone();
            row.extend((0..rows).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            row.push(b[i].clone());
            row
        })
        .collect();
    let mut obj: Vec<BigRational> = c.iter().map(|x| -x).collect();
    obj.extend(std::iter::repeat_n(BigRational::zero(), rows + 1));
    let mut basis: Vec<usize> = (cols..cols + rows).collect();
    loop {
        let Some(enter) = (0..width - 1).find(|&j| obj[j].is_negative()) else {
            return obj[width - 1].clone();
        };
        let mut leave: Option<(usize, BigRational)> = None;
        for i in 0..rows {
            if t[i][enter].is_positive() {
                let ratio = &t[i][width - 1] / &t[i][enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (r, _) = leave.expect("bounded program");
        let p = t[r][enter].clone();
        for x in t[r].iter_mut() {
            *x = &*x / &p;
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && !row[enter].is_zero() {
                let f = row[enter].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x = &*x - &f * y;
                }
            }
        }
        let f = obj[enter].clone();
        for (x, y) in obj.iter_mut().zip(&pivot_row) {
            *x = &*x - &f * y;
        }
        basis[r] = enter;
    }
}

/// Optimal concurrent value of `D_tau` via the path formulation over node capacities.
fn exact_optimum(g: &Graph, inst: &McmfInstance) -> BigRational {
    let k = inst.k();
    let n = g.n();
    let mut columns: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, &(s, t)) in inst.commodities.iter().enumerate() {
        for p in simple_paths(g, s / 2, t / 2) {
            columns.push((i, p));
        }
    }
    // Variables: lambda, then one per path.
    let cols = 1 + columns.len();
    let mut a = vec![vec![BigRational::zero(); cols]; k + n];
    let mut b = vec![BigRational::zero(); k + n];
    for i in 0..k {
        a[i][0] = BigRational::one();
    }
    for (j, (i, p)) in columns.iter().enumerate() {
        a[*i][1 + j] = -BigRational::one();
        for &v in p {
            a[k + v][1 + j] = BigRational::one();
        }
    }
    for v in 0..n {
        b[k + v] = match &inst.arcs[v].cap {
            Capacity::Finite(c) => big(c),
            Capacity::Unbounded => unreachable!("internal arcs are finite"),
        };
    }
    let mut c = vec![BigRational::zero(); cols];
    c[0] = BigRational::one();
    simplex_max(&a, &b, &c)
}

fn random_instance(seed: u64) -> (Graph, FlowSet, Q) {
    let mut rng = seed::sub_rng(seed, "flow-oracle", 0);
    loop {
        let n = rng.gen_range(3..=8);
        let p = rng.gen_range(0.3..0.8);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::from_edges(n, &edges).unwrap();
        if !g.is_connected() {
            continue;
        }
        let mut nodes: Vec<usize> = (0..n).collect();
        nodes.shuffle(&mut rng);
        let k = rng.gen_range(1..=(n / 2).min(3));
        let pairs: Vec<_> = nodes.chunks_exact(2).take(k).map(|c| (c[0], c[1])).collect();
        let f = FlowSet::pairwise(n, &pairs).unwrap();
        let tau = Q::new(rng.gen_range(0..=4), 2);
        return (g, f, tau);
    }
}

#[test]
fn simplex_solves_a_textbook_program() {
    // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 has optimum 36.
    let r = |x: i64| BigRational::from_integer(BigInt::from(x));
    let a = vec![vec![r(1), r(0)], vec![r(0), r(2)], vec![r(3), r(2)]];
    assert_eq!(simplex_max(&a, &[r(4), r(12), r(18)], &[r(3), r(5)]), r(36));
}

#[test]
fn oracle_matches_hand_values() {
    let (g, f) = flow::six_vertex_instance();
    let inst = flow::build_flow_instance(&g, &f, Q::one()).unwrap();
    assert_eq!(exact_optimum(&g, &inst), BigRational::new(3.into(), 4.into()));
    let mut fixture = inst.clone();
    for v in 0..6 {
        fixture = fixture.with_internal_capacity(v, Q::from(2));
    }
    assert_eq!(exact_optimum(&g, &fixture), BigRational::one());
}

#[test]
fn solver_is_within_eps_of_the_exact_optimum() {
    let eps = 0.1;
    for trial in 0..40 {
        let (g, f, tau) = random_instance(trial);
        let inst = flow::build_flow_instance(&g, &f, tau).unwrap();
        let opt = exact_optimum(&g, &inst);
        let sol = flow::approx_concurrent_flow(&inst, eps).unwrap();
        flow::check_flow(&inst, &sol).unwrap();
        let v = big(&sol.value(&inst));
        assert!(v <= opt, "trial {trial}: solver {v} beats optimum {opt}");
        let opt_f = opt.to_f64().unwrap();
        assert!(v.to_f64().unwrap() * (1.0 + eps) >= opt_f, "trial {trial}: {v} vs {opt}");
        assert!(sol.upper_bound.unwrap() >= opt_f * (1.0 - 1e-9), "trial {trial}: dual below optimum");
    }
}

fn arb_flow() -> impl Strategy<Value = (Graph, FlowSet, McmfFlow)> {
    (any::<u64>(), proptest::collection::vec((1i128..20, 0usize..64), 1..6)).prop_map(|(seed, specs)| {
        let (g, f, _) = random_instance(seed);
        let inst = flow::build_flow_instance(&g, &f, Q::from(1)).unwrap();
        let mut paths = vec![Vec::new(); inst.k()];
        for (num, pick) in specs {
            let i = pick % inst.k();
            let (s, t) = inst.commodities[i];
            let options = simple_paths(&g, s / 2, t / 2);
            let nodes = &options[pick % options.len()];
            let mut arcs = Vec::new();
            for w in nodes.windows(2) {
                arcs.push(w[0]);
                arcs.push((0..inst.m()).find(|&a| inst.hop(a) == Some((w[0], w[1]))).unwrap());
            }
            arcs.push(*nodes.last().unwrap());
            paths[i].push(FlowPath { arcs, value: Q::new(num, 20) });
        }
        let mut fl = McmfFlow::from_paths(paths);
        fl.paths = None;
        (g, f, fl)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_reconstructs_the_flow((g, f, fl) in arb_flow()) {
        let inst = flow::build_flow_instance(&g, &f, Q::from(1)).unwrap();
        let d = flow::path_decompose(&inst, &fl).unwrap();
        let paths = d.paths.as_ref().unwrap();
        for i in 0..inst.k() {
            prop_assert!(paths[i].len() <= inst.m());
            prop_assert_eq!(d.commodity_value(&inst, i), fl.commodity_value(&inst, i));
            // Only cycles may be dropped, so no arc gains flow.
            for (a, x) in &d.per_commodity[i] {
                prop_assert!(x <= fl.per_commodity[i].get(a).unwrap_or(&Q::zero()));
            }
        }
        let rebuilt = McmfFlow::from_paths(paths.clone());
        prop_assert_eq!(&rebuilt.per_commodity, &d.per_commodity);
    }

    #[test]
    fn multicoloring_respects_the_shannon_bound(seed in any::<u64>(), dense in 0.2f64..0.9) {
        let mut rng = seed::rng(seed);
        let n = rng.gen_range(2..=9);
        let mut r = BTreeMap::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(dense) {
                    r.insert((u, v), rng.gen_range(0..=5u64));
                }
            }
        }
        let c = flow::shannon_multicolor(n, &r);
        prop_assert!(c.is_valid());
        prop_assert!(c.color_count as u64 <= 3 * flow::weighted_degree(n, &r) / 2);
    }
}
