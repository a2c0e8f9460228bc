//! Undirected simple graphs, spanning trees and degree-bounded trees.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use num::rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("node {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("graph is not connected")]
    NotConnected,
    #[error("edge {0}-{1} is not in the graph")]
    MissingEdge(NodeId, NodeId),
    #[error("edge set is not a spanning tree: {0}")]
    NotATree(String),
    #[error("exhaustive search budget exceeded (n={n}, m={m})")]
    BudgetExceeded { n: usize, m: usize },
}

/// Simple undirected graph with sorted adjacency lists.
#[derive(Clone)]
pub struct Graph {
    adj: Vec<Vec<NodeId>>,
    m: usize,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n())
            .field("edges", &self.edges())
            .finish()
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.adj == other.adj
    }
}

impl Eq for Graph {}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[NodeId; 2]>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph { adj: vec![Vec::new(); n], m: 0 }
    }

    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self, GraphError> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::NodeOutOfRange { node: w, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for (u, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                let v = w[0];
                return Err(GraphError::DuplicateEdge(u.min(v), u.max(v)));
            }
        }
        Ok(Graph { adj, m: edges.len() })
    }

    /// Builds from an adjacency relation that is already symmetric and loop-free.
    /// Used by generators that produce edges in bulk.
    pub(crate) fn from_sorted_adjacency(adj: Vec<Vec<NodeId>>) -> Self {
        let m = adj.iter().map(Vec::len).sum::<usize>() / 2;
        debug_assert!(adj.iter().all(|l| l.windows(2).all(|w| w[0] < w[1])));
        Graph { adj, m }
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_edges(n, &edges).expect("path edges are valid")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 nodes");
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        edges.push((n - 1, 0));
        Graph::from_edges(n, &edges).expect("cycle edges are valid")
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Graph::from_edges(n, &edges).expect("complete graph edges are valid")
    }

    /// Star with center 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        Graph::spider(&vec![1; leaves])
    }

    /// Spider with center 0 and one leg per entry of `legs`, each entry the leg length.
    pub fn spider(legs: &[usize]) -> Self {
        let n = 1 + legs.iter().sum::<usize>();
        let mut edges = Vec::with_capacity(n.saturating_sub(1));
        let mut next = 1;
        for &len in legs {
            let mut prev = 0;
            for _ in 0..len {
                edges.push((prev, next));
                prev = next;
                next += 1;
            }
        }
        Graph::from_edges(n, &edges).expect("spider edges are valid")
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u < self.n() && self.adj[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.m);
        for (u, list) in self.adj.iter().enumerate() {
            for &v in list {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn bfs_distances(&self, source: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for &v in &self.adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.n() <= 1 || self.bfs_distances(0).iter().all(Option::is_some)
    }

    /// Hop diameter, or `None` if disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for s in 0..self.n() {
            for d in self.bfs_distances(s) {
                best = best.max(d?);
            }
        }
        Some(best)
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            n: self.n(),
            edges: self.edges().into_iter().map(|(u, v)| [u, v]).collect(),
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self, GraphError> {
        let edges: Vec<_> = json.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::from_edges(json.n, &edges)
    }

    pub fn induced_without(&self, removed: &[bool]) -> Components {
        components(self, removed)
    }
}

/// Connected components of `G` minus the removed set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    /// Component index per node; `None` for removed nodes.
    pub label: Vec<Option<usize>>,
    /// Members of each component, each sorted, ordered by smallest member.
    pub parts: Vec<Vec<NodeId>>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.parts.len()
    }
}

pub fn components(g: &Graph, removed: &[bool]) -> Components {
    let n = g.n();
    let mut label = vec![None; n];
    let mut parts = Vec::new();
    for s in 0..n {
        if removed.get(s).copied().unwrap_or(false) || label[s].is_some() {
            continue;
        }
        let id = parts.len();
        let mut members = vec![s];
        label[s] = Some(id);
        let mut i = 0;
        while i < members.len() {
            let u = members[i];
            i += 1;
            for &v in g.neighbors(u) {
                if label[v].is_none() && !removed.get(v).copied().unwrap_or(false) {
                    label[v] = Some(id);
                    members.push(v);
                }
            }
        }
        members.sort_unstable();
        parts.push(members);
    }
    Components { label, parts }
}

/// Spanning tree of a host graph, stored as adjacency sets.
#[derive(Clone, PartialEq, Eq)]
pub struct SpanningTree {
    adj: Vec<BTreeSet<NodeId>>,
}

impl fmt::Debug for SpanningTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpanningTree").field("edges", &self.edges()).finish()
    }
}

impl SpanningTree {
    pub fn from_edges(g: &Graph, edges: &[(NodeId, NodeId)]) -> Result<Self, GraphError> {
        let n = g.n();
        if edges.len() + 1 != n.max(1) {
            return Err(GraphError::NotATree(format!(
                "{} edges for {} nodes",
                edges.len(),
                n
            )));
        }
        let mut adj = vec![BTreeSet::new(); n];
        for &(u, v) in edges {
            if !g.has_edge(u, v) {
                return Err(GraphError::MissingEdge(u, v));
            }
            if !adj[u].insert(v) {
                return Err(GraphError::DuplicateEdge(u.min(v), u.max(v)));
            }
            adj[v].insert(u);
        }
        let tree = SpanningTree { adj };
        if !tree.as_graph().is_connected() {
            return Err(GraphError::NotATree("edges do not connect all nodes".into()));
        }
        Ok(tree)
    }

    /// The graph itself, which must be a tree.
    pub fn of_tree(g: &Graph) -> Result<Self, GraphError> {
        SpanningTree::from_edges(g, &g.edges())
    }

    pub fn bfs(g: &Graph, root: NodeId) -> Result<Self, GraphError> {
        if !g.is_connected() {
            return Err(GraphError::NotConnected);
        }
        let n = g.n();
        let mut adj = vec![BTreeSet::new(); n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([root]);
        if n > 0 {
            seen[root] = true;
        }
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    adj[u].insert(v);
                    adj[v].insert(u);
                    queue.push_back(v);
                }
            }
        }
        Ok(SpanningTree { adj })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).max().unwrap_or(0)
    }

    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj[v].iter().copied()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adj[u].contains(&v)
    }

    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for (u, set) in self.adj.iter().enumerate() {
            out.extend(set.range(u + 1..).map(|&v| (u, v)));
        }
        out
    }

    pub fn as_graph(&self) -> Graph {
        Graph::from_sorted_adjacency(
            self.adj.iter().map(|s| s.iter().copied().collect()).collect(),
        )
    }

    pub fn diameter(&self) -> usize {
        self.as_graph().diameter().unwrap_or(0)
    }

    /// Parent pointers for the tree rooted at `root`, plus BFS order.
    pub fn rooted(&self, root: NodeId) -> (Vec<Option<NodeId>>, Vec<NodeId>) {
        let mut parent = vec![None; self.n()];
        let mut order = vec![root];
        let mut seen = vec![false; self.n()];
        seen[root] = true;
        let mut i = 0;
        while i < order.len() {
            let u = order[i];
            i += 1;
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(u);
                    order.push(v);
                }
            }
        }
        (parent, order)
    }

    /// Nodes on the unique tree path from `u` to `v`, inclusive.
    pub fn path(&self, u: NodeId, v: NodeId) -> Vec<NodeId> {
        let n = self.n();
        let mut prev = vec![usize::MAX; n];
        prev[u] = u;
        let mut queue = VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            if x == v {
                break;
            }
            for &y in &self.adj[x] {
                if prev[y] == usize::MAX {
                    prev[y] = x;
                    queue.push_back(y);
                }
            }
        }
        let mut out = vec![v];
        let mut x = v;
        while x != u {
            x = prev[x];
            out.push(x);
        }
        out.reverse();
        out
    }

    fn add(&mut self, u: NodeId, v: NodeId) {
        self.adj[u].insert(v);
        self.adj[v].insert(u);
    }

    fn remove(&mut self, u: NodeId, v: NodeId) {
        self.adj[u].remove(&v);
        self.adj[v].remove(&u);
    }
}

const ORACLE_MAX_N: usize = 10;
const ORACLE_MAX_M: usize = 25;

/// Exact minimum-max-degree spanning tree by exhaustive search.
///
/// Budgeted to `n <= 10, m <= 25`; a graph that is itself a tree is always accepted.
pub fn mdst_oracle(g: &Graph) -> Result<(usize, SpanningTree), GraphError> {
    if !g.is_connected() {
        return Err(GraphError::NotConnected);
    }
    if g.m() + 1 == g.n() || g.n() <= 1 {
        let t = SpanningTree::of_tree(g)?;
        return Ok((t.max_degree(), t));
    }
    if g.n() > ORACLE_MAX_N || g.m() > ORACLE_MAX_M {
        return Err(GraphError::BudgetExceeded { n: g.n(), m: g.m() });
    }
    let edges = g.edges();
    let lower = if g.n() == 2 { 1 } else { 2 };
    for k in lower..g.n() {
        let mut search = TreeSearch::new(g.n(), &edges, k);
        if search.run(0) {
            let t = SpanningTree::from_edges(g, &search.chosen_edges())?;
            return Ok((k, t));
        }
    }
    unreachable!("a connected graph has a spanning tree of degree < n")
}

struct TreeSearch<'a> {
    n: usize,
    edges: &'a [(NodeId, NodeId)],
    cap: usize,
    state: Vec<i8>, // 1 chosen, -1 excluded, 0 undecided
    degree: Vec<usize>,
    chosen: usize,
}

impl<'a> TreeSearch<'a> {
    fn new(n: usize, edges: &'a [(NodeId, NodeId)], cap: usize) -> Self {
        TreeSearch { n, edges, cap, state: vec![0; edges.len()], degree: vec![0; n], chosen: 0 }
    }

    fn chosen_edges(&self) -> Vec<(NodeId, NodeId)> {
        self.edges
            .iter()
            .zip(&self.state)
            .filter(|(_, &s)| s == 1)
            .map(|(&e, _)| e)
            .collect()
    }

    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    // Union-find over chosen edges, and a connectivity check over chosen + undecided.
    fn feasible(&self) -> (bool, Vec<usize>) {
        let mut chosen_uf: Vec<usize> = (0..self.n).collect();
        let mut all_uf: Vec<usize> = (0..self.n).collect();
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if self.state[i] >= 0 {
                let (a, b) = (Self::root(&mut all_uf, u), Self::root(&mut all_uf, v));
                all_uf[a] = b;
            }
            if self.state[i] == 1 {
                let (a, b) = (Self::root(&mut chosen_uf, u), Self::root(&mut chosen_uf, v));
                chosen_uf[a] = b;
            }
        }
        let r0 = Self::root(&mut all_uf, 0);
        let ok = (1..self.n).all(|v| Self::root(&mut all_uf, v) == r0);
        (ok, chosen_uf)
    }

    fn run(&mut self, idx: usize) -> bool {
        if self.chosen + 1 == self.n {
            return true;
        }
        if idx == self.edges.len() {
            return false;
        }
        let (ok, mut uf) = self.feasible();
        if !ok {
            return false;
        }
        let (u, v) = self.edges[idx];
        let can_take = self.degree[u] < self.cap
            && self.degree[v] < self.cap
            && Self::root(&mut uf, u) != Self::root(&mut uf, v);
        if can_take {
            self.state[idx] = 1;
            self.degree[u] += 1;
            self.degree[v] += 1;
            self.chosen += 1;
            if self.run(idx + 1) {
                return true;
            }
            self.chosen -= 1;
            self.degree[u] -= 1;
            self.degree[v] -= 1;
        }
        self.state[idx] = -1;
        if self.run(idx + 1) {
            return true;
        }
        self.state[idx] = 0;
        false
    }
}

/// Fürer–Raghavachari local search. The result has max degree at most the optimum plus one.
pub fn mdst_local_search(g: &Graph) -> Result<SpanningTree, GraphError> {
    let mut tree = SpanningTree::bfs(g, 0)?;
    let edges = g.edges();
    while improve_once(g, &edges, &mut tree) {}
    Ok(tree)
}

fn improve_once(g: &Graph, edges: &[(NodeId, NodeId)], tree: &mut SpanningTree) -> bool {
    let n = g.n();
    let k = tree.max_degree();
    if k <= 2 {
        return false;
    }
    let mut bad: Vec<bool> = (0..n).map(|v| tree.degree(v) + 1 >= k).collect();
    let mut unmarked_by: Vec<Option<(NodeId, NodeId)>> = vec![None; n];

    loop {
        let comp = forest_components(tree, &bad);
        let mut progressed = false;
        for &(u, v) in edges {
            if bad[u] || bad[v] || comp[u] == comp[v] || tree.has_edge(u, v) {
                continue;
            }
            let path = tree.path(u, v);
            if let Some(&w) = path.iter().find(|&&w| bad[w] && tree.degree(w) == k) {
                swap_at(tree, w, (u, v), k, &unmarked_by);
                return true;
            }
            for &w in &path {
                if bad[w] {
                    bad[w] = false;
                    unmarked_by[w] = Some((u, v));
                }
            }
            progressed = true;
            break;
        }
        if !progressed {
            return false;
        }
    }
}

// Adds (u, v), drops a cycle edge at w, then repairs any endpoint that was pushed to degree k
// by recursing through the edge that originally unblocked it.
fn swap_at(
    tree: &mut SpanningTree,
    w: NodeId,
    (u, v): (NodeId, NodeId),
    k: usize,
    unmarked_by: &[Option<(NodeId, NodeId)>],
) {
    let path = tree.path(u, v);
    let pos = path.iter().position(|&x| x == w).expect("w lies on the cycle");
    let mut around: Vec<NodeId> = Vec::new();
    if pos > 0 {
        around.push(path[pos - 1]);
    }
    if pos + 1 < path.len() {
        around.push(path[pos + 1]);
    }
    let drop = *around.iter().min().expect("cycle has an edge at w");
    tree.remove(w, drop);
    tree.add(u, v);
    for x in [u, v] {
        if tree.degree(x) >= k {
            let via = unmarked_by[x].expect("a degree k-1 endpoint was unmarked earlier");
            swap_at(tree, x, via, k, unmarked_by);
        }
    }
}

fn forest_components(tree: &SpanningTree, bad: &[bool]) -> Vec<usize> {
    let n = tree.n();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if bad[s] || comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for y in tree.neighbors(x) {
                if !bad[y] && comp[y] == usize::MAX {
                    comp[y] = next;
                    stack.push(y);
                }
            }
        }
        next += 1;
    }
    comp
}

pub const TOUGHNESS_MAX_N: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Toughness {
    Finite(Ratio<u64>),
    /// Complete graphs: no vertex cut exists.
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToughnessReport {
    pub toughness: Toughness,
    /// Minimizing cut set, smallest first, then lexicographically least.
    pub witness: Option<Vec<NodeId>>,
    pub components: usize,
}

fn component_count_mask(g: &Graph, removed: u32) -> usize {
    let n = g.n();
    let mut seen = removed;
    let mut count = 0;
    for s in 0..n {
        if seen >> s & 1 == 1 {
            continue;
        }
        count += 1;
        seen |= 1 << s;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &v in g.neighbors(u) {
                if seen >> v & 1 == 0 {
                    seen |= 1 << v;
                    stack.push(v);
                }
            }
        }
    }
    count
}

// Subsets of 0..n ordered by size, then lexicographically by sorted member list.
fn subsets_by_size(n: usize) -> impl Iterator<Item = Vec<NodeId>> {
    (1..=n).flat_map(move |size| Combinations::new(n, size))
}

struct Combinations {
    n: usize,
    cur: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations { n, cur: if k <= n { Some((0..k).collect()) } else { None } }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.cur.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.cur = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.cur = Some(next);
                break;
            }
        }
        Some(out)
    }
}

fn mask_of(set: &[NodeId]) -> u32 {
    set.iter().fold(0, |m, &v| m | 1 << v)
}

pub fn toughness(g: &Graph) -> Result<ToughnessReport, GraphError> {
    let n = g.n();
    if n > TOUGHNESS_MAX_N {
        return Err(GraphError::BudgetExceeded { n, m: g.m() });
    }
    let mut best: Option<(Ratio<u64>, Vec<NodeId>, usize)> = None;
    for set in subsets_by_size(n) {
        let c = component_count_mask(g, mask_of(&set));
        if c < 2 {
            continue;
        }
        let ratio = Ratio::new(set.len() as u64, c as u64);
        if best.as_ref().map_or(true, |(b, _, _)| ratio < *b) {
            best = Some((ratio, set, c));
        }
    }
    Ok(match best {
        Some((t, witness, components)) => ToughnessReport {
            toughness: Toughness::Finite(t),
            witness: Some(witness),
            components,
        },
        None => ToughnessReport { toughness: Toughness::Infinite, witness: None, components: 1 },
    })
}

/// A set `S` whose removal leaves more than `(k - 2)|S|` components, if one exists.
pub fn partition_witness(g: &Graph, k: usize) -> Result<Option<Vec<NodeId>>, GraphError> {
    let n = g.n();
    if n > TOUGHNESS_MAX_N {
        return Err(GraphError::BudgetExceeded { n, m: g.m() });
    }
    let factor = k.saturating_sub(2);
    for set in subsets_by_size(n) {
        let c = component_count_mask(g, mask_of(&set));
        if c > factor * set.len() {
            return Ok(Some(set));
        }
    }
    Ok(None)
}

/// Minimum spanning-tree max degree, exact when the oracle budget allows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeDegree {
    Exact(usize),
    /// The optimum lies in `[lo, hi]`, from the local-search guarantee.
    Interval { lo: usize, hi: usize },
}

pub fn min_tree_degree(g: &Graph) -> Result<TreeDegree, GraphError> {
    match mdst_oracle(g) {
        Ok((d, _)) => Ok(TreeDegree::Exact(d)),
        Err(GraphError::BudgetExceeded { .. }) => {
            let d = mdst_local_search(g)?.max_degree();
            Ok(TreeDegree::Interval { lo: d.saturating_sub(1).max(1), hi: d })
        }
        Err(e) => Err(e),
    }
}

/// A throughput upper bound, exact or bracketed when d(G) is only known approximately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpperBound {
    Exact(Ratio<u64>),
    Approximate { lo: Ratio<u64>, hi: Ratio<u64> },
}

impl UpperBound {
    /// The largest value the bound allows.
    pub fn ceiling(&self) -> Ratio<u64> {
        match *self {
            UpperBound::Exact(b) => b,
            UpperBound::Approximate { hi, .. } => hi,
        }
    }
}

fn broadcast_bound_for(d: usize) -> Ratio<u64> {
    if d > 4 {
        Ratio::new(1, d as u64 - 3)
    } else {
        Ratio::from_integer(1)
    }
}

fn all_to_all_bound_for(n: usize, d: usize) -> Ratio<u64> {
    let trivial = Ratio::new(1, n as u64);
    if d > 4 {
        trivial.min(Ratio::new(2, (n * (d - 3)) as u64))
    } else {
        trivial
    }
}

fn bound_from(g: &Graph, f: impl Fn(usize) -> Ratio<u64>) -> Result<UpperBound, GraphError> {
    Ok(match min_tree_degree(g)? {
        TreeDegree::Exact(d) => UpperBound::Exact(f(d)),
        TreeDegree::Interval { lo, hi } => UpperBound::Approximate { lo: f(hi), hi: f(lo) },
    })
}

/// 1/(d(G) - 3) when d(G) > 4, else 1.
pub fn broadcast_upper_bound(g: &Graph) -> Result<UpperBound, GraphError> {
    bound_from(g, broadcast_bound_for)
}

/// min(1/n, 2/(n (d(G) - 3))) when d(G) > 4, else 1/n.
pub fn all_to_all_upper_bound(g: &Graph) -> Result<UpperBound, GraphError> {
    let n = g.n();
    bound_from(g, |d| all_to_all_bound_for(n, d))
}
