//! Random geometric (Gupta–Kumar) networks, the r-grid, goodness, grid routing and the
//! degree-5 grid spanning tree.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{FlowSet, LinkMode, Schedule, Slot};
use crate::graphs::{Graph, GraphError, NodeId, SpanningTree};
use crate::seed;

/// Default for the threshold constant; see the README for why it differs from 1/32.
pub const DEFAULT_ALPHA: f64 = 0.6;

/// Capacity of a core node pipeline in packets.
pub const CORE_LOAD: usize = 16;
/// Rounds used to move non-core packets onto core nodes.
pub const HANDOFF_ROUNDS: usize = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("radius {0} outside (0, 1]")]
    InvalidRadius(f64),
    #[error("need at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("flow set must pair every node exactly once")]
    NotPerfectPairing,
    #[error("instance is not good")]
    NotGood,
    #[error("grid size {0} is below 3")]
    GridTooSmall(usize),
    #[error("box ({0}, {1}) is empty")]
    EmptyBox(usize, usize),
    #[error("core node {node} would hold {load} packets")]
    LoadExceeded { node: NodeId, load: usize },
    #[error("router left {0} packets undelivered")]
    Undelivered(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricGraph {
    pub graph: Graph,
    pub positions: Vec<(f64, f64)>,
    pub radius: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometricGraphJson {
    pub n: usize,
    pub edges: Vec<[NodeId; 2]>,
    pub positions: Vec<[f64; 2]>,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GeometricGraph {
    pub fn to_json(&self) -> GeometricGraphJson {
        let base = self.graph.to_json();
        GeometricGraphJson {
            n: base.n,
            edges: base.edges,
            positions: self.positions.iter().map(|&(x, y)| [x, y]).collect(),
            radius: self.radius,
            seed: Some(self.seed),
        }
    }

    /// Rebuilds the edge set from positions and checks it against the listed edges.
    pub fn from_json(json: &GeometricGraphJson) -> Result<Self, GeoError> {
        if json.positions.len() != json.n {
            return Err(GeoError::TooFewNodes(json.positions.len()));
        }
        let positions: Vec<_> = json.positions.iter().map(|p| (p[0], p[1])).collect();
        let graph = unit_disk_graph(&positions, json.radius);
        let listed = Graph::from_json(&crate::graphs::GraphJson {
            n: json.n,
            edges: json.edges.clone(),
        })?;
        if listed != graph {
            return Err(GeoError::Graph(GraphError::NotATree(
                "edge list disagrees with positions and radius".into(),
            )));
        }
        Ok(GeometricGraph { graph, positions, radius: json.radius, seed: json.seed.unwrap_or(0) })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }
}

pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn sample_positions(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = seed::sub_rng(seed, "gk-positions", n as u64);
    (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect()
}

/// Edges between every pair at distance at most `radius`.
pub fn unit_disk_graph(positions: &[(f64, f64)], radius: f64) -> Graph {
    let n = positions.len();
    let mut adj = vec![Vec::new(); n];
    for u in 0..n {
        for v in u + 1..n {
            if distance(positions[u], positions[v]) <= radius {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    Graph::from_sorted_adjacency(adj)
}

pub fn generate_gk(n: usize, radius: f64, seed: u64) -> Result<GeometricGraph, GeoError> {
    if !(radius > 0.0 && radius <= 1.0) {
        return Err(GeoError::InvalidRadius(radius));
    }
    if n < 2 {
        return Err(GeoError::TooFewNodes(n));
    }
    let positions = sample_positions(n, seed);
    let graph = unit_disk_graph(&positions, radius);
    Ok(GeometricGraph { graph, positions, radius, seed })
}

/// sqrt(alpha * log2(n) / n).
pub fn connectivity_threshold(n: usize, alpha: f64) -> f64 {
    (alpha * (n as f64).log2() / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub multiplier: f64,
    pub trials: usize,
    pub disconnected_fraction: f64,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn has_disconnected_pair(positions: &[(f64, f64)], radius: f64, f: &FlowSet) -> bool {
    let n = positions.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for u in 0..n {
        for v in u + 1..n {
            if distance(positions[u], positions[v]) <= radius {
                let (a, b) = (find(&mut parent, u), find(&mut parent, v));
                parent[a] = b;
            }
        }
    }
    f.pairs()
        .unwrap_or_default()
        .into_iter()
        .any(|(s, t)| find(&mut parent, s) != find(&mut parent, t))
}

/// Fraction of trials where a random pair is disconnected, per radius multiplier.
///
/// Trial `t` uses the same positions and pairing at every multiplier, so each row is
/// computed on a coupled sample and the curve is monotone by construction.
pub fn threshold_experiment(
    n: usize,
    multipliers: &[f64],
    trials: usize,
    alpha: f64,
    seed: u64,
) -> Vec<ThresholdRow> {
    let rc = connectivity_threshold(n, alpha);
    let outcomes: Vec<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = seed::derive_seed(seed, "threshold", t as u64);
            let positions = sample_positions(n, trial_seed);
            let f = FlowSet::random_pairwise(n, &mut seed::sub_rng(trial_seed, "pairs", 0));
            multipliers
                .iter()
                .map(|&m| has_disconnected_pair(&positions, m * rc, &f))
                .collect()
        })
        .collect();
    multipliers
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let bad = outcomes.iter().filter(|o| o[i]).count();
            ThresholdRow {
                multiplier: m,
                trials,
                disconnected_fraction: if trials == 0 { 0.0 } else { bad as f64 / trials as f64 },
            }
        })
        .collect()
}

/// Smallest k with sqrt(5)/k <= r, tolerant to rounding at exact boundaries.
pub fn grid_size(radius: f64) -> usize {
    let raw = 5f64.sqrt() / radius;
    let k = (raw - 1e-9 * raw.max(1.0)).ceil();
    (k as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RGrid {
    pub cell: f64,
    pub k: usize,
    /// `(row, col)` per node; row is the y index.
    pub box_of: Vec<(usize, usize)>,
    /// Members of box `(row, col)` at index `row * k + col`, ascending.
    pub members: Vec<Vec<NodeId>>,
}

impl RGrid {
    pub fn box_members(&self, row: usize, col: usize) -> &[NodeId] {
        &self.members[row * self.k + col]
    }
}

pub fn build_rgrid(gg: &GeometricGraph) -> RGrid {
    let k = grid_size(gg.radius);
    let index = |c: f64| ((c * k as f64).floor() as usize).min(k - 1);
    let box_of: Vec<_> = gg.positions.iter().map(|&(x, y)| (index(y), index(x))).collect();
    let mut members = vec![Vec::new(); k * k];
    for (v, &(r, c)) in box_of.iter().enumerate() {
        members[r * k + c].push(v);
    }
    RGrid { cell: 1.0 / k as f64, k, box_of, members }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoodnessReport {
    pub k: usize,
    /// Node count per box, `x[row][col]`.
    pub x: Vec<Vec<usize>>,
    /// `y[i][j]` counts pairs with source in column j and destination in row i.
    pub y: Vec<Vec<usize>>,
    pub good: bool,
}

pub fn goodness_check(gg: &GeometricGraph, f: &FlowSet) -> Result<GoodnessReport, GeoError> {
    if !f.is_perfect_pairing() || f.n != gg.n() {
        return Err(GeoError::NotPerfectPairing);
    }
    let grid = build_rgrid(gg);
    let k = grid.k;
    let mut x = vec![vec![0; k]; k];
    for &(r, c) in &grid.box_of {
        x[r][c] += 1;
    }
    let mut y = vec![vec![0; k]; k];
    for (s, t) in f.pairs().unwrap() {
        y[grid.box_of[t].0][grid.box_of[s].1] += 1;
    }
    let n = gg.n();
    let k2 = k * k;
    let within = |c: usize| 4 * c * k2 >= n && c * k2 <= 4 * n;
    let good = x.iter().chain(&y).flatten().all(|&c| within(c));
    Ok(GoodnessReport { k, x, y, good })
}

#[derive(Debug, Clone)]
pub struct GridRoute {
    pub schedule: Schedule,
    pub k: usize,
    pub n_low: usize,
    /// Largest per-core count of packets bound for its own row, after any rebalancing.
    pub max_core_load: usize,
    /// Period of the native duplex schedule.
    pub duplex_period: usize,
}

struct Router<'a> {
    g: &'a Graph,
    grid: RGrid,
    n_low: usize,
    dst: Vec<NodeId>,
    at: Vec<NodeId>,
    done: Vec<bool>,
    is_core: Vec<bool>,
    rounds: Vec<Vec<Slot>>,
    max_load: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Up,
    Down,
    Left,
    Right,
}

impl<'a> Router<'a> {
    fn core(&self, row: usize, col: usize, label: usize) -> NodeId {
        self.grid.box_members(row, col)[label]
    }

    fn dst_box(&self, p: usize) -> (usize, usize) {
        self.grid.box_of[self.dst[p]]
    }

    /// Live packets held by each core node, sorted by commodity.
    fn core_loads(&self) -> Vec<Vec<usize>> {
        let mut loads = vec![Vec::new(); self.g.n()];
        for p in 0..self.dst.len() {
            if !self.done[p] && self.is_core[self.at[p]] {
                loads[self.at[p]].push(p);
            }
        }
        loads
    }

    /// Appends `len` rounds carrying `moves` as (round offset, packet, next node).
    fn emit_block(&mut self, len: usize, moves: Vec<(usize, usize, NodeId)>) -> Result<(), GeoError> {
        let base = self.rounds.len();
        self.rounds.resize_with(base + len, Vec::new);
        for (offset, p, to) in moves {
            assert!(offset < len, "move scheduled outside its block");
            let from = self.at[p];
            if !self.g.has_edge(from, to) {
                return Err(GeoError::Graph(GraphError::MissingEdge(from, to)));
            }
            self.rounds[base + offset].push(Slot::new(from, to, p).on_path(0));
            self.at[p] = to;
            if to == self.dst[p] {
                self.done[p] = true;
            }
        }
        Ok(())
    }

    fn handoff(&mut self) -> Result<(), GeoError> {
        let mut moves = Vec::new();
        for b in 0..self.grid.members.len() {
            let members = &self.grid.members[b];
            let (row, col) = (b / self.grid.k, b % self.grid.k);
            let mut q = 0;
            for &v in &members[self.n_low.min(members.len())..] {
                let Some(p) = (0..self.dst.len()).find(|&p| self.at[p] == v && !self.done[p]) else {
                    continue;
                };
                let round = q / self.n_low;
                if round >= HANDOFF_ROUNDS {
                    return Err(GeoError::NotGood);
                }
                moves.push((round, p, self.core(row, col, q % self.n_low)));
                q += 1;
            }
        }
        self.emit_block(HANDOFF_ROUNDS, moves)
    }

    fn wants(&self, p: usize, dir: Dir, row: usize, col: usize) -> bool {
        let (dr, dc) = self.dst_box(p);
        match dir {
            Dir::Up => dr < row,
            Dir::Down => dr > row,
            Dir::Left => dr == row && dc < col,
            Dir::Right => dr == row && dc > col,
        }
    }

    fn pipeline_group(&mut self, dir: Dir) -> Result<(), GeoError> {
        let loads = self.core_loads();
        let k = self.grid.k;
        let mut moves = Vec::new();
        for (v, held) in loads.iter().enumerate() {
            if held.is_empty() {
                continue;
            }
            let (row, col) = self.grid.box_of[v];
            let label = self.grid.box_members(row, col).iter().position(|&u| u == v).unwrap();
            let movers: Vec<usize> =
                held.iter().copied().filter(|&p| self.wants(p, dir, row, col)).collect();
            if movers.len() > CORE_LOAD {
                return Err(GeoError::LoadExceeded { node: v, load: movers.len() });
            }
            let (nr, nc) = match dir {
                Dir::Up => (row.wrapping_sub(1), col),
                Dir::Down => (row + 1, col),
                Dir::Left => (row, col.wrapping_sub(1)),
                Dir::Right => (row, col + 1),
            };
            if movers.is_empty() {
                continue;
            }
            debug_assert!(nr < k && nc < k);
            let next = self.core(nr, nc, label);
            moves.extend(movers.into_iter().enumerate().map(|(q, p)| (q, p, next)));
        }
        self.emit_block(CORE_LOAD, moves)
    }

    /// Spreads packets bound for their current row so that no core holds more than 16.
    fn rebalance(&mut self) -> Result<(), GeoError> {
        let loads = self.core_loads();
        let k = self.grid.k;
        let mut moves = Vec::new();
        for row in 0..k {
            for col in 0..k {
                let cores: Vec<NodeId> = self.grid.box_members(row, col)[..self.n_low].to_vec();
                let stationary: Vec<Vec<usize>> = cores
                    .iter()
                    .map(|&v| loads[v].iter().copied().filter(|&p| self.dst_box(p).0 == row).collect())
                    .collect();
                let mut excess = Vec::new();
                let mut room = Vec::new();
                for (c, list) in cores.iter().zip(&stationary) {
                    if list.len() > CORE_LOAD {
                        excess.extend_from_slice(&list[CORE_LOAD..]);
                    } else {
                        room.extend(std::iter::repeat(*c).take(CORE_LOAD - list.len()));
                    }
                }
                if excess.len() > room.len() {
                    let worst = cores.iter().zip(&stationary).max_by_key(|(_, l)| l.len()).unwrap();
                    return Err(GeoError::LoadExceeded { node: *worst.0, load: worst.1.len() });
                }
                // Donor and acceptor runs are contiguous and at most 16 long, so indexing
                // rounds by position mod 16 gives every node at most one link per round.
                moves.extend(excess.into_iter().zip(room).enumerate().map(|(q, (p, to))| (q % CORE_LOAD, p, to)));
            }
        }
        self.emit_block(CORE_LOAD, moves)?;
        let after = self.core_loads();
        for (v, held) in after.iter().enumerate() {
            if held.is_empty() {
                continue;
            }
            let row = self.grid.box_of[v].0;
            let load = held.iter().filter(|&&p| self.dst_box(p).0 == row).count();
            if load > CORE_LOAD {
                return Err(GeoError::LoadExceeded { node: v, load });
            }
            self.max_load = self.max_load.max(load);
        }
        Ok(())
    }

    fn deliver(&mut self) -> Result<(), GeoError> {
        let loads = self.core_loads();
        let mut moves = Vec::new();
        for (v, held) in loads.iter().enumerate() {
            let home: Vec<usize> =
                held.iter().copied().filter(|&p| self.dst_box(p) == self.grid.box_of[v]).collect();
            if home.len() > CORE_LOAD {
                return Err(GeoError::LoadExceeded { node: v, load: home.len() });
            }
            moves.extend(home.into_iter().enumerate().map(|(q, p)| (q, p, self.dst[p])));
        }
        self.emit_block(CORE_LOAD, moves)
    }
}

/// Periodic schedule delivering one packet per pair per period on a good instance.
///
/// Natively duplex. In strict mode each duplex round is split into matchings: two rounds,
/// or three when the round's links close an odd cycle.
pub fn grid_route_schedule(
    gg: &GeometricGraph,
    f: &FlowSet,
    mode: LinkMode,
) -> Result<GridRoute, GeoError> {
    let report = goodness_check(gg, f)?;
    if !report.good {
        return Err(GeoError::NotGood);
    }
    let grid = build_rgrid(gg);
    let k = grid.k;
    if k < 3 {
        return Err(GeoError::GridTooSmall(k));
    }
    let n = gg.n();
    let n_low = n.div_ceil(4 * k * k);
    if let Some(b) = grid.members.iter().position(|m| m.len() < n_low) {
        return Err(GeoError::EmptyBox(b / k, b % k));
    }
    let mut is_core = vec![false; n];
    for m in &grid.members {
        for &v in &m[..n_low] {
            is_core[v] = true;
        }
    }
    let pairs = f.pairs().unwrap();
    let mut router = Router {
        g: &gg.graph,
        grid,
        n_low,
        dst: pairs.iter().map(|p| p.1).collect(),
        at: pairs.iter().map(|p| p.0).collect(),
        done: vec![false; pairs.len()],
        is_core,
        rounds: Vec::new(),
        max_load: 0,
    };

    router.handoff()?;
    for dir in [Dir::Up, Dir::Down] {
        for _ in 1..k {
            router.pipeline_group(dir)?;
            router.rebalance()?;
        }
    }
    router.deliver()?;
    for dir in [Dir::Left, Dir::Right] {
        for _ in 1..k {
            router.pipeline_group(dir)?;
            router.deliver()?;
        }
    }
    let left = router.done.iter().filter(|d| !**d).count();
    if left > 0 {
        return Err(GeoError::Undelivered(left));
    }

    let duplex_period = router.rounds.len();
    let schedule = match mode {
        LinkMode::Duplex => Schedule::new(LinkMode::Duplex, router.rounds),
        LinkMode::Strict => Schedule::new(
            LinkMode::Strict,
            router.rounds.iter().flat_map(|r| split_into_matchings(r)).collect(),
        ),
    };
    Ok(GridRoute { schedule, k, n_low, max_core_load: router.max_load, duplex_period })
}

/// Splits a duplex round (in-degree and out-degree at most 1) into matchings.
pub fn split_into_matchings(round: &[Slot]) -> Vec<Vec<Slot>> {
    use std::collections::BTreeMap;
    // Every node touches at most two links, so the links form paths and cycles.
    let mut touching: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (i, s) in round.iter().enumerate() {
        touching.entry(s.from).or_default().push(i);
        touching.entry(s.to).or_default().push(i);
    }
    let other = |i: usize, v: NodeId| if round[i].from == v { round[i].to } else { round[i].from };
    let mut color = vec![usize::MAX; round.len()];
    let path_ends = touching.iter().filter(|(_, l)| l.len() == 1).map(|(&v, _)| v);
    let any_node = touching.keys().copied();
    for start in path_ends.chain(any_node).collect::<Vec<_>>() {
        let Some(&first) = touching[&start].iter().find(|&&i| color[i] == usize::MAX) else {
            continue;
        };
        let is_path = touching[&start].len() == 1;
        let mut walk = vec![first];
        let mut at = other(first, start);
        color[first] = 0;
        while let Some(&next) = touching[&at].iter().find(|&&i| color[i] == usize::MAX) {
            color[next] = walk.len() % 2;
            walk.push(next);
            at = other(next, at);
        }
        if !is_path && walk.len() % 2 == 1 {
            color[*walk.last().unwrap()] = 2;
        }
    }
    let used = color.iter().copied().max().map_or(0, |c| c + 1).max(2);
    let mut out = vec![Vec::new(); used];
    for (i, s) in round.iter().enumerate() {
        out[color[i]].push(s.clone());
    }
    out
}

/// One core per box joined by a BFS tree over side-adjacent boxes; the other members of
/// each box hang off their core as a line.
pub fn grid_spanning_tree(gg: &GeometricGraph) -> Result<SpanningTree, GeoError> {
    let grid = build_rgrid(gg);
    let k = grid.k;
    if let Some(b) = grid.members.iter().position(Vec::is_empty) {
        return Err(GeoError::EmptyBox(b / k, b % k));
    }
    let core = |r: usize, c: usize| grid.box_members(r, c)[0];
    let mut edges = Vec::with_capacity(gg.n().saturating_sub(1));
    let mut seen = vec![false; k * k];
    seen[0] = true;
    let mut queue = std::collections::VecDeque::from([(0usize, 0usize)]);
    while let Some((r, c)) = queue.pop_front() {
        let around = [
            (r.wrapping_sub(1), c),
            (r + 1, c),
            (r, c.wrapping_sub(1)),
            (r, c + 1),
        ];
        for (nr, nc) in around {
            if nr < k && nc < k && !seen[nr * k + nc] {
                seen[nr * k + nc] = true;
                edges.push((core(r, c), core(nr, nc)));
                queue.push_back((nr, nc));
            }
        }
    }
    for members in &grid.members {
        edges.extend(members.windows(2).map(|w| (w[0], w[1])));
    }
    let tree = SpanningTree::from_edges(&gg.graph, &edges)?;
    assert!(tree.max_degree() <= 5, "grid tree degree {}", tree.max_degree());
    Ok(tree)
}
