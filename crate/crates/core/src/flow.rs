//! Pairwise schedule synthesis through concurrent multi-commodity flow.
//!
//! The pipeline is: node-split instance `D_tau`, approximate concurrent flow with exact
//! feasibility repair, binary search on `tau`, path decomposition, `N`-rounding, Shannon
//! multicoloring of the per-edge unit counts, and finally one schedule round per color.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num::rational::Ratio;
use num::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{self, FlowSet, LinkMode, Schedule, Slot};
use crate::graphs::{Graph, NodeId};

/// Exact flow arithmetic. Solver output lives on a dyadic grid, so `i128` never overflows
/// at the instance sizes this module is meant for.
pub type Q = Ratio<i128>;

const GRID_BITS: u32 = 30;
const TAU_BITS: u32 = 20;
const MAX_AUGMENTATIONS: usize = 20_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("flow set is not pairwise")]
    NotPairwise,
    #[error("tau must be non-negative")]
    NegativeTau,
    #[error("eps must lie in (0, 1), got {0}")]
    BadEps(f64),
    #[error("phi = {phi} must exceed K*m = {km}")]
    PhiTooSmall { phi: u64, km: u64 },
    #[error("flow has no path decomposition; decompose first")]
    NotDecomposed,
    #[error("conservation fails for commodity {commodity} at node {node}")]
    Conservation { commodity: usize, node: usize },
    #[error("arc {arc} carries more than its capacity")]
    Capacity { arc: usize },
    #[error("negative flow on arc {arc}")]
    NegativeFlow { arc: usize },
    #[error("rounded value {rounded} fell below the rounding bound {bound}")]
    RoundingBound { rounded: String, bound: String },
    #[error("solver exceeded its augmentation budget")]
    SolverBudget,
    #[error("period bound {bound} exceeds the cap of {cap}")]
    PeriodTooLong { bound: usize, cap: usize },
    #[error("synthesized schedule is invalid: {0}")]
    InvalidSchedule(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Capacity {
    Finite(Q),
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowArc {
    pub from: usize,
    pub to: usize,
    pub cap: Capacity,
}

/// Node `v` of the graph becomes `v_in = 2v` and `v_out = 2v + 1`. Arc `v` is the internal
/// arc of node `v`; the remaining arcs join `u_out` to `v_in` for each edge direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McmfInstance {
    pub graph_n: usize,
    pub arcs: Vec<FlowArc>,
    pub out: Vec<Vec<usize>>,
    pub commodities: Vec<(usize, usize)>,
    pub tau: Q,
    pub tv: Vec<usize>,
}

pub fn node_in(v: NodeId) -> usize {
    2 * v
}

pub fn node_out(v: NodeId) -> usize {
    2 * v + 1
}

impl McmfInstance {
    pub fn node_count(&self) -> usize {
        2 * self.graph_n
    }

    pub fn k(&self) -> usize {
        self.commodities.len()
    }

    /// `m = |E_D|`.
    pub fn m(&self) -> usize {
        self.arcs.len()
    }

    pub fn internal_capacity(&self, v: NodeId) -> &Capacity {
        &self.arcs[v].cap
    }

    pub fn with_internal_capacity(mut self, v: NodeId, cap: Q) -> Self {
        self.arcs[v].cap = Capacity::Finite(cap);
        self
    }

    /// The graph edge `(u, v)` crossed by an inter-node arc, or `None` for internal arcs.
    pub fn hop(&self, arc: usize) -> Option<(NodeId, NodeId)> {
        let a = &self.arcs[arc];
        (a.from % 2 == 1 && a.to % 2 == 0).then(|| (a.from / 2, a.to / 2))
    }
}

pub fn build_flow_instance(g: &Graph, f: &FlowSet, tau: Q) -> Result<McmfInstance, FlowError> {
    let pairs = f.pairs().ok_or(FlowError::NotPairwise)?;
    if tau < Q::zero() {
        return Err(FlowError::NegativeTau);
    }
    let n = g.n();
    let mut tv = vec![0; n];
    for &(s, t) in &pairs {
        tv[s] += 1;
        tv[t] += 1;
    }
    let half = Q::new(1, 2);
    let mut arcs: Vec<FlowArc> = (0..n)
        .map(|v| FlowArc {
            from: node_in(v),
            to: node_out(v),
            cap: Capacity::Finite(Q::one() + Q::from(tv[v] as i128) * tau * half),
        })
        .collect();
    for (u, v) in g.edges() {
        arcs.push(FlowArc { from: node_out(u), to: node_in(v), cap: Capacity::Unbounded });
        arcs.push(FlowArc { from: node_out(v), to: node_in(u), cap: Capacity::Unbounded });
    }
    let mut out = vec![Vec::new(); 2 * n];
    for (i, a) in arcs.iter().enumerate() {
        out[a.from].push(i);
    }
    let commodities = pairs.iter().map(|&(s, t)| (node_in(s), node_out(t))).collect();
    Ok(McmfInstance { graph_n: n, arcs, out, commodities, tau, tv })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowPath {
    pub arcs: Vec<usize>,
    pub value: Q,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmfFlow {
    /// Arc flows per commodity; absent arcs carry zero.
    pub per_commodity: Vec<BTreeMap<usize, Q>>,
    pub paths: Option<Vec<Vec<FlowPath>>>,
    /// Commodities whose endpoints are not connected.
    pub disconnected: Vec<usize>,
    /// Certified upper bound on the optimal concurrent value, when the solver produced one.
    pub upper_bound: Option<f64>,
}

fn paths_to_arcs(paths: &[Vec<FlowPath>]) -> Vec<BTreeMap<usize, Q>> {
    paths
        .iter()
        .map(|ps| {
            let mut m = BTreeMap::new();
            for p in ps {
                for &a in &p.arcs {
                    *m.entry(a).or_insert_with(Q::zero) += p.value;
                }
            }
            m.retain(|_, v: &mut Q| !v.is_zero());
            m
        })
        .collect()
}

impl McmfFlow {
    pub fn zero(k: usize) -> Self {
        McmfFlow { per_commodity: vec![BTreeMap::new(); k], paths: None, disconnected: Vec::new(), upper_bound: None }
    }

    pub fn from_paths(paths: Vec<Vec<FlowPath>>) -> Self {
        McmfFlow {
            per_commodity: paths_to_arcs(&paths),
            paths: Some(paths),
            disconnected: Vec::new(),
            upper_bound: None,
        }
    }

    pub fn commodity_value(&self, inst: &McmfInstance, i: usize) -> Q {
        let s = inst.commodities[i].0;
        let mut v = Q::zero();
        for (&a, &x) in &self.per_commodity[i] {
            if inst.arcs[a].from == s {
                v += x;
            }
            if inst.arcs[a].to == s {
                v -= x;
            }
        }
        v
    }

    /// `v(f) = min_i v(f_i)`.
    pub fn value(&self, inst: &McmfInstance) -> Q {
        (0..inst.k()).map(|i| self.commodity_value(inst, i)).min().unwrap_or_else(Q::zero)
    }

    pub fn arc_load(&self, arc: usize) -> Q {
        self.per_commodity.iter().filter_map(|m| m.get(&arc)).fold(Q::zero(), |a, b| a + b)
    }

    pub fn is_rounded(&self, phi: u64) -> bool {
        let phi = Q::from(phi as i128);
        self.per_commodity.iter().all(|m| m.values().all(|x| (x * phi).is_integer()))
    }
}

/// Exact conservation and capacity check.
pub fn check_flow(inst: &McmfInstance, flow: &McmfFlow) -> Result<(), FlowError> {
    let mut load = vec![Q::zero(); inst.m()];
    for (i, m) in flow.per_commodity.iter().enumerate() {
        let (s, t) = inst.commodities[i];
        let mut net = vec![Q::zero(); inst.node_count()];
        for (&a, &x) in m {
            if x < Q::zero() {
                return Err(FlowError::NegativeFlow { arc: a });
            }
            load[a] += x;
            net[inst.arcs[a].from] -= x;
            net[inst.arcs[a].to] += x;
        }
        for (node, x) in net.iter().enumerate() {
            if node != s && node != t && !x.is_zero() {
                return Err(FlowError::Conservation { commodity: i, node });
            }
        }
    }
    for (a, l) in load.iter().enumerate() {
        if let Capacity::Finite(c) = &inst.arcs[a].cap {
            if l > c {
                return Err(FlowError::Capacity { arc: a });
            }
        }
    }
    Ok(())
}

fn dyadic_floor(x: f64, bits: u32) -> Q {
    let scaled = (x * (1u64 << bits) as f64).floor();
    Q::new(scaled.max(0.0) as i128, 1i128 << bits)
}

fn q_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Shortest path by arc lengths. Dense O(V^2) Dijkstra; the instances are small.
fn shortest_path(inst: &McmfInstance, len: &[f64], s: usize, t: usize) -> Option<(f64, Vec<usize>)> {
    let nn = inst.node_count();
    let mut dist = vec![f64::INFINITY; nn];
    let mut via = vec![usize::MAX; nn];
    let mut done = vec![false; nn];
    dist[s] = 0.0;
    loop {
        let mut u = usize::MAX;
        for v in 0..nn {
            if !done[v] && dist[v].is_finite() && (u == usize::MAX || dist[v] < dist[u]) {
                u = v;
            }
        }
        if u == usize::MAX {
            return None;
        }
        if u == t {
            break;
        }
        done[u] = true;
        for &a in &inst.out[u] {
            let w = inst.arcs[a].to;
            let d = dist[u] + len[a];
            if d < dist[w] {
                dist[w] = d;
                via[w] = a;
            }
        }
    }
    let mut path = Vec::new();
    let mut v = t;
    while v != s {
        let a = via[v];
        path.push(a);
        v = inst.arcs[a].from;
    }
    path.reverse();
    Some((dist[t], path))
}

/// One unit of each commodity along a fewest-arc path, scaled to `1/K`.
fn trivial_flow(inst: &McmfInstance) -> Option<Vec<Vec<FlowPath>>> {
    let unit = vec![1.0; inst.m()];
    let share = Q::new(1, inst.k().max(1) as i128);
    inst.commodities
        .iter()
        .map(|&(s, t)| shortest_path(inst, &unit, s, t).map(|(_, arcs)| vec![FlowPath { arcs, value: share }]))
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum Goal {
    /// Stop once primal and dual are within `1 + eps`.
    Approx { eps: f64 },
    /// Stop once `tau` is shown infeasible by the dual or the primal reaches `tau (1 - slack)`.
    Decide { tau: f64, slack: f64 },
}

struct Outcome {
    paths: Vec<Vec<FlowPath>>,
    primal: Q,
    dual: f64,
    goal_met: bool,
}

/// Garg–Könemann style multiplicative weights for maximum concurrent flow with unit demands.
struct Mwu<'a> {
    inst: &'a McmfInstance,
    eps: f64,
    cap: Vec<f64>,
    len: Vec<f64>,
    log_offset: f64,
    routed: Vec<f64>,
    paths: Vec<HashMap<Vec<usize>, f64>>,
    best_dual: f64,
}

impl<'a> Mwu<'a> {
    fn new(inst: &'a McmfInstance, eps: f64) -> Self {
        let cap: Vec<f64> = inst
            .arcs
            .iter()
            .map(|a| match &a.cap {
                Capacity::Finite(c) => q_f64(c),
                Capacity::Unbounded => f64::INFINITY,
            })
            .collect();
        let len = cap.iter().map(|&c| if c.is_finite() { 1.0 / c } else { 0.0 }).collect();
        Mwu {
            inst,
            eps,
            cap,
            len,
            log_offset: 0.0,
            routed: vec![0.0; inst.k()],
            paths: vec![HashMap::new(); inst.k()],
            best_dual: f64::INFINITY,
        }
    }

    fn volume(&self) -> f64 {
        self.cap.iter().zip(&self.len).filter(|(c, _)| c.is_finite()).map(|(c, l)| c * l).sum()
    }

    fn renormalize(&mut self) {
        let v = self.volume();
        if v > 1e200 {
            for l in &mut self.len {
                *l /= v;
            }
            self.log_offset += v.ln();
        }
    }

    fn phase(&mut self) -> Result<(), FlowError> {
        let mut augmentations = 0;
        for (i, &(s, t)) in self.inst.commodities.iter().enumerate() {
            let mut rem = 1.0f64;
            while rem > 1e-12 {
                let (_, path) = shortest_path(self.inst, &self.len, s, t).expect("connected commodity");
                let bottleneck = path.iter().map(|&a| self.cap[a]).fold(rem, f64::min);
                for &a in &path {
                    if self.cap[a].is_finite() {
                        self.len[a] *= 1.0 + self.eps * bottleneck / self.cap[a];
                    }
                }
                *self.paths[i].entry(path).or_insert(0.0) += bottleneck;
                self.routed[i] += bottleneck;
                rem -= bottleneck;
                augmentations += 1;
                if augmentations > MAX_AUGMENTATIONS {
                    return Err(FlowError::SolverBudget);
                }
            }
        }
        self.renormalize();
        Ok(())
    }

    fn dual(&mut self) -> f64 {
        let alpha: f64 = self
            .inst
            .commodities
            .iter()
            .map(|&(s, t)| shortest_path(self.inst, &self.len, s, t).expect("connected commodity").0)
            .sum();
        // Guard against rounding in the float path sums.
        let bound = self.volume() / alpha * (1.0 + 1e-9);
        self.best_dual = self.best_dual.min(bound);
        self.best_dual
    }

    fn float_primal(&self) -> f64 {
        let mut load = vec![0.0; self.inst.m()];
        for ps in &self.paths {
            for (p, x) in ps {
                for &a in p {
                    load[a] += x;
                }
            }
        }
        let rho = load
            .iter()
            .zip(&self.cap)
            .filter(|(_, c)| c.is_finite())
            .map(|(l, c)| l / c)
            .fold(0.0, f64::max);
        if rho == 0.0 {
            return 0.0;
        }
        self.routed.iter().fold(f64::INFINITY, |m, &r| m.min(r / rho))
    }

    /// Snaps the path flows to the dyadic grid and scales them under capacity, exactly.
    fn exact_primal(&self) -> (Vec<Vec<FlowPath>>, Q) {
        let inst = self.inst;
        let mut paths: Vec<Vec<FlowPath>> = self
            .paths
            .iter()
            .map(|ps| {
                let mut v: Vec<FlowPath> = ps
                    .iter()
                    .map(|(p, &x)| FlowPath { arcs: p.clone(), value: dyadic_floor(x, GRID_BITS) })
                    .filter(|p| !p.value.is_zero())
                    .collect();
                v.sort_by(|a, b| a.arcs.cmp(&b.arcs));
                v
            })
            .collect();
        let mut load = vec![Q::zero(); inst.m()];
        for p in paths.iter().flatten() {
            for &a in &p.arcs {
                load[a] += p.value;
            }
        }
        let mut rho = Q::zero();
        for (a, l) in load.iter().enumerate() {
            if let Capacity::Finite(c) = &inst.arcs[a].cap {
                rho = rho.max(l / c);
            }
        }
        if rho.is_zero() {
            return (paths, Q::zero());
        }
        let step = Q::from_integer(1i128 << TAU_BITS);
        let rho_hat = (rho * step).ceil() / step;
        let grid = 1i128 << GRID_BITS;
        for p in paths.iter_mut().flatten() {
            let scaled = (p.value / rho_hat * Q::from_integer(grid)).floor();
            p.value = scaled / Q::from_integer(grid);
        }
        for ps in &mut paths {
            ps.retain(|p| !p.value.is_zero());
        }
        let value = paths
            .iter()
            .map(|ps| ps.iter().fold(Q::zero(), |a, p| a + p.value))
            .min()
            .unwrap_or_else(Q::zero);
        (paths, value)
    }

    fn finished(&self) -> bool {
        let log_target = (self.cap.iter().filter(|c| c.is_finite()).count() as f64 / (1.0 - self.eps)).ln() / self.eps;
        self.volume().ln() + self.log_offset >= log_target
    }
}

fn goal_met(goal: Goal, primal: f64, dual: f64) -> bool {
    match goal {
        Goal::Approx { eps } => primal * (1.0 + eps) >= dual,
        Goal::Decide { tau, slack } => dual < tau || primal >= tau * (1.0 - slack),
    }
}

fn solve(inst: &McmfInstance, eps_mwu: f64, goal: Goal) -> Result<Outcome, FlowError> {
    let trivial = trivial_flow(inst).expect("caller checks connectivity");
    let trivial_value = Q::new(1, inst.k() as i128);
    let mut mwu = Mwu::new(inst, eps_mwu);
    let pick = |paths: Vec<Vec<FlowPath>>, v: Q| {
        if v >= trivial_value {
            (paths, v)
        } else {
            (trivial.clone(), trivial_value)
        }
    };
    loop {
        mwu.phase()?;
        let dual = mwu.dual();
        let finished = mwu.finished();
        let fp = mwu.float_primal();
        if goal_met(goal, fp.max(q_f64(&trivial_value)), dual) || finished {
            let (paths, v) = mwu.exact_primal();
            let (paths, v) = pick(paths, v);
            let met = goal_met(goal, q_f64(&v), dual);
            if met || finished {
                return Ok(Outcome { paths, primal: v, dual, goal_met: met });
            }
        }
    }
}

fn disconnected_commodities(inst: &McmfInstance) -> Vec<usize> {
    let unit = vec![1.0; inst.m()];
    (0..inst.k())
        .filter(|&i| {
            let (s, t) = inst.commodities[i];
            shortest_path(inst, &unit, s, t).is_none()
        })
        .collect()
}

/// Concurrent flow with value at least `OPT / (1 + eps)`, certified by a dual bound.
pub fn approx_concurrent_flow(inst: &McmfInstance, eps: f64) -> Result<McmfFlow, FlowError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(FlowError::BadEps(eps));
    }
    let disconnected = disconnected_commodities(inst);
    if inst.k() == 0 || !disconnected.is_empty() {
        let mut f = McmfFlow::zero(inst.k());
        f.disconnected = disconnected;
        f.upper_bound = Some(0.0);
        return Ok(f);
    }
    let out = solve(inst, eps / 4.0, Goal::Approx { eps })?;
    let mut flow = McmfFlow::from_paths(out.paths);
    flow.paths = None;
    flow.upper_bound = Some(out.dual);
    Ok(flow)
}

/// Peels paths off each commodity, cancelling any cycles met on the way.
pub fn path_decompose(inst: &McmfInstance, flow: &McmfFlow) -> Result<McmfFlow, FlowError> {
    let mut all = Vec::with_capacity(inst.k());
    for (i, arcs) in flow.per_commodity.iter().enumerate() {
        let (s, t) = inst.commodities[i];
        let mut res: BTreeMap<usize, Q> = arcs.iter().filter(|(_, x)| !x.is_zero()).map(|(&a, &x)| (a, x)).collect();
        if let Some((&a, _)) = res.iter().find(|(_, x)| **x < Q::zero()) {
            return Err(FlowError::NegativeFlow { arc: a });
        }
        let mut paths = Vec::new();
        'peel: loop {
            let mut walk: Vec<usize> = Vec::new();
            let mut pos: HashMap<usize, usize> = HashMap::from([(s, 0)]);
            let mut at = s;
            while at != t {
                let next = inst.out[at].iter().copied().find(|a| res.contains_key(a));
                let Some(a) = next else {
                    if at == s {
                        break 'peel;
                    }
                    return Err(FlowError::Conservation { commodity: i, node: at });
                };
                walk.push(a);
                at = inst.arcs[a].to;
                if let Some(&p) = pos.get(&at) {
                    let cycle = walk.split_off(p);
                    let m = cycle.iter().map(|a| res[a]).min().expect("nonempty cycle");
                    for a in cycle {
                        subtract(&mut res, a, m);
                    }
                    continue 'peel;
                }
                pos.insert(at, walk.len());
            }
            let m = walk.iter().map(|a| res[a]).min().expect("nonempty path");
            for &a in &walk {
                subtract(&mut res, a, m);
            }
            paths.push(FlowPath { arcs: walk, value: m });
        }
        all.push(paths);
    }
    let mut out = McmfFlow::from_paths(all);
    out.disconnected = flow.disconnected.clone();
    out.upper_bound = flow.upper_bound;
    Ok(out)
}

fn subtract(res: &mut BTreeMap<usize, Q>, a: usize, m: Q) {
    let x = res.get_mut(&a).expect("arc on walk");
    *x -= m;
    if x.is_zero() {
        res.remove(&a);
    }
}

/// `v (1 - K m / phi)`.
pub fn rounding_bound(inst: &McmfInstance, value: Q, phi: u64) -> Q {
    let km = Q::from((inst.k() * inst.m()) as i128);
    value * (Q::one() - km / Q::from(phi as i128))
}

/// Floors each path value to a multiple of `1/phi`.
pub fn round_flow(inst: &McmfInstance, flow: &McmfFlow, phi: u64) -> Result<McmfFlow, FlowError> {
    let km = (inst.k() * inst.m()) as u64;
    if phi <= km {
        return Err(FlowError::PhiTooSmall { phi, km });
    }
    let paths = flow.paths.as_ref().ok_or(FlowError::NotDecomposed)?;
    let phi_q = Q::from(phi as i128);
    let rounded: Vec<Vec<FlowPath>> = paths
        .iter()
        .map(|ps| {
            ps.iter()
                .map(|p| FlowPath { arcs: p.arcs.clone(), value: (p.value * phi_q).floor() / phi_q })
                .filter(|p| !p.value.is_zero())
                .collect()
        })
        .collect();
    let mut out = McmfFlow::from_paths(rounded);
    out.disconnected = flow.disconnected.clone();
    out.upper_bound = flow.upper_bound;
    let before = flow.value(inst);
    let after = out.value(inst);
    let bound = rounding_bound(inst, before, phi);
    // The multiplicative form of the rounding bound relies on every commodity carrying at least 1/K.
    if before >= Q::new(1, inst.k().max(1) as i128) && after < bound {
        return Err(FlowError::RoundingBound { rounded: after.to_string(), bound: bound.to_string() });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeMulticoloring {
    pub requirement: BTreeMap<(NodeId, NodeId), u64>,
    /// Colors per edge, one per required unit, numbered `0..color_count`.
    pub assignment: BTreeMap<(NodeId, NodeId), Vec<usize>>,
    pub color_count: usize,
}

impl EdgeMulticoloring {
    pub fn is_valid(&self) -> bool {
        let mut at: HashMap<(NodeId, usize), (NodeId, NodeId)> = HashMap::new();
        for (&(u, v), cs) in &self.assignment {
            let distinct: BTreeSet<_> = cs.iter().collect();
            if distinct.len() != cs.len() || (cs.len() as u64) < self.requirement.get(&(u, v)).copied().unwrap_or(0) {
                return false;
            }
            for &c in cs {
                for w in [u, v] {
                    if at.insert((w, c), (u, v)).is_some() {
                        return false;
                    }
                }
            }
        }
        let used: BTreeSet<usize> = self.assignment.values().flatten().copied().collect();
        used.len() == self.color_count
    }
}

/// `max_v sum_{e ni v} r(e)`.
pub fn weighted_degree(n: usize, r: &BTreeMap<(NodeId, NodeId), u64>) -> u64 {
    let mut d = vec![0u64; n];
    for (&(u, v), &x) in r {
        d[u] += x;
        d[v] += x;
    }
    d.into_iter().max().unwrap_or(0)
}

struct Multigraph {
    ends: Vec<(usize, usize)>,
    color: Vec<Option<usize>>,
    at: Vec<Vec<Option<usize>>>,
}

impl Multigraph {
    fn other(&self, e: usize, v: usize) -> usize {
        let (a, b) = self.ends[e];
        if a == v {
            b
        } else {
            a
        }
    }

    fn missing(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.at[v].iter().enumerate().filter(|(_, e)| e.is_none()).map(|(c, _)| c)
    }

    fn common_missing(&self, u: usize, v: usize) -> Option<usize> {
        (0..self.at[u].len()).find(|&c| self.at[u][c].is_none() && self.at[v][c].is_none())
    }

    fn set(&mut self, e: usize, c: usize) {
        let (u, v) = self.ends[e];
        debug_assert!(self.at[u][c].is_none() && self.at[v][c].is_none());
        self.color[e] = Some(c);
        self.at[u][c] = Some(e);
        self.at[v][c] = Some(e);
    }

    fn unset(&mut self, e: usize) {
        let (u, v) = self.ends[e];
        let c = self.color[e].take().expect("colored edge");
        self.at[u][c] = None;
        self.at[v][c] = None;
    }

    /// Edges of the alternating `a`/`b` path starting at `v`, which misses one of them.
    fn chain(&self, v: usize, a: usize, b: usize) -> Vec<usize> {
        let mut edges = Vec::new();
        let mut at = v;
        let mut c = if self.at[v][a].is_some() { a } else { b };
        while let Some(e) = self.at[at][c] {
            if edges.last() == Some(&e) {
                break;
            }
            edges.push(e);
            at = self.other(e, at);
            c = if c == a { b } else { a };
        }
        edges
    }

    fn chain_end(&self, v: usize, a: usize, b: usize) -> usize {
        let mut at = v;
        for e in self.chain(v, a, b) {
            at = self.other(e, at);
        }
        at
    }

    fn swap(&mut self, v: usize, a: usize, b: usize) {
        let edges = self.chain(v, a, b);
        let old: Vec<usize> = edges.iter().map(|&e| self.color[e].expect("chain colored")).collect();
        for &e in &edges {
            self.unset(e);
        }
        for (&e, c) in edges.iter().zip(old) {
            self.set(e, if c == a { b } else { a });
        }
    }

    /// Colors edge `e = xy` within the palette; always succeeds with `floor(3 Delta / 2)` colors.
    fn color_edge(&mut self, e: usize) {
        let (x, y) = self.ends[e];
        if let Some(c) = self.common_missing(x, y) {
            return self.set(e, c);
        }
        let gamma = self.missing(y).next().expect("y misses a color");
        let xz = self.at[x][gamma].expect("x uses every color y misses");
        let z = self.other(xz, x);
        if let Some(alpha) = self.common_missing(x, z) {
            self.unset(xz);
            self.set(xz, alpha);
            return self.set(e, gamma);
        }
        let delta = self.common_missing(y, z).expect("palette large enough for a short fan");
        let alpha = self.missing(x).next().expect("x misses a color");
        if self.chain_end(x, alpha, delta) != y {
            self.swap(y, alpha, delta);
            self.set(e, alpha);
        } else {
            self.swap(z, alpha, delta);
            self.unset(xz);
            self.set(xz, alpha);
            self.set(e, gamma);
        }
    }
}

/// Multicolors `(g, r)` with at most `floor(3 Delta_r / 2)` colors by coloring the
/// multigraph with `r(e)` parallel copies of each edge.
pub fn shannon_multicolor(n: usize, r: &BTreeMap<(NodeId, NodeId), u64>) -> EdgeMulticoloring {
    let delta = weighted_degree(n, r) as usize;
    let palette = 3 * delta / 2;
    let mut mg = Multigraph { ends: Vec::new(), color: Vec::new(), at: vec![vec![None; palette]; n] };
    let mut load = vec![0u64; n];
    for (&(u, v), &x) in r {
        load[u] += x;
        load[v] += x;
    }
    // Busiest edges first: first-fit then rarely needs recoloring.
    let mut order: Vec<(&(NodeId, NodeId), &u64)> = r.iter().collect();
    order.sort_by_key(|&(&(u, v), _)| std::cmp::Reverse(load[u] + load[v]));
    for (&(u, v), &x) in order {
        for _ in 0..x {
            mg.ends.push((u, v));
            mg.color.push(None);
        }
    }
    for e in 0..mg.ends.len() {
        mg.color_edge(e);
    }
    let used: BTreeSet<usize> = mg.color.iter().map(|c| c.expect("all colored")).collect();
    let renumber: HashMap<usize, usize> = used.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut assignment: BTreeMap<(NodeId, NodeId), Vec<usize>> = r.keys().map(|&e| (e, Vec::new())).collect();
    for (e, c) in mg.ends.iter().zip(&mg.color) {
        assignment.get_mut(e).expect("edge listed").push(renumber[&c.expect("colored")]);
    }
    EdgeMulticoloring { requirement: r.clone(), assignment, color_count: used.len() }
}

/// Upper bound on `tau*` from unit internal lengths: `min(2, n / sum of hop distances)`.
pub fn hop_tau_bound(g: &Graph, f: &FlowSet) -> Result<Q, FlowError> {
    let pairs = f.pairs().ok_or(FlowError::NotPairwise)?;
    let mut hops = 0i128;
    for &(s, t) in &pairs {
        match g.bfs_distances(s)[t] {
            Some(h) => hops += h as i128,
            None => return Ok(Q::zero()),
        }
    }
    if hops == 0 {
        return Ok(Q::from(2));
    }
    Ok(Q::from(2).min(Q::new(g.n() as i128, hops)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Refuse instances whose period bound exceeds this.
    pub max_period: usize,
    pub mode: LinkMode,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { max_period: 200_000, mode: LinkMode::Strict }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub tau_star: Q,
    pub upper_bound: Q,
    pub guaranteed_throughput: Q,
    pub eps: f64,
    pub n_round: u64,
    pub colors: usize,
    /// Every infeasibility step of the search was backed by a dual bound.
    pub certified: bool,
}

#[derive(Serialize)]
struct CertificateJson {
    #[serde(rename = "tauStar")]
    tau_star: f64,
    #[serde(rename = "upperBound")]
    upper_bound: f64,
    #[serde(rename = "guaranteedThroughput")]
    guaranteed_throughput: f64,
    eps: f64,
    #[serde(rename = "N")]
    n_round: u64,
    colors: usize,
    certified: bool,
    exact: BTreeMap<&'static str, String>,
}

impl Certificate {
    pub fn to_json(&self) -> serde_json::Value {
        let exact = BTreeMap::from([
            ("tauStar", self.tau_star.to_string()),
            ("upperBound", self.upper_bound.to_string()),
            ("guaranteedThroughput", self.guaranteed_throughput.to_string()),
        ]);
        serde_json::to_value(CertificateJson {
            tau_star: q_f64(&self.tau_star),
            upper_bound: q_f64(&self.upper_bound),
            guaranteed_throughput: q_f64(&self.guaranteed_throughput),
            eps: self.eps,
            n_round: self.n_round,
            colors: self.colors,
            certified: self.certified,
            exact,
        })
        .expect("certificate serializes")
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub schedule: Schedule,
    pub certificate: Certificate,
    pub instance: Option<McmfInstance>,
    pub flow: Option<McmfFlow>,
    pub coloring: Option<EdgeMulticoloring>,
    /// Periods after which every path is carrying packets end to end.
    pub warmup_periods: u64,
}

impl Synthesis {
    pub fn eval_config(&self) -> capacity::EvalConfig {
        capacity::EvalConfig { warmup_periods: Some(self.warmup_periods), measure_periods: 8 }
    }
}

fn dyadic_mid(lo: &Q, hi: &Q) -> Q {
    let m = (q_f64(lo) * q_f64(hi)).sqrt();
    let step = (1i128 << TAU_BITS) as f64;
    let q = Q::new((m * step).round() as i128, 1i128 << TAU_BITS);
    if &q > lo && &q < hi {
        q
    } else {
        (lo + hi) / Q::from(2)
    }
}

struct Unit {
    commodity: usize,
    path: usize,
    from: NodeId,
    to: NodeId,
    position: f64,
}

/// Binary search on `tau`, rounding, multicoloring and schedule emission.
pub fn synthesize_pairwise_schedule(
    g: &Graph,
    f: &FlowSet,
    eps: f64,
    opts: SynthesisOptions,
) -> Result<Synthesis, FlowError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(FlowError::BadEps(eps));
    }
    let pairs = f.pairs().ok_or(FlowError::NotPairwise)?;
    let k = pairs.len();
    let mut hi = hop_tau_bound(g, f)?;
    if k == 0 || hi.is_zero() {
        let zero = Certificate {
            tau_star: Q::zero(),
            upper_bound: Q::zero(),
            guaranteed_throughput: Q::zero(),
            eps,
            n_round: 0,
            colors: 0,
            certified: true,
        };
        return Ok(Synthesis {
            schedule: Schedule::empty(opts.mode),
            certificate: zero,
            instance: None,
            flow: None,
            coloring: None,
            warmup_periods: 1,
        });
    }
    let mut lo = Q::new(1, k as i128);
    let mut best: Option<(McmfInstance, Vec<Vec<FlowPath>>)> = None;
    let mut certified = true;
    let ratio = Q::one() + Q::from(1) / Q::from(4) * dyadic_floor(eps, GRID_BITS);
    while hi > lo * ratio {
        let mid = dyadic_mid(&lo, &hi);
        let inst = build_flow_instance(g, f, mid)?;
        let out = solve(&inst, eps / 12.0, Goal::Decide { tau: q_f64(&mid), slack: eps / 4.0 })?;
        let infeasible = out.dual < q_f64(&mid);
        let reached = q_f64(&out.primal) >= q_f64(&mid) * (1.0 - eps / 4.0);
        if reached && !infeasible {
            lo = mid;
            best = Some((inst, out.paths));
        } else {
            certified &= infeasible || out.goal_met;
            hi = mid;
        }
    }
    let (inst, paths) = match best {
        Some(b) => b,
        None => {
            let inst = build_flow_instance(g, f, lo)?;
            let paths = trivial_flow(&inst).expect("connected pairs");
            (inst, paths)
        }
    };
    let raw = McmfFlow::from_paths(paths);
    let decomposed = path_decompose(&inst, &raw)?;
    let n_round = (4.0 * (k * inst.m()) as f64 / eps).ceil() as u64;
    let rounded = round_flow(&inst, &decomposed, n_round)?;
    check_flow(&inst, &rounded)?;

    let nq = Q::from(n_round as i128);
    let mut units: Vec<Unit> = Vec::new();
    for (i, ps) in rounded.paths.as_ref().expect("rounded flow keeps paths").iter().enumerate() {
        for (j, p) in ps.iter().enumerate() {
            let copies = (p.value * nq).to_integer() as usize;
            let hops: Vec<(NodeId, NodeId)> = p.arcs.iter().filter_map(|&a| inst.hop(a)).collect();
            for (h, &(u, v)) in hops.iter().enumerate() {
                let position = (h as f64 + 0.5) / hops.len() as f64;
                for _ in 0..copies {
                    units.push(Unit { commodity: i, path: j, from: u, to: v, position });
                }
            }
        }
    }
    let mut r: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
    for u in &units {
        *r.entry((u.from.min(u.to), u.from.max(u.to))).or_default() += 1;
    }
    let bound = 3 * weighted_degree(g.n(), &r) as usize / 2;
    if bound > opts.max_period {
        return Err(FlowError::PeriodTooLong { bound, cap: opts.max_period });
    }
    let coloring = shannon_multicolor(g.n(), &r);

    let mut next: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
    let mut by_color: Vec<Vec<&Unit>> = vec![Vec::new(); coloring.color_count];
    for u in &units {
        let e = (u.from.min(u.to), u.from.max(u.to));
        let idx = next.entry(e).or_default();
        by_color[coloring.assignment[&e][*idx]].push(u);
        *idx += 1;
    }
    let mut order: Vec<usize> = (0..coloring.color_count).collect();
    let mean = |c: usize| by_color[c].iter().map(|u| u.position).sum::<f64>() / by_color[c].len().max(1) as f64;
    order.sort_by(|&a, &b| mean(a).total_cmp(&mean(b)).then(a.cmp(&b)));
    let rounds: Vec<Vec<Slot>> = order
        .iter()
        .map(|&c| by_color[c].iter().map(|u| Slot::new(u.from, u.to, u.commodity).on_path(u.path)).collect())
        .collect();
    let period = rounds.len().max(1);
    let schedule = if rounds.is_empty() { Schedule::empty(opts.mode) } else { Schedule::new(opts.mode, rounds) };
    let horizon = 10 * period as u64;
    match capacity::validate_schedule_prefix(g, f, &schedule, horizon) {
        Ok(None) => {}
        Ok(Some(v)) => return Err(FlowError::InvalidSchedule(v.to_string())),
        Err(e) => return Err(FlowError::InvalidSchedule(e.to_string())),
    }

    let per_commodity = (0..k).map(|i| rounded.commodity_value(&inst, i)).min().unwrap_or_else(Q::zero);
    let guaranteed = per_commodity * nq / Q::from(period as i128);
    let max_hops = rounded
        .paths
        .iter()
        .flatten()
        .flatten()
        .map(|p| p.arcs.iter().filter(|&&a| inst.hop(a).is_some()).count())
        .max()
        .unwrap_or(0);
    let certificate = Certificate {
        tau_star: hi,
        upper_bound: hi / Q::from(2),
        guaranteed_throughput: guaranteed,
        eps,
        n_round,
        colors: coloring.color_count,
        certified,
    };
    Ok(Synthesis {
        schedule,
        certificate,
        instance: Some(inst),
        flow: Some(rounded),
        coloring: Some(coloring),
        warmup_periods: max_hops as u64 + 1,
    })
}

/// Six vertices `s_i = i`, `t_i = 3 + i`, edges `s_i t_{i-1}` and `t_i t_{i-1}`, pairs `(s_i, t_i)`.
/// Its optimal throughput is 1/3.
pub fn six_vertex_instance() -> (Graph, FlowSet) {
    let mut edges = Vec::new();
    for i in 0..3 {
        let prev = (i + 2) % 3;
        edges.push((i, 3 + prev));
        edges.push((3 + i, 3 + prev));
    }
    let g = Graph::from_edges(6, &edges).expect("fixture edges are valid");
    let f = FlowSet::pairwise(6, &[(0, 3), (1, 4), (2, 5)]).expect("fixture pairs are valid");
    (g, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i128, d: i128) -> Q {
        Q::new(n, d)
    }

    fn two_node() -> (Graph, FlowSet) {
        (Graph::path(2), FlowSet::pairwise(2, &[(0, 1)]).unwrap())
    }

    #[test]
    fn instance_capacities() {
        let (g, f) = two_node();
        let inst = build_flow_instance(&g, &f, Q::zero()).unwrap();
        assert_eq!(inst.arcs[0].cap, Capacity::Finite(Q::one()));
        assert_eq!(inst.arcs[1].cap, Capacity::Finite(Q::one()));
        assert_eq!(inst.m(), 4);

        let (g, f) = six_vertex_instance();
        let inst = build_flow_instance(&g, &f, Q::one()).unwrap();
        for v in 0..6 {
            assert_eq!(inst.arcs[v].cap, Capacity::Finite(q(3, 2)));
        }
        assert_eq!(inst.m(), 18);

        let g = Graph::path(3);
        let f = FlowSet::pairwise(3, &[(0, 2)]).unwrap();
        let inst = build_flow_instance(&g, &f, Q::one()).unwrap();
        assert_eq!(inst.arcs[1].cap, Capacity::Finite(Q::one()));
    }

    #[test]
    fn single_commodity_saturates() {
        let (g, f) = two_node();
        let inst = build_flow_instance(&g, &f, Q::zero()).unwrap();
        let flow = approx_concurrent_flow(&inst, 0.1).unwrap();
        check_flow(&inst, &flow).unwrap();
        let v = q_f64(&flow.value(&inst));
        assert!(v >= 1.0 / 1.1 && v <= 1.0, "value {v}");
    }

    #[test]
    fn capacity_two_fixture_carries_unit_flow() {
        let (g, f) = six_vertex_instance();
        let mut inst = build_flow_instance(&g, &f, Q::one()).unwrap();
        for v in 0..6 {
            inst = inst.with_internal_capacity(v, Q::from(2));
        }
        let flow = approx_concurrent_flow(&inst, 0.1).unwrap();
        check_flow(&inst, &flow).unwrap();
        assert!(q_f64(&flow.value(&inst)) >= 1.0 / 1.1);
        assert!(flow.upper_bound.unwrap() >= 1.0 - 1e-9);
    }

    #[test]
    fn disconnected_commodity_is_flagged() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let f = FlowSet::pairwise(4, &[(0, 2)]).unwrap();
        let inst = build_flow_instance(&g, &f, Q::one()).unwrap();
        let flow = approx_concurrent_flow(&inst, 0.1).unwrap();
        assert_eq!(flow.disconnected, vec![0]);
        assert!(flow.value(&inst).is_zero());
    }

    #[test]
    fn decomposition_examples() {
        let g = Graph::path(3);
        let f = FlowSet::pairwise(3, &[(0, 2)]).unwrap();
        let inst = build_flow_instance(&g, &f, Q::zero()).unwrap();
        let path = vec![0, 3, 1, 5, 2];
        let flow = McmfFlow::from_paths(vec![vec![FlowPath { arcs: path.clone(), value: q(1, 2) }]]);
        let d = path_decompose(&inst, &McmfFlow { paths: None, ..flow }).unwrap();
        assert_eq!(d.paths.unwrap()[0], vec![FlowPath { arcs: path, value: q(1, 2) }]);

        let g = Graph::cycle(4);
        let f = FlowSet::pairwise(4, &[(0, 2)]).unwrap();
        let inst = build_flow_instance(&g, &f, Q::zero()).unwrap();
        let arc = |u: usize, v: usize| (0..inst.m()).find(|&a| inst.hop(a) == Some((u, v))).unwrap();
        let via1 = vec![0, arc(0, 1), 1, arc(1, 2), 2];
        let via3 = vec![0, arc(0, 3), 3, arc(3, 2), 2];
        let flow = McmfFlow::from_paths(vec![vec![
            FlowPath { arcs: via1, value: q(3, 5) },
            FlowPath { arcs: via3, value: q(2, 5) },
        ]]);
        let d = path_decompose(&inst, &McmfFlow { paths: None, ..flow.clone() }).unwrap();
        let mut values: Vec<Q> = d.paths.as_ref().unwrap()[0].iter().map(|p| p.value).collect();
        values.sort();
        assert_eq!(values, vec![q(2, 5), q(3, 5)]);
        assert_eq!(d.per_commodity, flow.per_commodity);
    }

    #[test]
    fn cycles_are_cancelled() {
        let g = Graph::cycle(3);
        let f = FlowSet::pairwise(3, &[(0, 1)]).unwrap();
        let inst = build_flow_instance(&g, &f, Q::zero()).unwrap();
        let arc = |u: usize, v: usize| (0..inst.m()).find(|&a| inst.hop(a) == Some((u, v))).unwrap();
        let mut m = BTreeMap::new();
        for a in [0, arc(0, 1), 1] {
            m.insert(a, q(1, 2));
        }
        // A circulation 1 -> 2 -> 1 riding along.
        for a in [arc(1, 2), 2, arc(2, 1)] {
            m.insert(a, q(1, 4));
        }
        *m.get_mut(&1).unwrap() += q(1, 4);
        let flow = McmfFlow { per_commodity: vec![m], paths: None, disconnected: vec![], upper_bound: None };
        check_flow(&inst, &flow).unwrap();
        let d = path_decompose(&inst, &flow).unwrap();
        assert_eq!(d.paths.as_ref().unwrap()[0].len(), 1);
        assert_eq!(d.value(&inst), q(1, 2));
    }

    #[test]
    fn rounding_floors_and_is_idempotent() {
        let g = Graph::path(2);
        let f = FlowSet::pairwise(2, &[(0, 1)]).unwrap();
        let inst = build_flow_instance(&g, &f, Q::zero()).unwrap();
        let flow = McmfFlow::from_paths(vec![vec![FlowPath { arcs: vec![0, 2, 1], value: q(37, 100) }]]);
        assert!(matches!(round_flow(&inst, &flow, 4), Err(FlowError::PhiTooSmall { .. })));
        let r = round_flow(&inst, &flow, 10).unwrap();
        assert_eq!(r.paths.as_ref().unwrap()[0][0].value, q(3, 10));
        assert!(r.is_rounded(10));
        assert_eq!(round_flow(&inst, &r, 10).unwrap(), r);
    }

    #[test]
    fn shannon_examples() {
        for t in 1..=4u64 {
            let r: BTreeMap<_, _> = [((0, 1), t), ((0, 2), t), ((1, 2), t)].into();
            let c = shannon_multicolor(3, &r);
            assert!(c.is_valid());
            assert_eq!(c.color_count as u64, 3 * t);
        }
        let r: BTreeMap<_, _> = [((0, 1), 1), ((0, 2), 1), ((0, 3), 1)].into();
        let c = shannon_multicolor(4, &r);
        assert!(c.is_valid());
        assert_eq!(c.color_count, 3);
        let empty = shannon_multicolor(3, &BTreeMap::new());
        assert_eq!(empty.color_count, 0);
    }

    #[test]
    fn two_node_schedule_fires_every_round() {
        let (g, f) = two_node();
        let s = synthesize_pairwise_schedule(&g, &f, 0.1, SynthesisOptions::default()).unwrap();
        let rep = capacity::evaluate_throughput(&g, &f, &s.schedule, s.eval_config()).unwrap();
        assert_eq!(rep.throughput, capacity::Rate::from_integer(1));
        assert!(s.certificate.upper_bound >= q(1, 2));
        assert_eq!(s.certificate.guaranteed_throughput, Q::one());
    }

    #[test]
    fn disconnected_pair_certifies_zero() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let f = FlowSet::pairwise(4, &[(0, 2), (1, 3)]).unwrap();
        let s = synthesize_pairwise_schedule(&g, &f, 0.1, SynthesisOptions::default()).unwrap();
        assert!(s.certificate.guaranteed_throughput.is_zero());
        assert!(s.certificate.upper_bound.is_zero());
    }

    #[test]
    fn hop_bound_on_six_vertex_instance() {
        let (g, f) = six_vertex_instance();
        assert_eq!(hop_tau_bound(&g, &f).unwrap(), Q::one());
    }
}
