//! Streaming protocols on top of the simulator: pipelined broadcast over a colored
//! spanning tree (SB), broadcast gossip, all-to-all streaming gossip (SG) and one-shot gossip.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::capacity::{self, CapacityError, FlowSet, ThroughputReport};
use crate::graphs::{self, Graph, GraphError, NodeId, SpanningTree};
use crate::mtmsim::{
    self, CongestLayer, CongestNode, CongestProgram, Direction, GossipState, Packet, SimConfig, SimError, Simulator,
    Trace, TraceDetail,
};
use crate::seed;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("graph is not connected")]
    Disconnected,
    #[error("source {0} is not a node")]
    BadSource(NodeId),
    #[error("distributed tree coloring failed after {0} attempts")]
    ColoringFailed(usize),
    #[error("{rounds} rounds cannot cover the {fill}-round pipeline fill")]
    TooFewRounds { rounds: u64, fill: u64 },
    #[error("at least {0} token indices are needed to measure throughput")]
    TooFewTokens(u64),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeSource {
    /// Centralized minimum-degree spanning tree local search.
    LocalSearch,
    Provided(SpanningTree),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColoringMode {
    /// Proper tree coloring with Delta(T) colors, computed centrally.
    Centralized,
    /// EdgeColor-MTM in the simulator plus a convergecast check, retried up to `attempts` times.
    Distributed { attempts: usize, budget_factor: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub sim: SimConfig,
    pub tree: TreeSource,
    pub coloring: ColoringMode,
    /// Charge topology gathering analytically as D(G) + |E| rounds of gossip.
    pub charge_topology: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            sim: SimConfig { trace: TraceDetail::PacketsOnly, ..SimConfig::default() },
            tree: TreeSource::LocalSearch,
            coloring: ColoringMode::Centralized,
            charge_topology: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub trace: Trace,
    pub report: ThroughputReport,
    /// Simulated rounds before streaming starts.
    pub setup_rounds: u64,
    /// Rounds charged without simulation.
    pub charged_rounds: u64,
    pub tree: SpanningTree,
    pub colors_used: usize,
    /// MTM rounds per simulated CONGEST round.
    pub congest_round_len: u64,
}

/// Proper edge coloring of a tree with Delta(T) colors, `0..Delta(T)`.
pub fn tree_edge_coloring(tree: &SpanningTree, root: NodeId) -> BTreeMap<(NodeId, NodeId), usize> {
    let (parent, order) = tree.rooted(root);
    let mut up_color: Vec<Option<usize>> = vec![None; tree.n()];
    let mut colors = BTreeMap::new();
    for &v in &order {
        let mut c = 0;
        for w in tree.neighbors(v) {
            if parent[v] == Some(w) {
                continue;
            }
            if up_color[v] == Some(c) {
                c += 1;
            }
            up_color[w] = Some(c);
            colors.insert((v.min(w), v.max(w)), c);
            c += 1;
        }
    }
    colors
}

struct Prepared {
    tree: SpanningTree,
    coloring: BTreeMap<(NodeId, NodeId), usize>,
    setup: Trace,
    charged: u64,
}

fn prepare(g: &Graph, root: NodeId, cfg: &ProtocolConfig) -> Result<Prepared, ProtocolError> {
    if root >= g.n() {
        return Err(ProtocolError::BadSource(root));
    }
    if !g.is_connected() {
        return Err(ProtocolError::Disconnected);
    }
    let tree = match &cfg.tree {
        TreeSource::LocalSearch => graphs::mdst_local_search(g)?,
        TreeSource::Provided(t) => t.clone(),
    };
    let charged = if cfg.charge_topology { g.diameter().unwrap_or(0) as u64 + g.m() as u64 } else { 0 };
    let budget = cfg.sim.ad_budget_bits(g.n());
    let mut setup = Trace::new(g.n(), cfg.sim.mode, budget);
    let coloring = match cfg.coloring {
        ColoringMode::Centralized => tree_edge_coloring(&tree, root),
        ColoringMode::Distributed { attempts, budget_factor } => {
            let edges = tree.edges();
            let mut found = None;
            for attempt in 0..attempts {
                let sim = SimConfig { seed: seed::derive_seed(cfg.sim.seed, "tree-coloring", attempt as u64), ..cfg.sim };
                let (col, trace) = mtmsim::edge_color_mtm(g, Some(&edges), tree.max_degree(), budget_factor, sim)?;
                setup.append(trace);
                let local_ok: Vec<bool> = (0..g.n())
                    .map(|v| {
                        let mine: Vec<usize> = tree
                            .neighbors(v)
                            .filter_map(|w| col.colors.get(&(v.min(w), v.max(w))).copied())
                            .collect();
                        mine.len() == tree.degree(v) && mine.iter().collect::<BTreeSet<_>>().len() == mine.len()
                    })
                    .collect();
                let (ok, check) = mtmsim::tree_validity_check(&tree, root, &local_ok, sim)?;
                setup.append(check);
                if ok {
                    found = Some(col.colors);
                    break;
                }
            }
            let colors = found.ok_or(ProtocolError::ColoringFailed(attempts))?;
            let used: BTreeSet<usize> = colors.values().copied().collect();
            let dense: BTreeMap<usize, usize> = used.into_iter().enumerate().map(|(i, c)| (c, i)).collect();
            colors.into_iter().map(|(e, c)| (e, dense[&c])).collect()
        }
    };
    Ok(Prepared { tree, coloring, setup, charged })
}

/// Pipelined flooding down a rooted tree: the root injects packet `r` in CONGEST round `r`,
/// and every node forwards packets to each child in index order.
#[derive(Debug, Clone)]
pub struct FloodProgram {
    is_source: bool,
    children: Vec<NodeId>,
    have: u64,
    sent: Vec<u64>,
    /// (CONGEST round, sender, packet) for every receipt.
    pub log: Vec<(u64, NodeId, Packet)>,
}

impl FloodProgram {
    pub fn for_tree(tree: &SpanningTree, root: NodeId) -> Vec<FloodProgram> {
        let (parent, _) = tree.rooted(root);
        (0..tree.n())
            .map(|v| {
                let children: Vec<NodeId> = tree.neighbors(v).filter(|&w| parent[v] != Some(w)).collect();
                FloodProgram { is_source: v == root, sent: vec![0; children.len()], children, have: 0, log: Vec::new() }
            })
            .collect()
    }

    pub fn received(&self) -> u64 {
        self.have
    }
}

impl CongestProgram for FloodProgram {
    fn send(&mut self, round: u64) -> Vec<(NodeId, Packet)> {
        if self.is_source {
            self.have = round;
        }
        let mut out = Vec::new();
        for (c, sent) in self.children.iter().zip(&mut self.sent) {
            if *sent < self.have {
                *sent += 1;
                out.push((*c, Packet { commodity: 0, index: *sent }));
            }
        }
        out
    }

    fn receive(&mut self, round: u64, inbox: Vec<(NodeId, Packet)>) {
        for (from, p) in inbox {
            debug_assert_eq!(p.index, self.have + 1, "tree delivers in order");
            self.have = self.have.max(p.index);
            self.log.push((round, from, p));
        }
    }
}

fn tree_depth(tree: &SpanningTree, root: NodeId) -> u64 {
    let (parent, order) = tree.rooted(root);
    let mut depth = vec![0u64; tree.n()];
    for &v in &order {
        if let Some(p) = parent[v] {
            depth[v] = depth[p] + 1;
        }
    }
    depth.into_iter().max().unwrap_or(0)
}

/// SB(s) for `rounds` MTM rounds of streaming after setup.
pub fn sb_broadcast(g: &Graph, source: NodeId, cfg: &ProtocolConfig, rounds: u64) -> Result<ProtocolResult, ProtocolError> {
    let prep = prepare(g, source, cfg)?;
    let f = FlowSet::broadcast(g.n(), source)?;
    if g.n() == 1 {
        return Err(ProtocolError::TooFewRounds { rounds, fill: 0 });
    }
    let layer = CongestLayer::new(&prep.tree, source, &prep.coloring, Direction::OneWay)?;
    let len = layer.mtm_rounds_per_congest_round();
    let fill = (tree_depth(&prep.tree, source) + 1) * len;
    if rounds < fill + len {
        return Err(ProtocolError::TooFewRounds { rounds, fill });
    }
    let programs = CongestNode::wrap(&layer, FloodProgram::for_tree(&prep.tree, source));
    let sim_cfg = SimConfig { max_rounds: rounds, ..cfg.sim };
    let mut sim = Simulator::new(g, programs, sim_cfg)?;
    sim.mark("stream start");
    sim.run_rounds(rounds)?;
    let (_, stream) = sim.into_parts();
    let setup_rounds = prep.setup.total_rounds;
    let mut trace = prep.setup;
    trace.append(stream);
    let end = setup_rounds + rounds / len * len;
    let report = capacity::evaluate_trace_throughput(&f, &trace, (setup_rounds + fill, end), len)?;
    Ok(ProtocolResult {
        trace,
        report,
        setup_rounds,
        charged_rounds: prep.charged,
        colors_used: layer.colors,
        tree: prep.tree,
        congest_round_len: len,
    })
}

/// Broadcast gossip in CONGEST: each round a node dequeues one message and sends it to every
/// neighbor; unseen messages are queued.
#[derive(Debug, Clone)]
pub struct GossipProgram {
    neighbors: Vec<NodeId>,
    pub state: GossipState,
    total: usize,
}

impl GossipProgram {
    pub fn new(neighbors: Vec<NodeId>, initial: &[Packet], total: usize) -> Self {
        let mut state = GossipState::default();
        for &p in initial {
            state.seed(p);
        }
        GossipProgram { neighbors, state, total }
    }
}

impl CongestProgram for GossipProgram {
    fn send(&mut self, _round: u64) -> Vec<(NodeId, Packet)> {
        match self.state.next() {
            Some(p) => self.neighbors.iter().map(|&w| (w, p)).collect(),
            None => Vec::new(),
        }
    }

    fn receive(&mut self, _round: u64, inbox: Vec<(NodeId, Packet)>) {
        self.state.absorb(&inbox);
    }

    fn done(&self) -> bool {
        self.state.known.len() == self.total
    }
}

/// First CONGEST round by which every node holds every initial message, or `None` if
/// `max_rounds` was not enough.
pub fn broadcast_gossip_congest(g: &Graph, initial: &[Vec<Packet>], max_rounds: u64) -> Option<u64> {
    let all: BTreeSet<Packet> = initial.iter().flatten().copied().collect();
    let mut programs: Vec<GossipProgram> = (0..g.n())
        .map(|v| GossipProgram::new(g.neighbors(v).to_vec(), &initial[v], all.len()))
        .collect();
    if programs.iter().all(CongestProgram::done) {
        return Some(0);
    }
    let adj: Vec<Vec<NodeId>> = (0..g.n()).map(|v| g.neighbors(v).to_vec()).collect();
    let log = mtmsim::run_congest(&adj, &mut programs, max_rounds);
    programs.iter().all(CongestProgram::done).then_some(log.len() as u64)
}

/// One SG node: for token index `i`, gossips every node's `i`-th token over the tree for a
/// fixed budget of CONGEST rounds, then moves on.
#[derive(Debug, Clone)]
pub struct SgProgram {
    id: NodeId,
    neighbors: Vec<NodeId>,
    n: usize,
    budget: u64,
    tokens: u64,
    index: u64,
    state: GossipState,
    /// Indices for which this node held all `n` tokens when the budget ran out.
    pub completed: u64,
}

impl SgProgram {
    fn current(&mut self, round: u64) -> Option<u64> {
        let i = (round - 1) / self.budget + 1;
        if i > self.tokens {
            return None;
        }
        if i != self.index {
            self.index = i;
            self.state = GossipState::default();
            self.state.seed(Packet { commodity: self.id, index: i });
        }
        Some(i)
    }
}

impl CongestProgram for SgProgram {
    fn send(&mut self, round: u64) -> Vec<(NodeId, Packet)> {
        if self.current(round).is_none() {
            return Vec::new();
        }
        match self.state.next() {
            Some(p) => self.neighbors.iter().map(|&w| (w, p)).collect(),
            None => Vec::new(),
        }
    }

    fn receive(&mut self, round: u64, inbox: Vec<(NodeId, Packet)>) {
        if self.current(round).is_none() {
            return;
        }
        self.state.absorb(&inbox);
        if round % self.budget == 0 && self.state.known.len() == self.n {
            self.completed += 1;
        }
    }

    fn done(&self) -> bool {
        self.index == self.tokens && self.state.known.len() == self.n
    }
}

fn sg_programs(tree: &SpanningTree, budget: u64, tokens: u64) -> Vec<SgProgram> {
    (0..tree.n())
        .map(|v| SgProgram {
            id: v,
            neighbors: tree.neighbors(v).collect(),
            n: tree.n(),
            budget,
            tokens,
            index: 0,
            state: GossipState::default(),
            completed: 0,
        })
        .collect()
}

/// CONGEST rounds given to each token index: D(T) + n.
pub fn sg_budget(tree: &SpanningTree) -> u64 {
    tree.diameter() as u64 + tree.n() as u64
}

#[derive(Debug, Clone)]
pub struct SgOutcome {
    pub result: ProtocolResult,
    /// Per node, how many token indices completed within their budget.
    pub completed: Vec<u64>,
    pub budget: u64,
}

/// SG all-to-all streaming of `tokens` indices per node.
pub fn sg_all_to_all(g: &Graph, cfg: &ProtocolConfig, tokens: u64) -> Result<SgOutcome, ProtocolError> {
    if tokens < 2 {
        return Err(ProtocolError::TooFewTokens(2));
    }
    let prep = prepare(g, 0, cfg)?;
    let f = FlowSet::all_to_all(g.n());
    let layer = CongestLayer::new(&prep.tree, 0, &prep.coloring, Direction::TwoWay)?;
    let len = layer.mtm_rounds_per_congest_round();
    let budget = sg_budget(&prep.tree);
    let rounds = tokens * budget * len;
    let programs = CongestNode::wrap(&layer, sg_programs(&prep.tree, budget, tokens));
    let mut sim = Simulator::new(g, programs, SimConfig { max_rounds: rounds, ..cfg.sim })?;
    sim.mark("stream start");
    sim.run_rounds(rounds)?;
    let (programs, stream) = sim.into_parts();
    let completed = programs.iter().map(|p| p.program.completed).collect();
    let setup_rounds = prep.setup.total_rounds;
    let mut trace = prep.setup;
    trace.append(stream);
    let stride = budget * len;
    let report = capacity::evaluate_trace_throughput(&f, &trace, (setup_rounds + stride, setup_rounds + rounds), stride)?;
    Ok(SgOutcome {
        result: ProtocolResult {
            trace,
            report,
            setup_rounds,
            charged_rounds: prep.charged,
            colors_used: layer.colors,
            tree: prep.tree,
            congest_round_len: len,
        },
        completed,
        budget,
    })
}

#[derive(Debug, Clone)]
pub struct OneShot {
    /// Total MTM rounds including simulated setup.
    pub rounds: u64,
    pub setup_rounds: u64,
    pub charged_rounds: u64,
    pub tree_degree: usize,
    pub congest_round_len: u64,
}

/// Every node spreads one token to all others; SG with a single index, run to completion.
pub fn one_shot_gossip(g: &Graph, cfg: &ProtocolConfig) -> Result<OneShot, ProtocolError> {
    let prep = prepare(g, 0, cfg)?;
    let layer = CongestLayer::new(&prep.tree, 0, &prep.coloring, Direction::TwoWay)?;
    let len = layer.mtm_rounds_per_congest_round();
    let budget = sg_budget(&prep.tree);
    let programs = CongestNode::wrap(&layer, sg_programs(&prep.tree, budget, 1));
    let sim_cfg = SimConfig { max_rounds: budget * len, trace: TraceDetail::Off, ..cfg.sim };
    let mut sim = Simulator::new(g, programs, sim_cfg)?;
    let used = sim.run_until_done()?;
    Ok(OneShot {
        rounds: prep.setup.total_rounds + used,
        setup_rounds: prep.setup.total_rounds,
        charged_rounds: prep.charged,
        tree_degree: prep.tree.max_degree(),
        congest_round_len: len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::Rate;

    #[test]
    fn tree_coloring_uses_max_degree_colors() {
        let g = Graph::spider(&[2, 2, 2, 2]);
        let t = SpanningTree::of_tree(&g).unwrap();
        for root in 0..g.n() {
            let c = tree_edge_coloring(&t, root);
            assert!(mtmsim::is_proper_edge_coloring(&c));
            assert_eq!(c.values().max(), Some(&3));
        }
    }

    #[test]
    fn sb_on_a_path_delivers_every_other_round() {
        let g = Graph::path(8);
        let r = sb_broadcast(&g, 0, &ProtocolConfig::default(), 200).unwrap();
        assert_eq!(r.colors_used, 2);
        assert_eq!(r.report.throughput, Rate::new(1, 2));
        assert_eq!(r.trace.first_link_violation(), None);
    }

    #[test]
    fn sb_on_a_single_edge_has_throughput_one() {
        let g = Graph::path(2);
        let r = sb_broadcast(&g, 0, &ProtocolConfig::default(), 20).unwrap();
        assert_eq!(r.report.throughput, Rate::from_integer(1));
    }

    #[test]
    fn gossip_on_a_path() {
        let g = Graph::path(5);
        let p = |c, i| Packet { commodity: c, index: i };
        let mut init = vec![Vec::new(); 5];
        init[0].push(p(0, 1));
        assert_eq!(broadcast_gossip_congest(&g, &init, 100), Some(4));
        init[4].push(p(4, 1));
        assert!(broadcast_gossip_congest(&g, &init, 100).unwrap() <= 6);
    }

    #[test]
    fn sg_on_two_nodes() {
        let g = Graph::path(2);
        let out = sg_all_to_all(&g, &ProtocolConfig::default(), 4).unwrap();
        assert_eq!(out.budget, 3);
        assert_eq!(out.result.report.throughput, Rate::new(1, 6));
        assert!(out.completed.iter().all(|&c| c == 4));
    }

    #[test]
    fn one_shot_on_two_nodes() {
        let g = Graph::path(2);
        let o = one_shot_gossip(&g, &ProtocolConfig::default()).unwrap();
        assert!(o.rounds >= 1 && o.rounds <= 6);
    }
}
