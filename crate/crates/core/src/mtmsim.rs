//! Round-based simulator of the mobile telephone model.
//!
//! Every round runs advertise, invite, accept and transfer for all nodes. Programs see only
//! their neighbors' advertisements and whatever arrives over their own connection.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::LinkMode;
use crate::graphs::{Graph, NodeId, SpanningTree};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("round {round}: node {node} advertised {bits} bits, budget is {budget}")]
    AdTooLarge { round: u64, node: NodeId, bits: usize, budget: usize },
    #[error("round {round}: node {node} invited non-neighbor {target}")]
    NotNeighbor { round: u64, node: NodeId, target: NodeId },
    #[error("round {round}: node {node} accepted {chosen}, which did not invite it")]
    BadAccept { round: u64, node: NodeId, chosen: NodeId },
    #[error("round {round}: more than one packet on connection {a}-{b}")]
    PacketBudget { round: u64, a: NodeId, b: NodeId },
    #[error("round budget of {0} exhausted")]
    RoundBudget(u64),
    #[error("one program per node required: {programs} programs for {n} nodes")]
    ProgramCount { programs: usize, n: usize },
    #[error("invalid edge coloring: {0}")]
    InvalidColoring(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TraceDetail {
    /// Every connection, including those that carried no packet.
    #[default]
    Full,
    /// Only connections that moved a flow packet.
    PacketsOnly,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub mode: LinkMode,
    /// B in the advertisement budget B * ceil(log2 n).
    pub ad_bits_multiplier: usize,
    pub max_rounds: u64,
    pub seed: u64,
    pub trace: TraceDetail,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            mode: LinkMode::Strict,
            ad_bits_multiplier: 4,
            max_rounds: 1_000_000,
            seed: seed::DEFAULT_SEED,
            trace: TraceDetail::Full,
        }
    }
}

/// Bits needed for one node id, at least 1.
pub fn id_bits(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()).max(1) as usize
}

impl SimConfig {
    pub fn ad_budget_bits(&self, n: usize) -> usize {
        self.ad_bits_multiplier * id_bits(n)
    }
}

pub trait Advertisement {
    fn bits(&self, n: usize) -> usize;
}

impl Advertisement for () {
    fn bits(&self, _n: usize) -> usize {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Packet {
    pub commodity: usize,
    pub index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Listen,
    Invite(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission<C> {
    pub packet: Option<Packet>,
    pub control: Option<C>,
}

impl<C> Default for Transmission<C> {
    fn default() -> Self {
        Transmission { packet: None, control: None }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RoundCtx<'a> {
    /// 1-based.
    pub round: u64,
    pub node: NodeId,
    pub n: usize,
    pub neighbors: &'a [NodeId],
}

pub trait NodeProgram {
    type Ad: Advertisement + Clone;
    type Ctrl: Clone;

    /// Programs that ignore neighbor advertisements skip their delivery entirely.
    const READS_ADS: bool = true;

    fn advertise(&mut self, ctx: &RoundCtx) -> Self::Ad;

    fn decide(
        &mut self,
        ctx: &RoundCtx,
        ads: &[(NodeId, Self::Ad)],
        rng: &mut ChaCha8Rng,
    ) -> Decision;

    /// `inviters` is sorted ascending.
    fn accept(&mut self, _ctx: &RoundCtx, inviters: &[NodeId], _rng: &mut ChaCha8Rng) -> Option<NodeId> {
        inviters.first().copied()
    }

    fn transmit(&mut self, _ctx: &RoundCtx, _peer: NodeId, _initiator: bool) -> Transmission<Self::Ctrl> {
        Transmission::default()
    }

    fn receive(&mut self, _ctx: &RoundCtx, _peer: NodeId, _msg: Transmission<Self::Ctrl>) {}

    fn end_round(&mut self, _ctx: &RoundCtx) {}

    fn done(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketMove {
    pub from: NodeId,
    pub to: NodeId,
    pub commodity: usize,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionRecord {
    /// Initiator.
    pub a: NodeId,
    pub b: NodeId,
    pub packets: Vec<PacketMove>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub connections: Vec<ConnectionRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestone {
    pub round: u64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub n: usize,
    pub mode: LinkMode,
    pub rounds: Vec<RoundRecord>,
    pub milestones: Vec<Milestone>,
    /// Rounds simulated, including rounds with nothing recorded.
    pub total_rounds: u64,
    pub max_ad_bits: usize,
    pub ad_budget_bits: usize,
}

impl Trace {
    pub fn new(n: usize, mode: LinkMode, ad_budget_bits: usize) -> Self {
        Trace {
            n,
            mode,
            rounds: Vec::new(),
            milestones: Vec::new(),
            total_rounds: 0,
            max_ad_bits: 0,
            ad_budget_bits,
        }
    }

    /// Appends `other` as if its round 1 followed our last round.
    pub fn append(&mut self, other: Trace) {
        let shift = self.total_rounds;
        self.rounds.extend(other.rounds.into_iter().map(|mut r| {
            r.round += shift;
            r
        }));
        self.milestones.extend(other.milestones.into_iter().map(|mut m| {
            m.round += shift;
            m
        }));
        self.total_rounds += other.total_rounds;
        self.max_ad_bits = self.max_ad_bits.max(other.max_ad_bits);
    }

    pub fn milestone(&self, label: &str) -> Option<u64> {
        self.milestones.iter().find(|m| m.label == label).map(|m| m.round)
    }

    /// First round whose connections break the link-mode constraint.
    pub fn first_link_violation(&self) -> Option<u64> {
        for rec in &self.rounds {
            let mut out: HashMap<NodeId, usize> = HashMap::new();
            let mut inc: HashMap<NodeId, usize> = HashMap::new();
            for c in &rec.connections {
                let bad = match self.mode {
                    LinkMode::Strict => [c.a, c.b].iter().any(|&v| {
                        let e = out.entry(v).or_default();
                        *e += 1;
                        *e > 1
                    }),
                    LinkMode::Duplex => {
                        let o = out.entry(c.a).or_default();
                        *o += 1;
                        let i = inc.entry(c.b).or_default();
                        *i += 1;
                        *o > 1 || *i > 1
                    }
                };
                let too_many = match self.mode {
                    LinkMode::Strict => c.packets.len() > 1,
                    LinkMode::Duplex => c.packets.len() > 1 || c.packets.iter().any(|p| p.from != c.a),
                };
                if bad || too_many {
                    return Some(rec.round);
                }
            }
        }
        None
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.rounds {
            out.push_str(&serde_json::to_string(rec).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

pub struct Simulator<'g, P: NodeProgram> {
    g: &'g Graph,
    programs: Vec<P>,
    rngs: Vec<ChaCha8Rng>,
    cfg: SimConfig,
    round: u64,
    trace: Trace,
    budget: usize,
}

impl<'g, P: NodeProgram> Simulator<'g, P> {
    pub fn new(g: &'g Graph, programs: Vec<P>, cfg: SimConfig) -> Result<Self, SimError> {
        let n = g.n();
        if programs.len() != n {
            return Err(SimError::ProgramCount { programs: programs.len(), n });
        }
        let rngs = (0..n).map(|v| seed::sub_rng(cfg.seed, "node", v as u64)).collect();
        let budget = cfg.ad_budget_bits(n);
        Ok(Simulator {
            g,
            programs,
            rngs,
            cfg,
            round: 0,
            trace: Trace::new(n, cfg.mode, budget),
            budget,
        })
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn programs(&self) -> &[P] {
        &self.programs
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn all_done(&self) -> bool {
        self.programs.iter().all(P::done)
    }

    pub fn mark(&mut self, label: impl Into<String>) {
        self.trace.milestones.push(Milestone { round: self.round, label: label.into() });
    }

    pub fn into_parts(self) -> (Vec<P>, Trace) {
        (self.programs, self.trace)
    }

    pub fn step(&mut self) -> Result<(), SimError> {
        self.round += 1;
        let round = self.round;
        let n = self.g.n();
        let g = self.g;
        let ctx = |v: NodeId| RoundCtx { round, node: v, n, neighbors: g.neighbors(v) };

        let mut ads = Vec::with_capacity(n);
        for v in 0..n {
            let ad = self.programs[v].advertise(&ctx(v));
            let bits = ad.bits(n);
            if bits > self.budget {
                return Err(SimError::AdTooLarge { round, node: v, bits, budget: self.budget });
            }
            self.trace.max_ad_bits = self.trace.max_ad_bits.max(bits);
            ads.push(ad);
        }

        let mut invites: Vec<Option<NodeId>> = vec![None; n];
        let mut seen = Vec::new();
        for v in 0..n {
            seen.clear();
            if P::READS_ADS {
                seen.extend(g.neighbors(v).iter().map(|&u| (u, ads[u].clone())));
            }
            if let Decision::Invite(u) = self.programs[v].decide(&ctx(v), &seen, &mut self.rngs[v]) {
                if !g.has_edge(v, u) {
                    return Err(SimError::NotNeighbor { round, node: v, target: u });
                }
                invites[v] = Some(u);
            }
        }

        let mut inbound: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (v, inv) in invites.iter().enumerate() {
            if let Some(u) = *inv {
                // A strict-mode initiator is not listening.
                if self.cfg.mode == LinkMode::Duplex || invites[u].is_none() {
                    inbound.entry(u).or_default().push(v);
                }
            }
        }
        let mut connections = Vec::new();
        for (b, inviters) in inbound {
            if let Some(a) = self.programs[b].accept(&ctx(b), &inviters, &mut self.rngs[b]) {
                if !inviters.contains(&a) {
                    return Err(SimError::BadAccept { round, node: b, chosen: a });
                }
                connections.push((a, b));
            }
        }

        let mut sends = Vec::with_capacity(connections.len());
        for &(a, b) in &connections {
            let ta = self.programs[a].transmit(&ctx(a), b, true);
            let tb = self.programs[b].transmit(&ctx(b), a, false);
            let both = ta.packet.is_some() && tb.packet.is_some();
            let backwards = self.cfg.mode == LinkMode::Duplex && tb.packet.is_some();
            if both || backwards {
                return Err(SimError::PacketBudget { round, a, b });
            }
            sends.push((ta, tb));
        }
        let mut records = Vec::new();
        for (&(a, b), (ta, tb)) in connections.iter().zip(sends) {
            let mut packets = Vec::new();
            if let Some(p) = ta.packet {
                packets.push(PacketMove { from: a, to: b, commodity: p.commodity, index: p.index });
            }
            if let Some(p) = tb.packet {
                packets.push(PacketMove { from: b, to: a, commodity: p.commodity, index: p.index });
            }
            self.programs[b].receive(&ctx(b), a, ta);
            self.programs[a].receive(&ctx(a), b, tb);
            let keep = match self.cfg.trace {
                TraceDetail::Full => true,
                TraceDetail::PacketsOnly => !packets.is_empty(),
                TraceDetail::Off => false,
            };
            if keep {
                records.push(ConnectionRecord { a, b, packets });
            }
        }
        for v in 0..n {
            self.programs[v].end_round(&ctx(v));
        }
        if !records.is_empty() {
            self.trace.rounds.push(RoundRecord { round, connections: records });
        }
        self.trace.total_rounds = round;
        Ok(())
    }

    pub fn run_rounds(&mut self, rounds: u64) -> Result<(), SimError> {
        for _ in 0..rounds {
            if self.round >= self.cfg.max_rounds {
                return Err(SimError::RoundBudget(self.cfg.max_rounds));
            }
            self.step()?;
        }
        Ok(())
    }

    /// Runs until every program reports done. Returns the number of rounds used.
    pub fn run_until_done(&mut self) -> Result<u64, SimError> {
        while !self.all_done() {
            if self.round >= self.cfg.max_rounds {
                return Err(SimError::RoundBudget(self.cfg.max_rounds));
            }
            self.step()?;
        }
        Ok(self.round)
    }
}

/// Runs one program per node until all are done or the round budget is exhausted.
pub fn run_simulation<P: NodeProgram>(
    g: &Graph,
    programs: Vec<P>,
    cfg: SimConfig,
) -> Result<(Vec<P>, Trace), SimError> {
    let mut sim = Simulator::new(g, programs, cfg)?;
    match sim.run_until_done() {
        Ok(_) | Err(SimError::RoundBudget(_)) => Ok(sim.into_parts()),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone)]
pub struct MatchAd {
    pub id: NodeId,
    pub matched: bool,
    /// Exactly one unmatched candidate remains, as of the previous round.
    pub single: bool,
}

impl Advertisement for MatchAd {
    fn bits(&self, n: usize) -> usize {
        id_bits(n) + 2
    }
}

/// Israeli–Itai style matching over a node's candidate edges.
#[derive(Debug, Clone)]
struct MatchState {
    candidates: BTreeSet<NodeId>,
    matched: Option<NodeId>,
    /// Candidates last seen unmatched.
    open: BTreeSet<NodeId>,
    inviting: bool,
}

impl MatchState {
    fn new(candidates: BTreeSet<NodeId>) -> Self {
        let open = candidates.clone();
        MatchState { candidates, matched: None, open, inviting: false }
    }

    fn ad(&self, id: NodeId) -> MatchAd {
        MatchAd { id, matched: self.matched.is_some(), single: self.open.len() == 1 }
    }

    fn decide(&mut self, id: NodeId, ads: &[(NodeId, MatchAd)], rng: &mut ChaCha8Rng) -> Decision {
        let d = self.choose(id, ads, rng);
        self.inviting = matches!(d, Decision::Invite(_));
        d
    }

    fn choose(&mut self, id: NodeId, ads: &[(NodeId, MatchAd)], rng: &mut ChaCha8Rng) -> Decision {
        let mut single_of = HashMap::new();
        self.open.clear();
        for (u, ad) in ads {
            if self.candidates.contains(u) && !ad.matched {
                self.open.insert(*u);
                single_of.insert(*u, ad.single);
            }
        }
        if self.matched.is_some() || self.open.is_empty() {
            return Decision::Listen;
        }
        if self.open.len() == 1 {
            let u = *self.open.first().unwrap();
            if single_of[&u] {
                return if id < u { Decision::Invite(u) } else { Decision::Listen };
            }
        }
        if rng.gen_bool(0.5) {
            let open: Vec<_> = self.open.iter().copied().collect();
            Decision::Invite(*open.choose(rng).unwrap())
        } else {
            Decision::Listen
        }
    }

    fn accept(&self, inviters: &[NodeId]) -> Option<NodeId> {
        if self.matched.is_some() || self.inviting {
            return None;
        }
        inviters.iter().copied().find(|u| self.candidates.contains(u))
    }

    fn finished(&self) -> bool {
        self.matched.is_some() || self.open.is_empty()
    }
}

pub struct MatchingNode {
    id: NodeId,
    state: MatchState,
}

impl MatchingNode {
    pub fn matched(&self) -> Option<NodeId> {
        self.state.matched
    }
}

impl NodeProgram for MatchingNode {
    type Ad = MatchAd;
    type Ctrl = ();

    fn advertise(&mut self, _ctx: &RoundCtx) -> MatchAd {
        self.state.ad(self.id)
    }

    fn decide(&mut self, _ctx: &RoundCtx, ads: &[(NodeId, MatchAd)], rng: &mut ChaCha8Rng) -> Decision {
        self.state.decide(self.id, ads, rng)
    }

    fn accept(&mut self, _ctx: &RoundCtx, inviters: &[NodeId], _rng: &mut ChaCha8Rng) -> Option<NodeId> {
        self.state.accept(inviters)
    }

    fn receive(&mut self, _ctx: &RoundCtx, peer: NodeId, _msg: Transmission<()>) {
        self.state.matched = Some(peer);
    }

    fn done(&self) -> bool {
        self.state.finished()
    }
}

/// Default C in the C * ceil(log2 n) round budget.
pub const MATCHING_BUDGET_FACTOR: u64 = 8;

pub fn matching_budget(n: usize, factor: u64) -> u64 {
    factor * id_bits(n) as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingResult {
    pub edges: Vec<(NodeId, NodeId)>,
    pub rounds: u64,
    pub is_matching: bool,
    pub maximal: bool,
}

/// Randomized maximal matching among `edges` (all of `g` if `None`) within the round budget.
pub fn israeli_itai_matching(
    g: &Graph,
    edges: Option<&[(NodeId, NodeId)]>,
    budget_rounds: u64,
    cfg: SimConfig,
) -> Result<(MatchingResult, Trace), SimError> {
    let n = g.n();
    let mut cand = vec![BTreeSet::new(); n];
    let all = g.edges();
    for &(u, v) in edges.unwrap_or(&all) {
        cand[u].insert(v);
        cand[v].insert(u);
    }
    let programs = cand
        .into_iter()
        .enumerate()
        .map(|(id, c)| MatchingNode { id, state: MatchState::new(c) })
        .collect();
    let cfg = SimConfig { max_rounds: budget_rounds, ..cfg };
    let mut sim = Simulator::new(g, programs, cfg)?;
    let rounds = match sim.run_until_done() {
        Ok(r) => r,
        Err(SimError::RoundBudget(_)) => sim.round(),
        Err(e) => return Err(e),
    };
    sim.mark("matching finalized");
    let (programs, trace) = sim.into_parts();
    let mut matched = vec![None; n];
    let mut out = Vec::new();
    for (v, p) in programs.iter().enumerate() {
        matched[v] = p.matched();
        if let Some(u) = p.matched() {
            if v < u {
                out.push((v, u));
            }
        }
    }
    let is_matching = (0..n).all(|v| matched[v].map_or(true, |u| matched[u] == Some(v)));
    let maximal = edges
        .unwrap_or(&all)
        .iter()
        .all(|&(u, v)| matched[u].is_some() || matched[v].is_some());
    Ok((MatchingResult { edges: out, rounds, is_matching, maximal }, trace))
}

/// 2Δ-1 phases of matching; phase p colors its matched edges with color p.
pub struct EdgeColorNode {
    id: NodeId,
    state: MatchState,
    phase_len: u64,
    phases: u64,
    colors: BTreeMap<NodeId, usize>,
}

impl EdgeColorNode {
    pub fn colors(&self) -> &BTreeMap<NodeId, usize> {
        &self.colors
    }

    fn phase_of(&self, round: u64) -> u64 {
        (round - 1) / self.phase_len
    }
}

impl NodeProgram for EdgeColorNode {
    type Ad = MatchAd;
    type Ctrl = ();

    fn advertise(&mut self, _ctx: &RoundCtx) -> MatchAd {
        self.state.ad(self.id)
    }

    fn decide(&mut self, ctx: &RoundCtx, ads: &[(NodeId, MatchAd)], rng: &mut ChaCha8Rng) -> Decision {
        if self.phase_of(ctx.round) >= self.phases {
            return Decision::Listen;
        }
        self.state.decide(self.id, ads, rng)
    }

    fn accept(&mut self, ctx: &RoundCtx, inviters: &[NodeId], _rng: &mut ChaCha8Rng) -> Option<NodeId> {
        if self.phase_of(ctx.round) >= self.phases {
            return None;
        }
        self.state.accept(inviters)
    }

    fn receive(&mut self, _ctx: &RoundCtx, peer: NodeId, _msg: Transmission<()>) {
        self.state.matched = Some(peer);
    }

    fn end_round(&mut self, ctx: &RoundCtx) {
        if ctx.round % self.phase_len != 0 {
            return;
        }
        let color = self.phase_of(ctx.round) as usize + 1;
        if let Some(u) = self.state.matched.take() {
            self.colors.insert(u, color);
            self.state.candidates.remove(&u);
        }
        self.state.open = self.state.candidates.clone();
    }

    fn done(&self) -> bool {
        self.state.candidates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeColoring {
    /// Color per edge `(u, v)` with `u < v`; colors start at 1.
    pub colors: BTreeMap<(NodeId, NodeId), usize>,
    pub palette: usize,
    pub rounds: u64,
    pub complete: bool,
    pub valid: bool,
}

impl EdgeColoring {
    pub fn colors_used(&self) -> usize {
        self.colors.values().collect::<BTreeSet<_>>().len()
    }
}

/// Checks that edges sharing an endpoint have distinct colors.
pub fn is_proper_edge_coloring(colors: &BTreeMap<(NodeId, NodeId), usize>) -> bool {
    let mut at: HashMap<(NodeId, usize), usize> = HashMap::new();
    for (&(u, v), &c) in colors {
        for w in [u, v] {
            let e = at.entry((w, c)).or_default();
            *e += 1;
            if *e > 1 {
                return false;
            }
        }
    }
    true
}

/// Distributed (2Δ-1)-edge coloring of `edges` (all of `g` if `None`).
pub fn edge_color_mtm(
    g: &Graph,
    edges: Option<&[(NodeId, NodeId)]>,
    delta_bound: usize,
    budget_factor: u64,
    cfg: SimConfig,
) -> Result<(EdgeColoring, Trace), SimError> {
    let n = g.n();
    let all = g.edges();
    let edges = edges.unwrap_or(&all);
    let mut cand = vec![BTreeSet::new(); n];
    for &(u, v) in edges {
        cand[u].insert(v);
        cand[v].insert(u);
    }
    let phase_len = matching_budget(n, budget_factor);
    let phases = (2 * delta_bound).saturating_sub(1) as u64;
    let programs = cand
        .into_iter()
        .enumerate()
        .map(|(id, c)| EdgeColorNode {
            id,
            state: MatchState::new(c),
            phase_len,
            phases,
            colors: BTreeMap::new(),
        })
        .collect();
    let cfg = SimConfig { max_rounds: phase_len * phases, ..cfg };
    let mut sim = Simulator::new(g, programs, cfg)?;
    let rounds = match sim.run_until_done() {
        Ok(r) => r,
        Err(SimError::RoundBudget(_)) => sim.round(),
        Err(e) => return Err(e),
    };
    sim.mark("coloring finalized");
    let (programs, trace) = sim.into_parts();
    let mut colors = BTreeMap::new();
    let mut consistent = true;
    for (v, p) in programs.iter().enumerate() {
        for (&u, &c) in p.colors() {
            let key = (v.min(u), v.max(u));
            if let Some(prev) = colors.insert(key, c) {
                consistent &= prev == c;
            }
        }
    }
    let complete = edges.iter().all(|&(u, v)| colors.contains_key(&(u.min(v), u.max(v))));
    let valid = consistent && is_proper_edge_coloring(&colors);
    let palette = phases as usize;
    Ok((EdgeColoring { colors, palette, rounds, complete, valid }, trace))
}

/// Convergecast of per-node validity bits up a rooted tree, then broadcast of the verdict.
pub struct TreeCheckNode {
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    reported: BTreeSet<NodeId>,
    ok: bool,
    sent_up: bool,
    verdict: Option<bool>,
    informed: usize,
}

impl TreeCheckNode {
    pub fn verdict(&self) -> Option<bool> {
        self.verdict
    }
}

#[derive(Debug, Clone)]
pub struct StateAd;

impl Advertisement for StateAd {
    fn bits(&self, n: usize) -> usize {
        id_bits(n) + 2
    }
}

impl NodeProgram for TreeCheckNode {
    type Ad = StateAd;
    type Ctrl = bool;
    const READS_ADS: bool = false;

    fn advertise(&mut self, _ctx: &RoundCtx) -> StateAd {
        StateAd
    }

    fn decide(&mut self, _ctx: &RoundCtx, _ads: &[(NodeId, StateAd)], _rng: &mut ChaCha8Rng) -> Decision {
        let all_in = self.reported.len() == self.children.len();
        match (self.verdict, self.parent) {
            (None, Some(p)) if all_in && !self.sent_up => Decision::Invite(p),
            (Some(_), _) if self.informed < self.children.len() => {
                Decision::Invite(self.children[self.informed])
            }
            _ => Decision::Listen,
        }
    }

    fn accept(&mut self, _ctx: &RoundCtx, inviters: &[NodeId], _rng: &mut ChaCha8Rng) -> Option<NodeId> {
        inviters
            .iter()
            .copied()
            .find(|u| Some(*u) == self.parent || (self.children.contains(u) && !self.reported.contains(u)))
    }

    fn transmit(&mut self, _ctx: &RoundCtx, peer: NodeId, initiator: bool) -> Transmission<bool> {
        if !initiator {
            return Transmission::default();
        }
        let control = if Some(peer) == self.parent {
            self.sent_up = true;
            Some(self.ok)
        } else {
            self.informed += 1;
            self.verdict
        };
        Transmission { packet: None, control }
    }

    fn receive(&mut self, _ctx: &RoundCtx, peer: NodeId, msg: Transmission<bool>) {
        let Some(bit) = msg.control else { return };
        if Some(peer) == self.parent {
            self.verdict = Some(bit);
        } else if self.reported.insert(peer) {
            self.ok &= bit;
        }
    }

    fn end_round(&mut self, _ctx: &RoundCtx) {
        if self.parent.is_none() && self.verdict.is_none() && self.reported.len() == self.children.len() {
            self.verdict = Some(self.ok);
        }
    }

    fn done(&self) -> bool {
        self.verdict.is_some() && self.informed == self.children.len()
    }
}

/// Runs the validity convergecast over `tree` rooted at `root`. Returns the verdict reached
/// at every node (they agree) and the trace.
pub fn tree_validity_check(
    tree: &SpanningTree,
    root: NodeId,
    local_ok: &[bool],
    cfg: SimConfig,
) -> Result<(bool, Trace), SimError> {
    let (parent, _) = tree.rooted(root);
    let programs: Vec<_> = (0..tree.n())
        .map(|v| TreeCheckNode {
            parent: parent[v],
            children: tree.neighbors(v).filter(|&u| parent[v] != Some(u)).collect(),
            reported: BTreeSet::new(),
            ok: local_ok[v],
            sent_up: false,
            verdict: None,
            informed: 0,
        })
        .collect();
    let g = tree.as_graph();
    let mut sim = Simulator::new(&g, programs, cfg)?;
    sim.run_until_done()?;
    sim.mark("validity check finished");
    let (programs, trace) = sim.into_parts();
    let verdict = programs.iter().all(|p| p.verdict() == Some(true));
    Ok((verdict, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Parent to child only: c MTM rounds per CONGEST round.
    OneWay,
    /// Both directions: 2c MTM rounds per CONGEST round.
    TwoWay,
}

/// Maps CONGEST rounds on a colored tree to MTM rounds by cycling through color classes.
#[derive(Debug, Clone)]
pub struct CongestLayer {
    /// Per node: (neighbor, color, neighbor is my parent).
    links: Vec<Vec<(NodeId, usize, bool)>>,
    pub colors: usize,
    pub direction: Direction,
}

impl CongestLayer {
    /// `coloring` maps tree edges `(u, v)`, `u < v`, to colors `0..colors`.
    pub fn new(
        tree: &SpanningTree,
        root: NodeId,
        coloring: &BTreeMap<(NodeId, NodeId), usize>,
        direction: Direction,
    ) -> Result<Self, SimError> {
        let edges = tree.edges();
        if edges.len() != coloring.len() || edges.iter().any(|e| !coloring.contains_key(e)) {
            return Err(SimError::InvalidColoring("coloring does not cover the tree edges".into()));
        }
        if !is_proper_edge_coloring(coloring) {
            return Err(SimError::InvalidColoring("adjacent tree edges share a color".into()));
        }
        let colors = coloring.values().max().map_or(1, |&c| c + 1);
        let (parent, _) = tree.rooted(root);
        let mut links = vec![Vec::new(); tree.n()];
        for (&(u, v), &c) in coloring {
            links[u].push((v, c, parent[u] == Some(v)));
            links[v].push((u, c, parent[v] == Some(u)));
        }
        Ok(CongestLayer { links, colors, direction })
    }

    pub fn mtm_rounds_per_congest_round(&self) -> u64 {
        match self.direction {
            Direction::OneWay => self.colors as u64,
            Direction::TwoWay => 2 * self.colors as u64,
        }
    }

    /// (CONGEST round, 1-based; color; upward sub-slot) for 1-based MTM round `r`.
    pub fn slot(&self, r: u64) -> (u64, usize, bool) {
        let per = self.mtm_rounds_per_congest_round();
        let off = (r - 1) % per;
        let (color, up) = match self.direction {
            Direction::OneWay => (off as usize, false),
            Direction::TwoWay => ((off / 2) as usize, off % 2 == 1),
        };
        ((r - 1) / per + 1, color, up)
    }
}

/// A node program written against CONGEST rounds on a tree.
pub trait CongestProgram {
    /// Messages for this round, at most one per neighbor.
    fn send(&mut self, round: u64) -> Vec<(NodeId, Packet)>;
    /// All messages addressed to this node in `round`, sorted by sender.
    fn receive(&mut self, round: u64, inbox: Vec<(NodeId, Packet)>);
    fn done(&self) -> bool {
        false
    }
}

/// Runs a `CongestProgram` inside the MTM through a `CongestLayer`.
pub struct CongestNode<P> {
    pub program: P,
    links: Vec<(NodeId, usize, bool)>,
    per_round: u64,
    direction: Direction,
    outbox: HashMap<NodeId, Packet>,
    inbox: Vec<(NodeId, Packet)>,
    active: Option<(NodeId, bool)>,
}

impl<P: CongestProgram> CongestNode<P> {
    pub fn wrap(layer: &CongestLayer, programs: Vec<P>) -> Vec<Self> {
        programs
            .into_iter()
            .zip(&layer.links)
            .map(|(program, links)| CongestNode {
                program,
                links: links.clone(),
                per_round: layer.mtm_rounds_per_congest_round(),
                direction: layer.direction,
                outbox: HashMap::new(),
                inbox: Vec::new(),
                active: None,
            })
            .collect()
    }

    fn slot(&self, r: u64) -> (u64, usize, bool) {
        let off = (r - 1) % self.per_round;
        let (color, up) = match self.direction {
            Direction::OneWay => (off as usize, false),
            Direction::TwoWay => ((off / 2) as usize, off % 2 == 1),
        };
        ((r - 1) / self.per_round + 1, color, up)
    }
}

impl<P: CongestProgram> NodeProgram for CongestNode<P> {
    type Ad = ();
    type Ctrl = ();
    const READS_ADS: bool = false;

    fn advertise(&mut self, ctx: &RoundCtx) {
        let (cr, _, _) = self.slot(ctx.round);
        if (ctx.round - 1) % self.per_round == 0 {
            self.outbox.clear();
            for (to, p) in self.program.send(cr) {
                let upward = self.links.iter().any(|&(u, _, is_parent)| u == to && is_parent);
                assert!(
                    self.direction == Direction::TwoWay || !upward,
                    "one-way layer cannot carry messages toward the root"
                );
                let fresh = self.outbox.insert(to, p).is_none();
                assert!(fresh, "two messages for one neighbor in a CONGEST round");
            }
        }
    }

    fn decide(&mut self, ctx: &RoundCtx, _ads: &[(NodeId, ())], _rng: &mut ChaCha8Rng) -> Decision {
        let (_, color, up) = self.slot(ctx.round);
        self.active = None;
        let Some(&(peer, _, peer_is_parent)) = self.links.iter().find(|l| l.1 == color) else {
            return Decision::Listen;
        };
        // The sender initiates: the parent on downward slots, the child on upward ones.
        let i_send = peer_is_parent == up;
        self.active = Some((peer, i_send));
        if i_send {
            Decision::Invite(peer)
        } else {
            Decision::Listen
        }
    }

    fn accept(&mut self, _ctx: &RoundCtx, inviters: &[NodeId], _rng: &mut ChaCha8Rng) -> Option<NodeId> {
        match self.active {
            Some((peer, false)) if inviters.contains(&peer) => Some(peer),
            _ => None,
        }
    }

    fn transmit(&mut self, _ctx: &RoundCtx, peer: NodeId, initiator: bool) -> Transmission<()> {
        if !initiator {
            return Transmission::default();
        }
        Transmission { packet: self.outbox.remove(&peer), control: None }
    }

    fn receive(&mut self, _ctx: &RoundCtx, peer: NodeId, msg: Transmission<()>) {
        if let Some(p) = msg.packet {
            self.inbox.push((peer, p));
        }
    }

    fn end_round(&mut self, ctx: &RoundCtx) {
        if ctx.round % self.per_round == 0 {
            let (cr, _, _) = self.slot(ctx.round);
            let mut inbox = std::mem::take(&mut self.inbox);
            inbox.sort_unstable();
            self.program.receive(cr, inbox);
        }
    }

    fn done(&self) -> bool {
        self.program.done()
    }
}

/// Direct CONGEST reference execution: every message sent in round r is delivered in round r.
/// Returns the message log per round as (from, to, packet), sorted.
pub fn run_congest<P: CongestProgram>(
    adj: &[Vec<NodeId>],
    programs: &mut [P],
    rounds: u64,
) -> Vec<Vec<(NodeId, NodeId, Packet)>> {
    let n = programs.len();
    let mut log = Vec::new();
    for r in 1..=rounds {
        let mut inboxes: Vec<Vec<(NodeId, Packet)>> = vec![Vec::new(); n];
        let mut sent = Vec::new();
        for (v, p) in programs.iter_mut().enumerate() {
            for (to, pk) in p.send(r) {
                assert!(adj[v].contains(&to), "CONGEST message to non-neighbor");
                inboxes[to].push((v, pk));
                sent.push((v, to, pk));
            }
        }
        for (p, mut inbox) in programs.iter_mut().zip(inboxes) {
            inbox.sort_unstable();
            p.receive(r, inbox);
        }
        sent.sort_unstable();
        log.push(sent);
        if programs.iter().all(|p| p.done()) {
            break;
        }
    }
    log
}

/// FIFO gossip: each round dequeue one message and send it to every neighbor.
#[derive(Debug, Clone, Default)]
pub struct GossipState {
    pub queue: VecDeque<Packet>,
    pub known: BTreeSet<Packet>,
}

impl GossipState {
    pub fn seed(&mut self, p: Packet) {
        if self.known.insert(p) {
            self.queue.push_back(p);
        }
    }

    pub fn next(&mut self) -> Option<Packet> {
        self.queue.pop_front()
    }

    /// Enqueues unseen messages in ascending (origin, index) order.
    pub fn absorb(&mut self, inbox: &[(NodeId, Packet)]) {
        let mut fresh: Vec<Packet> = inbox.iter().map(|&(_, p)| p).collect();
        fresh.sort_unstable_by_key(|p| (p.commodity, p.index));
        for p in fresh {
            self.seed(p);
        }
    }
}
