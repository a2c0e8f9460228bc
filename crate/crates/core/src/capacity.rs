//! Flow sets, periodic schedules, schedule validation and throughput measurement.
//!
//! Validation and evaluation share one execution engine so they can never disagree about
//! which packet a slot carries.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use num::rational::Ratio;
use num::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{Graph, NodeId};
use crate::mtmsim::Trace;

/// Packets per round, exact.
pub type Rate = Ratio<u64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CapacityError {
    #[error("invalid flow set: {0}")]
    InvalidFlowSet(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("schedule violation: {0}")]
    Violation(ScheduleViolation),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Pairwise,
    Broadcast,
    AllToAll,
    General,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub source: NodeId,
    /// Sorted, never contains the source.
    pub destinations: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSet {
    pub n: usize,
    pub kind: FlowKind,
    pub flows: Vec<Flow>,
}

impl FlowSet {
    pub fn pairwise(n: usize, pairs: &[(NodeId, NodeId)]) -> Result<Self, CapacityError> {
        let flows = pairs
            .iter()
            .map(|&(s, t)| Flow { source: s, destinations: vec![t] })
            .collect();
        let set = FlowSet { n, kind: FlowKind::Pairwise, flows };
        set.validate()?;
        Ok(set)
    }

    pub fn broadcast(n: usize, source: NodeId) -> Result<Self, CapacityError> {
        let set = FlowSet {
            n,
            kind: FlowKind::Broadcast,
            flows: vec![Flow { source, destinations: (0..n).filter(|&v| v != source).collect() }],
        };
        set.validate()?;
        Ok(set)
    }

    pub fn all_to_all(n: usize) -> Self {
        FlowSet {
            n,
            kind: FlowKind::AllToAll,
            flows: (0..n)
                .map(|s| Flow { source: s, destinations: (0..n).filter(|&v| v != s).collect() })
                .collect(),
        }
    }

    pub fn general(n: usize, flows: Vec<Flow>) -> Result<Self, CapacityError> {
        let mut flows = flows;
        for f in &mut flows {
            f.destinations.sort_unstable();
        }
        let set = FlowSet { n, kind: FlowKind::General, flows };
        set.validate()?;
        Ok(set)
    }

    /// Random perfect pairing of a uniformly shuffled node list. With odd `n` one node sits out.
    pub fn random_pairwise<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut perm: Vec<NodeId> = (0..n).collect();
        perm.shuffle(rng);
        let pairs: Vec<_> = perm.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        FlowSet::pairwise(n, &pairs).expect("a shuffled pairing is pairwise")
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    pub fn pairs(&self) -> Option<Vec<(NodeId, NodeId)>> {
        (self.kind == FlowKind::Pairwise)
            .then(|| self.flows.iter().map(|f| (f.source, f.destinations[0])).collect())
    }

    pub fn is_destination(&self, i: usize, v: NodeId) -> bool {
        match self.kind {
            FlowKind::AllToAll | FlowKind::Broadcast => v != self.flows[i].source,
            _ => self.flows[i].destinations.binary_search(&v).is_ok(),
        }
    }

    /// Every node appears in exactly one pair.
    pub fn is_perfect_pairing(&self) -> bool {
        self.kind == FlowKind::Pairwise && 2 * self.flows.len() == self.n
    }

    pub fn validate(&self) -> Result<(), CapacityError> {
        let bad = |msg: String| Err(CapacityError::InvalidFlowSet(msg));
        for f in &self.flows {
            if f.source >= self.n || f.destinations.iter().any(|&d| d >= self.n) {
                return bad(format!("node out of range in flow from {}", f.source));
            }
            if f.destinations.contains(&f.source) {
                return bad(format!("flow from {} lists its own source", f.source));
            }
            if f.destinations.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("destinations of flow from {} are not a set", f.source));
            }
        }
        match self.kind {
            FlowKind::Pairwise => {
                let mut seen = vec![false; self.n];
                for f in &self.flows {
                    if f.destinations.len() != 1 {
                        return bad("pairwise flows need exactly one destination".into());
                    }
                    for v in [f.source, f.destinations[0]] {
                        if std::mem::replace(&mut seen[v], true) {
                            return bad(format!("node {v} appears in two pairs"));
                        }
                    }
                }
            }
            FlowKind::Broadcast => {
                if self.flows.len() != 1 || self.flows[0].destinations.len() + 1 != self.n {
                    return bad("broadcast needs a single flow to every other node".into());
                }
            }
            FlowKind::AllToAll => {
                if *self != FlowSet::all_to_all(self.n) {
                    return bad("all-to-all must contain every (s, V - s) exactly once".into());
                }
            }
            FlowKind::General => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    /// Connections in a round form a matching.
    #[default]
    Strict,
    /// Each node has at most one outgoing and one incoming link per round.
    Duplex,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub from: NodeId,
    pub to: NodeId,
    pub commodity: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet: Option<u64>,
}

impl Slot {
    pub fn new(from: NodeId, to: NodeId, commodity: usize) -> Self {
        Slot { from, to, commodity, path: None, packet: None }
    }

    pub fn on_path(mut self, path: usize) -> Self {
        self.path = Some(path);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub period: usize,
    pub mode: LinkMode,
    pub rounds: Vec<Vec<Slot>>,
}

impl Schedule {
    pub fn new(mode: LinkMode, rounds: Vec<Vec<Slot>>) -> Self {
        Schedule { period: rounds.len(), mode, rounds }
    }

    pub fn empty(mode: LinkMode) -> Self {
        Schedule { period: 1, mode, rounds: vec![Vec::new()] }
    }

    pub fn check_shape(&self) -> Result<(), CapacityError> {
        if self.period == 0 || self.rounds.len() != self.period {
            return Err(CapacityError::InvalidSchedule(format!(
                "period {} but {} rounds listed",
                self.period,
                self.rounds.len()
            )));
        }
        Ok(())
    }

    pub fn slot_count(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    /// Rotates rounds so that round `offset` becomes the first.
    pub fn rotated(&self, offset: usize) -> Schedule {
        let mut rounds = self.rounds.clone();
        rounds.rotate_left(offset % self.period.max(1));
        Schedule { period: self.period, mode: self.mode, rounds }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    NotAnEdge,
    UnknownCommodity,
    /// Node takes part in too many slots for the link mode.
    Degree(NodeId),
    /// Sender never held the packet it was told to send.
    PacketNotHeld { packet: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScheduleViolation {
    /// 1-based absolute round.
    pub round: u64,
    pub slot: usize,
    pub kind: ViolationKind,
}

impl std::fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "round {} slot {}: {:?}", self.round, self.slot, self.kind)
    }
}

struct Engine<'a> {
    g: &'a Graph,
    f: &'a FlowSet,
    held: HashMap<(NodeId, usize), BTreeSet<u64>>,
    queues: HashMap<(NodeId, usize, usize), VecDeque<u64>>,
    sent: HashMap<(NodeId, NodeId, usize), BTreeSet<u64>>,
    next_fresh: Vec<u64>,
    receipts: HashMap<(usize, u64), usize>,
    delivered_above: Vec<BTreeSet<u64>>,
    prefix: Vec<u64>,
    round: u64,
}

impl<'a> Engine<'a> {
    fn new(g: &'a Graph, f: &'a FlowSet) -> Self {
        let k = f.len();
        Engine {
            g,
            f,
            held: HashMap::new(),
            queues: HashMap::new(),
            sent: HashMap::new(),
            next_fresh: vec![1; k],
            receipts: HashMap::new(),
            delivered_above: vec![BTreeSet::new(); k],
            prefix: vec![0; k],
            round: 0,
        }
    }

    fn holds(&self, v: NodeId, i: usize, p: u64) -> bool {
        v == self.f.flows[i].source
            || self.held.get(&(v, i)).is_some_and(|s| s.contains(&p))
    }

    fn is_delivered(&self, i: usize, p: u64) -> bool {
        p <= self.prefix[i] || self.delivered_above[i].contains(&p)
    }

    fn pick_pathless(&self, u: NodeId, v: NodeId, i: usize) -> Option<u64> {
        let sent = self.sent.get(&(u, v, i));
        let fresh = |p: &u64| !self.is_delivered(i, *p) && !sent.is_some_and(|s| s.contains(p));
        if u == self.f.flows[i].source {
            (self.prefix[i] + 1..).find(fresh)
        } else {
            self.held.get(&(u, i))?.range(self.prefix[i] + 1..).copied().find(fresh)
        }
    }

    fn check_degrees(&self, mode: LinkMode, slots: &[Slot]) -> Result<(), (usize, ViolationKind)> {
        let mut out: HashMap<NodeId, usize> = HashMap::new();
        let mut inc: HashMap<NodeId, usize> = HashMap::new();
        for (idx, s) in slots.iter().enumerate() {
            if s.from == s.to || !self.g.has_edge(s.from, s.to) {
                return Err((idx, ViolationKind::NotAnEdge));
            }
            if s.commodity >= self.f.len() {
                return Err((idx, ViolationKind::UnknownCommodity));
            }
            match mode {
                LinkMode::Strict => {
                    for v in [s.from, s.to] {
                        let c = out.entry(v).or_default();
                        *c += 1;
                        if *c > 1 {
                            return Err((idx, ViolationKind::Degree(v)));
                        }
                    }
                }
                LinkMode::Duplex => {
                    let o = out.entry(s.from).or_default();
                    *o += 1;
                    if *o > 1 {
                        return Err((idx, ViolationKind::Degree(s.from)));
                    }
                    let i = inc.entry(s.to).or_default();
                    *i += 1;
                    if *i > 1 {
                        return Err((idx, ViolationKind::Degree(s.to)));
                    }
                }
            }
        }
        Ok(())
    }

    fn step(&mut self, mode: LinkMode, slots: &[Slot]) -> Result<(), ScheduleViolation> {
        self.round += 1;
        let round = self.round;
        self.check_degrees(mode, slots)
            .map_err(|(slot, kind)| ScheduleViolation { round, slot, kind })?;

        // Decide every transfer against the state at the start of the round.
        let mut transfers = Vec::with_capacity(slots.len());
        for (idx, s) in slots.iter().enumerate() {
            let i = s.commodity;
            let is_source = s.from == self.f.flows[i].source;
            let packet = if let Some(p) = s.packet {
                if p == 0 || !self.holds(s.from, i, p) {
                    return Err(ScheduleViolation {
                        round,
                        slot: idx,
                        kind: ViolationKind::PacketNotHeld { packet: p },
                    });
                }
                Some(p)
            } else if let Some(path) = s.path {
                let q = self.queues.entry((s.from, i, path)).or_default();
                match q.pop_front() {
                    Some(p) => Some(p),
                    None if is_source => {
                        let p = self.next_fresh[i];
                        self.next_fresh[i] += 1;
                        Some(p)
                    }
                    None => None,
                }
            } else {
                self.pick_pathless(s.from, s.to, i)
            };
            if let Some(p) = packet {
                if is_source {
                    self.next_fresh[i] = self.next_fresh[i].max(p + 1);
                }
                transfers.push((s, p));
            }
        }

        for (s, p) in transfers {
            let i = s.commodity;
            if s.path.is_none() {
                self.sent.entry((s.from, s.to, i)).or_default().insert(p);
            } else {
                self.queues.entry((s.to, i, s.path.unwrap())).or_default().push_back(p);
            }
            if s.to == self.f.flows[i].source {
                continue;
            }
            let newly = self.held.entry((s.to, i)).or_default().insert(p);
            if newly && self.f.is_destination(i, s.to) {
                self.record_receipt(i, p);
            }
        }
        Ok(())
    }

    fn record_receipt(&mut self, i: usize, p: u64) {
        let need = self.f.flows[i].destinations.len();
        let c = self.receipts.entry((i, p)).or_default();
        *c += 1;
        if *c < need {
            return;
        }
        self.receipts.remove(&(i, p));
        self.delivered_above[i].insert(p);
        while self.delivered_above[i].remove(&(self.prefix[i] + 1)) {
            self.prefix[i] += 1;
        }
        // Old bookkeeping below the prefix can never matter again.
        let pre = self.prefix[i];
        for ((_, _, c), set) in self.sent.iter_mut() {
            if *c == i && set.first().is_some_and(|&f| f <= pre) {
                *set = set.split_off(&(pre + 1));
            }
        }
    }
}

/// First violation within `horizon` rounds, if any.
pub fn validate_schedule_prefix(
    g: &Graph,
    f: &FlowSet,
    s: &Schedule,
    horizon: u64,
) -> Result<Option<ScheduleViolation>, CapacityError> {
    s.check_shape()?;
    let mut engine = Engine::new(g, f);
    for r in 0..horizon {
        if let Err(v) = engine.step(s.mode, &s.rounds[r as usize % s.period]) {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThroughputReport {
    /// Rounds at which `per_flow_delivered` was sampled.
    pub checkpoints: Vec<u64>,
    /// del_i at each checkpoint, one row per flow.
    pub per_flow_delivered: Vec<Vec<u64>>,
    /// Measurement window `(start, end]` in rounds.
    pub window: (u64, u64),
    pub delivered_in_window: Vec<u64>,
    #[serde(serialize_with = "ser_rate")]
    pub throughput: Rate,
    pub convergence_round: Option<u64>,
}

fn ser_rate<S: serde::Serializer>(r: &Rate, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

impl ThroughputReport {
    fn build(checkpoints: Vec<u64>, per_flow: Vec<Vec<u64>>, window: (u64, u64)) -> Self {
        let start_idx = checkpoints.iter().position(|&c| c == window.0);
        let end_idx = checkpoints.iter().position(|&c| c == window.1);
        let (a, b) = (start_idx.expect("window start sampled"), end_idx.expect("window end sampled"));
        let len = window.1 - window.0;
        let delivered: Vec<u64> = per_flow.iter().map(|row| row[b] - row[a]).collect();
        let throughput = match (delivered.iter().min(), len) {
            (Some(&d), l) if l > 0 => Rate::new(d, l),
            _ => Rate::zero(),
        };
        let convergence_round = convergence(&checkpoints, &per_flow, throughput);
        ThroughputReport {
            checkpoints,
            per_flow_delivered: per_flow,
            window,
            delivered_in_window: delivered,
            throughput,
            convergence_round,
        }
    }

    pub fn throughput_f64(&self) -> f64 {
        *self.throughput.numer() as f64 / *self.throughput.denom() as f64
    }

    /// One packet per window, the tolerance used for sandwich comparisons.
    pub fn slack(&self) -> Rate {
        Rate::new(1, (self.window.1 - self.window.0).max(1))
    }
}

fn convergence(checkpoints: &[u64], per_flow: &[Vec<u64>], t: Rate) -> Option<u64> {
    if t.is_zero() {
        return None;
    }
    let half = t / 2;
    'outer: for a in 0..checkpoints.len() {
        for row in per_flow {
            for b in a + 1..checkpoints.len() {
                let need = half * Rate::from_integer(checkpoints[b] - checkpoints[a]);
                if Rate::from_integer(row[b] - row[a]) < need {
                    continue 'outer;
                }
            }
        }
        return Some(checkpoints[a]);
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalConfig {
    pub warmup_periods: Option<u64>,
    pub measure_periods: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { warmup_periods: None, measure_periods: 8 }
    }
}

/// Runs the schedule with infinite source backlogs and measures the steady-state rate.
pub fn evaluate_throughput(
    g: &Graph,
    f: &FlowSet,
    s: &Schedule,
    cfg: EvalConfig,
) -> Result<ThroughputReport, CapacityError> {
    s.check_shape()?;
    let p = s.period as u64;
    let warmup = cfg.warmup_periods.unwrap_or((g.n() as u64).div_ceil(p) + 2);
    let total = warmup + cfg.measure_periods;
    let mut engine = Engine::new(g, f);
    let mut checkpoints = vec![0];
    let mut per_flow: Vec<Vec<u64>> = vec![vec![0]; f.len()];
    for period in 0..total {
        for slots in &s.rounds {
            engine.step(s.mode, slots).map_err(CapacityError::Violation)?;
        }
        checkpoints.push((period + 1) * p);
        for (row, &d) in per_flow.iter_mut().zip(&engine.prefix) {
            row.push(d);
        }
    }
    Ok(ThroughputReport::build(checkpoints, per_flow, (warmup * p, total * p)))
}

/// Measures a protocol execution trace over `(window.0, window.1]`, sampling every `stride` rounds.
pub fn evaluate_trace_throughput(
    f: &FlowSet,
    trace: &Trace,
    window: (u64, u64),
    stride: u64,
) -> Result<ThroughputReport, CapacityError> {
    if window.0 >= window.1 || stride == 0 {
        return Err(CapacityError::MalformedTrace(format!("bad window {window:?}")));
    }
    let k = f.len();
    let mut have: HashSet<(u32, u32, u64)> = HashSet::new();
    let mut receipts: HashMap<(usize, u64), usize> = HashMap::new();
    let mut above = vec![BTreeSet::new(); k];
    let mut prefix = vec![0u64; k];
    let mut checkpoints = Vec::new();
    let mut per_flow: Vec<Vec<u64>> = vec![Vec::new(); k];
    let mut sample_at = |r: u64, prefix: &[u64], checkpoints: &mut Vec<u64>| {
        checkpoints.push(r);
        for (row, &d) in per_flow.iter_mut().zip(prefix) {
            row.push(d);
        }
    };
    let mut last = 0;
    sample_at(0, &prefix, &mut checkpoints);
    let mut records = trace.rounds.iter().peekable();
    for r in 1..=window.1 {
        while let Some(rec) = records.next_if(|rec| rec.round <= r) {
            if rec.round <= last {
                return Err(CapacityError::MalformedTrace("rounds out of order".into()));
            }
            for conn in &rec.connections {
                for pk in &conn.packets {
                    let i = pk.commodity;
                    if i >= k || pk.index == 0 {
                        return Err(CapacityError::MalformedTrace(format!(
                            "packet ({}, {}) at round {}",
                            i, pk.index, rec.round
                        )));
                    }
                    if pk.to == f.flows[i].source || !f.is_destination(i, pk.to) {
                        continue;
                    }
                    if !have.insert((pk.to as u32, i as u32, pk.index)) {
                        continue;
                    }
                    let c = receipts.entry((i, pk.index)).or_default();
                    *c += 1;
                    if *c == f.flows[i].destinations.len() {
                        above[i].insert(pk.index);
                        while above[i].remove(&(prefix[i] + 1)) {
                            prefix[i] += 1;
                        }
                    }
                }
            }
            last = rec.round;
        }
        if r % stride == 0 || r == window.0 || r == window.1 {
            sample_at(r, &prefix, &mut checkpoints);
        }
    }
    checkpoints.dedup();
    for row in &mut per_flow {
        row.truncate(checkpoints.len());
    }
    Ok(ThroughputReport::build(checkpoints, per_flow, window))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> (Graph, FlowSet) {
        (Graph::path(2), FlowSet::pairwise(2, &[(0, 1)]).unwrap())
    }

    #[test]
    fn flow_set_validation() {
        assert!(FlowSet::pairwise(4, &[(0, 1), (1, 2)]).is_err());
        assert!(FlowSet::pairwise(4, &[(0, 0)]).is_err());
        assert!(FlowSet::pairwise(4, &[(0, 4)]).is_err());
        let b = FlowSet::broadcast(4, 2).unwrap();
        assert_eq!(b.flows[0].destinations, vec![0, 1, 3]);
        assert!(FlowSet::all_to_all(5).validate().is_ok());
    }

    #[test]
    fn one_slot_per_round_gives_throughput_one() {
        let (g, f) = two_node();
        let s = Schedule::new(LinkMode::Strict, vec![vec![Slot::new(0, 1, 0)]]);
        let rep = evaluate_throughput(&g, &f, &s, EvalConfig::default()).unwrap();
        assert_eq!(rep.throughput, Rate::from_integer(1));
        assert_eq!(rep.convergence_round, Some(0));
    }

    #[test]
    fn disconnected_pair_has_zero_throughput() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let f = FlowSet::pairwise(4, &[(0, 2)]).unwrap();
        let s = Schedule::new(LinkMode::Strict, vec![vec![Slot::new(0, 1, 0)]]);
        let rep = evaluate_throughput(&g, &f, &s, EvalConfig::default()).unwrap();
        assert!(rep.throughput.is_zero());
    }

    #[test]
    fn sending_unheld_packet_is_flagged() {
        let g = Graph::path(3);
        let f = FlowSet::pairwise(3, &[(0, 2)]).unwrap();
        let mut slot = Slot::new(1, 2, 0);
        slot.packet = Some(1);
        let s = Schedule::new(LinkMode::Strict, vec![vec![slot]]);
        let v = validate_schedule_prefix(&g, &f, &s, 5).unwrap().unwrap();
        assert_eq!(v.round, 1);
        assert_eq!(v.kind, ViolationKind::PacketNotHeld { packet: 1 });
    }

    #[test]
    fn empty_schedule_is_valid() {
        let (g, f) = two_node();
        let s = Schedule::empty(LinkMode::Strict);
        assert_eq!(validate_schedule_prefix(&g, &f, &s, 10).unwrap(), None);
    }

    #[test]
    fn strict_mode_rejects_shared_endpoint() {
        let g = Graph::path(3);
        let f = FlowSet::pairwise(3, &[(0, 2)]).unwrap();
        let s = Schedule::new(LinkMode::Strict, vec![vec![Slot::new(0, 1, 0), Slot::new(1, 2, 0)]]);
        let v = validate_schedule_prefix(&g, &f, &s, 1).unwrap().unwrap();
        assert_eq!(v.kind, ViolationKind::Degree(1));
        let d = Schedule { mode: LinkMode::Duplex, ..s };
        assert_eq!(validate_schedule_prefix(&g, &f, &d, 4).unwrap(), None);
        let rep = evaluate_throughput(&g, &f, &d, EvalConfig::default()).unwrap();
        assert_eq!(rep.throughput, Rate::from_integer(1));
    }

    #[test]
    fn schedule_json_shape() {
        let s = Schedule::new(LinkMode::Duplex, vec![vec![Slot::new(0, 1, 0).on_path(2)]]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(
            text,
            r#"{"period":1,"mode":"duplex","rounds":[[{"from":0,"to":1,"commodity":0,"path":2}]]}"#
        );
        let back: Schedule = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
