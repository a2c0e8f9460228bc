use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use mtmcap_core::capacity::{self, EvalConfig, FlowSet, LinkMode, Rate, Schedule, ThroughputReport};
use mtmcap_core::flow::{self, FlowError, SynthesisOptions};
use mtmcap_core::geometric::{self, GeoError, GeometricGraph, GeometricGraphJson};
use mtmcap_core::graphs::{self, Graph, GraphError, GraphJson, SpanningTree, TreeDegree};
use mtmcap_core::mtmsim::{self, SimConfig, SimError, TraceDetail};
use mtmcap_core::protocols::{self, ColoringMode, ProtocolConfig, ProtocolError, ProtocolResult, TreeSource};
use mtmcap_core::{dot, seed};
use serde_json::{json, Value};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "mtmcap", version, about = "Capacity experiments for the mobile telephone model")]
struct Cli {
    /// Master seed; sub-seeds are derived per command.
    #[arg(long, global = true, env = seed::SEED_ENV)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Strict,
    Duplex,
}

impl From<Mode> for LinkMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Strict => LinkMode::Strict,
            Mode::Duplex => LinkMode::Duplex,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Program {
    Matching,
    EdgeColor,
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeKind {
    None,
    Mdst,
    Bfs,
    Grid,
}

#[derive(clap::Args)]
struct SimArgs {
    #[arg(long, value_enum, default_value = "strict")]
    mode: Mode,
    #[arg(long, default_value_t = 4)]
    ad_bits_mult: usize,
    #[arg(long, default_value_t = 1_000_000)]
    max_rounds: u64,
}

impl SimArgs {
    fn config(&self, seed: u64, trace: TraceDetail) -> SimConfig {
        SimConfig {
            mode: self.mode.into(),
            ad_bits_multiplier: self.ad_bits_mult,
            max_rounds: self.max_rounds,
            seed,
            trace,
        }
    }
}

#[derive(clap::Args)]
struct ProtocolArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Color the tree with EdgeColor-MTM in the simulator instead of centrally.
    #[arg(long)]
    distributed: bool,
    /// Charge topology gathering as D(G) + |E| rounds.
    #[arg(long)]
    global_knowledge: bool,
    /// Use the degree-5 grid tree (requires a geometric graph).
    #[arg(long)]
    grid_tree: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Throughput CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Trace JSONL.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random geometric graph GK(n, r).
    GenGk {
        #[arg(long)]
        n: usize,
        #[arg(long, conflicts_with = "radius_mult")]
        radius: Option<f64>,
        /// Radius as a multiple of the connectivity threshold.
        #[arg(long)]
        radius_mult: Option<f64>,
        #[arg(long, default_value_t = geometric::DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a random perfect pairing as a flow set.
        #[arg(long)]
        pairs_out: Option<PathBuf>,
    },
    /// Disconnection frequency across radius multipliers.
    Threshold {
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4,8")]
        radius_mult: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = geometric::DEFAULT_ALPHA)]
        alpha: f64,
        /// Worker threads for independent trials.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimum-degree spanning tree by local search, with the exact optimum when affordable.
    Mdst {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Broadcast and all-to-all throughput upper bounds.
    Bounds {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize and certify a pairwise schedule.
    Pairwise {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        flows: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, value_enum, default_value = "strict")]
        mode: Mode,
        #[arg(long, default_value_t = 200_000)]
        max_period: usize,
        #[arg(long)]
        schedule_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid routing schedule on a good geometric instance.
    GridRoute {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        flows: PathBuf,
        #[arg(long, value_enum, default_value = "strict")]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a node program in the simulator.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "matching")]
        program: Program,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = mtmsim::MATCHING_BUDGET_FACTOR)]
        budget_factor: u64,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pipelined broadcast from one source.
    Sb {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0)]
        source: usize,
        #[arg(long, default_value_t = 2000)]
        rounds: u64,
        #[command(flatten)]
        proto: ProtocolArgs,
    },
    /// All-to-all streaming gossip.
    Sg {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 5)]
        tokens: u64,
        #[command(flatten)]
        proto: ProtocolArgs,
    },
    /// Rounds for every node to learn every other node's token.
    Oneshot {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        proto: ProtocolArgs,
    },
    /// Measure a schedule's steady-state throughput.
    Evaluate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        flows: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        warmup_periods: Option<u64>,
        #[arg(long, default_value_t = 3)]
        periods: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check a schedule against the model for a number of rounds.
    Validate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        flows: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, default_value_t = 100)]
        horizon: u64,
    },
    /// Graphviz export of a graph or one of its spanning trees.
    Dot {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "none")]
        tree: TreeKind,
        /// Export only the tree, labelled with its edge coloring.
        #[arg(long)]
        tree_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let err = e.into();
        Failure { code: classify(&err), err }
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<std::io::Error>() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<GraphError>() {
            return if matches!(e, GraphError::BudgetExceeded { .. }) { 3 } else { 2 };
        }
        if let Some(e) = cause.downcast_ref::<FlowError>() {
            return match e {
                FlowError::SolverBudget | FlowError::PeriodTooLong { .. } => 3,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<SimError>() {
            return if matches!(e, SimError::RoundBudget(_)) { 3 } else { 2 };
        }
        if let Some(e) = cause.downcast_ref::<ProtocolError>() {
            return match e {
                ProtocolError::TooFewRounds { .. } | ProtocolError::TooFewTokens(_) => 3,
                ProtocolError::Sim(SimError::RoundBudget(_)) => 3,
                ProtocolError::Graph(GraphError::BudgetExceeded { .. }) => 3,
                _ => 2,
            };
        }
        if cause.is::<GeoError>() || cause.is::<capacity::CapacityError>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

fn validation(msg: String) -> Failure {
    Failure { code: 2, err: anyhow!(msg) }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).context("writing stdout")?;
            Ok(())
        }
    }
}

fn write_json(path: Option<&Path>, value: &Value) -> anyhow::Result<()> {
    write_out(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

enum Loaded {
    Plain(Graph),
    Geometric(GeometricGraph),
}

impl Loaded {
    fn graph(&self) -> &Graph {
        match self {
            Loaded::Plain(g) => g,
            Loaded::Geometric(gg) => &gg.graph,
        }
    }
}

fn load_graph(path: &Path) -> anyhow::Result<Loaded> {
    let value: Value = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("positions").is_some() {
        let json: GeometricGraphJson = serde_json::from_value(value)?;
        Ok(Loaded::Geometric(GeometricGraph::from_json(&json)?))
    } else {
        let json: GraphJson = serde_json::from_value(value)?;
        Ok(Loaded::Plain(Graph::from_json(&json)?))
    }
}

/// A flow set JSON, or a bare list of `[source, destination]` pairs.
fn load_flows(path: &Path, n: usize) -> anyhow::Result<FlowSet> {
    let value: Value = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    if value.is_array() {
        let pairs: Vec<[usize; 2]> = serde_json::from_value(value)?;
        let pairs: Vec<_> = pairs.into_iter().map(|[s, t]| (s, t)).collect();
        return Ok(FlowSet::pairwise(n, &pairs)?);
    }
    let f: FlowSet = serde_json::from_value(value)?;
    f.validate()?;
    if f.n != n {
        return Err(capacity::CapacityError::InvalidFlowSet(format!("flow set is for {} nodes, graph has {n}", f.n)).into());
    }
    Ok(f)
}

fn load_schedule(path: &Path) -> anyhow::Result<Schedule> {
    let s: Schedule = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    s.check_shape()?;
    Ok(s)
}

fn rate_text(r: &Rate) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn rate_f64(r: &Rate) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn report_csv(report: &ThroughputReport) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["flow", "delivered", "window", "throughput"])?;
    let len = report.window.1 - report.window.0;
    for (i, d) in report.delivered_in_window.iter().enumerate() {
        let t = if len == 0 { Rate::from_integer(0) } else { Rate::new(*d, len) };
        w.write_record([i.to_string(), d.to_string(), format!("{}..{}", report.window.0, report.window.1), rate_text(&t)])?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| anyhow!(e.to_string()))?)?;
    Ok(format!("# mtmcap {VERSION}\n{body}"))
}

fn report_json(report: &ThroughputReport) -> Value {
    json!({
        "throughput": rate_text(&report.throughput),
        "throughputValue": rate_f64(&report.throughput),
        "window": [report.window.0, report.window.1],
        "deliveredInWindow": report.delivered_in_window,
        "convergenceRound": report.convergence_round,
    })
}

fn edges_json(edges: &[(usize, usize)]) -> Value {
    Value::Array(edges.iter().map(|&(u, v)| json!([u, v])).collect())
}

fn protocol_config(args: &ProtocolArgs, loaded: &Loaded, seed: u64) -> anyhow::Result<ProtocolConfig> {
    let tree = if args.grid_tree {
        let Loaded::Geometric(gg) = loaded else {
            return Err(anyhow!("--grid-tree needs a geometric graph with positions"));
        };
        TreeSource::Provided(geometric::grid_spanning_tree(gg)?)
    } else {
        TreeSource::LocalSearch
    };
    let detail = if args.trace.is_some() { TraceDetail::Full } else { TraceDetail::PacketsOnly };
    Ok(ProtocolConfig {
        sim: args.sim.config(seed, detail),
        tree,
        coloring: if args.distributed {
            ColoringMode::Distributed { attempts: 3, budget_factor: mtmsim::MATCHING_BUDGET_FACTOR }
        } else {
            ColoringMode::Centralized
        },
        charge_topology: args.global_knowledge,
    })
}

fn protocol_json(r: &ProtocolResult) -> Value {
    json!({
        "report": report_json(&r.report),
        "setupRounds": r.setup_rounds,
        "chargedRounds": r.charged_rounds,
        "totalRounds": r.trace.total_rounds,
        "colorsUsed": r.colors_used,
        "congestRoundLength": r.congest_round_len,
        "treeUsed": { "maxDegree": r.tree.max_degree(), "diameter": r.tree.diameter(), "edges": edges_json(&r.tree.edges()) },
    })
}

fn emit_protocol(args: &ProtocolArgs, r: &ProtocolResult, extra: Value) -> anyhow::Result<()> {
    let mut v = protocol_json(r);
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    if let Some(p) = &args.csv {
        write_out(Some(p), &report_csv(&r.report)?)?;
    }
    if let Some(p) = &args.trace {
        write_out(Some(p), &r.trace.to_jsonl())?;
    }
    write_json(args.out.as_deref(), &v)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let master = cli.seed.unwrap_or(seed::DEFAULT_SEED);
    match cli.command {
        Command::GenGk { n, radius, radius_mult, alpha, out, pairs_out } => {
            let r = match (radius, radius_mult) {
                (Some(r), _) => r,
                (None, Some(m)) => m * geometric::connectivity_threshold(n, alpha),
                (None, None) => return Err(validation("one of --radius or --radius-mult is required".into())),
            };
            let gg = geometric::generate_gk(n, r, seed::derive_seed(master, "gen-gk", 0))?;
            write_json(out.as_deref(), &serde_json::to_value(gg.to_json())?)?;
            if let Some(p) = pairs_out {
                let f = FlowSet::random_pairwise(n, &mut seed::sub_rng(master, "gen-gk-pairs", 0));
                write_json(Some(&p), &serde_json::to_value(&f)?)?;
            }
        }
        Command::Threshold { n, radius_mult, trials, alpha, jobs, out } => {
            let seed = seed::derive_seed(master, "threshold", 0);
            let run = || geometric::threshold_experiment(n, &radius_mult, trials, alpha, seed);
            let rows = match jobs {
                Some(j) => rayon::ThreadPoolBuilder::new().num_threads(j).build()?.install(run),
                None => run(),
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &rows {
                w.serialize(row)?;
            }
            let body = String::from_utf8(w.into_inner().map_err(|e| anyhow!(e.to_string()))?)?;
            write_out(out.as_deref(), &format!("# mtmcap {VERSION}\n{body}"))?;
        }
        Command::Mdst { graph, out, dot: dot_out } => {
            let loaded = load_graph(&graph)?;
            let g = loaded.graph();
            let t = graphs::mdst_local_search(g)?;
            let (d, exact) = match graphs::min_tree_degree(g)? {
                TreeDegree::Exact(d) => (json!(d), true),
                TreeDegree::Interval { lo, hi } => (json!([lo, hi]), false),
            };
            write_json(
                out.as_deref(),
                &json!({
                    "maxDegree": t.max_degree(),
                    "diameter": t.diameter(),
                    "d": d,
                    "dExact": exact,
                    "edges": edges_json(&t.edges()),
                }),
            )?;
            if let Some(p) = dot_out {
                write_out(Some(&p), &dot::export_dot(g, None, Some(&t)))?;
            }
        }
        Command::Bounds { graph, out } => {
            let loaded = load_graph(&graph)?;
            let g = loaded.graph();
            let bound_json = |b: graphs::UpperBound| match b {
                graphs::UpperBound::Exact(r) => json!({ "value": rate_f64(&r), "exact": rate_text(&r) }),
                graphs::UpperBound::Approximate { lo, hi } => {
                    json!({ "value": rate_f64(&hi), "range": [rate_text(&lo), rate_text(&hi)] })
                }
            };
            let d = match graphs::min_tree_degree(g)? {
                TreeDegree::Exact(d) => json!(d),
                TreeDegree::Interval { lo, hi } => json!([lo, hi]),
            };
            write_json(
                out.as_deref(),
                &json!({
                    "d": d,
                    "broadcast_ub": bound_json(graphs::broadcast_upper_bound(g)?),
                    "alltoall_ub": bound_json(graphs::all_to_all_upper_bound(g)?),
                }),
            )?;
        }
        Command::Pairwise { graph, flows, eps, mode, max_period, schedule_out, out } => {
            let loaded = load_graph(&graph)?;
            let g = loaded.graph();
            let f = load_flows(&flows, g.n())?;
            let opts = SynthesisOptions { max_period, mode: mode.into() };
            let s = flow::synthesize_pairwise_schedule(g, &f, eps, opts)?;
            let horizon = 10 * s.schedule.period.max(1) as u64;
            if let Some(v) = capacity::validate_schedule_prefix(g, &f, &s.schedule, horizon)? {
                return Err(validation(format!("synthesized schedule failed validation: {v}")));
            }
            let rep = capacity::evaluate_throughput(g, &f, &s.schedule, s.eval_config())?;
            let mut cert = s.certificate.to_json();
            if let Value::Object(m) = &mut cert {
                m.insert("measured".into(), report_json(&rep));
                m.insert("period".into(), json!(s.schedule.period));
            }
            if let Some(p) = schedule_out {
                write_json(Some(&p), &serde_json::to_value(&s.schedule)?)?;
            }
            write_json(out.as_deref(), &cert)?;
        }
        Command::GridRoute { graph, flows, mode, out } => {
            let Loaded::Geometric(gg) = load_graph(&graph)? else {
                return Err(validation("grid-route needs a geometric graph with positions".into()));
            };
            let f = load_flows(&flows, gg.n())?;
            let route = geometric::grid_route_schedule(&gg, &f, mode.into())?;
            let horizon = 3 * route.schedule.period as u64;
            if let Some(v) = capacity::validate_schedule_prefix(&gg.graph, &f, &route.schedule, horizon)? {
                return Err(validation(format!("grid schedule failed validation: {v}")));
            }
            write_json(out.as_deref(), &serde_json::to_value(&route.schedule)?)?;
        }
        Command::Simulate { graph, program, sim, budget_factor, trace, out } => {
            let loaded = load_graph(&graph)?;
            let g = loaded.graph();
            let cfg = sim.config(seed::derive_seed(master, "simulate", 0), TraceDetail::Full);
            let (summary, tr) = match program {
                Program::Matching => {
                    let budget = mtmsim::matching_budget(g.n(), budget_factor).min(sim.max_rounds);
                    let (m, tr) = mtmsim::israeli_itai_matching(g, None, budget, cfg)?;
                    let v = json!({
                        "program": "matching",
                        "rounds": m.rounds,
                        "maximal": m.maximal,
                        "isMatching": m.is_matching,
                        "edges": edges_json(&m.edges),
                    });
                    (v, tr)
                }
                Program::EdgeColor => {
                    let (c, tr) = mtmsim::edge_color_mtm(g, None, g.max_degree(), budget_factor, cfg)?;
                    let colors: Vec<Value> = c.colors.iter().map(|(&(u, v), &k)| json!([u, v, k])).collect();
                    let v = json!({
                        "program": "edge-color",
                        "rounds": c.rounds,
                        "complete": c.complete,
                        "valid": c.valid,
                        "palette": c.palette,
                        "colorsUsed": c.colors_used(),
                        "colors": colors,
                    });
                    (v, tr)
                }
            };
            let mut summary = summary;
            if let Value::Object(m) = &mut summary {
                m.insert("linkViolation".into(), json!(tr.first_link_violation()));
                m.insert("maxAdBits".into(), json!(tr.max_ad_bits));
                m.insert("adBudgetBits".into(), json!(tr.ad_budget_bits));
            }
            if let Some(p) = trace {
                write_out(Some(&p), &tr.to_jsonl())?;
            }
            write_json(out.as_deref(), &summary)?;
        }
        Command::Sb { graph, source, rounds, proto } => {
            let loaded = load_graph(&graph)?;
            let cfg = protocol_config(&proto, &loaded, seed::derive_seed(master, "sb", 0))?;
            let r = protocols::sb_broadcast(loaded.graph(), source, &cfg, rounds)?;
            emit_protocol(&proto, &r, json!({ "protocol": "sb", "source": source }))?;
        }
        Command::Sg { graph, tokens, proto } => {
            let loaded = load_graph(&graph)?;
            let cfg = protocol_config(&proto, &loaded, seed::derive_seed(master, "sg", 0))?;
            let out = protocols::sg_all_to_all(loaded.graph(), &cfg, tokens)?;
            let extra = json!({ "protocol": "sg", "tokens": tokens, "budget": out.budget, "completed": out.completed });
            emit_protocol(&proto, &out.result, extra)?;
        }
        Command::Oneshot { graph, proto } => {
            let loaded = load_graph(&graph)?;
            let cfg = protocol_config(&proto, &loaded, seed::derive_seed(master, "oneshot", 0))?;
            let o = protocols::one_shot_gossip(loaded.graph(), &cfg)?;
            write_json(
                proto.out.as_deref(),
                &json!({
                    "protocol": "oneshot",
                    "rounds": o.rounds,
                    "setupRounds": o.setup_rounds,
                    "chargedRounds": o.charged_rounds,
                    "treeDegree": o.tree_degree,
                    "congestRoundLength": o.congest_round_len,
                }),
            )?;
        }
        Command::Evaluate { graph, flows, schedule, warmup_periods, periods, out, csv } => {
            let loaded = load_graph(&graph)?;
            let g = loaded.graph();
            let f = load_flows(&flows, g.n())?;
            let s = load_schedule(&schedule)?;
            let rep = capacity::evaluate_throughput(g, &f, &s, EvalConfig { warmup_periods, measure_periods: periods })?;
            if let Some(p) = csv {
                write_out(Some(&p), &report_csv(&rep)?)?;
            }
            write_json(out.as_deref(), &report_json(&rep))?;
        }
        Command::Validate { graph, flows, schedule, horizon } => {
            let loaded = load_graph(&graph)?;
            let g = loaded.graph();
            let f = load_flows(&flows, g.n())?;
            let s = load_schedule(&schedule)?;
            match capacity::validate_schedule_prefix(g, &f, &s, horizon)? {
                None => write_json(None, &json!({ "valid": true, "horizon": horizon }))?,
                Some(v) => {
                    write_json(None, &json!({ "valid": false, "horizon": horizon, "violation": v }))?;
                    return Err(validation(format!("first violation at {v}")));
                }
            }
        }
        Command::Dot { graph, tree, tree_only, out } => {
            let loaded = load_graph(&graph)?;
            let g = loaded.graph();
            let t: Option<SpanningTree> = match tree {
                TreeKind::None => None,
                TreeKind::Mdst => Some(graphs::mdst_local_search(g)?),
                TreeKind::Bfs => Some(SpanningTree::bfs(g, 0)?),
                TreeKind::Grid => match &loaded {
                    Loaded::Geometric(gg) => Some(geometric::grid_spanning_tree(gg)?),
                    Loaded::Plain(_) => return Err(validation("--tree grid needs a geometric graph".into())),
                },
            };
            let text = match (&t, tree_only, &loaded) {
                (Some(t), true, _) => {
                    let colors = protocols::tree_edge_coloring(t, 0);
                    dot::export_tree_dot(t, Some(&colors))
                }
                (None, true, _) => return Err(validation("--tree-only needs --tree".into())),
                (_, false, Loaded::Geometric(gg)) => dot::export_geometric_dot(gg, t.as_ref()),
                (_, false, Loaded::Plain(g)) => dot::export_dot(g, None, t.as_ref()),
            };
            write_out(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
