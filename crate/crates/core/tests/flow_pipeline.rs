use mtmcap_core::capacity::{self, FlowSet, Rate};
use mtmcap_core::flow::{self, SynthesisOptions, Q};
use mtmcap_core::graphs::Graph;

fn rate(q: &Q) -> Rate {
    Rate::new(*q.numer() as u64, *q.denom() as u64)
}

fn sandwich(g: &Graph, f: &FlowSet, eps: f64) -> (Rate, flow::Synthesis) {
    let s = flow::synthesize_pairwise_schedule(g, f, eps, SynthesisOptions::default()).unwrap();
    assert_eq!(capacity::validate_schedule_prefix(g, f, &s.schedule, 10 * s.schedule.period as u64).unwrap(), None);
    let rep = capacity::evaluate_throughput(g, f, &s.schedule, s.eval_config()).unwrap();
    let cert = &s.certificate;
    let lower = rate(&cert.tau_star) * Rate::new(((1.0 - eps) * 1e6).round() as u64, 3_000_000);
    assert!(rep.throughput + rep.slack() >= lower, "{} < {}", rep.throughput, lower);
    assert!(rep.throughput <= rate(&cert.upper_bound), "{} > {}", rep.throughput, cert.upper_bound);
    assert_eq!(rep.throughput, rate(&cert.guaranteed_throughput));
    (rep.throughput, s)
}

#[test]
fn six_vertex_instance_meets_both_bounds() {
    let (g, f) = flow::six_vertex_instance();
    let (t, s) = sandwich(&g, &f, 0.1);
    assert!(t <= Rate::new(1, 3));
    assert!(t >= Rate::new(3, 10), "achieved {t}");
    assert!(s.certificate.upper_bound >= Q::new(1, 3));
    assert_eq!(s.certificate.n_round, 2160);
    assert!(s.certificate.certified);
}

#[test]
fn path_with_crossing_pairs() {
    let g = Graph::path(4);
    let f = FlowSet::pairwise(4, &[(0, 2), (1, 3)]).unwrap();
    sandwich(&g, &f, 0.1);
}
