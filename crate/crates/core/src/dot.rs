//! Graphviz export.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::geometric::GeometricGraph;
use crate::graphs::{Graph, NodeId, SpanningTree};

/// Undirected DOT text for `g`. Edges listed in `colors` get a 1-based `label`; edges of
/// `highlight` are drawn bold.
pub fn export_dot(
    g: &Graph,
    colors: Option<&BTreeMap<(NodeId, NodeId), usize>>,
    highlight: Option<&SpanningTree>,
) -> String {
    let mut out = String::from("graph G {\n");
    for v in 0..g.n() {
        let _ = writeln!(out, "  {v};");
    }
    for (u, v) in g.edges() {
        let mut attrs = Vec::new();
        if let Some(c) = colors.and_then(|c| c.get(&(u, v))) {
            attrs.push(format!("label=\"{}\"", c + 1));
        }
        if highlight.is_some_and(|t| t.has_edge(u, v)) {
            attrs.push("style=bold".to_string());
        }
        if attrs.is_empty() {
            let _ = writeln!(out, "  {u} -- {v};");
        } else {
            let _ = writeln!(out, "  {u} -- {v} [{}];", attrs.join(", "));
        }
    }
    out.push_str("}\n");
    out
}

pub fn export_tree_dot(tree: &SpanningTree, colors: Option<&BTreeMap<(NodeId, NodeId), usize>>) -> String {
    export_dot(&tree.as_graph(), colors, None)
}

/// Like [`export_dot`] but pins nodes at their unit-square positions (scaled by 10 for neato).
pub fn export_geometric_dot(gg: &GeometricGraph, tree: Option<&SpanningTree>) -> String {
    let plain = export_dot(&gg.graph, None, tree);
    let mut out = String::from("graph G {\n  node [shape=point];\n");
    for (v, (x, y)) in gg.positions.iter().enumerate() {
        let _ = writeln!(out, "  {v} [pos=\"{:.4},{:.4}!\"];", x * 10.0, y * 10.0);
    }
    for line in plain.lines().filter(|l| l.contains("--")) {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let dot = export_dot(&Graph::path(2), None, None);
        assert_eq!(dot, "graph G {\n  0;\n  1;\n  0 -- 1;\n}\n");
    }

    #[test]
    fn colored_path() {
        let colors = BTreeMap::from([((0, 1), 0), ((1, 2), 1)]);
        let dot = export_dot(&Graph::path(3), Some(&colors), None);
        assert!(dot.contains("0 -- 1 [label=\"1\"]"));
        assert!(dot.contains("1 -- 2 [label=\"2\"]"));
    }
}
