//! Graphviz DOT rendering of transition systems and constraint graphs.
//! Final states get a double border; nodes can be styled as violating,
//! and a witness path can be highlighted.

use crate::cg::ConstraintGraph;
use crate::dds::Dds;

fn escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

/// The unfolded transition system as a DOT digraph.
pub fn export_dds(dds: &Dds) -> String {
    let mut out = String::from("digraph dds {\n  rankdir=TB;\n  node [shape=ellipse];\n");
    for (i, marking) in dds.states.iter().enumerate() {
        let mut attrs = format!("label=\"{}\"", escape(&marking.to_string()));
        if dds.is_final(i) {
            attrs.push_str(", peripheries=2");
        }
        if i == dds.initial {
            attrs.push_str(", penwidth=2");
        }
        out.push_str(&format!("  s{i} [{attrs}];\n"));
    }
    for edge in &dds.edges {
        let action = &dds.actions[edge.action];
        let label = if action.label == action.transition_id {
            action.label.clone()
        } else {
            format!("{} ({})", action.label, action.transition_id)
        };
        out.push_str(&format!(
            "  s{} -> s{} [label=\"{}\"];\n",
            edge.from,
            edge.to,
            escape(&label)
        ));
    }
    out.push_str("}\n");
    out
}

/// Styling hooks for constraint-graph rendering.
#[derive(Debug, Clone, Default)]
pub struct CgStyle {
    /// Control states whose nodes are drawn as violating (red fill).
    pub violating_states: Vec<usize>,
    /// Node whose recorded path from the root is highlighted.
    pub highlight_node: Option<usize>,
}

/// A constraint graph as a DOT digraph; node labels read
/// `state | formula`.
pub fn export_cg(dds: &Dds, cg: &ConstraintGraph, style: &CgStyle) -> String {
    let mut path_nodes = Vec::new();
    let mut path_edges = Vec::new();
    if let Some(target) = style.highlight_node {
        path_nodes.push(0);
        for (action, node) in cg.path_to(target) {
            let from = *path_nodes.last().unwrap();
            path_edges.push((from, action, node));
            path_nodes.push(node);
        }
    }
    let mut out = String::from("digraph cg {\n  rankdir=TB;\n  node [shape=box];\n");
    for (i, node) in cg.nodes.iter().enumerate() {
        let marking = &dds.states[node.state];
        let mut attrs = format!(
            "label=\"{} | {}\"",
            escape(&marking.to_string()),
            escape(&node.formula.to_string())
        );
        if dds.is_final(node.state) {
            attrs.push_str(", peripheries=2");
        }
        if style.violating_states.contains(&node.state) {
            attrs.push_str(", style=filled, fillcolor=\"#f4cccc\", color=red");
        }
        if path_nodes.contains(&i) {
            attrs.push_str(", color=red, penwidth=2");
        }
        out.push_str(&format!("  n{i} [{attrs}];\n"));
    }
    for edge in &cg.edges {
        let label = &dds.actions[edge.action].label;
        let highlighted = path_edges
            .iter()
            .any(|&(f, a, t)| f == edge.from && a == edge.action && t == edge.to);
        let style_attr = if highlighted {
            ", color=red, penwidth=2"
        } else {
            ""
        };
        out.push_str(&format!(
            "  n{} -> n{} [label=\"{}\"{}];\n",
            edge.from,
            edge.to,
            escape(label),
            style_attr
        ));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dds::dpn_to_dds;
    use crate::samples;

    #[test]
    fn dds_dot_marks_final_and_initial() {
        let dds = dpn_to_dds(&samples::auction(), 1).unwrap();
        let dot = export_dds(&dds);
        assert!(dot.starts_with("digraph dds {"));
        assert_eq!(dot.matches("->").count(), 4);
        assert!(dot.contains("peripheries=2"));
        assert!(dot.contains("label=\"p3\""));
    }

    #[test]
    fn single_state_dds_renders() {
        let mut dpn = samples::sound_trivial();
        dpn.transitions[0].pre.insert("done".into(), 1); // never enabled
        let dds = dpn_to_dds(&dpn, 1).unwrap();
        let dot = export_dds(&dds);
        assert_eq!(dot.matches("->").count(), 0);
        assert!(dot.contains("s0"));
    }
}
