//! DOT and JSON renderings of a conjugation graph.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ConjugationGraph, Edge, NetworkError};
use crate::taxonomy::CapabilityId;

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: CapabilityId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    nodes: Vec<NodeDoc>,
    edges: Vec<Edge>,
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

impl ConjugationGraph {
    /// Graphviz text; node labels read `id name`, edge labels carry the relation and correlation.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph conjugations {\n  rankdir=LR;\n  node [shape=box];\n");
        for id in self.nodes() {
            let label = match self.name(&id) {
                Some(name) => format!("{id} {name}"),
                None => id.to_string(),
            };
            let _ = writeln!(out, "  {} [label={}];", quote(&id.to_string()), quote(&label));
        }
        for e in self.edges() {
            let mut label = e.relation.to_string();
            if let Some(r) = e.correlation {
                let _ = write!(label, " r={r:.3}");
            }
            let _ = writeln!(
                out,
                "  {} -> {} [label={}];",
                quote(&e.from.to_string()),
                quote(&e.to.to_string()),
                quote(&label)
            );
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> String {
        let doc = GraphDoc {
            nodes: self.nodes().map(|id| NodeDoc { id, name: self.name(&id).map(str::to_owned) }).collect(),
            edges: self.edges().cloned().collect(),
        };
        serde_json::to_string_pretty(&doc).expect("graph serializes")
    }

    /// Rebuilds a graph from [`ConjugationGraph::to_json`] output, re-checking every invariant.
    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let doc: GraphDoc = serde_json::from_str(text)?;
        let mut g = ConjugationGraph::new(doc.nodes.iter().map(|n| n.id));
        for n in doc.nodes {
            g.set_name(&n.id, n.name)?;
        }
        for e in doc.edges {
            if let Some(r) = e.correlation {
                if !(-1.0..=1.0).contains(&r) {
                    return Err(NetworkError::Parse { line: 0, reason: format!("correlation {r} outside [-1, 1]") });
                }
            }
            g.add_edge(e)?;
        }
        Ok(g)
    }
}
