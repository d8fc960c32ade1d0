//! Graph-based augmentation: parse error-insertion XML into a dependency
//! graph over an annotated sentence, convert it to a DAG by cycle
//! removal, prune probabilistically, realize training variants, and
//! compute corpus structural statistics.

mod graph;
mod prompts;
mod xml;

pub use graph::{
    build_dag, descendants, graph_stats, prune, realize_variant, GraphOpError, StructuralStats,
    TrainingVariant,
};
pub use prompts::{build_insertion_prompt, build_revision_prompt};
pub use xml::{parse_error_xml, render_error_xml, ErrorXmlError};

use crate::annotation::ErrorType;
use serde::{Deserialize, Serialize};

/// One inserted error: a span of the corrected base sentence, the
/// erroneous replacement shown in the modified sentence, and an optional
/// dependency parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorNode {
    /// Identifier of the form `E<integer>`, unique within a graph.
    pub id: String,
    /// The correct text this error replaces.
    pub original: String,
    /// The erroneous text.
    pub replacement: String,
    pub error_type: ErrorType,
    /// Parent node id, if this error depends on another.
    pub parent: Option<String>,
    /// Char range of `original` within the graph's base text.
    pub start: usize,
    pub end: usize,
}

impl ErrorNode {
    /// Numeric part of the id, for deterministic iteration order.
    pub fn id_number(&self) -> u64 {
        id_number(&self.id)
    }
}

pub(crate) fn id_number(id: &str) -> u64 {
    id.strip_prefix('E')
        .and_then(|n| n.parse().ok())
        .unwrap_or(u64::MAX)
}

/// Dependency graph of inserted errors over one sentence.
///
/// `base_text` is the fully corrected sentence (every node's original
/// restored); node spans index into it and never overlap. Edges run
/// parent→child. After [`build_dag`] the edge relation is acyclic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorGraph {
    pub base_text: String,
    /// Nodes in document order (ascending span start).
    pub nodes: Vec<ErrorNode>,
    /// Parent→child pairs by node id.
    pub edges: Vec<(String, String)>,
    /// Non-fatal repairs recorded during parsing (e.g. dropped dangling
    /// parent references).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ErrorGraph {
    pub fn node(&self, id: &str) -> Option<&ErrorNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Children of `id` under the parent→child edge relation.
    pub fn children<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |(p, _)| p == id)
            .map(|(_, c)| c.as_str())
    }

    /// True if the edge relation contains a directed cycle.
    pub fn is_cyclic(&self) -> bool {
        graph::has_cycle(self)
    }
}
