//! DAG construction, probabilistic pruning, variant realization, and
//! corpus structural statistics.

use super::{id_number, ErrorGraph};
use crate::annotation::{error_type_to_tag, TagStyle};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphOpError {
    #[error("unknown node id {0:?}")]
    UnknownId(String),
    #[error("operation requires an acyclic graph")]
    CyclicGraph,
    #[error("kept set is not closed under ancestors: {child:?} kept but parent {parent:?} removed")]
    AncestorViolation { child: String, parent: String },
}

fn adjacency(g: &ErrorGraph) -> HashMap<&str, Vec<&str>> {
    let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
    for n in &g.nodes {
        adj.entry(n.id.as_str()).or_default();
    }
    for (p, c) in &g.edges {
        adj.entry(p.as_str()).or_default().push(c.as_str());
    }
    adj
}

pub(crate) fn has_cycle(g: &ErrorGraph) -> bool {
    // Kahn's algorithm: a cycle exists iff some node is never drained.
    let adj = adjacency(g);
    let mut indegree: HashMap<&str, usize> = adj.keys().map(|&k| (k, 0)).collect();
    for (_, c) in &g.edges {
        *indegree.get_mut(c.as_str()).expect("edge endpoint exists") += 1;
    }
    let mut queue: VecDeque<&str> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&k, _)| k)
        .collect();
    let mut drained = 0usize;
    while let Some(n) = queue.pop_front() {
        drained += 1;
        for &c in &adj[n] {
            let d = indegree.get_mut(c).unwrap();
            *d -= 1;
            if *d == 0 {
                queue.push_back(c);
            }
        }
    }
    drained < g.nodes.len()
}

/// Strongly connected components (Tarjan, iterative). Only components of
/// size ≥ 2 or with a self-loop participate in cycles.
fn sccs(g: &ErrorGraph) -> Vec<Vec<String>> {
    let ids: Vec<&str> = g.nodes.iter().map(|n| n.id.as_str()).collect();
    let index_of: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
    for (p, c) in &g.edges {
        adj[index_of[p.as_str()]].push(index_of[c.as_str()]);
    }
    let n = ids.len();
    let mut index = vec![usize::MAX; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut counter = 0usize;
    let mut out: Vec<Vec<String>> = Vec::new();

    // (node, next-child-cursor)
    let mut work: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        work.push((root, 0));
        while let Some(&mut (v, ref mut cursor)) = work.last_mut() {
            if *cursor == 0 {
                index[v] = counter;
                lowlink[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *cursor < adj[v].len() {
                let w = adj[v][*cursor];
                *cursor += 1;
                if index[w] == usize::MAX {
                    work.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            } else {
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    lowlink[parent] = lowlink[parent].min(lowlink[v]);
                }
                if lowlink[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(ids[w].to_string());
                        if w == v {
                            break;
                        }
                    }
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// Removes cycles by deleting descendant nodes, yielding a DAG.
///
/// Within each cyclic component the node whose span starts earliest in
/// the base text survives (numeric id breaks ties); the rest are deleted
/// together with their descendants, where descent never passes through a
/// surviving node. Nodes not reachable from any cycle are untouched.
/// A self-looped node cannot survive and is deleted outright.
pub fn build_dag(g: &ErrorGraph) -> ErrorGraph {
    let self_loops: HashSet<&str> = g
        .edges
        .iter()
        .filter(|(p, c)| p == c)
        .map(|(p, _)| p.as_str())
        .collect();
    let mut keepers: HashSet<String> = HashSet::new();
    let mut losers: Vec<String> = Vec::new();
    for comp in sccs(g) {
        let cyclic = comp.len() >= 2 || comp.iter().any(|id| self_loops.contains(id.as_str()));
        if !cyclic {
            continue;
        }
        let keeper = comp
            .iter()
            .filter(|id| !self_loops.contains(id.as_str()))
            .min_by_key(|id| {
                let node = g.node(id).expect("scc node exists");
                (node.start, id_number(id))
            })
            .cloned();
        for id in comp {
            if Some(&id) == keeper.as_ref() {
                keepers.insert(id);
            } else {
                losers.push(id);
            }
        }
    }
    // Close the deletion set under descendants, stopping at survivors of
    // other cycles.
    let adj = adjacency(g);
    let mut deleted: HashSet<String> = losers.iter().cloned().collect();
    let mut queue: VecDeque<String> = losers.into();
    while let Some(id) = queue.pop_front() {
        for &child in &adj[id.as_str()] {
            if keepers.contains(child) || deleted.contains(child) {
                continue;
            }
            deleted.insert(child.to_string());
            queue.push_back(child.to_string());
        }
    }
    let nodes = g
        .nodes
        .iter()
        .filter(|n| !deleted.contains(&n.id))
        .cloned()
        .map(|mut n| {
            if let Some(p) = &n.parent {
                if deleted.contains(p) {
                    n.parent = None;
                }
            }
            n
        })
        .collect();
    let edges = g
        .edges
        .iter()
        .filter(|(p, c)| p != c && !deleted.contains(p) && !deleted.contains(c))
        .cloned()
        .collect();
    ErrorGraph {
        base_text: g.base_text.clone(),
        nodes,
        edges,
        warnings: g.warnings.clone(),
    }
}

/// Transitive closure of `id` under parent→child edges, excluding `id`.
pub fn descendants(g: &ErrorGraph, id: &str) -> Result<BTreeSet<String>, GraphOpError> {
    if g.node(id).is_none() {
        return Err(GraphOpError::UnknownId(id.to_string()));
    }
    let adj = adjacency(g);
    let mut out = BTreeSet::new();
    let mut queue: VecDeque<&str> = VecDeque::from([id]);
    while let Some(n) = queue.pop_front() {
        for &c in &adj[n] {
            if c != id && out.insert(c.to_string()) {
                queue.push_back(c);
            }
        }
    }
    Ok(out)
}

/// Marks each node independently with probability `p` (iterating in
/// ascending numeric id order), then closes the marked set under
/// descendants. Deterministic for a fixed seed.
pub fn prune(g: &ErrorGraph, p: f64, seed: u64) -> Result<BTreeSet<String>, GraphOpError> {
    if has_cycle(g) {
        return Err(GraphOpError::CyclicGraph);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut order: Vec<&str> = g.nodes.iter().map(|n| n.id.as_str()).collect();
    order.sort_by_key(|id| id_number(id));
    let mut removed = BTreeSet::new();
    for id in order {
        // Draw for every node, marked or not, so the stream of random
        // numbers depends only on the node list.
        let marked = rng.gen::<f64>() < p;
        if marked {
            removed.insert(id.to_string());
            for d in descendants(g, id)? {
                removed.insert(d);
            }
        }
    }
    Ok(removed)
}

/// One realized training sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingVariant {
    /// Sentence containing the kept errors, untagged.
    pub input_text: String,
    /// Same sentence with kept error spans wrapped in canonical tags.
    pub target_tagged: String,
    /// Ids of the error nodes present in the variant.
    pub kept_ids: BTreeSet<String>,
}

/// Realizes a variant: removed nodes revert to their original text, kept
/// nodes show the erroneous replacement, and the target wraps kept spans
/// in canonical tags (the gold edit being the original text).
pub fn realize_variant(
    g: &ErrorGraph,
    kept: &BTreeSet<String>,
) -> Result<TrainingVariant, GraphOpError> {
    for id in kept {
        let node = g
            .node(id)
            .ok_or_else(|| GraphOpError::UnknownId(id.clone()))?;
        if let Some(parent) = &node.parent {
            if !kept.contains(parent) {
                return Err(GraphOpError::AncestorViolation {
                    child: id.clone(),
                    parent: parent.clone(),
                });
            }
        }
    }
    let chars: Vec<char> = g.base_text.chars().collect();
    let mut input = String::new();
    let mut target = String::new();
    let mut cursor = 0usize;
    for node in &g.nodes {
        let before: String = chars[cursor..node.start].iter().collect();
        input.push_str(&before);
        target.push_str(&before);
        if kept.contains(&node.id) {
            input.push_str(&node.replacement);
            let name =
                error_type_to_tag(node.error_type, TagStyle::Canonical).expect("taggable node");
            target.push('<');
            target.push_str(name);
            target.push('>');
            target.push_str(&node.replacement);
            target.push_str("</");
            target.push_str(name);
            target.push('>');
        } else {
            input.push_str(&node.original);
            target.push_str(&node.original);
        }
        cursor = node.end;
    }
    let tail: String = chars[cursor..].iter().collect();
    input.push_str(&tail);
    target.push_str(&tail);
    Ok(TrainingVariant {
        input_text: input,
        target_tagged: target,
        kept_ids: kept.clone(),
    })
}

/// Corpus-level structural statistics in the six-field reporting schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralStats {
    pub total_graphs: usize,
    pub total_nodes: usize,
    /// Average weakly connected components per graph; `None` on an empty
    /// corpus.
    pub avg_components: Option<f64>,
    pub avg_nodes: Option<f64>,
    pub avg_edges: Option<f64>,
    /// Average undirected incidences per node (2·edges/nodes); `None`
    /// when there are no nodes.
    pub avg_degree: Option<f64>,
}

fn component_count(g: &ErrorGraph) -> usize {
    // Union-find over node ids; edges treated as undirected.
    let ids: Vec<&str> = g.nodes.iter().map(|n| n.id.as_str()).collect();
    let index_of: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (p, c) in &g.edges {
        let (a, b) = (
            find(&mut parent, index_of[p.as_str()]),
            find(&mut parent, index_of[c.as_str()]),
        );
        parent[a] = b;
    }
    (0..ids.len())
        .filter(|&i| find(&mut parent, i) == i)
        .count()
}

/// Averages components, nodes, and edges over graphs, and degree over
/// nodes.
pub fn graph_stats(corpus: &[ErrorGraph]) -> StructuralStats {
    let total_graphs = corpus.len();
    let total_nodes: usize = corpus.iter().map(|g| g.nodes.len()).sum();
    let total_edges: usize = corpus.iter().map(|g| g.edges.len()).sum();
    let total_components: usize = corpus.iter().map(component_count).sum();
    let over_graphs = |x: usize| {
        if total_graphs == 0 {
            None
        } else {
            Some(x as f64 / total_graphs as f64)
        }
    };
    StructuralStats {
        total_graphs,
        total_nodes,
        avg_components: over_graphs(total_components),
        avg_nodes: over_graphs(total_nodes),
        avg_edges: over_graphs(total_edges),
        avg_degree: if total_nodes == 0 {
            None
        } else {
            Some(2.0 * total_edges as f64 / total_nodes as f64)
        },
    }
}
