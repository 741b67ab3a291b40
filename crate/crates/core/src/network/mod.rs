//! The directed graph of conjugated capabilities.

mod build;
mod export;
mod pipeline;
mod table;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::StatsError;
use crate::taxonomy::{CapabilityCatalog, CapabilityId, TaxonomyError};

pub use build::{augment_strong, build_graph, prune_weak, AugmentOptions, BuildReport, Orientation, StageOrder};
pub use pipeline::{build_pipeline, GraphBuild, GraphInputs, GraphParams};
pub use table::{CandidateVerdict, InterrelationEntry, InterrelationTable, StrongCandidate, StrongCandidateTable};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("cycle through {}", crate::profiles::format_ids(.0))]
    Cycle(Vec<CapabilityId>),
    #[error("capability {0} is not a node of the graph")]
    UnknownNode(CapabilityId),
    #[error("edge between {0} and {1} already present")]
    DuplicateEdge(CapabilityId, CapabilityId),
    #[error("self relation on {0}")]
    SelfLoop(CapabilityId),
    #[error("threshold must be a non-negative number, got {0}")]
    InvalidThreshold(f64),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    DependsOn,
    ConditionFor,
    AppearsWith,
    ReplacedBy,
}

impl Relation {
    pub fn letter(self) -> char {
        match self {
            Relation::DependsOn => 'd',
            Relation::ConditionFor => 'c',
            Relation::AppearsWith => 'a',
            Relation::ReplacedBy => 'r',
        }
    }

    pub fn from_letter(c: &str) -> Option<Relation> {
        match c {
            "d" => Some(Relation::DependsOn),
            "c" => Some(Relation::ConditionFor),
            "a" => Some(Relation::AppearsWith),
            "r" => Some(Relation::ReplacedBy),
            _ => None,
        }
    }

    /// Conditions and dependencies carry a direction of their own.
    pub fn is_directed(self) -> bool {
        matches!(self, Relation::DependsOn | Relation::ConditionFor)
    }

    /// Lower wins when duplicate entries for one pair are merged.
    pub(crate) fn precedence(self) -> u8 {
        match self {
            Relation::DependsOn | Relation::ConditionFor => 0,
            Relation::AppearsWith => 1,
            Relation::ReplacedBy => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationKind {
    pub kind: Relation,
    /// Relation specific to manufacturing work.
    pub manufacturing: bool,
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.letter())?;
        if self.manufacturing {
            f.write_str(" (M)")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeOrigin {
    Interrelation,
    StrongCandidate,
    ReachabilityRepair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: CapabilityId,
    pub to: CapabilityId,
    pub relation: RelationKind,
    pub correlation: Option<f64>,
    pub origin: EdgeOrigin,
}

impl Edge {
    pub fn new(from: CapabilityId, to: CapabilityId, relation: RelationKind, origin: EdgeOrigin) -> Self {
        Edge { from, to, relation, correlation: None, origin }
    }

    /// The endpoints in canonical order, independent of orientation.
    pub fn pair(&self) -> (CapabilityId, CapabilityId) {
        (self.from.min(self.to), self.from.max(self.to))
    }
}

/// Acyclic directed graph with at most one edge per unordered node pair.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ConjugationGraph {
    nodes: BTreeMap<CapabilityId, Option<String>>,
    edges: BTreeMap<(CapabilityId, CapabilityId), Edge>,
}

impl ConjugationGraph {
    pub fn new(nodes: impl IntoIterator<Item = CapabilityId>) -> Self {
        ConjugationGraph {
            nodes: nodes.into_iter().map(|n| (n, None)).collect(),
            edges: BTreeMap::new(),
        }
    }

    /// Copies display names for every node the catalog knows.
    pub fn with_names(mut self, catalog: &CapabilityCatalog) -> Self {
        for (id, name) in self.nodes.iter_mut() {
            *name = catalog.name(id).map(str::to_owned);
        }
        self
    }

    pub fn set_name(&mut self, id: &CapabilityId, name: Option<String>) -> Result<(), NetworkError> {
        let slot = self.nodes.get_mut(id).ok_or(NetworkError::UnknownNode(*id))?;
        *slot = name;
        Ok(())
    }

    pub fn name(&self, id: &CapabilityId) -> Option<&str> {
        self.nodes.get(id).and_then(|n| n.as_deref())
    }

    pub fn nodes(&self) -> impl Iterator<Item = CapabilityId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains_node(&self, id: &CapabilityId) -> bool {
        self.nodes.contains_key(id)
    }

    /// Edges ordered by `(from, to)`.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, from: &CapabilityId, to: &CapabilityId) -> Option<&Edge> {
        self.edges.get(&(*from, *to))
    }

    /// The edge joining `a` and `b` in either direction.
    pub fn edge_between(&self, a: &CapabilityId, b: &CapabilityId) -> Option<&Edge> {
        self.edge(a, b).or_else(|| self.edge(b, a))
    }

    pub fn successors(&self, id: &CapabilityId) -> Vec<CapabilityId> {
        self.edges
            .range((*id, CapabilityId::MIN)..=(*id, CapabilityId::MAX))
            .map(|(k, _)| k.1)
            .collect()
    }

    pub fn predecessors(&self, id: &CapabilityId) -> Vec<CapabilityId> {
        self.edges.keys().filter(|k| k.1 == *id).map(|k| k.0).collect()
    }

    /// Nodes joined to `id` by an edge in either direction, in canonical order.
    pub fn neighbors(&self, id: &CapabilityId) -> Vec<CapabilityId> {
        let set: BTreeSet<CapabilityId> = self.successors(id).into_iter().chain(self.predecessors(id)).collect();
        set.into_iter().collect()
    }

    /// Subgraph on `keep`, with the edges among those nodes.
    pub fn induced(&self, keep: &[CapabilityId]) -> ConjugationGraph {
        let keep: BTreeSet<CapabilityId> = keep.iter().copied().filter(|n| self.contains_node(n)).collect();
        ConjugationGraph {
            nodes: self.nodes.iter().filter(|(k, _)| keep.contains(k)).map(|(k, v)| (*k, v.clone())).collect(),
            edges: self
                .edges
                .iter()
                .filter(|((a, b), _)| keep.contains(a) && keep.contains(b))
                .map(|(k, e)| (*k, e.clone()))
                .collect(),
        }
    }

    /// Inserts an edge, keeping the graph acyclic and free of parallel edges.
    pub fn add_edge(&mut self, edge: Edge) -> Result<(), NetworkError> {
        for n in [edge.from, edge.to] {
            if !self.contains_node(&n) {
                return Err(NetworkError::UnknownNode(n));
            }
        }
        if edge.from == edge.to {
            return Err(NetworkError::SelfLoop(edge.from));
        }
        if self.edge_between(&edge.from, &edge.to).is_some() {
            return Err(NetworkError::DuplicateEdge(edge.from, edge.to));
        }
        if let Some(mut path) = self.path(&edge.to, &edge.from) {
            path.push(edge.to);
            return Err(NetworkError::Cycle(path));
        }
        self.edges.insert((edge.from, edge.to), edge);
        Ok(())
    }

    pub fn remove_edge(&mut self, from: &CapabilityId, to: &CapabilityId) -> Option<Edge> {
        self.edges.remove(&(*from, *to))
    }

    pub(crate) fn edge_mut(&mut self, from: &CapabilityId, to: &CapabilityId) -> Option<&mut Edge> {
        self.edges.get_mut(&(*from, *to))
    }

    /// A directed path from `from` to `to`, found breadth first.
    pub fn path(&self, from: &CapabilityId, to: &CapabilityId) -> Option<Vec<CapabilityId>> {
        let mut parent: BTreeMap<CapabilityId, CapabilityId> = BTreeMap::new();
        let mut queue = VecDeque::from([*from]);
        let mut seen = BTreeSet::from([*from]);
        while let Some(n) = queue.pop_front() {
            if n == *to {
                let mut path = vec![n];
                let mut cur = n;
                while let Some(p) = parent.get(&cur) {
                    path.push(*p);
                    cur = *p;
                }
                path.reverse();
                return Some(path);
            }
            for s in self.successors(&n) {
                if seen.insert(s) {
                    parent.insert(s, n);
                    queue.push_back(s);
                }
            }
        }
        None
    }

    /// Kahn order with ties broken canonically.
    pub fn topological_order(&self) -> Result<Vec<CapabilityId>, NetworkError> {
        let mut indeg: BTreeMap<CapabilityId, usize> = self.nodes.keys().map(|n| (*n, 0)).collect();
        for (_, to) in self.edges.keys() {
            *indeg.get_mut(to).expect("edge endpoints are nodes") += 1;
        }
        let mut ready: BTreeSet<CapabilityId> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for s in self.successors(&n) {
                let d = indeg.get_mut(&s).expect("node");
                *d -= 1;
                if *d == 0 {
                    ready.insert(s);
                }
            }
        }
        if order.len() == self.nodes.len() {
            return Ok(order);
        }
        let stuck: Vec<CapabilityId> = indeg.iter().filter(|(_, d)| **d > 0).map(|(n, _)| *n).collect();
        Err(NetworkError::Cycle(stuck))
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_ok()
    }

    /// Node count of the longest directed path through each node.
    pub fn longest_path_through(&self) -> Result<BTreeMap<CapabilityId, usize>, NetworkError> {
        let order = self.topological_order()?;
        let mut up: BTreeMap<CapabilityId, usize> = BTreeMap::new();
        for n in &order {
            let best = self.predecessors(n).iter().map(|p| up[p]).max().unwrap_or(0);
            up.insert(*n, best + 1);
        }
        let mut down: BTreeMap<CapabilityId, usize> = BTreeMap::new();
        for n in order.iter().rev() {
            let best = self.successors(n).iter().map(|s| down[s]).max().unwrap_or(0);
            down.insert(*n, best + 1);
        }
        Ok(order.iter().map(|n| (*n, up[n] + down[n] - 1)).collect())
    }

    /// Nodes not on any directed path with at least `n_min` nodes.
    pub fn nodes_off_long_paths(&self, n_min: usize) -> Result<Vec<CapabilityId>, NetworkError> {
        Ok(self
            .longest_path_through()?
            .into_iter()
            .filter(|(_, len)| *len < n_min)
            .map(|(n, _)| n)
            .collect())
    }
}
