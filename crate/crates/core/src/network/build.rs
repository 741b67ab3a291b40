//! Graph construction from interrelation tables, pruning and augmentation.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use super::{
    CandidateVerdict, ConjugationGraph, Edge, EdgeOrigin, InterrelationEntry, InterrelationTable, NetworkError,
    Relation, RelationKind, StrongCandidateTable,
};
use crate::stats::{classify_correlation, CorrelationMatrix, CorrelationStrength};
use crate::taxonomy::CapabilityId;

/// Rank of capabilities along the course of a movement, by id prefix.
///
/// The most specific matching prefix decides; ids without a rule rank last.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageOrder {
    rules: Vec<(CapabilityId, u32)>,
}

impl StageOrder {
    pub fn new(rules: Vec<(CapabilityId, u32)>) -> Self {
        StageOrder { rules }
    }

    pub fn reference() -> Self {
        let text = include_str!("../../fixtures/movement_stages.csv");
        StageOrder::from_csv(text.as_bytes()).expect("stage fixture is valid")
    }

    /// Reads `prefix,stage` records.
    pub fn from_csv<R: Read>(input: R) -> Result<Self, NetworkError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let mut rules = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| NetworkError::Parse { line, reason: e.to_string() })?;
            let stage = rec[1]
                .parse()
                .map_err(|_| NetworkError::Parse { line, reason: format!("bad stage {:?}", &rec[1]) })?;
            rules.push((rec[0].parse()?, stage));
        }
        Ok(StageOrder { rules })
    }

    pub fn stage(&self, id: &CapabilityId) -> u32 {
        self.rules
            .iter()
            .filter(|(prefix, _)| id.is_within(prefix))
            .max_by_key(|(prefix, _)| prefix.is_detail())
            .map(|(_, s)| *s)
            .unwrap_or(u32::MAX)
    }

    fn key(&self, id: &CapabilityId) -> (u32, CapabilityId) {
        (self.stage(id), *id)
    }
}

/// How table entries become directed edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// Conditions and dependencies keep their direction; symmetric relations
    /// point from the smaller to the larger id and are dropped if they close a cycle.
    Relational,
    /// Every edge points from the earlier to the later movement stage.
    MovementStages(StageOrder),
}

impl Orientation {
    /// Orientation for a pair without an inherent direction.
    fn orient_pair(&self, a: CapabilityId, b: CapabilityId) -> (CapabilityId, CapabilityId) {
        let (lo, hi) = match self {
            Orientation::Relational => (a.min(b), a.max(b)),
            Orientation::MovementStages(stages) => {
                if stages.key(&a) <= stages.key(&b) {
                    (a, b)
                } else {
                    (b, a)
                }
            }
        };
        (lo, hi)
    }
}

fn directed(entry: &InterrelationEntry) -> (CapabilityId, CapabilityId) {
    match entry.relation.kind {
        Relation::ConditionFor => (entry.row, entry.col),
        Relation::DependsOn => (entry.col, entry.row),
        _ => (entry.row.min(entry.col), entry.row.max(entry.col)),
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BuildReport {
    /// Entries with an endpoint outside the node scope.
    pub out_of_scope: Vec<(CapabilityId, CapabilityId)>,
    /// Entries folded into another entry for the same pair.
    pub merged_duplicates: usize,
    /// Symmetric relations dropped because they would close a cycle.
    pub dropped_cycle: Vec<(CapabilityId, CapabilityId)>,
    /// Conditions or dependencies whose edge points against the stated direction.
    pub reoriented: Vec<(CapabilityId, CapabilityId)>,
}

impl fmt::Display for BuildReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} entries outside node scope", self.out_of_scope.len())?;
        writeln!(f, "{} duplicate entries merged", self.merged_duplicates)?;
        write!(f, "{} edges dropped to avoid cycles", self.dropped_cycle.len())?;
        for (a, b) in &self.dropped_cycle {
            write!(f, "\n  dropped {a} -> {b}")?;
        }
        if !self.reoriented.is_empty() {
            write!(f, "\n{} directed relations reoriented by stage", self.reoriented.len())?;
        }
        Ok(())
    }
}

/// Builds the conjugation graph over `scope` from an interrelation table.
///
/// Entries for the same unordered pair are merged: conditions and dependencies
/// win over co-occurrence, which wins over replacement.
pub fn build_graph(
    table: &InterrelationTable,
    scope: &[CapabilityId],
    orientation: &Orientation,
) -> Result<(ConjugationGraph, BuildReport), NetworkError> {
    let mut graph = ConjugationGraph::new(scope.iter().copied());
    let mut report = BuildReport::default();

    let mut merged: BTreeMap<(CapabilityId, CapabilityId), InterrelationEntry> = BTreeMap::new();
    for entry in table.entries() {
        if !graph.contains_node(&entry.row) || !graph.contains_node(&entry.col) {
            report.out_of_scope.push((entry.row, entry.col));
            continue;
        }
        let pair = (entry.row.min(entry.col), entry.row.max(entry.col));
        match merged.get_mut(&pair) {
            None => {
                merged.insert(pair, *entry);
            }
            Some(kept) => {
                report.merged_duplicates += 1;
                let (new_p, old_p) = (entry.relation.kind.precedence(), kept.relation.kind.precedence());
                if new_p < old_p {
                    *kept = *entry;
                } else if new_p == old_p {
                    kept.relation.manufacturing |= entry.relation.manufacturing;
                }
            }
        }
    }

    let (skeleton, symmetric): (Vec<_>, Vec<_>) = merged.values().partition(|e| e.relation.kind.is_directed());
    for entry in skeleton.iter().chain(symmetric.iter()) {
        let stated = directed(entry);
        let (from, to) = match orientation {
            Orientation::Relational => stated,
            Orientation::MovementStages(_) => orientation.orient_pair(entry.row, entry.col),
        };
        if entry.relation.kind.is_directed() && (from, to) != stated {
            report.reoriented.push((from, to));
        }
        match graph.add_edge(Edge::new(from, to, entry.relation, EdgeOrigin::Interrelation)) {
            Ok(()) => {}
            Err(NetworkError::Cycle(_)) if !entry.relation.kind.is_directed() => {
                report.dropped_cycle.push((from, to));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((graph, report))
}

/// Removes edges whose correlation magnitude is below `threshold` and
/// annotates the survivors with their correlation.
pub fn prune_weak(
    graph: &ConjugationGraph,
    corr: &CorrelationMatrix,
    threshold: f64,
) -> Result<(ConjugationGraph, Vec<Edge>), NetworkError> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(NetworkError::InvalidThreshold(threshold));
    }
    let mut out = graph.clone();
    let mut removed = Vec::new();
    for edge in graph.edges() {
        let r = corr.get(&edge.from, &edge.to)?;
        if r.abs() < threshold {
            let mut e = out.remove_edge(&edge.from, &edge.to).expect("edge present");
            e.correlation = Some(r);
            removed.push(e);
        } else {
            out.edge_mut(&edge.from, &edge.to).expect("edge present").correlation = Some(r);
        }
    }
    Ok((out, removed))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AugmentOptions {
    /// Also connect nodes that lie on no path with at least `n_min` nodes.
    pub repair: bool,
    pub n_min: usize,
    pub orientation: Orientation,
}

fn candidate_edge(
    graph: &ConjugationGraph,
    a: CapabilityId,
    b: CapabilityId,
    r: f64,
    origin: EdgeOrigin,
    orientation: &Orientation,
) -> Option<Edge> {
    if !graph.contains_node(&a) || !graph.contains_node(&b) || a == b || graph.edge_between(&a, &b).is_some() {
        return None;
    }
    let (from, to) = orientation.orient_pair(a, b);
    let mut edge = Edge::new(from, to, RelationKind { kind: Relation::AppearsWith, manufacturing: false }, origin);
    edge.correlation = Some(r);
    Some(edge)
}

/// Adds strongly correlated pairs the interrelation table missed, then
/// optionally repairs reachability.
///
/// Repair visits nodes that lie on no path of `n_min` nodes in canonical
/// order and adds the incident missed pair with the largest |r|, whatever
/// its strength, as long as it keeps the graph acyclic.
pub fn augment_strong(
    graph: &ConjugationGraph,
    candidates: &StrongCandidateTable,
    options: &AugmentOptions,
) -> Result<(ConjugationGraph, Vec<Edge>), NetworkError> {
    let mut out = graph.clone();
    let mut added = Vec::new();
    let missed = || candidates.entries().iter().filter(|c| c.verdict == CandidateVerdict::NotInInterrelations);

    for c in missed().filter(|c| classify_correlation(c.r) == CorrelationStrength::Strong) {
        if let Some(edge) = candidate_edge(&out, c.first, c.second, c.r, EdgeOrigin::StrongCandidate, &options.orientation) {
            out.add_edge(edge.clone())?;
            added.push(edge);
        }
    }

    if options.repair {
        let mut hopeless: Vec<CapabilityId> = Vec::new();
        loop {
            let short = out.nodes_off_long_paths(options.n_min)?;
            let Some(node) = short.into_iter().find(|n| !hopeless.contains(n)) else {
                break;
            };
            let mut options_for_node: Vec<Edge> = missed()
                .filter(|c| c.first == node || c.second == node)
                .filter_map(|c| candidate_edge(&out, c.first, c.second, c.r, EdgeOrigin::ReachabilityRepair, &options.orientation))
                .filter(|e| out.path(&e.to, &e.from).is_none())
                .collect();
            // Stable sort keeps table order among equal magnitudes.
            options_for_node.sort_by(|a, b| {
                let (ra, rb) = (a.correlation.unwrap_or(0.0).abs(), b.correlation.unwrap_or(0.0).abs());
                rb.total_cmp(&ra)
            });
            match options_for_node.into_iter().next() {
                Some(edge) => {
                    out.add_edge(edge.clone())?;
                    added.push(edge);
                }
                None => hopeless.push(node),
            }
        }
    }
    Ok((out, added))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::StrongCandidate;
    use crate::stats::SquareTable;

    fn id(s: &str) -> CapabilityId {
        s.parse().unwrap()
    }

    fn entry(row: &str, col: &str, kind: Relation) -> InterrelationEntry {
        InterrelationEntry { row: id(row), col: id(col), relation: RelationKind { kind, manufacturing: false } }
    }

    fn scope_of(table: &InterrelationTable) -> Vec<CapabilityId> {
        let mut ids: Vec<_> = table.entries().iter().flat_map(|e| [e.row, e.col]).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    #[test]
    fn condition_and_dependency_orient_the_same_way() {
        let t = InterrelationTable::new(vec![
            entry("1.01", "1.05.01", Relation::ConditionFor),
            entry("1.05.01", "1.01", Relation::DependsOn),
        ])
        .unwrap();
        let (g, report) = build_graph(&t, &scope_of(&t), &Orientation::Relational).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.edge(&id("1.01"), &id("1.05.01")).is_some());
        assert_eq!(report.merged_duplicates, 1);
    }

    #[test]
    fn symmetric_relation_closing_a_cycle_is_dropped() {
        let t = InterrelationTable::new(vec![
            entry("2.01", "1.01", Relation::ConditionFor),
            entry("1.01", "1.02", Relation::ConditionFor),
            entry("1.02", "2.01", Relation::AppearsWith),
        ])
        .unwrap();
        let (g, report) = build_graph(&t, &scope_of(&t), &Orientation::Relational).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(report.dropped_cycle, vec![(id("1.02"), id("2.01"))]);
    }

    #[test]
    fn directed_cycle_is_an_error() {
        let t = InterrelationTable::new(vec![
            entry("1.01", "1.02", Relation::ConditionFor),
            entry("1.02", "1.03", Relation::ConditionFor),
            entry("1.01", "1.03", Relation::DependsOn),
        ])
        .unwrap();
        assert!(matches!(build_graph(&t, &scope_of(&t), &Orientation::Relational), Err(NetworkError::Cycle(_))));
    }

    #[test]
    fn precedence_prefers_condition_over_appearance() {
        let t = InterrelationTable::new(vec![
            entry("1.02", "1.01", Relation::ReplacedBy),
            entry("1.02", "1.01", Relation::AppearsWith),
            entry("1.02", "1.01", Relation::ConditionFor),
        ])
        .unwrap();
        let (g, _) = build_graph(&t, &scope_of(&t), &Orientation::Relational).unwrap();
        let e = g.edge(&id("1.02"), &id("1.01")).unwrap();
        assert_eq!(e.relation.kind, Relation::ConditionFor);
    }

    #[test]
    fn stage_order_uses_most_specific_prefix() {
        let s = StageOrder::reference();
        assert_eq!(s.stage(&id("3.03.04")), 3);
        assert_eq!(s.stage(&id("3.03.10")), 5);
        assert_eq!(s.stage(&id("4.04")), u32::MAX);
    }

    fn matrix(ids: &[&str], pairs: &[(&str, &str, f64)]) -> CorrelationMatrix {
        let mut t = SquareTable::new(ids.iter().map(|s| id(s)).collect());
        for i in 0..ids.len() {
            t.set_symmetric(i, i, Some(1.0));
        }
        for (a, b, r) in pairs {
            let (i, j) = (t.index_of(&id(a)).unwrap(), t.index_of(&id(b)).unwrap());
            t.set_symmetric(i, j, Some(*r));
        }
        CorrelationMatrix { table: t, n_samples: 10 }
    }

    #[test]
    fn prune_thresholds() {
        let t = InterrelationTable::new(vec![
            entry("1.01", "1.02", Relation::ConditionFor),
            entry("1.02", "1.03", Relation::AppearsWith),
        ])
        .unwrap();
        let (g, _) = build_graph(&t, &scope_of(&t), &Orientation::Relational).unwrap();
        let m = matrix(&["1.01", "1.02", "1.03"], &[("1.01", "1.02", 0.9), ("1.02", "1.03", -0.3)]);
        let (p, removed) = prune_weak(&g, &m, 0.4).unwrap();
        assert_eq!(removed.len(), 1);
        assert_eq!(p.edge(&id("1.01"), &id("1.02")).unwrap().correlation, Some(0.9));
        assert_eq!(prune_weak(&g, &m, 0.0).unwrap().0.edge_count(), 2);
        assert_eq!(prune_weak(&g, &m, 1.01).unwrap().0.edge_count(), 0);
        assert!(prune_weak(&g, &m, f64::NAN).is_err());

        let partial = matrix(&["1.01", "1.02"], &[("1.01", "1.02", 0.9)]);
        assert!(matches!(prune_weak(&g, &partial, 0.4), Err(NetworkError::Stats(_))));
    }

    #[test]
    fn augment_with_empty_table_is_identity() {
        let g = ConjugationGraph::new([id("1.01"), id("1.02")]);
        let opts = AugmentOptions { repair: true, n_min: 4, orientation: Orientation::Relational };
        let (h, added) = augment_strong(&g, &StrongCandidateTable::default(), &opts).unwrap();
        assert_eq!(h, g);
        assert!(added.is_empty());
    }

    #[test]
    fn augment_only_takes_strong_missed_pairs() {
        let g = ConjugationGraph::new([id("1.01"), id("1.02"), id("1.03")]);
        let cands = StrongCandidateTable::new(vec![
            StrongCandidate { first: id("1.01"), second: id("1.02"), r: 0.85, verdict: CandidateVerdict::NotInInterrelations },
            StrongCandidate { first: id("1.02"), second: id("1.03"), r: 0.95, verdict: CandidateVerdict::Impossible },
            StrongCandidate { first: id("1.02"), second: id("1.03"), r: 0.7, verdict: CandidateVerdict::NotInInterrelations },
        ]);
        let no_repair = AugmentOptions { repair: false, n_min: 3, orientation: Orientation::Relational };
        let (h, added) = augment_strong(&g, &cands, &no_repair).unwrap();
        assert_eq!(added.len(), 1);
        assert_eq!(h.edge_count(), 1);
        let repair = AugmentOptions { repair: true, ..no_repair };
        let (h, added) = augment_strong(&g, &cands, &repair).unwrap();
        assert_eq!(added.len(), 2);
        assert_eq!(added[1].origin, EdgeOrigin::ReachabilityRepair);
        assert!(h.nodes_off_long_paths(3).unwrap().is_empty());
    }
}
