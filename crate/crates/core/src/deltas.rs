//! Capability deltas, fuzzy feasibility and delta compensation along conjugations.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{ConjugationGraph, NetworkError};
use crate::profiles::{format_ids, Profile, RequirementSet};
use crate::taxonomy::{CapabilityId, Quantification};

const Q_MAX: i32 = Quantification::MAX.value() as i32;

#[derive(Debug, Error)]
pub enum DeltaError {
    #[error("profile {agent} has no value for {}", format_ids(.missing))]
    MissingCapabilities { agent: String, missing: Vec<CapabilityId> },
    #[error("invalid fuzzy parameters: {0}")]
    InvalidFuzz(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// `requirement - capacity` per required capability. Positive values are deficits,
/// negative values are reserves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaSet {
    pub action_id: String,
    pub agent_id: String,
    pub deltas: BTreeMap<CapabilityId, i32>,
}

impl DeltaSet {
    pub fn get(&self, id: &CapabilityId) -> Option<i32> {
        self.deltas.get(id).copied()
    }
}

pub fn compute_delta(requirements: &RequirementSet, profile: &Profile) -> Result<DeltaSet, DeltaError> {
    let missing = profile.missing_from(&requirements.ids());
    if !missing.is_empty() {
        return Err(DeltaError::MissingCapabilities { agent: profile.agent_id.clone(), missing });
    }
    let deltas = requirements
        .requirements
        .iter()
        .map(|(id, r)| {
            let c = profile.get(id).expect("checked above");
            (*id, i32::from(r.value()) - i32::from(c.value()))
        })
        .collect();
    Ok(DeltaSet { action_id: requirements.action_id.clone(), agent_id: profile.agent_id.clone(), deltas })
}

/// Sum of positive deltas; reserves do not offset deficits.
pub fn deficit_sum(deltas: &DeltaSet) -> u32 {
    positive_sum(deltas.deltas.values().copied())
}

fn positive_sum(values: impl Iterator<Item = i32>) -> u32 {
    values.map(|d| d.max(0) as u32).sum()
}

/// Tolerances: per-capability slack `xi` (missing entries mean 0) and aggregate slack `theta`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzyParams {
    pub xi: BTreeMap<CapabilityId, u8>,
    pub theta: u32,
}

impl FuzzyParams {
    pub fn strict() -> Self {
        FuzzyParams::default()
    }

    pub fn xi(&self, id: &CapabilityId) -> i32 {
        self.xi.get(id).map_or(0, |x| i32::from(*x))
    }

    /// Checks the slack bounds for a requirement set of `n_required` capabilities.
    pub fn validate(&self, n_required: usize) -> Result<(), DeltaError> {
        if let Some((id, x)) = self.xi.iter().find(|(_, x)| i32::from(**x) > Q_MAX) {
            return Err(DeltaError::InvalidFuzz(format!("slack {x} for {id} exceeds {Q_MAX}")));
        }
        let cap = n_required as u64 * Q_MAX as u64;
        if u64::from(self.theta) > cap {
            return Err(DeltaError::InvalidFuzz(format!(
                "aggregate slack {} exceeds {cap} for {n_required} required capabilities",
                self.theta
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "clause", rename_all = "snake_case")]
pub enum Violation {
    /// A single delta exceeds its slack.
    PerCapability { id: CapabilityId, delta: i32, xi: i32 },
    /// The deficit sum exceeds the aggregate slack.
    Aggregate { deficit: u32, theta: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PerCapability { id, delta, xi } => write!(f, "delta {delta:+} on {id} exceeds slack {xi}"),
            Violation::Aggregate { deficit, theta } => write!(f, "deficit sum {deficit} exceeds aggregate slack {theta}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn is_feasible_fuzzy(deltas: &DeltaSet, fuzz: &FuzzyParams) -> FeasibilityReport {
    let mut violations: Vec<Violation> = deltas
        .deltas
        .iter()
        .filter(|(id, d)| **d > fuzz.xi(id))
        .map(|(id, d)| Violation::PerCapability { id: *id, delta: *d, xi: fuzz.xi(id) })
        .collect();
    let deficit = deficit_sum(deltas);
    if deficit > fuzz.theta {
        violations.push(Violation::Aggregate { deficit, theta: fuzz.theta });
    }
    FeasibilityReport { violations }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    FeasibleDirect,
    FeasibleAfterCompensation,
    Infeasible,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::FeasibleDirect => "feasible_direct",
            Outcome::FeasibleAfterCompensation => "feasible_after_compensation",
            Outcome::Infeasible => "infeasible",
        })
    }
}

/// Effort moved from a deficient capability to a conjugated one with reserve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shift {
    pub deficient: CapabilityId,
    pub reserve: CapabilityId,
    pub amount: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompensationTrace {
    pub action_id: String,
    pub agent_id: String,
    pub outcome: Outcome,
    pub steps: Vec<Shift>,
    pub initial_requirements: RequirementSet,
    pub final_requirements: RequirementSet,
    /// Clauses still violated by the final requirements.
    pub remaining: FeasibilityReport,
}

impl CompensationTrace {
    pub fn to_text(&self) -> String {
        let mut out = format!("action {} / agent {}: {}\n", self.action_id, self.agent_id, self.outcome);
        for s in &self.steps {
            let _ = writeln!(out, "{} {} {}", s.deficient, s.reserve, s.amount);
        }
        for v in &self.remaining.violations {
            let _ = writeln!(out, "unresolved: {v}");
        }
        out
    }

    pub fn to_json(&self) -> Result<String, DeltaError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Working state: requirements over the required set plus any conjugated
/// capability that has received effort.
struct Ledger<'a> {
    required: Vec<CapabilityId>,
    r: BTreeMap<CapabilityId, i32>,
    c: BTreeMap<CapabilityId, i32>,
    partners: BTreeMap<CapabilityId, Vec<CapabilityId>>,
    fuzz: &'a FuzzyParams,
}

impl Ledger<'_> {
    fn delta(&self, id: &CapabilityId) -> i32 {
        self.r.get(id).copied().unwrap_or(0) - self.c[id]
    }

    fn deficit(&self) -> u32 {
        positive_sum(self.required.iter().map(|id| self.delta(id)))
    }

    fn satisfied(&self) -> bool {
        self.required.iter().all(|id| self.delta(id) <= self.fuzz.xi(id)) && self.deficit() <= self.fuzz.theta
    }

    /// Admissible shifts in trial order: largest deficit first, then id of the
    /// deficient capability, then id of the receiver.
    fn candidates(&self) -> Vec<(CapabilityId, CapabilityId)> {
        let mut deficient: Vec<(i32, CapabilityId)> =
            self.required.iter().map(|id| (self.delta(id), *id)).filter(|(d, _)| *d > 0).collect();
        deficient.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut out = Vec::new();
        for (_, d) in deficient {
            for e in &self.partners[&d] {
                let r_e = self.r.get(e).copied().unwrap_or(0);
                if self.delta(e) < 0 && r_e < Q_MAX && self.r[&d] > 0 {
                    out.push((d, *e));
                }
            }
        }
        out
    }

    fn apply(&mut self, d: CapabilityId, e: CapabilityId, amount: i32) {
        *self.r.get_mut(&d).expect("deficient capability is required") -= amount;
        *self.r.entry(e).or_insert(0) += amount;
    }

    /// Whether some sequence of further shifts reaches a feasible state.
    ///
    /// Deficits can only drain into direct partners with reserve, so this is a
    /// bipartite transport problem. Per-capability slack forces a minimum
    /// outflow on each deficit; the largest total outflow meeting those minima
    /// decides the aggregate clause.
    fn completable(&self) -> bool {
        let deficient: Vec<CapabilityId> = self.required.iter().filter(|id| self.delta(id) > 0).copied().collect();
        let receivers: Vec<CapabilityId> = self.c.keys().filter(|id| self.delta(id) < 0).copied().collect();
        let index: BTreeMap<CapabilityId, usize> = receivers.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let adjacency: Vec<Vec<usize>> = deficient
            .iter()
            .map(|d| self.partners[d].iter().filter_map(|e| index.get(e).copied()).collect())
            .collect();
        let supply: Vec<i32> = deficient.iter().map(|d| self.delta(d)).collect();
        let need: Vec<i32> = deficient.iter().map(|d| (self.delta(d) - self.fuzz.xi(d)).max(0)).collect();
        let capacity: Vec<i32> = receivers.iter().map(|e| -self.delta(e)).collect();

        let mut flow = Transport::new(&adjacency, capacity);
        let forced: i32 = need.iter().sum();
        if flow.saturate(&need) < forced {
            return false;
        }
        let moved = flow.saturate(&supply);
        let total: i32 = supply.iter().sum();
        (total - moved) as u32 <= self.fuzz.theta
    }

    fn requirements(&self, action_id: &str) -> RequirementSet {
        let mut out = RequirementSet::new(action_id);
        for (id, v) in &self.r {
            out.requirements.insert(*id, Quantification::new(i64::from(*v)).expect("shifts stay on the scale"));
        }
        out
    }
}

/// Bipartite flow from deficits to receivers, grown one unit at a time by augmenting paths.
struct Transport<'g> {
    adjacency: &'g [Vec<usize>],
    residual: Vec<i32>,
    sent: Vec<i32>,
    /// `assigned[d][k]`: units from deficit `d` to its `k`-th partner.
    assigned: Vec<Vec<i32>>,
}

impl<'g> Transport<'g> {
    fn new(adjacency: &'g [Vec<usize>], capacity: Vec<i32>) -> Self {
        Transport {
            adjacency,
            residual: capacity,
            sent: vec![0; adjacency.len()],
            assigned: adjacency.iter().map(|a| vec![0; a.len()]).collect(),
        }
    }

    /// Pushes flow until each deficit has sent up to `limit`; returns the total sent.
    fn saturate(&mut self, limit: &[i32]) -> i32 {
        for (d, &cap) in limit.iter().enumerate() {
            while self.sent[d] < cap {
                let mut seen = vec![false; self.adjacency.len()];
                if !self.augment(d, &mut seen) {
                    break;
                }
                self.sent[d] += 1;
            }
        }
        self.sent.iter().sum()
    }

    /// Finds one unit of room for deficit `d`, rerouting other deficits if needed.
    fn augment(&mut self, d: usize, seen: &mut [bool]) -> bool {
        seen[d] = true;
        for k in 0..self.adjacency[d].len() {
            let e = self.adjacency[d][k];
            if self.residual[e] > 0 {
                self.residual[e] -= 1;
                self.assigned[d][k] += 1;
                return true;
            }
        }
        for k in 0..self.adjacency[d].len() {
            let e = self.adjacency[d][k];
            for other in 0..self.adjacency.len() {
                if seen[other] {
                    continue;
                }
                let Some(j) = self.adjacency[other].iter().position(|x| *x == e) else {
                    continue;
                };
                if self.assigned[other][j] > 0 && self.augment(other, seen) {
                    self.assigned[other][j] -= 1;
                    self.assigned[d][k] += 1;
                    return true;
                }
            }
        }
        false
    }
}

/// Shifts requirement units from deficient capabilities to conjugated ones with
/// reserve until the fuzzy constraints hold or no useful shift remains.
///
/// Conjugations are used in both directions. A receiver outside the requirement
/// set starts at requirement 0 and joins the final set once it receives effort;
/// it needs a value in the profile. Among admissible shifts the first, in the
/// documented order, that keeps a feasible completion reachable is taken. When
/// no completion exists the first admissible shift is taken anyway so the trace
/// shows how far compensation gets.
pub fn compensate(
    requirements: &RequirementSet,
    profile: &Profile,
    graph: &ConjugationGraph,
    fuzz: &FuzzyParams,
) -> Result<CompensationTrace, DeltaError> {
    fuzz.validate(requirements.requirements.len())?;
    graph.topological_order()?;
    let deltas = compute_delta(requirements, profile)?;

    let required = requirements.ids();
    let mut partners = BTreeMap::new();
    let mut c = BTreeMap::new();
    for id in &required {
        c.insert(*id, i32::from(profile.get(id).expect("checked by compute_delta").value()));
        let list: Vec<CapabilityId> = if graph.contains_node(id) { graph.neighbors(id) } else { Vec::new() };
        let usable: Vec<CapabilityId> = list.into_iter().filter(|e| profile.get(e).is_some()).collect();
        for e in &usable {
            c.insert(*e, i32::from(profile.get(e).expect("filtered").value()));
        }
        partners.insert(*id, usable);
    }
    let mut ledger = Ledger {
        required,
        r: requirements.requirements.iter().map(|(k, v)| (*k, i32::from(v.value()))).collect(),
        c,
        partners,
        fuzz,
    };

    let mut steps: Vec<Shift> = Vec::new();
    while !ledger.satisfied() {
        let candidates = ledger.candidates();
        let reachable = ledger.completable();
        let chosen = candidates.iter().copied().find(|(d, e)| {
            if !reachable {
                return true;
            }
            ledger.apply(*d, *e, 1);
            let ok = ledger.completable();
            ledger.apply(*d, *e, -1);
            ok
        });
        let Some((d, e)) = chosen else { break };
        let before = ledger.deficit();
        ledger.apply(d, e, 1);
        debug_assert!(ledger.deficit() < before);
        match steps.last_mut() {
            Some(last) if last.deficient == d && last.reserve == e => last.amount += 1,
            _ => steps.push(Shift { deficient: d, reserve: e, amount: 1 }),
        }
    }

    let final_requirements = ledger.requirements(&requirements.action_id);
    let final_deltas = DeltaSet {
        action_id: deltas.action_id.clone(),
        agent_id: deltas.agent_id.clone(),
        deltas: ledger.required.iter().map(|id| (*id, ledger.delta(id))).collect(),
    };
    let remaining = is_feasible_fuzzy(&final_deltas, fuzz);
    let outcome = match (remaining.is_feasible(), steps.is_empty()) {
        (true, true) => Outcome::FeasibleDirect,
        (true, false) => Outcome::FeasibleAfterCompensation,
        (false, _) => Outcome::Infeasible,
    };
    debug_assert_eq!(
        final_requirements.total(),
        requirements.total(),
        "shifts move effort without creating it"
    );
    Ok(CompensationTrace {
        action_id: requirements.action_id.clone(),
        agent_id: profile.agent_id.clone(),
        outcome,
        steps,
        initial_requirements: requirements.clone(),
        final_requirements,
        remaining,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Edge, EdgeOrigin, Relation, RelationKind};

    fn id(s: &str) -> CapabilityId {
        s.parse().unwrap()
    }

    fn delta_set(pairs: &[(&str, i32)]) -> DeltaSet {
        DeltaSet {
            action_id: "a".into(),
            agent_id: "p".into(),
            deltas: pairs.iter().map(|(k, v)| (id(k), *v)).collect(),
        }
    }

    fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> ConjugationGraph {
        let mut g = ConjugationGraph::new(nodes.iter().map(|s| id(s)));
        let rel = RelationKind { kind: Relation::ReplacedBy, manufacturing: false };
        for (a, b) in edges {
            g.add_edge(Edge::new(id(a), id(b), rel, EdgeOrigin::Interrelation)).unwrap();
        }
        g
    }

    #[test]
    fn deltas_subtract_capacity_from_requirement() {
        let r = RequirementSet::from_pairs("act", [("3.03.04", 5), ("3.02.03", 2)]);
        let c = Profile::from_pairs("p", [("3.03.04", 3), ("3.02.03", 5)]);
        let d = compute_delta(&r, &c).unwrap();
        assert_eq!(d.get(&id("3.03.04")), Some(2));
        assert_eq!(d.get(&id("3.02.03")), Some(-3));
        assert_eq!(deficit_sum(&d), 2);
        let short = Profile::from_pairs("p", [("3.03.04", 3)]);
        match compute_delta(&r, &short) {
            Err(DeltaError::MissingCapabilities { missing, .. }) => assert_eq!(missing, [id("3.02.03")]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fuzzy_clauses() {
        let fuzz = |xi: &[(&str, u8)], theta| FuzzyParams { xi: xi.iter().map(|(k, v)| (id(k), *v)).collect(), theta };
        let d = delta_set(&[("1.01", 1), ("1.02", 0), ("1.03", -2)]);
        assert!(is_feasible_fuzzy(&d, &fuzz(&[("1.01", 1)], 1)).is_feasible());
        let d = delta_set(&[("1.01", 2), ("1.02", 0)]);
        assert_eq!(
            is_feasible_fuzzy(&d, &fuzz(&[("1.01", 1)], 6)).violations,
            [Violation::PerCapability { id: id("1.01"), delta: 2, xi: 1 }]
        );
        let d = delta_set(&[("1.01", 1), ("1.02", 1)]);
        assert_eq!(
            is_feasible_fuzzy(&d, &fuzz(&[("1.01", 1), ("1.02", 1)], 1)).violations,
            [Violation::Aggregate { deficit: 2, theta: 1 }]
        );
    }

    #[test]
    fn fuzz_bounds_are_validated() {
        let mut f = FuzzyParams { xi: [(id("1.01"), 7)].into(), theta: 0 };
        assert!(f.validate(1).is_err());
        f.xi.clear();
        f.theta = 13;
        assert!(f.validate(2).is_err());
        assert!(f.validate(3).is_ok());
    }

    #[test]
    fn trunk_compensates_reach() {
        let g = graph(&["3.02.03", "3.03.04"], &[("3.02.03", "3.03.04")]);
        let r = RequirementSet::from_pairs("reach", [("3.03.04", 4), ("3.02.03", 2)]);
        let c = Profile::from_pairs("p", [("3.03.04", 3), ("3.02.03", 3)]);
        let t = compensate(&r, &c, &g, &FuzzyParams::strict()).unwrap();
        assert_eq!(t.outcome, Outcome::FeasibleAfterCompensation);
        assert_eq!(t.steps, [Shift { deficient: id("3.03.04"), reserve: id("3.02.03"), amount: 1 }]);
        assert_eq!(t.final_requirements.total(), r.total());
        assert!(t.to_text().contains("3.03.04 3.02.03 1"));
    }

    #[test]
    fn direct_and_hopeless_cases() {
        let g = graph(&["3.02.03", "3.03.04"], &[]);
        let c = Profile::from_pairs("p", [("3.03.04", 3), ("3.02.03", 5)]);
        let ok = RequirementSet::from_pairs("a", [("3.03.04", 3)]);
        let t = compensate(&ok, &c, &g, &FuzzyParams::strict()).unwrap();
        assert_eq!((t.outcome, t.steps.len()), (Outcome::FeasibleDirect, 0));
        let bad = RequirementSet::from_pairs("a", [("3.03.04", 5), ("3.02.03", 1)]);
        let t = compensate(&bad, &c, &g, &FuzzyParams::strict()).unwrap();
        assert_eq!(t.outcome, Outcome::Infeasible);
        let empty = RequirementSet::new("none");
        assert_eq!(compensate(&empty, &c, &g, &FuzzyParams::strict()).unwrap().outcome, Outcome::FeasibleDirect);
    }

    #[test]
    fn lookahead_avoids_the_greedy_trap() {
        // A and B both border R, which can absorb one unit. Only B must be
        // cleared; A is within its slack and the aggregate allows one unit.
        let g = graph(&["1.01", "1.02", "1.03"], &[("1.01", "1.03"), ("1.02", "1.03")]);
        let r = RequirementSet::from_pairs("a", [("1.01", 3), ("1.02", 3), ("1.03", 1)]);
        let c = Profile::from_pairs("p", [("1.01", 2), ("1.02", 2), ("1.03", 2)]);
        let fuzz = FuzzyParams { xi: [(id("1.01"), 1)].into(), theta: 1 };
        let t = compensate(&r, &c, &g, &fuzz).unwrap();
        assert_eq!(t.outcome, Outcome::FeasibleAfterCompensation);
        assert_eq!(t.steps, [Shift { deficient: id("1.02"), reserve: id("1.03"), amount: 1 }]);
    }

    #[test]
    fn receiver_outside_requirement_set_joins_it() {
        let g = graph(&["3.02.03", "3.03.04"], &[("3.02.03", "3.03.04")]);
        let r = RequirementSet::from_pairs("a", [("3.03.04", 5)]);
        let c = Profile::from_pairs("p", [("3.03.04", 3), ("3.02.03", 4)]);
        let t = compensate(&r, &c, &g, &FuzzyParams::strict()).unwrap();
        assert_eq!(t.outcome, Outcome::FeasibleAfterCompensation);
        assert_eq!(t.final_requirements.get(&id("3.02.03")).map(|q| q.value()), Some(2));
        let json = t.to_json().unwrap();
        assert!(json.contains("\"outcome\": \"feasible_after_compensation\""), "{json}");
    }
}
