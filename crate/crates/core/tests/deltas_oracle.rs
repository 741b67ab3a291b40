use std::collections::{BTreeMap, BTreeSet, HashSet};

use capnet::deltas::{compensate, compute_delta, deficit_sum, is_feasible_fuzzy, FuzzyParams, Outcome};
use capnet::network::{ConjugationGraph, Edge, EdgeOrigin, Relation, RelationKind};
use capnet::profiles::{Phase, Profile, RequirementSet};
use capnet::taxonomy::{CapabilityId, Quantification};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn id(s: &str) -> CapabilityId {
    s.parse().unwrap()
}

fn q(v: i64) -> Quantification {
    Quantification::new(v).unwrap()
}

struct Instance {
    req: RequirementSet,
    profile: Profile,
    graph: ConjugationGraph,
    fuzz: FuzzyParams,
}

/// Small random instance whose initial deficit sum is at most `max_deficit`.
fn random_instance(rng: &mut ChaCha8Rng, max_deficit: u32) -> Instance {
    loop {
        let n = rng.random_range(2..=6usize);
        let ids: Vec<CapabilityId> = (1..=n).map(|k| CapabilityId::new(1, k as u8, None).unwrap()).collect();
        let mut graph = ConjugationGraph::new(ids.iter().copied());
        let rel = RelationKind { kind: Relation::ReplacedBy, manufacturing: false };
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.45) {
                    graph.add_edge(Edge::new(ids[i], ids[j], rel, EdgeOrigin::Interrelation)).unwrap();
                }
            }
        }
        let mut profile = Profile::new("p", Phase::Unspecified);
        let mut req = RequirementSet::new("a");
        let mut fuzz = FuzzyParams::default();
        for c in &ids {
            let required = rng.random_bool(0.6);
            // Required capabilities always have a capacity; others sometimes lack one.
            if required || rng.random_bool(0.8) {
                profile.set(*c, q(rng.random_range(0..=6)));
            }
            if required {
                req.requirements.insert(*c, q(rng.random_range(0..=6)));
                if rng.random_bool(0.3) {
                    fuzz.xi.insert(*c, rng.random_range(0..=2));
                }
            }
        }
        let deficit = deficit_sum(&compute_delta(&req, &profile).unwrap());
        if deficit > max_deficit {
            continue;
        }
        fuzz.theta = rng.random_range(0..=deficit.min(req.requirements.len() as u32 * 6));
        return Instance { req, profile, graph, fuzz };
    }
}

/// Depth-first search over every sequence of admissible unit shifts.
fn exhaustive_feasible(inst: &Instance) -> bool {
    let required: BTreeSet<CapabilityId> = inst.req.requirements.keys().copied().collect();
    let cap = |c: &CapabilityId| inst.profile.get(c).map(|v| v.value() as i32);
    let mut adjacency: BTreeMap<CapabilityId, Vec<CapabilityId>> = BTreeMap::new();
    for e in inst.graph.edges() {
        adjacency.entry(e.from).or_default().push(e.to);
        adjacency.entry(e.to).or_default().push(e.from);
    }
    let start: BTreeMap<CapabilityId, i32> =
        inst.req.requirements.iter().map(|(k, v)| (*k, v.value() as i32)).collect();
    let feasible = |r: &BTreeMap<CapabilityId, i32>| {
        let mut sum = 0u32;
        for c in &required {
            let d = r[c] - cap(c).unwrap();
            if d > inst.fuzz.xi.get(c).map_or(0, |x| *x as i32) {
                return false;
            }
            sum += d.max(0) as u32;
        }
        sum <= inst.fuzz.theta
    };
    let mut seen = HashSet::new();
    let mut frontier = vec![start];
    while let Some(r) = frontier.pop() {
        if feasible(&r) {
            return true;
        }
        for d in &required {
            if r[d] - cap(d).unwrap() <= 0 {
                continue;
            }
            for e in adjacency.get(d).into_iter().flatten() {
                let Some(ce) = cap(e) else { continue };
                let re = r.get(e).copied().unwrap_or(0);
                if re - ce >= 0 || re >= 6 || r[d] <= 0 {
                    continue;
                }
                let mut next = r.clone();
                *next.get_mut(d).unwrap() -= 1;
                *next.entry(*e).or_insert(0) += 1;
                let key: Vec<(CapabilityId, i32)> = next.iter().map(|(k, v)| (*k, *v)).collect();
                if seen.insert(key) {
                    frontier.push(next);
                }
            }
        }
    }
    false
}

#[test]
fn verdicts_match_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut outcomes = BTreeMap::new();
    for _ in 0..600 {
        let inst = random_instance(&mut rng, 6);
        let trace = compensate(&inst.req, &inst.profile, &inst.graph, &inst.fuzz).unwrap();
        let oracle = exhaustive_feasible(&inst);
        assert_eq!(trace.outcome != Outcome::Infeasible, oracle, "{}", trace.to_text());
        assert_eq!(trace.final_requirements.total(), inst.req.total());
        *outcomes.entry(format!("{}", trace.outcome)).or_insert(0) += 1;
    }
    // The generator must exercise every outcome.
    assert_eq!(outcomes.len(), 3, "{outcomes:?}");
}

#[test]
fn worked_reach_trunk_example() {
    let mut graph = ConjugationGraph::new([id("3.02.03"), id("3.03.04")]);
    let rel = RelationKind { kind: Relation::ReplacedBy, manufacturing: false };
    graph.add_edge(Edge::new(id("3.02.03"), id("3.03.04"), rel, EdgeOrigin::Interrelation)).unwrap();
    let inst = Instance {
        req: RequirementSet::from_pairs("reach_shelf", [("3.03.04", 5), ("3.02.03", 2)]),
        profile: Profile::from_pairs("p", [("3.03.04", 4), ("3.02.03", 4)]),
        graph,
        fuzz: FuzzyParams::strict(),
    };
    assert!(exhaustive_feasible(&inst));
    let trace = compensate(&inst.req, &inst.profile, &inst.graph, &inst.fuzz).unwrap();
    assert_eq!(trace.outcome, Outcome::FeasibleAfterCompensation);
    assert_eq!(trace.steps.len(), 1);
    assert_eq!(trace.final_requirements.get(&id("3.03.04")), Some(q(4)));
    assert_eq!(trace.final_requirements.get(&id("3.02.03")), Some(q(3)));
}

fn elementwise(r: &[i64], c: &[i64]) -> Vec<i32> {
    r.iter().zip(c).map(|(a, b)| (a - b) as i32).collect()
}

proptest! {
    #[test]
    fn delta_is_elementwise_difference(pairs in prop::collection::vec((0i64..=6, 0i64..=6), 1..=10)) {
        let names: Vec<String> = (1..=pairs.len()).map(|k| format!("2.{k:02}")).collect();
        let r = RequirementSet::from_pairs("a", names.iter().map(String::as_str).zip(pairs.iter().map(|p| p.0)));
        let c = Profile::from_pairs("p", names.iter().map(String::as_str).zip(pairs.iter().map(|p| p.1)));
        let d = compute_delta(&r, &c).unwrap();
        let rs: Vec<i64> = pairs.iter().map(|p| p.0).collect();
        let cs: Vec<i64> = pairs.iter().map(|p| p.1).collect();
        let got: Vec<i32> = d.deltas.values().copied().collect();
        prop_assert_eq!(&got, &elementwise(&rs, &cs));

        // Swapping requirement and capacity negates every delta.
        let r2 = RequirementSet::from_pairs("a", names.iter().map(String::as_str).zip(cs.iter().copied()));
        let c2 = Profile::from_pairs("p", names.iter().map(String::as_str).zip(rs.iter().copied()));
        let swapped: Vec<i32> = compute_delta(&r2, &c2).unwrap().deltas.values().map(|v| -v).collect();
        prop_assert_eq!(got, swapped);
    }

    #[test]
    fn compensation_invariants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 6);
        let trace = compensate(&inst.req, &inst.profile, &inst.graph, &inst.fuzz).unwrap();
        prop_assert_eq!(trace.final_requirements.total(), inst.req.total());
        for s in &trace.steps {
            prop_assert!(inst.graph.edge_between(&s.deficient, &s.reserve).is_some());
            prop_assert!(s.amount >= 1);
        }
        let moved: u32 = trace.steps.iter().map(|s| s.amount).sum();
        let before = deficit_sum(&compute_delta(&inst.req, &inst.profile).unwrap());
        let mut after_req = trace.final_requirements.clone();
        after_req.requirements.retain(|k, _| inst.req.requirements.contains_key(k));
        let after = compute_delta(&after_req, &inst.profile).unwrap();
        // Every shift removes exactly one unit of deficit.
        prop_assert_eq!(before - deficit_sum(&after), moved);
        let verdict = is_feasible_fuzzy(&after, &inst.fuzz).is_feasible();
        prop_assert_eq!(verdict, trace.outcome != Outcome::Infeasible);
        let again = compensate(&inst.req, &inst.profile, &inst.graph, &inst.fuzz).unwrap();
        prop_assert_eq!(trace, again);
    }
}
