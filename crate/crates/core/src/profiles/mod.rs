//! Capability profiles, requirement sets and profile datasets.

mod generator;
mod io;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{CapabilityCatalog, CapabilityId, Quantification, TaxonomyError};

pub use generator::{generate_synthetic_profiles, GeneratorConfig};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile {agent} is incomplete, missing {}", format_ids(.missing))]
    Incomplete {
        agent: String,
        missing: Vec<CapabilityId>,
    },
    #[error("capability {0} is not in the active catalog")]
    UnknownCapability(CapabilityId),
    #[error("duplicate profile for agent {agent} in phase {phase}")]
    DuplicateProfile { agent: String, phase: Phase },
    #[error("duplicate requirement set for action {0}")]
    DuplicateAction(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn format_ids(ids: &[CapabilityId]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreRehab,
    PostRehab,
    Unspecified,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PreRehab => "pre_rehab",
            Phase::PostRehab => "post_rehab",
            Phase::Unspecified => "unspecified",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "pre_rehab" | "pre" => Ok(Phase::PreRehab),
            "post_rehab" | "post" => Ok(Phase::PostRehab),
            "unspecified" | "" => Ok(Phase::Unspecified),
            other => Err(format!("unknown phase {other:?}")),
        }
    }
}

/// Capacities of one agent. A `None` value means the capability was not assessed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub agent_id: String,
    pub phase: Phase,
    values: BTreeMap<CapabilityId, Option<Quantification>>,
}

impl Profile {
    pub fn new(agent_id: impl Into<String>, phase: Phase) -> Self {
        Profile {
            agent_id: agent_id.into(),
            phase,
            values: BTreeMap::new(),
        }
    }

    /// Convenience constructor from `(id, value)` pairs; panics on invalid input.
    pub fn from_pairs<'a>(agent_id: &str, pairs: impl IntoIterator<Item = (&'a str, i64)>) -> Self {
        let mut p = Profile::new(agent_id, Phase::Unspecified);
        for (id, v) in pairs {
            p.set(id.parse().expect("valid id"), Quantification::new(v).expect("valid value"));
        }
        p
    }

    pub fn set(&mut self, id: CapabilityId, value: Quantification) {
        self.values.insert(id, Some(value));
    }

    pub fn set_missing(&mut self, id: CapabilityId) {
        self.values.insert(id, None);
    }

    pub fn get(&self, id: &CapabilityId) -> Option<Quantification> {
        self.values.get(id).copied().flatten()
    }

    /// All recorded cells, including unassessed ones.
    pub fn cells(&self) -> impl Iterator<Item = (CapabilityId, Option<Quantification>)> + '_ {
        self.values.iter().map(|(k, v)| (*k, *v))
    }

    pub fn assessed(&self) -> impl Iterator<Item = (CapabilityId, Quantification)> + '_ {
        self.values.iter().filter_map(|(k, v)| v.map(|q| (*k, q)))
    }

    pub fn missing_from(&self, ids: &[CapabilityId]) -> Vec<CapabilityId> {
        ids.iter().filter(|id| self.get(id).is_none()).copied().collect()
    }

    pub fn is_complete_over(&self, ids: &[CapabilityId]) -> bool {
        ids.iter().all(|id| self.get(id).is_some())
    }

    pub fn validate(&self, catalog: &CapabilityCatalog) -> Result<(), ProfileError> {
        match self.values.keys().find(|id| !catalog.resolves(id)) {
            Some(id) => Err(ProfileError::UnknownCapability(*id)),
            None => Ok(()),
        }
    }
}

/// Quantified demands of one action.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementSet {
    pub action_id: String,
    pub requirements: BTreeMap<CapabilityId, Quantification>,
}

impl RequirementSet {
    pub fn new(action_id: impl Into<String>) -> Self {
        RequirementSet {
            action_id: action_id.into(),
            requirements: BTreeMap::new(),
        }
    }

    pub fn from_pairs<'a>(action_id: &str, pairs: impl IntoIterator<Item = (&'a str, i64)>) -> Self {
        let mut r = RequirementSet::new(action_id);
        for (id, v) in pairs {
            r.requirements
                .insert(id.parse().expect("valid id"), Quantification::new(v).expect("valid value"));
        }
        r
    }

    pub fn get(&self, id: &CapabilityId) -> Option<Quantification> {
        self.requirements.get(id).copied()
    }

    pub fn ids(&self) -> Vec<CapabilityId> {
        self.requirements.keys().copied().collect()
    }

    pub fn total(&self) -> u32 {
        self.requirements.values().map(|q| q.value() as u32).sum()
    }

    pub fn validate(&self, catalog: &CapabilityCatalog) -> Result<(), ProfileError> {
        match self.requirements.keys().find(|id| !catalog.resolves(id)) {
            Some(id) => Err(ProfileError::UnknownCapability(*id)),
            None => Ok(()),
        }
    }
}

/// A collection of profiles with unique `(agent_id, phase)` keys.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ProfileDataset {
    columns: Vec<CapabilityId>,
    profiles: Vec<Profile>,
    pub provenance: String,
}

impl ProfileDataset {
    /// Builds a dataset; `columns` are extended by any id a profile records.
    pub fn new(
        columns: Vec<CapabilityId>,
        profiles: Vec<Profile>,
        provenance: impl Into<String>,
    ) -> Result<Self, ProfileError> {
        let mut seen = HashSet::new();
        for p in &profiles {
            if !seen.insert((p.agent_id.clone(), p.phase)) {
                return Err(ProfileError::DuplicateProfile {
                    agent: p.agent_id.clone(),
                    phase: p.phase,
                });
            }
        }
        let mut cols: BTreeSet<CapabilityId> = columns.into_iter().collect();
        for p in &profiles {
            cols.extend(p.values.keys().copied());
        }
        Ok(ProfileDataset {
            columns: cols.into_iter().collect(),
            profiles,
            provenance: provenance.into(),
        })
    }

    pub fn columns(&self) -> &[CapabilityId] {
        &self.columns
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn validate(&self, catalog: &CapabilityCatalog) -> Result<(), ProfileError> {
        match self.columns.iter().find(|id| !catalog.resolves(id)) {
            Some(id) => Err(ProfileError::UnknownCapability(*id)),
            None => Ok(()),
        }
    }

    pub fn with_phase(&self, phase: Phase) -> ProfileDataset {
        self.retain(|p| p.phase == phase)
    }

    fn retain(&self, keep: impl Fn(&Profile) -> bool) -> ProfileDataset {
        ProfileDataset {
            columns: self.columns.clone(),
            profiles: self.profiles.iter().filter(|p| keep(p)).cloned().collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn map_profiles(&self, f: impl Fn(&Profile) -> Profile) -> ProfileDataset {
        let profiles: Vec<Profile> = self.profiles.iter().map(f).collect();
        let mut cols: BTreeSet<CapabilityId> = self.columns.iter().copied().collect();
        for p in &profiles {
            cols.extend(p.values.keys().copied());
        }
        ProfileDataset {
            columns: cols.into_iter().collect(),
            profiles,
            provenance: self.provenance.clone(),
        }
    }

    /// Column of values for `id`; `None` if any profile lacks it.
    pub fn column(&self, id: &CapabilityId) -> Option<Vec<f64>> {
        self.profiles
            .iter()
            .map(|p| p.get(id).map(|q| q.value() as f64))
            .collect()
    }
}

/// Adds main-level entries holding the minimum over each main's assessed details.
pub fn propagate_main_level(profile: &Profile, catalog: &CapabilityCatalog) -> Profile {
    let mut mins: BTreeMap<CapabilityId, Quantification> = BTreeMap::new();
    for (id, q) in profile.assessed() {
        if !id.is_detail() {
            continue;
        }
        let main = id.main_level();
        if !catalog.is_empty() && !catalog.resolves(&main) {
            continue;
        }
        mins.entry(main)
            .and_modify(|m| *m = (*m).min(q))
            .or_insert(q);
    }
    let mut out = profile.clone();
    for (main, q) in mins {
        out.set(main, q);
    }
    out
}

/// Population standard deviation of the profile's values over `ids`.
pub fn profile_std(profile: &Profile, ids: &[CapabilityId]) -> Result<f64, ProfileError> {
    let missing = profile.missing_from(ids);
    if !missing.is_empty() {
        return Err(ProfileError::Incomplete {
            agent: profile.agent_id.clone(),
            missing,
        });
    }
    if ids.is_empty() {
        return Ok(0.0);
    }
    // Integer moments keep boundary cases such as an SD of exactly 0.5 exact.
    let n = ids.len() as i64;
    let (sum, sum_sq) = ids.iter().fold((0i64, 0i64), |(s, q), id| {
        let v = i64::from(profile.get(id).expect("checked complete").value());
        (s + v, q + v * v)
    });
    let var = (n * sum_sq - sum * sum) as f64 / (n * n) as f64;
    Ok(var.sqrt())
}

/// Keeps profiles complete over `ids` whose dispersion is at least `threshold`.
pub fn filter_profiles(dataset: &ProfileDataset, ids: &[CapabilityId], threshold: f64) -> ProfileDataset {
    dataset.retain(|p| matches!(profile_std(p, ids), Ok(s) if s >= threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> CapabilityId {
        s.parse().unwrap()
    }

    #[test]
    fn propagation_takes_minimum_of_details() {
        let cat = CapabilityCatalog::reference();
        let p = Profile::from_pairs("a", [("4.01.01", 5), ("4.01.02", 3), ("4.01.03", 4), ("4.01.04", 4)]);
        let q = propagate_main_level(&p, &cat);
        assert_eq!(q.get(&id("4.01")), Some(Quantification::new(3).unwrap()));
        assert_eq!(q.get(&id("4.01.01")), Some(Quantification::new(5).unwrap()));

        let single = propagate_main_level(&Profile::from_pairs("b", [("3.04.02", 2)]), &cat);
        assert_eq!(single.get(&id("3.04")).map(|q| q.value()), Some(2));

        let empty = Profile::new("c", Phase::Unspecified);
        assert_eq!(propagate_main_level(&empty, &cat), empty);
    }

    #[test]
    fn propagation_skips_unassessed_details() {
        let cat = CapabilityCatalog::reference();
        let mut p = Profile::from_pairs("a", [("3.04.02", 5)]);
        p.set_missing(id("3.04.04"));
        let q = propagate_main_level(&p, &cat);
        assert_eq!(q.get(&id("3.04")).map(|q| q.value()), Some(5));

        let mut none = Profile::new("b", Phase::PostRehab);
        none.set_missing(id("3.04.04"));
        assert_eq!(propagate_main_level(&none, &cat).get(&id("3.04")), None);
    }

    #[test]
    fn std_of_constant_and_two_point_profiles() {
        let ids = vec![id("3.03.04"), id("3.02.03")];
        let c = Profile::from_pairs("a", [("3.03.04", 3), ("3.02.03", 3)]);
        assert_eq!(profile_std(&c, &ids).unwrap(), 0.0);
        let t = Profile::from_pairs("a", [("3.03.04", 2), ("3.02.03", 4)]);
        assert_eq!(profile_std(&t, &ids).unwrap(), 1.0);
    }

    #[test]
    fn std_reports_missing_ids() {
        let ids = vec![id("3.03.04"), id("3.03.06")];
        let p = Profile::from_pairs("a", [("3.03.04", 2)]);
        match profile_std(&p, &ids) {
            Err(ProfileError::Incomplete { missing, .. }) => assert_eq!(missing, vec![id("3.03.06")]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn filter_drops_constant_and_incomplete() {
        let ids = vec![id("3.03.04"), id("3.02.03")];
        let constant = Profile::from_pairs("a", [("3.03.04", 3), ("3.02.03", 3)]);
        let ds = ProfileDataset::new(ids.clone(), vec![constant], "t").unwrap();
        assert!(filter_profiles(&ds, &ids, 0.2).is_empty());

        let ids3 = vec![id("3.03.04"), id("3.02.03"), id("3.03.04").main_level()];
        let holed = Profile::from_pairs("b", [("3.03.04", 1), ("3.02.03", 5)]);
        let ds = ProfileDataset::new(vec![], vec![holed.clone()], "t").unwrap();
        assert!(filter_profiles(&ds, &ids3, 0.2).is_empty());
        assert_eq!(filter_profiles(&ds, &ids, 0.2).len(), 1);
    }

    #[test]
    fn filter_preserves_order() {
        let ids = vec![id("3.03.04"), id("3.02.03")];
        let ps: Vec<Profile> = [4, 1, 4, 2, 4, 0]
            .iter()
            .enumerate()
            .map(|(i, v)| Profile::from_pairs(&format!("p{i}"), [("3.03.04", *v), ("3.02.03", 4)]))
            .collect();
        let ds = ProfileDataset::new(ids.clone(), ps, "t").unwrap();
        let kept: Vec<_> = filter_profiles(&ds, &ids, 0.2)
            .profiles()
            .iter()
            .map(|p| p.agent_id.clone())
            .collect();
        assert_eq!(kept, ["p1", "p3", "p5"]);
    }

    #[test]
    fn duplicate_agent_phase_is_rejected() {
        let a = Profile::from_pairs("a", [("3.03.04", 3)]);
        assert!(matches!(
            ProfileDataset::new(vec![], vec![a.clone(), a], "t"),
            Err(ProfileError::DuplicateProfile { .. })
        ));
    }

    #[test]
    fn validation_rejects_unknown_ids() {
        let cat = CapabilityCatalog::reference();
        let p = Profile::from_pairs("a", [("9.01.01", 3)]);
        assert!(matches!(p.validate(&cat), Err(ProfileError::UnknownCapability(_))));
        let r = RequirementSet::from_pairs("act", [("3.03.04", 3)]);
        assert!(r.validate(&cat).is_ok());
    }
}
