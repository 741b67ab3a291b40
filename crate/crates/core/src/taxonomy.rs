//! Capability identifiers, the quantification scale and the capability catalog.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("invalid capability id {text:?}: {reason}")]
    InvalidId { text: String, reason: String },
    #[error("quantification {0} is outside 0..=6")]
    QuantificationOutOfRange(i64),
    #[error("catalog line {line}: {reason}")]
    Catalog { line: usize, reason: String },
    #[error("duplicate capability id {0} in catalog")]
    DuplicateId(CapabilityId),
}

/// Hierarchical capability identifier `complex.main[.detail]`.
///
/// Ordering is lexicographic on `(complex, main, detail)` with an absent
/// detail sorting before any present one, so `3.04 < 3.04.02`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CapabilityId {
    complex: u8,
    main: u8,
    detail: Option<u8>,
}

impl CapabilityId {
    /// Bounds of the id ordering, for range queries; not valid ids themselves.
    pub(crate) const MIN: CapabilityId = CapabilityId { complex: 0, main: 0, detail: None };
    pub(crate) const MAX: CapabilityId = CapabilityId { complex: u8::MAX, main: u8::MAX, detail: Some(u8::MAX) };

    pub fn new(complex: u8, main: u8, detail: Option<u8>) -> Result<Self, TaxonomyError> {
        let id = CapabilityId {
            complex,
            main,
            detail,
        };
        if complex == 0 || main == 0 || detail == Some(0) {
            return Err(TaxonomyError::InvalidId {
                text: id.to_string(),
                reason: "components must be positive".into(),
            });
        }
        Ok(id)
    }

    pub fn complex(&self) -> u8 {
        self.complex
    }

    pub fn main(&self) -> u8 {
        self.main
    }

    pub fn detail(&self) -> Option<u8> {
        self.detail
    }

    pub fn is_detail(&self) -> bool {
        self.detail.is_some()
    }

    /// The main-level id this detail belongs to (itself for main-level ids).
    pub fn main_level(&self) -> CapabilityId {
        CapabilityId {
            detail: None,
            ..*self
        }
    }

    /// True if `self` is `other` or one of `other`'s details.
    pub fn is_within(&self, other: &CapabilityId) -> bool {
        match other.detail {
            Some(_) => self == other,
            None => self.complex == other.complex && self.main == other.main,
        }
    }
}

/// Parses dotted decimal text with one to three components.
///
/// A single component names a whole complex, which this crate has no use for;
/// it is rejected so that every id has at least a main level.
pub fn parse_capability_id(text: &str) -> Result<CapabilityId, TaxonomyError> {
    let invalid = |reason: String| TaxonomyError::InvalidId {
        text: text.to_string(),
        reason,
    };
    let trimmed = text.trim();
    let parts: Vec<&str> = trimmed.split('.').collect();
    if parts.len() > 3 {
        return Err(invalid(format!(
            "expected at most 3 components, found {}",
            parts.len()
        )));
    }
    if parts.len() < 2 {
        return Err(invalid("expected complex.main[.detail]".into()));
    }
    let mut values = [0u8; 3];
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(invalid(format!("component {} is empty", i + 1)));
        }
        if !part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(invalid(format!("component {} ({part:?}) is not numeric", i + 1)));
        }
        values[i] = part
            .parse()
            .map_err(|_| invalid(format!("component {} ({part:?}) is out of range", i + 1)))?;
        if values[i] == 0 {
            return Err(invalid(format!("component {} ({part:?}) must be positive", i + 1)));
        }
    }
    let detail = (parts.len() == 3).then_some(values[2]);
    Ok(CapabilityId {
        complex: values[0],
        main: values[1],
        detail,
    })
}

impl FromStr for CapabilityId {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_capability_id(s)
    }
}

impl fmt::Display for CapabilityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.complex, self.main)?;
        if let Some(d) = self.detail {
            write!(f, ".{d:02}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for CapabilityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{self}")
    }
}

impl Ord for CapabilityId {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.complex, self.main, self.detail).cmp(&(other.complex, other.main, other.detail))
    }
}

impl PartialOrd for CapabilityId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for CapabilityId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CapabilityId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Score on the seven-step scale `{0,1,2,3-,3+,4,5}`, stored as `0..=6`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct Quantification(u8);

impl Quantification {
    pub const MIN: Quantification = Quantification(0);
    pub const MAX: Quantification = Quantification(6);

    pub fn new(value: i64) -> Result<Self, TaxonomyError> {
        if (0..=6).contains(&value) {
            Ok(Quantification(value as u8))
        } else {
            Err(TaxonomyError::QuantificationOutOfRange(value))
        }
    }

    pub const fn value(self) -> u8 {
        self.0
    }

    /// Label on the assessment scale: 3 and 4 are the `3-`/`3+` halves.
    pub fn label(self) -> &'static str {
        ["0", "1", "2", "3-", "3+", "4", "5"][self.0 as usize]
    }
}

impl TryFrom<i64> for Quantification {
    type Error = TaxonomyError;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        Quantification::new(value)
    }
}

impl From<Quantification> for u8 {
    fn from(q: Quantification) -> u8 {
        q.0
    }
}

impl fmt::Display for Quantification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Upstream,
    OverTable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Posture {
    Sitting,
    Standing,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Laterality {
    #[serde(rename = "unilateral")]
    Unilateral,
    #[serde(rename = "bilateral")]
    Bilateral,
    #[serde(rename = "n/a")]
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: CapabilityId,
    pub name: String,
    pub category: Category,
    pub posture: Posture,
    pub laterality: Laterality,
}

const REFERENCE_CATALOG: &str = include_str!("../fixtures/catalog_v1.csv");

/// The set of capabilities a project works with, keyed by id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CapabilityCatalog {
    entries: BTreeMap<CapabilityId, CatalogEntry>,
}

impl CapabilityCatalog {
    pub fn new(entries: impl IntoIterator<Item = CatalogEntry>) -> Result<Self, TaxonomyError> {
        let mut map = BTreeMap::new();
        for entry in entries {
            let id = entry.id;
            if map.insert(id, entry).is_some() {
                return Err(TaxonomyError::DuplicateId(id));
            }
        }
        Ok(CapabilityCatalog { entries: map })
    }

    /// The shipped stationary-manufacturing subset (36 capabilities).
    pub fn reference() -> Self {
        Self::from_csv(REFERENCE_CATALOG.as_bytes()).expect("embedded catalog fixture is valid")
    }

    /// Reads `id,name,category,posture,laterality` records; the header row is required.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, TaxonomyError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| TaxonomyError::Catalog {
            line: 1,
            reason: e.to_string(),
        })?;
        let expected = ["id", "name", "category", "posture", "laterality"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(TaxonomyError::Catalog {
                line: 1,
                reason: format!("header must be {}", expected.join(",")),
            });
        }
        let mut entries = Vec::new();
        for (i, record) in rdr.deserialize::<CatalogEntry>().enumerate() {
            let entry = record.map_err(|e| TaxonomyError::Catalog {
                line: i + 2,
                reason: e.to_string(),
            })?;
            entries.push(entry);
        }
        Self::new(entries)
    }

    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        for entry in self.entries.values() {
            wtr.serialize(entry).expect("in-memory csv write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory csv flush")).expect("utf-8")
    }

    pub fn get(&self, id: &CapabilityId) -> Option<&CatalogEntry> {
        self.entries.get(id)
    }

    pub fn contains(&self, id: &CapabilityId) -> bool {
        self.entries.contains_key(id)
    }

    /// Accepts catalog ids and main-level ids whose details are catalogued
    /// (e.g. `4.01` when `4.01.01` is present).
    pub fn resolves(&self, id: &CapabilityId) -> bool {
        self.contains(id)
            || (!id.is_detail() && self.entries.keys().any(|e| e.is_within(id)))
    }

    pub fn name(&self, id: &CapabilityId) -> Option<&str> {
        self.entries.get(id).map(|e| e.name.as_str())
    }

    pub fn ids(&self) -> impl Iterator<Item = CapabilityId> + '_ {
        self.entries.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_upstream(&self, id: &CapabilityId) -> bool {
        match self.get(id) {
            Some(e) => e.category == Category::Upstream,
            None => self
                .entries
                .values()
                .any(|e| e.id.is_within(id) && e.category == Category::Upstream),
        }
    }
}

/// Over-table capabilities usable in sitting posture, in canonical order.
pub fn sitting_over_table_set(catalog: &CapabilityCatalog) -> Vec<CapabilityId> {
    catalog
        .entries()
        .filter(|e| e.category == Category::OverTable && e.posture != Posture::Standing)
        .map(|e| e.id)
        .collect()
}

/// Capabilities relevant for a sitting assessment (over-table and upstream),
/// i.e. the catalog without standing-only entries.
pub fn sitting_set(catalog: &CapabilityCatalog) -> Vec<CapabilityId> {
    catalog
        .entries()
        .filter(|e| e.posture != Posture::Standing)
        .map(|e| e.id)
        .collect()
}
