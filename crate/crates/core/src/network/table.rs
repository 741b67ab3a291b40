//! Interrelation and strong-candidate tables.

use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{NetworkError, Relation, RelationKind};
use crate::taxonomy::{CapabilityCatalog, CapabilityId};

/// One cell of the interrelation table, read from row to column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InterrelationEntry {
    pub row: CapabilityId,
    pub col: CapabilityId,
    pub relation: RelationKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct InterrelationTable {
    entries: Vec<InterrelationEntry>,
}

fn parse_err(line: usize, reason: impl Into<String>) -> NetworkError {
    NetworkError::Parse { line, reason: reason.into() }
}

fn check_header(headers: &csv::StringRecord, want: &[&str]) -> Result<(), NetworkError> {
    let got: Vec<&str> = headers.iter().collect();
    if got != want {
        return Err(parse_err(1, format!("expected header {}", want.join(","))));
    }
    Ok(())
}

impl InterrelationTable {
    pub fn new(entries: Vec<InterrelationEntry>) -> Result<Self, NetworkError> {
        if let Some(e) = entries.iter().find(|e| e.row == e.col) {
            return Err(NetworkError::SelfLoop(e.row));
        }
        Ok(InterrelationTable { entries })
    }

    /// Published table of interrelations for sitting work.
    pub fn reference() -> Self {
        let text = include_str!("../../fixtures/interrelations.csv");
        InterrelationTable::from_csv(text.as_bytes()).expect("interrelation fixture is valid")
    }

    /// Relations implied by published pair correlations and sequences but absent from the table.
    pub fn reference_supplement() -> Self {
        let text = include_str!("../../fixtures/interrelations_supplement.csv");
        InterrelationTable::from_csv(text.as_bytes()).expect("supplement fixture is valid")
    }

    /// Reference table with the supplement appended.
    pub fn reference_with_supplement() -> Self {
        let mut t = InterrelationTable::reference();
        t.entries.extend(InterrelationTable::reference_supplement().entries);
        t
    }

    /// Reads `row,col,relation,m_flag` records; relation is one of `d c a r`.
    pub fn from_csv<R: Read>(input: R) -> Result<Self, NetworkError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        check_header(&rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone(), &["row", "col", "relation", "m_flag"])?;
        let mut entries = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            let kind = Relation::from_letter(&rec[2])
                .ok_or_else(|| parse_err(line, format!("unknown relation {:?}", &rec[2])))?;
            let manufacturing = match &rec[3] {
                "0" => false,
                "1" => true,
                other => return Err(parse_err(line, format!("m_flag must be 0 or 1, got {other:?}"))),
            };
            let row: CapabilityId = rec[0].parse()?;
            let col: CapabilityId = rec[1].parse()?;
            if row == col {
                return Err(parse_err(line, format!("self relation on {row}")));
            }
            entries.push(InterrelationEntry { row, col, relation: RelationKind { kind, manufacturing } });
        }
        Ok(InterrelationTable { entries })
    }

    pub fn entries(&self) -> &[InterrelationEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self, catalog: &CapabilityCatalog) -> Result<(), NetworkError> {
        for e in &self.entries {
            for id in [e.row, e.col] {
                if !catalog.resolves(&id) {
                    return Err(NetworkError::UnknownNode(id));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateVerdict {
    NotInInterrelations,
    Impossible,
    Pretest,
    SimultaneousRotation,
    ReachCombination,
    PressureMovement,
}

impl CandidateVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            CandidateVerdict::NotInInterrelations => "not_in_interrelations",
            CandidateVerdict::Impossible => "impossible",
            CandidateVerdict::Pretest => "pretest",
            CandidateVerdict::SimultaneousRotation => "simultaneous_rotation",
            CandidateVerdict::ReachCombination => "reach_combination",
            CandidateVerdict::PressureMovement => "pressure_movement",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        use CandidateVerdict::*;
        [NotInInterrelations, Impossible, Pretest, SimultaneousRotation, ReachCombination, PressureMovement]
            .into_iter()
            .find(|v| v.as_str() == s)
    }
}

impl fmt::Display for CandidateVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrongCandidate {
    pub first: CapabilityId,
    pub second: CapabilityId,
    pub r: f64,
    pub verdict: CandidateVerdict,
}

/// Strongly correlated pairs with the reason each was or was not turned into an edge.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct StrongCandidateTable {
    entries: Vec<StrongCandidate>,
}

impl StrongCandidateTable {
    pub fn new(entries: Vec<StrongCandidate>) -> Self {
        StrongCandidateTable { entries }
    }

    pub fn reference() -> Self {
        let text = include_str!("../../fixtures/strong_candidates.csv");
        StrongCandidateTable::from_csv(text.as_bytes()).expect("candidate fixture is valid")
    }

    /// Reads `c1,c2,r,verdict` records.
    pub fn from_csv<R: Read>(input: R) -> Result<Self, NetworkError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        check_header(&rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone(), &["c1", "c2", "r", "verdict"])?;
        let mut entries = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            let r: f64 = rec[2].parse().map_err(|_| parse_err(line, format!("{:?} is not a number", &rec[2])))?;
            if !(-1.0..=1.0).contains(&r) {
                return Err(parse_err(line, format!("correlation {r} outside [-1, 1]")));
            }
            let verdict = CandidateVerdict::parse(&rec[3])
                .ok_or_else(|| parse_err(line, format!("unknown verdict {:?}", &rec[3])))?;
            entries.push(StrongCandidate { first: rec[0].parse()?, second: rec[1].parse()?, r, verdict });
        }
        Ok(StrongCandidateTable { entries })
    }

    pub fn entries(&self) -> &[StrongCandidate] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_tables_load() {
        let t = InterrelationTable::reference();
        assert_eq!(t.len(), 201);
        t.validate(&CapabilityCatalog::reference()).unwrap();
        assert_eq!(InterrelationTable::reference_supplement().len(), 8);
        let c = StrongCandidateTable::reference();
        assert_eq!(c.entries().len(), 30);
        let last = c.entries().last().unwrap();
        assert_eq!((last.first.to_string().as_str(), last.r), ("3.01.03", 0.704));
        assert_eq!(c.entries().iter().filter(|e| e.verdict == CandidateVerdict::NotInInterrelations).count(), 3);
    }

    #[test]
    fn malformed_rows_are_reported_with_line() {
        let bad = "row,col,relation,m_flag\n1.01,1.05.01,x,0\n";
        assert!(matches!(InterrelationTable::from_csv(bad.as_bytes()), Err(NetworkError::Parse { line: 2, .. })));
        let selfrel = "row,col,relation,m_flag\n1.01,1.01,a,0\n";
        assert!(InterrelationTable::from_csv(selfrel.as_bytes()).is_err());
        let bad_r = "c1,c2,r,verdict\n1.01,1.02,1.5,pretest\n";
        assert!(StrongCandidateTable::from_csv(bad_r.as_bytes()).is_err());
    }
}
