//! CSV layouts for profile datasets and requirement sets.
//!
//! Datasets: `agent_id,phase,<id>,<id>,...`, one row per profile, empty cell =
//! not assessed. Requirement files: `action_id,<id>,...`, one row per action,
//! empty cell = not required.

use std::collections::HashSet;
use std::io::{Read, Write};

use super::{Phase, Profile, ProfileDataset, ProfileError, RequirementSet};
use crate::taxonomy::{CapabilityCatalog, CapabilityId, Quantification};

fn parse_header(
    headers: &csv::StringRecord,
    leading: &[&str],
    catalog: Option<&CapabilityCatalog>,
) -> Result<Vec<CapabilityId>, ProfileError> {
    let got: Vec<&str> = headers.iter().take(leading.len()).collect();
    if got != leading {
        return Err(ProfileError::Parse {
            line: 1,
            reason: format!("header must start with {}", leading.join(",")),
        });
    }
    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    for cell in headers.iter().skip(leading.len()) {
        let id: CapabilityId = cell.parse()?;
        if !seen.insert(id) {
            return Err(ProfileError::Parse {
                line: 1,
                reason: format!("duplicate column {id}"),
            });
        }
        if let Some(cat) = catalog {
            if !cat.resolves(&id) {
                return Err(ProfileError::UnknownCapability(id));
            }
        }
        ids.push(id);
    }
    Ok(ids)
}

fn parse_cell(cell: &str, line: usize, id: &CapabilityId) -> Result<Option<Quantification>, ProfileError> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    let v: i64 = cell.parse().map_err(|_| ProfileError::Parse {
        line,
        reason: format!("column {id}: {cell:?} is not an integer"),
    })?;
    Quantification::new(v).map(Some).map_err(|e| ProfileError::Parse {
        line,
        reason: format!("column {id}: {e}"),
    })
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn csv_err(line: usize, e: csv::Error) -> ProfileError {
    ProfileError::Parse {
        line,
        reason: e.to_string(),
    }
}

impl ProfileDataset {
    pub fn read_csv<R: Read>(
        input: R,
        catalog: Option<&CapabilityCatalog>,
        provenance: impl Into<String>,
    ) -> Result<Self, ProfileError> {
        let mut rdr = reader(input);
        let headers = rdr.headers().map_err(|e| csv_err(1, e))?.clone();
        let ids = parse_header(&headers, &["agent_id", "phase"], catalog)?;
        let mut profiles = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| csv_err(line, e))?;
            let phase: Phase = record[1]
                .parse()
                .map_err(|reason| ProfileError::Parse { line, reason })?;
            let mut p = Profile::new(&record[0], phase);
            for (id, cell) in ids.iter().zip(record.iter().skip(2)) {
                match parse_cell(cell, line, id)? {
                    Some(q) => p.set(*id, q),
                    None => p.set_missing(*id),
                }
            }
            profiles.push(p);
        }
        ProfileDataset::new(ids, profiles, provenance)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ProfileError> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["agent_id".to_string(), "phase".to_string()];
        header.extend(self.columns().iter().map(|c| c.to_string()));
        wtr.write_record(&header).map_err(|e| csv_err(1, e))?;
        for (i, p) in self.profiles().iter().enumerate() {
            let mut row = vec![p.agent_id.clone(), p.phase.to_string()];
            row.extend(
                self.columns()
                    .iter()
                    .map(|c| p.get(c).map(|q| q.to_string()).unwrap_or_default()),
            );
            wtr.write_record(&row).map_err(|e| csv_err(i + 2, e))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8")
    }
}

impl RequirementSet {
    /// Reads every action in a requirement file.
    pub fn read_csv<R: Read>(
        input: R,
        catalog: Option<&CapabilityCatalog>,
    ) -> Result<Vec<RequirementSet>, ProfileError> {
        let mut rdr = reader(input);
        let headers = rdr.headers().map_err(|e| csv_err(1, e))?.clone();
        let ids = parse_header(&headers, &["action_id"], catalog)?;
        let mut out: Vec<RequirementSet> = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| csv_err(line, e))?;
            let mut set = RequirementSet::new(&record[0]);
            if out.iter().any(|r| r.action_id == set.action_id) {
                return Err(ProfileError::DuplicateAction(set.action_id));
            }
            for (id, cell) in ids.iter().zip(record.iter().skip(1)) {
                if let Some(q) = parse_cell(cell, line, id)? {
                    set.requirements.insert(*id, q);
                }
            }
            out.push(set);
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(sets: &[RequirementSet], out: W) -> Result<(), ProfileError> {
        let mut cols: Vec<CapabilityId> = sets.iter().flat_map(|s| s.ids()).collect();
        cols.sort();
        cols.dedup();
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["action_id".to_string()];
        header.extend(cols.iter().map(|c| c.to_string()));
        wtr.write_record(&header).map_err(|e| csv_err(1, e))?;
        for (i, s) in sets.iter().enumerate() {
            let mut row = vec![s.action_id.clone()];
            row.extend(cols.iter().map(|c| s.get(c).map(|q| q.to_string()).unwrap_or_default()));
            wtr.write_record(&row).map_err(|e| csv_err(i + 2, e))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "agent_id,phase,3.03.04,3.02.03,3.4.8\n\
                          a1,post_rehab,4,,3\n\
                          a1,pre_rehab,2,1,0\n";

    #[test]
    fn reads_empty_cells_as_unassessed() {
        let cat = CapabilityCatalog::reference();
        let ds = ProfileDataset::read_csv(SAMPLE.as_bytes(), Some(&cat), "sample").unwrap();
        assert_eq!(ds.len(), 2);
        let post = &ds.profiles()[0];
        assert_eq!(post.phase, Phase::PostRehab);
        assert_eq!(post.get(&"3.02.03".parse().unwrap()), None);
        assert_eq!(post.get(&"3.04.08".parse().unwrap()).map(|q| q.value()), Some(3));
        let cells: Vec<_> = post.cells().collect();
        assert_eq!(cells.len(), 3);
    }

    #[test]
    fn writes_canonical_header() {
        let ds = ProfileDataset::read_csv(SAMPLE.as_bytes(), None, "sample").unwrap();
        let text = ds.to_csv_string();
        assert!(text.starts_with("agent_id,phase,3.02.03,3.03.04,3.04.08\n"), "{text}");
        let again = ProfileDataset::read_csv(text.as_bytes(), None, "sample").unwrap();
        assert_eq!(again, ds);
    }

    #[test]
    fn rejects_bad_cells_and_unknown_columns() {
        let cat = CapabilityCatalog::reference();
        let bad = "agent_id,phase,3.03.04\na,post,7\n";
        assert!(matches!(
            ProfileDataset::read_csv(bad.as_bytes(), Some(&cat), ""),
            Err(ProfileError::Parse { line: 2, .. })
        ));
        let unknown = "agent_id,phase,9.09\n";
        assert!(matches!(
            ProfileDataset::read_csv(unknown.as_bytes(), Some(&cat), ""),
            Err(ProfileError::UnknownCapability(_))
        ));
        let header = "agent,phase,3.03.04\n";
        assert!(ProfileDataset::read_csv(header.as_bytes(), None, "").is_err());
    }

    #[test]
    fn requirement_file_round_trip() {
        let text = "action_id,3.03.04,3.02.03\nreach,5,2\ngrasp,3,\n";
        let sets = RequirementSet::read_csv(text.as_bytes(), None).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[1].requirements.len(), 1);
        let mut buf = Vec::new();
        RequirementSet::write_csv(&sets, &mut buf).unwrap();
        let again = RequirementSet::read_csv(&buf[..], None).unwrap();
        assert_eq!(again, sets);
    }
}
