//! Requirement levels, names and plausibility checks for selected paths.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::taxonomy::CapabilityId;

const PINCH_GRIP: (u8, u8, u8) = (3, 4, 8);
const FIST_GRIP: (u8, u8, u8) = (3, 4, 2);
const LIFT_TO_EYE: (u8, u8, u8) = (5, 1, 3);
const LIFT_OVERHEAD: (u8, u8, u8) = (5, 1, 4);
const REACH_OVERHEAD: (u8, u8, u8) = (3, 3, 2);
const REACH_FORWARD: (u8, u8, u8) = (3, 3, 4);
const REACH_SIDEWAYS: (u8, u8, u8) = (3, 3, 6);
const REACH_BACKWARD: (u8, u8, u8) = (3, 3, 8);
const ARMS_OVER_HEAD: (u8, u8, u8) = (1, 6, 2);

fn is(id: &CapabilityId, code: (u8, u8, u8)) -> bool {
    (id.complex(), id.main(), id.detail()) == (code.0, code.1, Some(code.2))
}

fn is_vertical_lift(id: &CapabilityId) -> bool {
    is(id, LIFT_TO_EYE) || is(id, LIFT_OVERHEAD)
}

fn is_lifting(id: &CapabilityId) -> bool {
    id.complex() == 5 && id.main() == 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub capability: CapabilityId,
    /// Requirement level in 1..=6.
    pub level: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovementSequence {
    pub sequence_id: usize,
    pub steps: Vec<Step>,
    pub trivial_name: Option<String>,
}

impl MovementSequence {
    pub fn contains(&self, code: (u8, u8, u8)) -> bool {
        self.steps.iter().any(|s| is(&s.capability, code))
    }
}

/// Level range an occurrence draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Band {
    Full,
    /// Vertical lifting next to a pinch grip: light loads only.
    Low,
    /// Vertical lifting next to a fist grip: heavy loads.
    High,
}

impl Band {
    fn range(self) -> (u8, u8) {
        match self {
            Band::Full => (1, 6),
            Band::Low => (1, 3),
            Band::High => (4, 6),
        }
    }
}

/// Level of the `i`-th of `n` occurrences, spread evenly over `lo..=hi`.
fn spread(i: usize, n: usize, (lo, hi): (u8, u8)) -> u8 {
    if n <= 1 {
        return lo;
    }
    let frac = i as f64 * f64::from(hi - lo) / (n - 1) as f64;
    lo + frac.round() as u8
}

/// Assigns requirement levels to the steps of the selected paths.
///
/// Occurrences of one capability are counted in path order, then step order,
/// and receive levels rising evenly from 1 to 6. Vertical lifting that shares
/// a path with a pinch grip rises within 1..=3 instead, and with a fist grip
/// within 4..=6; pinch wins if a path has both grips.
pub fn annotate_requirements(paths: &[Vec<CapabilityId>], max_visits: usize) -> Result<Vec<MovementSequence>, SynthesisError> {
    let mut occurrences: BTreeMap<(CapabilityId, Band), Vec<(usize, usize)>> = BTreeMap::new();
    let mut totals: BTreeMap<CapabilityId, usize> = BTreeMap::new();
    for (w, path) in paths.iter().enumerate() {
        let pinch = path.iter().any(|c| is(c, PINCH_GRIP));
        let fist = path.iter().any(|c| is(c, FIST_GRIP));
        for (k, c) in path.iter().enumerate() {
            let band = match (is_vertical_lift(c), pinch, fist) {
                (true, true, _) => Band::Low,
                (true, false, true) => Band::High,
                _ => Band::Full,
            };
            occurrences.entry((*c, band)).or_default().push((w, k));
            *totals.entry(*c).or_default() += 1;
        }
    }
    if let Some((c, n)) = totals.iter().find(|(_, n)| **n > max_visits) {
        return Err(SynthesisError::Consistency(format!("{c} occurs {n} times, above the visit maximum {max_visits}")));
    }
    let mut levels: Vec<Vec<u8>> = paths.iter().map(|p| vec![0; p.len()]).collect();
    for ((_, band), occ) in &occurrences {
        for (i, (w, k)) in occ.iter().enumerate() {
            levels[*w][*k] = spread(i, occ.len(), band.range());
        }
    }
    Ok(paths
        .iter()
        .zip(levels)
        .enumerate()
        .map(|(id, (path, lv))| MovementSequence {
            sequence_id: id,
            steps: path.iter().zip(lv).map(|(c, level)| Step { capability: *c, level }).collect(),
            trivial_name: None,
        })
        .collect())
}

fn reach_direction(seq: &MovementSequence) -> Option<&'static str> {
    seq.steps.iter().find_map(|s| {
        if is(&s.capability, REACH_FORWARD) {
            Some("frontal")
        } else if is(&s.capability, REACH_SIDEWAYS) {
            Some("sideways")
        } else {
            None
        }
    })
}

/// Short everyday description derived from the capabilities a sequence uses.
pub fn name_sequence(seq: &MovementSequence) -> String {
    if seq.steps.is_empty() {
        return "unnamed".into();
    }
    if seq.contains(REACH_BACKWARD) {
        return "pull out, from behind".into();
    }
    if seq.contains(ARMS_OVER_HEAD) || seq.contains(REACH_OVERHEAD) {
        return "reach & push, overhead".into();
    }
    let lifts = seq.steps.iter().any(|s| is_lifting(&s.capability));
    if lifts && (seq.contains(PINCH_GRIP) || seq.contains(FIST_GRIP)) {
        let from = match reach_direction(seq) {
            Some("sideways") => "from side",
            Some(_) => "from front",
            None => "in place",
        };
        return format!("pick & place, {from}");
    }
    match reach_direction(seq) {
        Some(dir) => format!("reach & push, {dir}"),
        None => "seek & push".into(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LintWarning {
    pub sequence_id: usize,
    /// Step index of the backward reach.
    pub reach_step: usize,
    pub lift: CapabilityId,
    pub message: String,
}

/// Flags vertical lifting after a backward reach with no horizontal lift in between.
pub fn lint_sequences(sequences: &[MovementSequence]) -> Vec<LintWarning> {
    let mut out = Vec::new();
    for seq in sequences {
        for (i, s) in seq.steps.iter().enumerate() {
            if !is(&s.capability, REACH_BACKWARD) {
                continue;
            }
            let next_lift = seq.steps[i + 1..].iter().find(|t| is_lifting(&t.capability));
            if let Some(lift) = next_lift.filter(|t| is_vertical_lift(&t.capability)) {
                out.push(LintWarning {
                    sequence_id: seq.sequence_id,
                    reach_step: i,
                    lift: lift.capability,
                    message: format!(
                        "sequence {} lifts upward ({}) with the arm reaching backward; insert 5.01.01 before the lift \
                         or exclude such paths from generation",
                        seq.sequence_id, lift.capability
                    ),
                });
            }
        }
    }
    out
}

fn steps_text(seq: &MovementSequence) -> String {
    seq.steps.iter().map(|s| format!("{}:{}", s.capability, s.level)).collect::<Vec<_>>().join(" ")
}

/// Writes `sequence_id,trivial_name,steps` rows; steps are space-separated `id:level` tokens.
pub fn write_sequence_table<W: Write>(sequences: &[MovementSequence], out: W) -> Result<(), SynthesisError> {
    let mut wtr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| SynthesisError::Io(std::io::Error::other(e));
    wtr.write_record(["sequence_id", "trivial_name", "steps"]).map_err(io)?;
    for seq in sequences {
        wtr.write_record([seq.sequence_id.to_string(), seq.trivial_name.clone().unwrap_or_default(), steps_text(seq)])
            .map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_sequence_table<R: Read>(input: R) -> Result<Vec<MovementSequence>, SynthesisError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let err = |reason: String| SynthesisError::Parse { line, reason };
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let sequence_id = rec[0].parse().map_err(|_| err(format!("bad sequence id {:?}", &rec[0])))?;
        let mut steps = Vec::new();
        for tok in rec[2].split_whitespace() {
            let (c, l) = tok.split_once(':').ok_or_else(|| err(format!("step {tok:?} lacks a level")))?;
            let capability = c.parse().map_err(|e: crate::taxonomy::TaxonomyError| err(e.to_string()))?;
            let level: u8 = l.parse().map_err(|_| err(format!("bad level in {tok:?}")))?;
            if !(1..=6).contains(&level) {
                return Err(err(format!("level {level} outside 1..=6")));
            }
            steps.push(Step { capability, level });
        }
        let name = rec[1].to_string();
        out.push(MovementSequence { sequence_id, steps, trivial_name: (!name.is_empty()).then_some(name) });
    }
    Ok(out)
}

const SHADES: [char; 6] = ['·', '░', '▒', '▓', '█', '■'];

/// Plain-text table where each step carries a shade that darkens with its level.
pub fn render_shaded(sequences: &[MovementSequence]) -> String {
    let mut out = String::new();
    let width = sequences
        .iter()
        .map(|s| s.trivial_name.as_deref().unwrap_or("").chars().count())
        .max()
        .unwrap_or(0);
    for seq in sequences {
        let name = seq.trivial_name.as_deref().unwrap_or("");
        let _ = write!(out, "{:>3}  {name:<width$}  ", seq.sequence_id);
        let cells: Vec<String> = seq
            .steps
            .iter()
            .map(|s| {
                let shade = SHADES[usize::from(s.level.clamp(1, 6)) - 1];
                format!("{} {shade}{shade}", s.capability)
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    let legend: Vec<String> = SHADES.iter().enumerate().map(|(i, c)| format!("{}={c}{c}", i + 1)).collect();
    let _ = writeln!(out, "levels: {}", legend.join(" "));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(list: &[&str]) -> Vec<CapabilityId> {
        list.iter().map(|s| s.parse().unwrap()).collect()
    }

    fn seq(list: &[&str]) -> MovementSequence {
        MovementSequence {
            sequence_id: 0,
            steps: ids(list).into_iter().map(|c| Step { capability: c, level: 1 }).collect(),
            trivial_name: None,
        }
    }

    #[test]
    fn six_encounters_get_every_level() {
        let paths = vec![ids(&["3.03.04", "3.04.06"]); 6];
        let seqs = annotate_requirements(&paths, 7).unwrap();
        let levels: Vec<u8> = seqs.iter().map(|s| s.steps[0].level).collect();
        assert_eq!(levels, [1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn lifting_bands_follow_the_grip() {
        let paths = vec![
            ids(&["3.04.08", "5.01.04"]),
            ids(&["3.04.02", "5.01.03"]),
            ids(&["3.04.08", "5.01.04"]),
            ids(&["3.04.02", "5.01.03"]),
        ];
        let seqs = annotate_requirements(&paths, 7).unwrap();
        assert_eq!(seqs[0].steps[1].level, 1);
        assert_eq!(seqs[2].steps[1].level, 3);
        assert_eq!(seqs[1].steps[1].level, 4);
        assert_eq!(seqs[3].steps[1].level, 6);
    }

    #[test]
    fn too_many_encounters_is_an_error() {
        let paths = vec![ids(&["3.03.04"]); 8];
        assert!(matches!(annotate_requirements(&paths, 7), Err(SynthesisError::Consistency(_))));
    }

    #[test]
    fn spread_is_even_and_monotone() {
        let v: Vec<u8> = (0..7).map(|i| spread(i, 7, (1, 6))).collect();
        assert_eq!(v, [1, 2, 3, 4, 4, 5, 6]);
        assert_eq!(spread(0, 1, (4, 6)), 4);
    }

    #[test]
    fn names() {
        assert_eq!(name_sequence(&seq(&["3.01.01", "3.03.08", "3.04.02", "5.01.04"])), "pull out, from behind");
        assert_eq!(name_sequence(&seq(&["3.01.02", "3.03.02", "1.06.02", "3.04.10"])), "reach & push, overhead");
        assert_eq!(name_sequence(&seq(&[])), "unnamed");
        assert_eq!(name_sequence(&seq(&["3.03.06", "3.04.08", "5.01.01"])), "pick & place, from side");
        assert_eq!(name_sequence(&seq(&["3.03.02", "3.04.08", "5.01.01"])), "reach & push, overhead");
        assert_eq!(name_sequence(&seq(&["3.02.03", "3.03.04", "1.06.01", "3.04.10"])), "reach & push, frontal");
    }

    #[test]
    fn lint_flags_upward_lift_after_backward_reach() {
        assert_eq!(lint_sequences(&[seq(&["3.01.01", "3.03.08", "3.04.02", "5.01.03"])]).len(), 1);
        assert!(lint_sequences(&[seq(&["3.03.08", "3.04.02", "5.01.01", "5.01.04"])]).is_empty());
        assert!(lint_sequences(&[]).is_empty());
    }

    #[test]
    fn table_round_trip_and_shading() {
        let paths = vec![ids(&["3.01.01", "3.03.08", "3.04.02", "5.01.03"]), ids(&["3.03.04", "3.04.06"])];
        let mut seqs = annotate_requirements(&paths, 7).unwrap();
        for s in &mut seqs {
            s.trivial_name = Some(name_sequence(s));
        }
        let mut buf = Vec::new();
        write_sequence_table(&seqs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("0,\"pull out, from behind\",3.01.01:1 3.03.08:1 3.04.02:1 5.01.03:4"), "{text}");
        assert_eq!(read_sequence_table(&buf[..]).unwrap(), seqs);
        let shaded = render_shaded(&seqs);
        assert!(shaded.contains("5.01.03 ▓▓"), "{shaded}");
    }
}
