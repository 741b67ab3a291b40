//! Pearson correlation, correlation matrices and seeded permutation tests.

use std::fmt;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiles::ProfileDataset;
use crate::taxonomy::{CapabilityId, TaxonomyError};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooFewSamples(usize),
    #[error("correlation undefined: input is constant")]
    ConstantInput,
    #[error("n_resamples must be at least 1")]
    NoResamples,
    #[error("capability {0} is not in the matrix")]
    MissingId(CapabilityId),
    #[error("correlation between {0} and {1} is undefined")]
    UndefinedCell(CapabilityId, CapabilityId),
    #[error("capability {0} has missing values in the dataset")]
    IncompleteColumn(CapabilityId),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Centered values and their root sum of squares, via a single streaming pass.
fn center(x: &[f64]) -> (Vec<f64>, f64) {
    let mut mean = 0.0;
    for (k, v) in x.iter().enumerate() {
        mean += (v - mean) / (k + 1) as f64;
    }
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let ss = c.iter().map(|v| v * v).sum::<f64>();
    (c, ss.sqrt())
}

/// Product-moment correlation of two equally long vectors.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewSamples(x.len()));
    }
    if is_constant(x) || is_constant(y) {
        return Err(StatsError::ConstantInput);
    }
    let (cx, nx) = center(x);
    let (cy, ny) = center(y);
    let dot: f64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum();
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationStrength {
    Weak,
    Moderate,
    Strong,
}

impl fmt::Display for CorrelationStrength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrelationStrength::Weak => "weak",
            CorrelationStrength::Moderate => "moderate",
            CorrelationStrength::Strong => "strong",
        })
    }
}

pub const MODERATE_FROM: f64 = 0.4;
pub const STRONG_FROM: f64 = 0.8;

pub fn classify_correlation(r: f64) -> CorrelationStrength {
    let a = r.abs();
    if a < MODERATE_FROM {
        CorrelationStrength::Weak
    } else if a < STRONG_FROM {
        CorrelationStrength::Moderate
    } else {
        CorrelationStrength::Strong
    }
}

/// Square table over capability ids; `None` cells are undefined.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareTable {
    ids: Vec<CapabilityId>,
    cells: Vec<Option<f64>>,
}

impl SquareTable {
    pub fn new(ids: Vec<CapabilityId>) -> Self {
        let n = ids.len();
        SquareTable { ids, cells: vec![None; n * n] }
    }

    pub fn ids(&self) -> &[CapabilityId] {
        &self.ids
    }

    pub fn index_of(&self, id: &CapabilityId) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }

    pub fn cell(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i * self.ids.len() + j]
    }

    pub fn set_symmetric(&mut self, i: usize, j: usize, v: Option<f64>) {
        let n = self.ids.len();
        self.cells[i * n + j] = v;
        self.cells[j * n + i] = v;
    }

    pub fn lookup(&self, a: &CapabilityId, b: &CapabilityId) -> Result<f64, StatsError> {
        let i = self.index_of(a).ok_or(StatsError::MissingId(*a))?;
        let j = self.index_of(b).ok_or(StatsError::MissingId(*b))?;
        self.cell(i, j).ok_or(StatsError::UndefinedCell(*a, *b))
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.ids.len();
        (0..n).all(|i| (0..n).all(|j| self.cell(i, j).map(f64::to_bits) == self.cell(j, i).map(f64::to_bits)))
    }

    /// Header row and column carry canonical ids; undefined cells are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), StatsError> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string()];
        header.extend(self.ids.iter().map(|i| i.to_string()));
        wtr.write_record(&header).map_err(io_err)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.to_string()];
            row.extend((0..self.ids.len()).map(|j| self.cell(i, j).map(|v| v.to_string()).unwrap_or_default()));
            wtr.write_record(&row).map_err(io_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, StatsError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let parse = |line, reason: String| StatsError::Parse { line, reason };
        let headers = rdr.headers().map_err(|e| parse(1, e.to_string()))?.clone();
        if headers.get(0) != Some("id") {
            return Err(parse(1, "header must start with id".into()));
        }
        let ids: Vec<CapabilityId> = headers.iter().skip(1).map(str::parse).collect::<Result<_, _>>()?;
        let mut table = SquareTable::new(ids);
        let n = table.ids.len();
        let mut rows = 0;
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| parse(line, e.to_string()))?;
            if i >= n {
                return Err(parse(line, "more rows than columns".into()));
            }
            let id: CapabilityId = record[0].parse()?;
            if id != table.ids[i] {
                return Err(parse(line, format!("row {id} does not match column {}", table.ids[i])));
            }
            for (j, cell) in record.iter().skip(1).enumerate() {
                if cell.is_empty() {
                    continue;
                }
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse(line, format!("{cell:?} is not a number")))?;
                table.cells[i * n + j] = Some(v);
            }
            rows += 1;
        }
        if rows != n {
            return Err(parse(rows + 2, format!("expected {n} rows, found {rows}")));
        }
        Ok(table)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    pub table: SquareTable,
    pub n_samples: usize,
}

impl CorrelationMatrix {
    pub fn ids(&self) -> &[CapabilityId] {
        self.table.ids()
    }

    /// Correlation between two ids; errors if either is absent or the cell is undefined.
    pub fn get(&self, a: &CapabilityId, b: &CapabilityId) -> Result<f64, StatsError> {
        self.table.lookup(a, b)
    }

    pub fn read_csv<R: Read>(input: R, n_samples: usize) -> Result<Self, StatsError> {
        Ok(CorrelationMatrix { table: SquareTable::read_csv(input)?, n_samples })
    }

    /// Matrix transcribed from published pair values; the remaining cells hold the reported mean.
    pub fn reference() -> Self {
        let text = include_str!("../fixtures/reference_correlations.csv");
        CorrelationMatrix::read_csv(text.as_bytes(), 476).expect("reference correlation fixture is valid")
    }
}

fn io_err(e: csv::Error) -> StatsError {
    StatsError::Io(std::io::Error::other(e))
}

fn dataset_columns(dataset: &ProfileDataset, ids: &[CapabilityId]) -> Result<Vec<Vec<f64>>, StatsError> {
    if dataset.len() < 2 {
        return Err(StatsError::TooFewSamples(dataset.len()));
    }
    ids.iter()
        .map(|id| dataset.column(id).ok_or(StatsError::IncompleteColumn(*id)))
        .collect()
}

/// Pairwise correlations over dataset columns; constant columns give undefined cells.
pub fn correlation_matrix(dataset: &ProfileDataset, ids: &[CapabilityId]) -> Result<CorrelationMatrix, StatsError> {
    let cols = dataset_columns(dataset, ids)?;
    let n = ids.len();
    let upper: Vec<(usize, usize, Option<f64>)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let cols = &cols;
            (i..n).map(move |j| {
                let r = if i == j {
                    (!is_constant(&cols[i])).then_some(1.0)
                } else {
                    pearson(&cols[i], &cols[j]).ok()
                };
                (i, j, r)
            })
        })
        .collect();
    let mut table = SquareTable::new(ids.to_vec());
    for (i, j, r) in upper {
        table.set_symmetric(i, j, r);
    }
    Ok(CorrelationMatrix { table, n_samples: dataset.len() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_resamples: usize,
    pub exceedances: usize,
    pub seed: u64,
}

/// Resampled correlations at least this close to the observed one count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// Two-sided permutation test of the correlation between `x` and `y`.
///
/// Resample `i` shuffles `y` with a generator seeded from `seed` on stream
/// `i`, so the result does not depend on how resamples are scheduled.
pub fn permutation_test(x: &[f64], y: &[f64], n_resamples: usize, seed: u64) -> Result<PermutationTestResult, StatsError> {
    if n_resamples == 0 {
        return Err(StatsError::NoResamples);
    }
    let observed = pearson(x, y)?;
    let (cx, nx) = center(x);
    let (cy, ny) = center(y);
    let norm = nx * ny;
    let threshold = observed.abs() - TIE_TOLERANCE;
    let exceedances = (0..n_resamples)
        .into_par_iter()
        .map_init(
            || cy.clone(),
            |perm, i| {
                perm.copy_from_slice(&cy);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                perm.shuffle(&mut rng);
                let dot: f64 = cx.iter().zip(perm.iter()).map(|(a, b)| a * b).sum();
                usize::from((dot / norm).abs() >= threshold)
            },
        )
        .sum::<usize>();
    Ok(PermutationTestResult {
        statistic: observed,
        p_value: (exceedances + 1) as f64 / (n_resamples + 1) as f64,
        n_resamples,
        exceedances,
        seed,
    })
}

/// Permutation p-values for every defined off-diagonal pair; pair `(i, j)` uses `seed + pair index`.
pub fn p_value_matrix(
    dataset: &ProfileDataset,
    ids: &[CapabilityId],
    n_resamples: usize,
    seed: u64,
) -> Result<SquareTable, StatsError> {
    let cols = dataset_columns(dataset, ids)?;
    let n = ids.len();
    let mut table = SquareTable::new(ids.to_vec());
    let mut pair = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            let p = match permutation_test(&cols[i], &cols[j], n_resamples, seed.wrapping_add(pair)) {
                Ok(res) => Some(res.p_value),
                Err(StatsError::ConstantInput) => None,
                Err(e) => return Err(e),
            };
            table.set_symmetric(i, j, p);
            pair += 1;
        }
    }
    Ok(table)
}

/// Largest distance between the empirical CDF of `samples` and the uniform CDF on [0, 1].
pub fn ks_distance_uniform(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, p)| {
            let p = p.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - p).max(p - i as f64 / n)
        })
        .fold(0.0, f64::max)
}
