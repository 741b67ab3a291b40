//! Test-plan synthesis: candidate movement paths, the minimal cover over them,
//! and requirement levels for each step.

mod annotate;
mod cover;
mod simplex;

use serde::Serialize;
use thiserror::Error;

use crate::network::{ConjugationGraph, NetworkError};
use crate::taxonomy::{CapabilityCatalog, CapabilityId};

pub use annotate::{
    annotate_requirements, lint_sequences, name_sequence, read_sequence_table, render_shaded, write_sequence_table,
    LintWarning, MovementSequence, Step,
};
pub use cover::{
    greedy_cover, solve_cover, BranchAndBound, CoverProblem, CoverSolution, CoverSolver, InfeasibilityReport,
};

/// Refuse to enumerate beyond this many paths.
pub const PATH_LIMIT: usize = 2_000_000;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible: {0}")]
    Infeasible(InfeasibilityReport),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("more than {0} candidate paths")]
    TooManyPaths(usize),
    #[error("internal consistency: {0}")]
    Consistency(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Candidate paths in a fixed order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathSet {
    paths: Vec<Vec<CapabilityId>>,
}

impl PathSet {
    pub fn new(paths: Vec<Vec<CapabilityId>>) -> Self {
        PathSet { paths }
    }

    pub fn paths(&self) -> &[Vec<CapabilityId>] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&[CapabilityId]> {
        self.paths.get(i).map(Vec::as_slice)
    }
}

/// Every simple directed path with at least `n_min` nodes, in lexicographic
/// order of node sequences. Paths may start and end at any node.
pub fn enumerate_paths(graph: &ConjugationGraph, n_min: usize) -> Result<PathSet, SynthesisError> {
    if n_min == 0 {
        return Err(SynthesisError::InvalidParameter("n_min must be at least 1".into()));
    }
    graph.topological_order()?;
    let succ: std::collections::BTreeMap<CapabilityId, Vec<CapabilityId>> =
        graph.nodes().map(|n| (n, graph.successors(&n))).collect();
    let mut paths = Vec::new();
    let mut stack: Vec<CapabilityId> = Vec::new();

    fn walk(
        succ: &std::collections::BTreeMap<CapabilityId, Vec<CapabilityId>>,
        stack: &mut Vec<CapabilityId>,
        n_min: usize,
        out: &mut Vec<Vec<CapabilityId>>,
    ) -> Result<(), SynthesisError> {
        if stack.len() >= n_min {
            if out.len() >= PATH_LIMIT {
                return Err(SynthesisError::TooManyPaths(PATH_LIMIT));
            }
            out.push(stack.clone());
        }
        let last = *stack.last().expect("non-empty");
        for next in &succ[&last] {
            stack.push(*next);
            walk(succ, stack, n_min, out)?;
            stack.pop();
        }
        Ok(())
    }

    for start in graph.nodes() {
        stack.push(start);
        walk(&succ, &mut stack, n_min, &mut paths)?;
        stack.pop();
    }
    Ok(PathSet { paths })
}

/// Graph nodes eligible for synthesis: everything the catalog does not tag as upstream.
pub fn synthesis_nodes(graph: &ConjugationGraph, catalog: &CapabilityCatalog) -> Vec<CapabilityId> {
    graph.nodes().filter(|n| !catalog.is_upstream(n)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisParams {
    pub n_min: usize,
    pub min_visits: usize,
    pub max_visits: usize,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        SynthesisParams { n_min: 4, min_visits: 6, max_visits: 7 }
    }
}

#[derive(Clone, Debug)]
pub struct SynthesisRun {
    pub problem: CoverProblem,
    pub solution: CoverSolution,
    pub sequences: Vec<MovementSequence>,
    pub warnings: Vec<LintWarning>,
}

/// Enumerates, solves, annotates, names and lints.
pub fn synthesize(
    graph: &ConjugationGraph,
    catalog: &CapabilityCatalog,
    params: &SynthesisParams,
    solver: &dyn CoverSolver,
) -> Result<SynthesisRun, SynthesisError> {
    let nodes = synthesis_nodes(graph, catalog);
    let sub = graph.induced(&nodes);
    let paths = enumerate_paths(&sub, params.n_min)?;
    let problem = CoverProblem::new(paths, nodes, params.min_visits, params.max_visits)?;
    let solution = solver.solve(&problem)?;
    let violations = problem.violations(&solution.selected);
    if !violations.is_empty() {
        return Err(SynthesisError::Consistency(format!("solver returned a selection violating visit bounds at {violations:?}")));
    }
    let selected: Vec<Vec<CapabilityId>> =
        solution.selected.iter().map(|&w| problem.paths.paths()[w].clone()).collect();
    let mut sequences = annotate_requirements(&selected, params.max_visits)?;
    for s in &mut sequences {
        s.trivial_name = Some(name_sequence(s));
    }
    let warnings = lint_sequences(&sequences);
    Ok(SynthesisRun { problem, solution, sequences, warnings })
}
