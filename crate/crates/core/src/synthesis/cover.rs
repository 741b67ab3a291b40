//! Minimum path multicover: pick the fewest paths so every node lies on
//! between `min_visits` and `max_visits` of them.

use std::fmt;

use serde::Serialize;

use super::simplex::{CoverLp, LpOutcome};
use super::{PathSet, SynthesisError};
use crate::taxonomy::CapabilityId;

const INT_TOL: f64 = 1e-6;
const DEFAULT_NODE_LIMIT: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct CoverProblem {
    pub paths: PathSet,
    /// Minimum number of selected paths through each node.
    pub min_visits: usize,
    /// Maximum number of selected paths through each node.
    pub max_visits: usize,
    pub nodes: Vec<CapabilityId>,
}

impl CoverProblem {
    pub fn new(paths: PathSet, nodes: Vec<CapabilityId>, min_visits: usize, max_visits: usize) -> Result<Self, SynthesisError> {
        if min_visits == 0 || max_visits < min_visits {
            return Err(SynthesisError::InvalidParameter(format!(
                "visit bounds must satisfy 1 <= min ({min_visits}) <= max ({max_visits})"
            )));
        }
        Ok(CoverProblem { paths, min_visits, max_visits, nodes })
    }

    /// Row indices (positions in `nodes`) touched by each path.
    pub fn membership(&self) -> Vec<Vec<usize>> {
        self.paths
            .paths()
            .iter()
            .map(|p| {
                let mut rows: Vec<usize> = p.iter().filter_map(|id| self.nodes.iter().position(|n| n == id)).collect();
                rows.sort_unstable();
                rows.dedup();
                rows
            })
            .collect()
    }

    /// Number of candidate paths containing each node.
    pub fn availability(&self) -> Vec<usize> {
        let mut count = vec![0; self.nodes.len()];
        for rows in self.membership() {
            for r in rows {
                count[r] += 1;
            }
        }
        count
    }

    /// Visits per node for a selection, counted straight from the paths.
    pub fn visits(&self, selected: &[usize]) -> Vec<(CapabilityId, usize)> {
        self.nodes
            .iter()
            .map(|n| (*n, selected.iter().filter(|&&w| self.paths.paths()[w].contains(n)).count()))
            .collect()
    }

    /// Nodes whose visit count falls outside the bounds.
    pub fn violations(&self, selected: &[usize]) -> Vec<(CapabilityId, usize)> {
        self.visits(selected)
            .into_iter()
            .filter(|(_, v)| *v < self.min_visits || *v > self.max_visits)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverSolution {
    /// Selected path indices, ascending.
    pub selected: Vec<usize>,
    pub objective: usize,
    pub lp_bound: f64,
    pub visits: Vec<(CapabilityId, usize)>,
    pub nodes_explored: usize,
}

/// Why no selection exists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InfeasibilityReport {
    /// Nodes contained in fewer candidate paths than the minimum, with their counts.
    pub under_covered: Vec<(CapabilityId, usize)>,
    /// Nodes whose bounds the relaxation could not meet.
    pub binding: Vec<CapabilityId>,
}

impl fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.under_covered.is_empty() {
            let list: Vec<String> = self.under_covered.iter().map(|(n, c)| format!("{n} ({c} paths)")).collect();
            return write!(f, "nodes on too few candidate paths: {}", list.join(", "));
        }
        if !self.binding.is_empty() {
            let list: Vec<String> = self.binding.iter().map(|n| n.to_string()).collect();
            return write!(f, "visit bounds cannot be met at {}", list.join(", "));
        }
        f.write_str("visit bounds cannot be met by any integral selection")
    }
}

/// A backend that solves cover problems exactly.
pub trait CoverSolver {
    fn solve(&self, problem: &CoverProblem) -> Result<CoverSolution, SynthesisError>;
}

/// LP-based branch and bound, followed by a lexicographic tie-break among optima.
#[derive(Clone, Debug)]
pub struct BranchAndBound {
    pub node_limit: usize,
}

impl Default for BranchAndBound {
    fn default() -> Self {
        BranchAndBound { node_limit: DEFAULT_NODE_LIMIT }
    }
}

impl CoverSolver for BranchAndBound {
    fn solve(&self, problem: &CoverProblem) -> Result<CoverSolution, SynthesisError> {
        Search::new(problem, self.node_limit).run()
    }
}

/// Solves with the default backend.
pub fn solve_cover(problem: &CoverProblem) -> Result<CoverSolution, SynthesisError> {
    BranchAndBound::default().solve(problem)
}

/// Greedy multicover respecting upper bounds: repeatedly take the path
/// covering the most still-short nodes, lowest index first.
pub fn greedy_cover(problem: &CoverProblem) -> Option<Vec<usize>> {
    let members = problem.membership();
    let mut visits = vec![0usize; problem.nodes.len()];
    let mut taken = vec![false; members.len()];
    loop {
        if visits.iter().all(|&v| v >= problem.min_visits) {
            let mut sel: Vec<usize> = (0..members.len()).filter(|&w| taken[w]).collect();
            sel.sort_unstable();
            return Some(sel);
        }
        let mut best: Option<(usize, usize)> = None;
        for (w, rows) in members.iter().enumerate() {
            if taken[w] || rows.iter().any(|&r| visits[r] >= problem.max_visits) {
                continue;
            }
            let gain = rows.iter().filter(|&&r| visits[r] < problem.min_visits).count();
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((w, gain));
            }
        }
        let (w, _) = best?;
        taken[w] = true;
        for &r in &members[w] {
            visits[r] += 1;
        }
    }
}

enum Goal {
    /// Find an optimum; prune nodes that cannot beat the incumbent.
    Minimize,
    /// Stop at the first integral selection of at most this many paths.
    AtMost(usize),
}

struct Search<'a> {
    problem: &'a CoverProblem,
    lp: CoverLp,
    node_limit: usize,
    nodes_explored: usize,
    incumbent: Option<Vec<bool>>,
}

impl<'a> Search<'a> {
    fn new(problem: &'a CoverProblem, node_limit: usize) -> Self {
        let members = problem.membership();
        let n = members.len();
        let m = problem.nodes.len();
        let lp = CoverLp::new(
            m,
            members,
            vec![1.0; n],
            &vec![problem.min_visits as f64; m],
            &vec![problem.max_visits as f64; m],
        );
        Search { problem, lp, node_limit, nodes_explored: 0, incumbent: None }
    }

    fn solve_lp(&mut self) -> Result<LpOutcome, SynthesisError> {
        self.lp
            .solve()
            .map_err(|_| SynthesisError::Solver("simplex iteration limit reached".into()))
    }

    fn incumbent_size(&self) -> Option<usize> {
        self.incumbent.as_ref().map(|x| x.iter().filter(|b| **b).count())
    }

    /// Depth-first branch and bound from the current bounds. Returns true when
    /// the goal asks to stop.
    fn branch(&mut self, goal: &Goal) -> Result<bool, SynthesisError> {
        self.nodes_explored += 1;
        if self.nodes_explored > self.node_limit {
            return Err(SynthesisError::Solver(format!("node limit {} exceeded", self.node_limit)));
        }
        let LpOutcome::Optimal(z) = self.solve_lp()? else {
            return Ok(false);
        };
        let bound = (z - INT_TOL).ceil() as usize;
        let beaten = match goal {
            Goal::Minimize => self.incumbent_size().is_some_and(|s| bound >= s),
            Goal::AtMost(k) => bound > *k,
        };
        if beaten {
            return Ok(false);
        }
        let x = self.lp.values();
        let mut pick: Option<(usize, f64)> = None;
        for (j, &v) in x.iter().enumerate() {
            if v > INT_TOL && v < 1.0 - INT_TOL && pick.is_none_or(|(_, pv)| v > pv) {
                pick = Some((j, v));
            }
        }
        let Some((j, _)) = pick else {
            let sel: Vec<bool> = x.iter().map(|v| *v > 0.5).collect();
            let size = sel.iter().filter(|b| **b).count();
            if self.incumbent_size().is_none_or(|s| size < s) {
                self.incumbent = Some(sel);
            }
            return Ok(matches!(goal, Goal::AtMost(_)));
        };
        let saved = self.lp.bounds(j);
        for (lo, hi) in [(1.0, 1.0), (0.0, 0.0)] {
            self.lp.set_bounds(j, lo, hi);
            let stop = self.branch(goal)?;
            self.lp.set_bounds(j, saved.0, saved.1);
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Fixes to zero every column whose reduced cost alone pushes the bound past `target`.
    fn reduced_cost_fixing(&mut self, target: usize) -> Result<(), SynthesisError> {
        let LpOutcome::Optimal(z) = self.solve_lp()? else {
            return Ok(());
        };
        for j in 0..self.lp.structurals() {
            if self.lp.is_basic(j) || self.lp.bounds(j) != (0.0, 1.0) {
                continue;
            }
            let d = self.lp.reduced_cost(j);
            if d > 0.0 && self.lp.values()[j] < INT_TOL && z + d > target as f64 + INT_TOL {
                self.lp.set_bounds(j, 0.0, 0.0);
            }
        }
        Ok(())
    }

    fn infeasible(&mut self, binding_row: Option<usize>) -> SynthesisError {
        let avail = self.problem.availability();
        let under_covered = self
            .problem
            .nodes
            .iter()
            .zip(&avail)
            .filter(|(_, c)| **c < self.problem.min_visits)
            .map(|(n, c)| (*n, *c))
            .collect();
        let binding = binding_row.map(|r| vec![self.problem.nodes[r]]).unwrap_or_default();
        SynthesisError::Infeasible(InfeasibilityReport { under_covered, binding })
    }

    fn run(mut self) -> Result<CoverSolution, SynthesisError> {
        let avail = self.problem.availability();
        if avail.iter().any(|c| *c < self.problem.min_visits) {
            return Err(self.infeasible(None));
        }
        let lp_bound = match self.solve_lp()? {
            LpOutcome::Optimal(z) => z,
            LpOutcome::Infeasible(row) => return Err(self.infeasible(row)),
        };
        let n = self.lp.structurals();
        if let Some(sel) = greedy_cover(self.problem) {
            if self.problem.violations(&sel).is_empty() {
                let mut x = vec![false; n];
                sel.iter().for_each(|&w| x[w] = true);
                self.incumbent = Some(x);
            }
        }
        self.branch(&Goal::Minimize)?;
        let Some(witness) = self.incumbent.take() else {
            return Err(self.infeasible(None));
        };
        let target = witness.iter().filter(|b| **b).count();
        let selected = self.lexicographic(target, witness)?;
        debug_assert_eq!(selected.len(), target);
        Ok(CoverSolution {
            visits: self.problem.visits(&selected),
            objective: selected.len(),
            selected,
            lp_bound,
            nodes_explored: self.nodes_explored,
        })
    }

    /// Smallest index set, in lexicographic order, among selections of `target` paths.
    ///
    /// Indices are decided in increasing order. An index is taken if some optimal
    /// selection agrees with every earlier decision and contains it; the last
    /// selection found serves as a witness for indices it already contains.
    fn lexicographic(&mut self, target: usize, mut witness: Vec<bool>) -> Result<Vec<usize>, SynthesisError> {
        let n = self.lp.structurals();
        let mut chosen = Vec::with_capacity(target);
        self.reduced_cost_fixing(target)?;
        for j in 0..n {
            if chosen.len() == target {
                self.lp.set_bounds(j, 0.0, 0.0);
                continue;
            }
            if self.lp.bounds(j).1 == 0.0 {
                continue;
            }
            if witness[j] {
                self.lp.set_bounds(j, 1.0, 1.0);
                chosen.push(j);
                self.reduced_cost_fixing(target)?;
                continue;
            }
            self.lp.set_bounds(j, 1.0, 1.0);
            self.incumbent = None;
            if self.branch(&Goal::AtMost(target))? {
                witness = self.incumbent.take().expect("search stopped on a selection");
                chosen.push(j);
                self.reduced_cost_fixing(target)?;
            } else {
                self.lp.set_bounds(j, 0.0, 0.0);
            }
        }
        Ok(chosen)
    }
}
