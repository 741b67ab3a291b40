//! Build, prune and augment in one call.

use std::fmt;

use super::{
    augment_strong, build_graph, prune_weak, AugmentOptions, BuildReport, ConjugationGraph, Edge, InterrelationTable,
    NetworkError, Orientation, StageOrder, StrongCandidateTable,
};
use crate::stats::CorrelationMatrix;
use crate::taxonomy::{sitting_over_table_set, CapabilityCatalog};

pub struct GraphInputs {
    pub catalog: CapabilityCatalog,
    pub interrelations: InterrelationTable,
    pub correlations: CorrelationMatrix,
    pub candidates: StrongCandidateTable,
}

impl GraphInputs {
    /// The shipped fixtures, including the interrelation supplement.
    pub fn reference() -> Self {
        GraphInputs {
            catalog: CapabilityCatalog::reference(),
            interrelations: InterrelationTable::reference_with_supplement(),
            correlations: CorrelationMatrix::reference(),
            candidates: StrongCandidateTable::reference(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphParams {
    pub threshold: f64,
    pub repair: bool,
    pub n_min: usize,
    pub orientation: Orientation,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            threshold: 0.4,
            repair: true,
            n_min: 4,
            orientation: Orientation::MovementStages(StageOrder::reference()),
        }
    }
}

pub struct GraphBuild {
    pub graph: ConjugationGraph,
    pub report: BuildReport,
    pub pruned: Vec<Edge>,
    pub added: Vec<Edge>,
    /// Edge count after pruning, before augmentation.
    pub pruned_edge_count: usize,
}

impl fmt::Display for GraphBuild {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.report)?;
        writeln!(f, "{} edges pruned, {} edges added", self.pruned.len(), self.added.len())?;
        for e in &self.pruned {
            writeln!(f, "  pruned {} -> {} (r={})", e.from, e.to, e.correlation.map_or("n/a".into(), |r| r.to_string()))?;
        }
        for e in &self.added {
            writeln!(f, "  added {} -> {} (r={})", e.from, e.to, e.correlation.map_or("n/a".into(), |r| r.to_string()))?;
        }
        write!(f, "{} nodes, {} edges", self.graph.node_count(), self.graph.edge_count())
    }
}

/// Builds the sitting over-table graph, prunes weak pairs and adds missed strong ones.
pub fn build_pipeline(inputs: &GraphInputs, params: &GraphParams) -> Result<GraphBuild, NetworkError> {
    let scope = sitting_over_table_set(&inputs.catalog);
    let (graph, report) = build_graph(&inputs.interrelations, &scope, &params.orientation)?;
    let (pruned_graph, pruned) = prune_weak(&graph, &inputs.correlations, params.threshold)?;
    let options = AugmentOptions { repair: params.repair, n_min: params.n_min, orientation: params.orientation.clone() };
    let (graph, added) = augment_strong(&pruned_graph, &inputs.candidates, &options)?;
    Ok(GraphBuild {
        graph: graph.with_names(&inputs.catalog),
        report,
        pruned,
        added,
        pruned_edge_count: pruned_graph.edge_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_pipeline_counts() {
        let b = build_pipeline(&GraphInputs::reference(), &GraphParams::default()).unwrap();
        assert_eq!(b.pruned.len(), 4);
        assert_eq!(b.added.len(), 3);
        assert_eq!(b.graph.edge_count(), b.pruned_edge_count + 3);
        assert!(b.graph.is_acyclic());
        assert!(b.graph.nodes_off_long_paths(4).unwrap().is_empty());
        let text = b.to_string();
        assert!(text.contains("4 edges pruned, 3 edges added"), "{text}");

        let no_repair = GraphParams { repair: false, ..Default::default() };
        let b = build_pipeline(&GraphInputs::reference(), &no_repair).unwrap();
        assert_eq!(b.added.len(), 2);
    }
}
