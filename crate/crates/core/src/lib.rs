//! Elementary human capabilities, their conjugation graph, and the tools built on it:
//! correlation analysis, minimal test-plan synthesis and delta-compensation allocation.

pub mod deltas;
pub mod network;
pub mod profiles;
pub mod stats;
pub mod synthesis;
pub mod taxonomy;
