//! Verification of financial models by inclusion analysis.
//!
//! A statement is normalized so that every period sums to zero. Its rows are
//! then partitioned into clusters that reproduce a reported metric's input:
//! included and excluded rows for a cash flow, or top, bottom and excluded
//! rows for a ratio. Rows that should be included but are not become visible
//! as members of the excluded cluster.

pub mod diagnostics;
pub mod error;
pub mod fixtures;
pub mod inclusion;
pub mod ingest;
pub mod metrics;
pub mod numeric;
pub mod report;
pub mod statement;

pub use error::{Error, Result};
pub use inclusion::{
    partition, resolve_target, three_way_partition, two_way_partition, verify_partition, Algorithm, Assignment,
    Cluster, Norm, PartitionResult, Partitions, SolutionOrder, SolverOptions, Target, TargetSpec,
};
pub use ingest::{parse_manifest, parse_statement, Manifest, RawTable};
pub use metrics::{irr, npv, MetricKind, Reported};
pub use statement::{grid_checks, normalize, zero_check, RowId, Statement, TotaledGrid};
