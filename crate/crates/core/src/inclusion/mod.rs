//! Inclusion analysis: which statement rows make up a reported figure.
//!
//! A two-way analysis splits the rows of a zero-sum statement into those
//! included in a metric's input and those excluded from it. A three-way
//! analysis splits them into the top of a ratio, the bottom, and the rest.
//! The excluded cluster is the list of candidates for errors of omission.

mod search;
mod target;

use serde::{Deserialize, Serialize};

pub use target::{resolve_target, Target, TargetSpec};

use crate::error::{Error, Result};
use crate::metrics::{
    irr, ratio_value, verify_reported, MetricKind, MetricVerification, RatioComponents, DEFAULT_IRR_GUESS,
};
use crate::numeric::exact_sum;
use crate::statement::{zero_check, RowId, Statement};
pub(crate) use search::{Candidate, Problem, NO_GROUP, OVERLAP_STATES, THREE_WAY_STATES, TWO_WAY_STATES};

pub const DEFAULT_MAX_SOLUTIONS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cluster {
    Included,
    Excluded,
    Top,
    Bottom,
    /// Counted in both top and bottom: a double count.
    Both,
}

impl Cluster {
    pub fn in_top(self) -> bool {
        matches!(self, Cluster::Top | Cluster::Both)
    }

    pub fn in_bottom(self) -> bool {
        matches!(self, Cluster::Bottom | Cluster::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Exhaustive up to 2^24 assignments, meet-in-the-middle beyond.
    #[default]
    Auto,
    Exhaustive,
    MeetInMiddle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    /// Worst period.
    #[default]
    Max,
    L1,
}

impl Norm {
    pub(crate) fn combine(self, acc: f64, x: f64) -> f64 {
        match self {
            Norm::Max => acc.max(x),
            Norm::L1 => acc + x,
        }
    }

    pub fn of(self, values: &[f64]) -> f64 {
        values.iter().fold(0.0, |acc, v| self.combine(acc, v.abs()))
    }
}

/// How solutions are ranked when several exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolutionOrder {
    /// Fewer non-excluded rows first; then, for three-way analyses, fewer
    /// heading groups split between top and bottom; then earlier rows first.
    #[default]
    FewestRows,
    /// Earlier rows first.
    StatementOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_solutions: usize,
    pub allow_overlap: bool,
    pub order: SolutionOrder,
    pub algorithm: Algorithm,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub threads: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: crate::ingest::DEFAULT_TOLERANCE,
            max_solutions: DEFAULT_MAX_SOLUTIONS,
            allow_overlap: false,
            order: SolutionOrder::default(),
            algorithm: Algorithm::default(),
            threads: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        SolverOptions {
            tolerance,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.tolerance.is_nan() || self.tolerance <= 0.0 || self.tolerance.is_infinite() {
            return Err(Error::InvalidTolerance(self.tolerance));
        }
        if self.max_solutions == 0 {
            return Err(Error::Manifest("max_solutions must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub row: RowId,
    pub cluster: Cluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTotal {
    pub cluster: Cluster,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyKind {
    /// included - relevant cash flow
    IncludedMinusTarget,
    /// included + excluded
    IncludedPlusExcluded,
    /// sum(top) + top component
    TopPlusTarget,
    /// sum(bottom) + bottom component
    BottomPlusTarget,
    /// every row once: top + bottom + excluded
    AllClusters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyLine {
    pub kind: DiscrepancyKind,
    pub values: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub nodes_explored: u64,
    pub solutions_found: u64,
    pub algorithm: Algorithm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    /// Every data row, in statement order.
    pub assignment: Vec<Assignment>,
    pub cluster_totals: Vec<ClusterTotal>,
    pub discrepancies: Vec<DiscrepancyLine>,
    pub metric_check: Option<MetricVerification>,
    pub metric_error: Option<String>,
    /// All-zero rows, excluded by convention.
    pub zero_rows: Vec<RowId>,
    /// Rows counted in both top and bottom.
    pub double_counted: Vec<RowId>,
    pub pass: bool,
    pub solver_stats: SolverStats,
}

impl PartitionResult {
    pub fn cluster_of(&self, row: RowId) -> Option<Cluster> {
        self.assignment.iter().find(|a| a.row == row).map(|a| a.cluster)
    }

    pub fn rows_in(&self, cluster: Cluster) -> impl Iterator<Item = RowId> + '_ {
        self.assignment
            .iter()
            .filter(move |a| a.cluster == cluster)
            .map(|a| a.row)
    }

    pub fn total(&self, cluster: Cluster) -> Option<&[f64]> {
        self.cluster_totals
            .iter()
            .find(|t| t.cluster == cluster)
            .map(|t| t.values.as_slice())
    }

    pub fn discrepancy(&self, kind: DiscrepancyKind) -> Option<&DiscrepancyLine> {
        self.discrepancies.iter().find(|d| d.kind == kind)
    }
}

/// Solutions of one search, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partitions {
    pub results: Vec<PartitionResult>,
    pub stats: SolverStats,
    pub warnings: Vec<String>,
}

impl Partitions {
    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    pub fn best(&self) -> Option<&PartitionResult> {
        self.results.first()
    }
}

/// Independent recomputation of a partition's totals, discrepancy lines and
/// metric, from the assignment alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub cluster_totals: Vec<ClusterTotal>,
    pub discrepancies: Vec<DiscrepancyLine>,
    pub metric_check: Option<MetricVerification>,
    pub metric_error: Option<String>,
    pub pass: bool,
}

fn cluster_sum(stmt: &Statement, assignment: &[Assignment], pick: impl Fn(Cluster) -> bool) -> Vec<f64> {
    (0..stmt.period_count())
        .map(|p| {
            exact_sum(
                stmt.rows
                    .iter()
                    .filter(|row| {
                        assignment
                            .iter()
                            .find(|a| a.row == row.id)
                            .is_some_and(|a| pick(a.cluster))
                    })
                    .map(|row| row.values[p]),
            )
        })
        .collect()
}

fn combine(a: &[f64], b: &[f64], sign: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| exact_sum([*x, sign * y])).collect()
}

/// Recomputes every cluster total and discrepancy line of `assignment`, and
/// the metric from the cluster totals. Failures are reported, not raised.
pub fn verify_partition(stmt: &Statement, spec: &TargetSpec, assignment: &[Assignment], tol: f64) -> Verification {
    let line = |kind, values: Vec<f64>| DiscrepancyLine {
        pass: values.iter().all(|v| v.abs() <= tol),
        kind,
        values,
    };
    let all_rows = cluster_sum(stmt, assignment, |_| true);
    let mut metric_check = None;
    let mut metric_error = None;

    let (cluster_totals, discrepancies) = match &spec.target {
        Target::TwoWay { relevant } => {
            let included = cluster_sum(stmt, assignment, |c| c == Cluster::Included);
            let excluded = cluster_sum(stmt, assignment, |c| c != Cluster::Included);
            let lines = vec![
                line(DiscrepancyKind::IncludedMinusTarget, combine(&included, relevant, -1.0)),
                line(
                    DiscrepancyKind::IncludedPlusExcluded,
                    combine(&included, &excluded, 1.0),
                ),
            ];
            if let (Some(MetricKind::Irr), Some(reported)) = (spec.metric, spec.reported) {
                match irr(&included, DEFAULT_IRR_GUESS) {
                    Ok(sol) => metric_check = Some(verify_reported(MetricKind::Irr, sol.rate, &reported)),
                    Err(e) => metric_error = Some(e.to_string()),
                }
            }
            (
                vec![
                    ClusterTotal {
                        cluster: Cluster::Included,
                        values: included,
                    },
                    ClusterTotal {
                        cluster: Cluster::Excluded,
                        values: excluded,
                    },
                ],
                lines,
            )
        }
        Target::ThreeWay { top, bottom } => {
            let top_sum = cluster_sum(stmt, assignment, Cluster::in_top);
            let bottom_sum = cluster_sum(stmt, assignment, Cluster::in_bottom);
            let excluded = cluster_sum(stmt, assignment, |c| !c.in_top() && !c.in_bottom());
            let lines = vec![
                line(DiscrepancyKind::TopPlusTarget, combine(&top_sum, top, 1.0)),
                line(DiscrepancyKind::BottomPlusTarget, combine(&bottom_sum, bottom, 1.0)),
                line(DiscrepancyKind::AllClusters, all_rows.clone()),
            ];
            if let (Some(MetricKind::Ratio), Some(reported)) = (spec.metric, spec.reported) {
                let p = spec.period.unwrap_or(0);
                let components = RatioComponents {
                    top: -top_sum[p] + 0.0,
                    bottom_extra: -bottom_sum[p] + 0.0,
                    formula: spec.formula,
                };
                match ratio_value(&components) {
                    Ok(r) => metric_check = Some(verify_reported(MetricKind::Ratio, r, &reported)),
                    Err(e) => metric_error = Some(e.to_string()),
                }
            }
            (
                vec![
                    ClusterTotal {
                        cluster: Cluster::Top,
                        values: top_sum,
                    },
                    ClusterTotal {
                        cluster: Cluster::Bottom,
                        values: bottom_sum,
                    },
                    ClusterTotal {
                        cluster: Cluster::Excluded,
                        values: excluded,
                    },
                ],
                lines,
            )
        }
    };
    let pass =
        discrepancies.iter().all(|d| d.pass) && metric_check.as_ref().is_none_or(|m| m.pass) && metric_error.is_none();
    Verification {
        cluster_totals,
        discrepancies,
        metric_check,
        metric_error,
        pass,
    }
}

/// The search problem for `spec` over the non-zero rows of `stmt`.
pub(crate) struct Prepared<'a> {
    pub problem: Problem<'a>,
    /// Statement position of each problem row.
    pub positions: Vec<usize>,
    pub zero_rows: Vec<RowId>,
    pub three_way: bool,
}

pub(crate) fn prepare<'a>(stmt: &'a Statement, spec: &TargetSpec, overlap: bool, tol: f64) -> Prepared<'a> {
    let mut rows = Vec::new();
    let mut positions = Vec::new();
    let mut zero_rows = Vec::new();
    let mut groups = Vec::new();
    let mut paths: Vec<&[String]> = Vec::new();
    for (i, row) in stmt.rows.iter().enumerate() {
        if row.is_zero() {
            zero_rows.push(row.id);
            continue;
        }
        rows.push(row.values.as_slice());
        positions.push(i);
        groups.push(if row.heading_path.is_empty() {
            NO_GROUP
        } else {
            let path = row.heading_path.as_slice();
            match paths.iter().position(|p| *p == path) {
                Some(g) => g as u32,
                None => {
                    paths.push(path);
                    (paths.len() - 1) as u32
                }
            }
        });
    }
    let three_way = spec.is_three_way();
    let states = match (three_way, overlap) {
        (false, _) => TWO_WAY_STATES,
        (true, false) => THREE_WAY_STATES,
        (true, true) => OVERLAP_STATES,
    };
    Prepared {
        problem: Problem::new(rows, stmt.period_count(), states, spec.search_vector(), tol).with_groups(groups),
        positions,
        zero_rows,
        three_way,
    }
}

impl Prepared<'_> {
    pub fn assignment(&self, stmt: &Statement, candidate: &Candidate) -> Vec<Assignment> {
        let mut clusters = vec![Cluster::Excluded; stmt.rows.len()];
        for &(r, state) in &candidate.picks {
            clusters[self.positions[r as usize]] = match (self.three_way, state) {
                (false, _) => Cluster::Included,
                (true, 0b01) => Cluster::Top,
                (true, 0b10) => Cluster::Bottom,
                (true, _) => Cluster::Both,
            };
        }
        stmt.rows
            .iter()
            .zip(clusters)
            .map(|(row, cluster)| Assignment { row: row.id, cluster })
            .collect()
    }

    pub fn result(
        &self,
        stmt: &Statement,
        spec: &TargetSpec,
        candidate: &Candidate,
        tol: f64,
        stats: &SolverStats,
    ) -> PartitionResult {
        let assignment = self.assignment(stmt, candidate);
        let v = verify_partition(stmt, spec, &assignment, tol);
        let double_counted = assignment
            .iter()
            .filter(|a| a.cluster == Cluster::Both)
            .map(|a| a.row)
            .collect();
        PartitionResult {
            assignment,
            cluster_totals: v.cluster_totals,
            discrepancies: v.discrepancies,
            metric_check: v.metric_check,
            metric_error: v.metric_error,
            zero_rows: self.zero_rows.clone(),
            double_counted,
            pass: v.pass,
            solver_stats: stats.clone(),
        }
    }
}

/// Exact search without the zero-check precondition. Diagnostics use it on
/// perturbed statements.
pub(crate) fn search_unchecked(stmt: &Statement, spec: &TargetSpec, opts: &SolverOptions) -> Result<Partitions> {
    opts.validate()?;
    spec.validate(stmt.period_count())?;
    let three_way = spec.is_three_way();
    let prepared = prepare(stmt, spec, three_way && opts.allow_overlap, opts.tolerance);
    let outcome = prepared.problem.solve(opts)?;
    let stats = SolverStats {
        nodes_explored: outcome.nodes,
        solutions_found: outcome.found,
        algorithm: outcome.algorithm,
    };
    let results: Vec<PartitionResult> = outcome
        .candidates
        .iter()
        .map(|c| prepared.result(stmt, spec, c, opts.tolerance, &stats))
        .collect();

    let mut warnings = Vec::new();
    if outcome.found > 1 {
        warnings.push(format!(
            "{} exact partitions exist{}; the first is preferred, check the alternatives",
            outcome.found,
            if outcome.found as usize > results.len() {
                format!(" (showing {})", results.len())
            } else {
                String::new()
            }
        ));
    }
    for id in &prepared.zero_rows {
        if let Some(row) = stmt.row(*id) {
            warnings.push(format!(
                "row {:?} is all zeros and is excluded by convention",
                row.label
            ));
        }
    }
    if let Some(r) = results.iter().find(|r| !r.double_counted.is_empty()) {
        let labels: Vec<String> = r
            .double_counted
            .iter()
            .filter_map(|id| stmt.row(*id).map(|row| format!("{:?}", row.label)))
            .collect();
        warnings.push(format!("double counted in top and bottom: {}", labels.join(", ")));
    }
    Ok(Partitions {
        results,
        stats,
        warnings,
    })
}

fn require_zero_sum(stmt: &Statement, tol: f64) -> Result<()> {
    let zc = zero_check(stmt, tol);
    if zc.pass {
        Ok(())
    } else {
        Err(Error::ZeroCheckFailed {
            max_residual: zc.max_residual,
            tolerance: tol,
        })
    }
}

/// Runs the analysis `spec` describes: two-way or three-way, with the metric
/// check when a reported figure is given.
pub fn partition(stmt: &Statement, spec: &TargetSpec, opts: &SolverOptions) -> Result<Partitions> {
    require_zero_sum(stmt, opts.tolerance)?;
    search_unchecked(stmt, spec, opts)
}

/// Included rows must reproduce `target` in every period.
pub fn two_way_partition(stmt: &Statement, target: &[f64], opts: &SolverOptions) -> Result<Partitions> {
    partition(stmt, &TargetSpec::two_way(target.to_vec()), opts)
}

/// Top and bottom clusters must cancel `top_target` and `bottom_target`.
pub fn three_way_partition(
    stmt: &Statement,
    top_target: &[f64],
    bottom_target: &[f64],
    opts: &SolverOptions,
) -> Result<Partitions> {
    partition(
        stmt,
        &TargetSpec::three_way(top_target.to_vec(), bottom_target.to_vec()),
        opts,
    )
}
