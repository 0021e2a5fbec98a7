//! Explaining a failed exact search.
//!
//! When no partition reproduces the target, the cause is one of: a model
//! defect, a row that has to be split before it can be matched, a legitimate
//! deviation needing adjustment lines, a timing mismatch between rows, or an
//! item counted in both parts of a ratio. Each probe here tests one of them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inclusion::{
    prepare, search_unchecked, Cluster, Norm, PartitionResult, Partitions, SolverOptions, SolverStats, Target,
    TargetSpec,
};
use crate::numeric::exact_sum;
use crate::statement::{zero_check, LineItem, Role, RowId, Statement, ZeroCheck};

pub const DEFAULT_SHIFT_WINDOW: usize = 2;
pub const DEFAULT_MAX_ADJUSTMENT_LINES: usize = 4;
/// Node budget for the closest-partition search.
pub const DEFAULT_CLOSEST_BUDGET: u64 = 1 << 25;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticOptions {
    pub solver: SolverOptions,
    pub norm: Norm,
    pub shift_window: usize,
    pub max_adjustment_lines: usize,
    pub closest_budget: u64,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        DiagnosticOptions {
            solver: SolverOptions::default(),
            norm: Norm::default(),
            shift_window: DEFAULT_SHIFT_WINDOW,
            max_adjustment_lines: DEFAULT_MAX_ADJUSTMENT_LINES,
            closest_budget: DEFAULT_CLOSEST_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentLine {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjustments {
    pub lines: Vec<AdjustmentLine>,
    pub warning: Option<String>,
}

/// A row that matches once its values move by `offset` periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftFinding {
    pub row: RowId,
    pub label: String,
    pub offset: i32,
    /// Nonzero values pushed off the end of the statement by the shift.
    pub lossy: bool,
    pub shifted_out: Vec<f64>,
    pub residual_norm: f64,
    pub result: PartitionResult,
}

impl ShiftFinding {
    pub fn sentence(&self) -> String {
        let n = self.offset.unsigned_abs();
        let direction = if self.offset < 0 { "earlier" } else { "later" };
        let mut s = format!(
            "row {:?} matches when moved {n} period{} {direction}",
            self.label,
            if n == 1 { "" } else { "s" }
        );
        if self.lossy {
            s.push_str(" (lossy: values move off the statement)");
        }
        s
    }
}

/// A row of which only a part belongs in a cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRequest {
    pub row: RowId,
    pub label: String,
    /// Where the split-off part would go.
    pub into: Cluster,
    /// The part to split off, per period.
    pub portion: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subline {
    pub label: String,
    pub values: Vec<f64>,
}

/// Replacement of one row by components that add up to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub parent: RowId,
    pub sublines: Vec<Subline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Closest {
    pub result: PartitionResult,
    /// Search target minus the cluster sums: one block for two-way, top then
    /// bottom for three-way.
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub norm: Norm,
    /// False when the node budget ran out before the search space did.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub zero_check: ZeroCheck,
    /// An exact partition exists; nothing else needs explaining.
    pub exact: bool,
    pub shift_findings: Vec<ShiftFinding>,
    /// Solutions found once a row may count in both top and bottom.
    pub double_count: Vec<PartitionResult>,
    pub adjustments: Vec<AdjustmentLine>,
    pub best_partition: PartitionResult,
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub norm: Norm,
    pub exhaustive: bool,
    pub decomposition_requests: Vec<DecompositionRequest>,
    pub warnings: Vec<String>,
}

/// The assignment whose residual has the smallest norm, ties going to fewer
/// rows and then statement order. Works on statements that do not add up.
pub fn closest_partition(stmt: &Statement, spec: &TargetSpec, opts: &DiagnosticOptions) -> Result<Closest> {
    spec.validate(stmt.period_count())?;
    let tol = opts.solver.tolerance;
    let prepared = prepare(stmt, spec, false, tol);
    let out = prepared
        .problem
        .closest(opts.norm, opts.solver.order, opts.closest_budget);
    let stats = SolverStats {
        nodes_explored: out.nodes,
        solutions_found: u64::from(out.residual.iter().all(|r| r.abs() <= tol)),
        algorithm: crate::inclusion::Algorithm::Exhaustive,
    };
    Ok(Closest {
        result: prepared.result(stmt, spec, &out.candidate, tol, &stats),
        residual: out.residual,
        residual_norm: out.norm,
        norm: opts.norm,
        exhaustive: out.exhaustive,
    })
}

/// Replaces the parent row by its sublines, in place. The sublines must add
/// up to the parent exactly in every period.
pub fn apply_decomposition(stmt: &Statement, d: &Decomposition) -> Result<Statement> {
    let fail = |reason: String| Error::Decomposition {
        parent: d.parent.to_string(),
        reason,
    };
    let pos = stmt.position(d.parent).ok_or_else(|| fail("no such row".into()))?;
    let parent = &stmt.rows[pos];
    if d.sublines.is_empty() {
        return Err(fail("no sublines".into()));
    }
    for sub in &d.sublines {
        if sub.values.len() != stmt.period_count() {
            return Err(fail(format!(
                "subline {:?} has {} values for {} periods",
                sub.label,
                sub.values.len(),
                stmt.period_count()
            )));
        }
    }
    for (p, &v) in parent.values.iter().enumerate() {
        let diff = exact_sum(d.sublines.iter().map(|s| s.values[p]).chain([-v]));
        if diff != 0.0 {
            return Err(fail(format!(
                "sublines miss the parent by {diff} in {}",
                stmt.periods[p]
            )));
        }
    }
    let mut next_id = stmt.rows.iter().map(|r| r.id.0).max().map_or(0, |m| m + 1);
    let sublines = d.sublines.iter().map(|s| {
        let id = RowId(next_id);
        next_id += 1;
        LineItem {
            id,
            heading_path: parent.heading_path.clone(),
            label: s.label.clone(),
            values: s.values.iter().map(|v| v + 0.0).collect(),
            role: Role::Data,
            inverted: parent.inverted,
        }
    });
    let mut out = stmt.clone();
    out.rows.splice(pos..=pos, sublines);
    out.validate()?;
    Ok(out)
}

/// Lines that explain `residual`: one per run of consecutive periods holding
/// the same nonzero value. They add up to the residual exactly.
pub fn synthesize_adjustments(residual: &[f64], label_hint: &str, max_lines: usize) -> Adjustments {
    let mut lines = Vec::new();
    let mut p = 0;
    while p < residual.len() {
        let v = residual[p];
        if v == 0.0 {
            p += 1;
            continue;
        }
        let start = p;
        while p < residual.len() && residual[p] == v {
            p += 1;
        }
        let mut values = vec![0.0; residual.len()];
        values[start..p].fill(v);
        lines.push(AdjustmentLine {
            label: format!("{label_hint} {}", lines.len() + 1),
            values,
        });
    }
    let warning = (lines.len() > max_lines).then(|| {
        format!(
            "{} adjustment lines needed; more than {max_lines} suggests a defect rather than a deviation",
            lines.len()
        )
    });
    Adjustments { lines, warning }
}

fn shifted(values: &[f64], offset: i32) -> (Vec<f64>, Vec<f64>) {
    let n = values.len() as i64;
    let mut moved = vec![0.0; values.len()];
    let mut lost = Vec::new();
    for (p, &v) in values.iter().enumerate() {
        let q = p as i64 + offset as i64;
        if (0..n).contains(&q) {
            moved[q as usize] = v;
        } else if v != 0.0 {
            lost.push(v);
        }
    }
    (moved, lost)
}

/// Re-runs the exact search with each row moved by each offset in
/// `-window..=window`, and reports the moves that produce a match. Empty when
/// the statement already matches.
pub fn detect_shift(
    stmt: &Statement,
    spec: &TargetSpec,
    window: usize,
    opts: &SolverOptions,
) -> Result<Vec<ShiftFinding>> {
    let probe_opts = SolverOptions {
        max_solutions: 1,
        ..opts.clone()
    };
    if window == 0 || !search_unchecked(stmt, spec, &probe_opts)?.is_empty() {
        return Ok(Vec::new());
    }
    let w = window as i32;
    let probes: Vec<(usize, i32)> = (0..stmt.rows.len())
        .filter(|&i| !stmt.rows[i].is_zero())
        .flat_map(|i| (-w..=w).filter(|&o| o != 0).map(move |o| (i, o)))
        .collect();
    let run = |&(i, offset): &(usize, i32)| -> Result<Option<ShiftFinding>> {
        let row = &stmt.rows[i];
        let (moved, lost) = shifted(&row.values, offset);
        if moved == row.values {
            return Ok(None);
        }
        let mut probe = stmt.clone();
        probe.rows[i].values = moved;
        let found = search_unchecked(&probe, spec, &probe_opts)?;
        Ok(found.results.into_iter().next().map(|result| {
            let residual_norm = result
                .discrepancies
                .iter()
                .take(if spec.is_three_way() { 2 } else { 1 })
                .map(|d| Norm::Max.of(&d.values))
                .fold(0.0, f64::max);
            ShiftFinding {
                row: row.id,
                label: row.label.clone(),
                offset,
                lossy: !lost.is_empty(),
                shifted_out: lost,
                residual_norm,
                result,
            }
        }))
    };
    let found: Vec<Result<Option<ShiftFinding>>> = if opts.threads == Some(1) {
        probes.iter().map(run).collect()
    } else {
        probes.par_iter().map(run).collect()
    };
    found.into_iter().filter_map(Result::transpose).collect()
}

/// Repeats a three-way search allowing rows in both top and bottom. Results
/// using that freedom carry the rows in `double_counted`.
pub fn detect_double_count(stmt: &Statement, spec: &TargetSpec, opts: &SolverOptions) -> Result<Partitions> {
    if !spec.is_three_way() {
        return Err(Error::Unsupported("double counting needs a three-way target".into()));
    }
    search_unchecked(
        stmt,
        spec,
        &SolverOptions {
            allow_overlap: true,
            ..opts.clone()
        },
    )
}

fn within_box(portion: &[f64], values: &[f64], tol: f64) -> bool {
    portion.iter().any(|x| x.abs() > tol)
        && portion.iter().zip(values).all(|(&x, &v)| {
            let (lo, hi) = if v < 0.0 { (v, 0.0) } else { (0.0, v) };
            x >= lo - tol && x <= hi + tol
        })
}

/// Rows of which a part, split off and moved, would close the residual: an
/// excluded row whose values cover the shortfall, or an included row whose
/// values cover the excess. Only blocks that are the sole source of residual
/// are considered, since a single split cannot fix two at once.
pub fn decomposition_requests(
    stmt: &Statement,
    spec: &TargetSpec,
    closest: &Closest,
    tol: f64,
) -> Vec<DecompositionRequest> {
    let periods = stmt.period_count();
    let blocks: Vec<(Cluster, &[f64])> = match spec.target {
        Target::TwoWay { .. } => vec![(Cluster::Included, &closest.residual[..])],
        Target::ThreeWay { .. } => vec![
            (Cluster::Top, &closest.residual[..periods]),
            (Cluster::Bottom, &closest.residual[periods..]),
        ],
    };
    let off = |r: &[f64]| r.iter().any(|x| x.abs() > tol);
    if blocks.iter().filter(|(_, r)| off(r)).count() != 1 {
        return Vec::new();
    }
    let (into, residual) = blocks.into_iter().find(|(_, r)| off(r)).expect("one block is off");
    let mut out = Vec::new();
    for a in &closest.result.assignment {
        let row = match stmt.row(a.row) {
            Some(row) if !row.is_zero() => row,
            _ => continue,
        };
        if a.cluster == Cluster::Excluded && within_box(residual, &row.values, tol) {
            out.push(DecompositionRequest {
                row: row.id,
                label: row.label.clone(),
                into,
                portion: residual.to_vec(),
            });
        } else if a.cluster == into {
            let excess: Vec<f64> = residual.iter().map(|r| -r + 0.0).collect();
            if within_box(&excess, &row.values, tol) {
                out.push(DecompositionRequest {
                    row: row.id,
                    label: row.label.clone(),
                    into: Cluster::Excluded,
                    portion: excess,
                });
            }
        }
    }
    out
}

/// Runs every probe: exact search, then timing shifts, double counting, the
/// closest partition with its adjustment lines, and decomposition requests.
pub fn diagnose(stmt: &Statement, spec: &TargetSpec, opts: &DiagnosticOptions) -> Result<Diagnosis> {
    let tol = opts.solver.tolerance;
    let zc = zero_check(stmt, tol);
    let mut warnings = Vec::new();
    if !zc.pass {
        warnings.push(zc.message());
    }

    let exact = search_unchecked(stmt, spec, &opts.solver)?;
    if let Some(best) = exact.results.first() {
        let closest = closest_partition(stmt, spec, opts)?;
        warnings.extend(exact.warnings.iter().cloned());
        return Ok(Diagnosis {
            zero_check: zc,
            exact: true,
            shift_findings: Vec::new(),
            double_count: Vec::new(),
            adjustments: Vec::new(),
            best_partition: best.clone(),
            residual: closest.residual,
            residual_norm: closest.residual_norm,
            norm: opts.norm,
            exhaustive: closest.exhaustive,
            decomposition_requests: Vec::new(),
            warnings,
        });
    }

    let shift_findings = detect_shift(stmt, spec, opts.shift_window, &opts.solver)?;
    let double_count = if spec.is_three_way() {
        detect_double_count(stmt, spec, &opts.solver)?
            .results
            .into_iter()
            .filter(|r| !r.double_counted.is_empty())
            .collect()
    } else {
        Vec::new()
    };

    let closest = closest_partition(stmt, spec, opts)?;
    if !closest.exhaustive {
        warnings.push(format!(
            "closest partition search stopped after {} nodes; the residual may not be minimal",
            closest.result.solver_stats.nodes_explored
        ));
    }
    let periods = stmt.period_count();
    let hints: Vec<(&str, &[f64])> = if spec.is_three_way() {
        vec![
            ("top adjustment", &closest.residual[..periods]),
            ("bottom adjustment", &closest.residual[periods..]),
        ]
    } else {
        vec![("adjustment", &closest.residual[..])]
    };
    let mut adjustments = Vec::new();
    for (hint, residual) in hints {
        let a = synthesize_adjustments(residual, hint, opts.max_adjustment_lines);
        adjustments.extend(a.lines);
        warnings.extend(a.warning);
    }
    let decomposition_requests = decomposition_requests(stmt, spec, &closest, tol);

    Ok(Diagnosis {
        zero_check: zc,
        exact: false,
        shift_findings,
        double_count,
        adjustments,
        best_partition: closest.result,
        residual: closest.residual,
        residual_norm: closest.residual_norm,
        norm: opts.norm,
        exhaustive: closest.exhaustive,
        decomposition_requests,
        warnings,
    })
}
