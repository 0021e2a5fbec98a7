//! Rendering of analyses as aligned text, markdown tables or JSON.
//!
//! Text and markdown follow the layout of a worked inclusion analysis: the
//! target and metric block, the discrepancy lines, cluster totals, then the
//! statement rows sorted into their sections, then the statement's own
//! ratio lines. Lines the analysis adds are marked `*`; rows counted in both
//! top and bottom are marked `!`.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::Diagnosis;
use crate::error::{Error, Result};
use crate::inclusion::{
    verify_partition, Cluster, DiscrepancyKind, PartitionResult, Partitions, SolverStats, Target, TargetSpec,
    Verification,
};
use crate::ingest::{format_amount, format_rate};
use crate::metrics::{MetricKind, MetricVerification};
use crate::statement::{CheckReport, RowId, Statement, ZeroCheck};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Text,
    Markdown,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Format> {
        match s {
            "text" => Ok(Format::Text),
            "markdown" | "md" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            other => Err(Error::Unsupported(format!("unknown format {other:?}"))),
        }
    }
}

/// The JSON document for an analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: u32,
    pub statement: Statement,
    pub target: TargetSpec,
    pub partitions: Vec<PartitionResult>,
    /// Independent re-check of the first partition.
    pub verification: Option<Verification>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<Diagnosis>,
    pub stats: Option<SolverStats>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    pub fn new(stmt: &Statement, spec: &TargetSpec, partitions: &Partitions, tol: f64) -> AnalysisReport {
        AnalysisReport {
            schema: SCHEMA_VERSION,
            statement: stmt.clone(),
            target: spec.clone(),
            verification: partitions
                .best()
                .map(|r| verify_partition(stmt, spec, &r.assignment, tol)),
            partitions: partitions.results.clone(),
            diagnosis: None,
            stats: Some(partitions.stats.clone()),
            warnings: partitions.warnings.clone(),
        }
    }

    pub fn for_diagnosis(stmt: &Statement, spec: &TargetSpec, diagnosis: &Diagnosis) -> AnalysisReport {
        AnalysisReport {
            schema: SCHEMA_VERSION,
            statement: stmt.clone(),
            target: spec.clone(),
            partitions: vec![diagnosis.best_partition.clone()],
            verification: None,
            diagnosis: Some(diagnosis.clone()),
            stats: None,
            warnings: diagnosis.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<AnalysisReport> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Marker {
    None,
    Analysis,
    DoubleCount,
}

#[derive(Debug, Clone)]
struct Line {
    marker: Marker,
    label: String,
    depth: usize,
    cells: Vec<String>,
    heading: bool,
}

impl Line {
    fn analysis(label: impl Into<String>, cells: Vec<String>) -> Line {
        Line {
            marker: Marker::Analysis,
            label: label.into(),
            depth: 0,
            cells,
            heading: false,
        }
    }

    fn heading(label: impl Into<String>, marker: Marker, depth: usize) -> Line {
        Line {
            marker,
            label: label.into(),
            depth,
            cells: Vec::new(),
            heading: true,
        }
    }
}

/// A titled block of aligned lines.
struct Layout {
    corner: String,
    periods: Vec<String>,
    lines: Vec<Line>,
}

impl Layout {
    fn new(stmt: &Statement) -> Layout {
        Layout {
            corner: stmt.corner.clone(),
            periods: stmt.periods.clone(),
            lines: Vec::new(),
        }
    }

    fn push(&mut self, line: Line) {
        self.lines.push(line);
    }

    fn text(&self) -> String {
        let label_of = |l: &Line| format!("{}{}", "  ".repeat(l.depth), l.label);
        let label_width = self
            .lines
            .iter()
            .map(|l| label_of(l).chars().count())
            .chain([self.corner.chars().count()])
            .max()
            .unwrap_or(0);
        let columns = self
            .periods
            .len()
            .max(self.lines.iter().map(|l| l.cells.len()).max().unwrap_or(0));
        let mut widths = vec![0; columns];
        for (i, p) in self.periods.iter().enumerate() {
            widths[i] = p.chars().count();
        }
        for l in &self.lines {
            for (i, c) in l.cells.iter().enumerate() {
                widths[i] = widths[i].max(c.chars().count());
            }
        }
        let mut out = String::new();
        let mut emit = |marker: char, label: &str, cells: &[String]| {
            let mut s = format!("{marker} {label:<label_width$}");
            for (i, w) in widths.iter().enumerate() {
                let cell = cells.get(i).map_or("", String::as_str);
                let _ = write!(s, "  {cell:>w$}");
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        emit(' ', &self.corner, &self.periods);
        for l in &self.lines {
            let marker = match l.marker {
                Marker::None => ' ',
                Marker::Analysis => '*',
                Marker::DoubleCount => '!',
            };
            emit(marker, &label_of(l), &l.cells);
        }
        out
    }

    fn markdown(&self) -> String {
        let esc = |s: &str| s.replace('|', "\\|");
        let columns = self
            .periods
            .len()
            .max(self.lines.iter().map(|l| l.cells.len()).max().unwrap_or(0));
        let mut out = String::new();
        let mut header = vec![esc(&self.corner)];
        header.extend((0..columns).map(|i| esc(self.periods.get(i).map_or("", String::as_str))));
        let _ = writeln!(out, "| {} |", header.join(" | "));
        let mut rule = vec!["---".to_string()];
        rule.extend((0..columns).map(|_| "---:".to_string()));
        let _ = writeln!(out, "|{}|", rule.join("|"));
        for l in &self.lines {
            let indent = "&nbsp;&nbsp;".repeat(l.depth);
            let text = esc(&l.label);
            let label = match (l.marker, l.heading) {
                (_, true) if l.marker == Marker::Analysis => format!("**{text}**"),
                (Marker::Analysis, false) => format!("*{text}*"),
                (Marker::DoubleCount, _) => format!("*{text}* (double counted)"),
                (_, true) => format!("**{text}**"),
                _ => text,
            };
            let mut row = vec![format!("{indent}{label}")];
            row.extend((0..columns).map(|i| esc(l.cells.get(i).map_or("", String::as_str))));
            let _ = writeln!(out, "| {} |", row.join(" | "));
        }
        out
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Markdown => self.markdown(),
            _ => self.text(),
        }
    }
}

fn amounts(values: &[f64], decimals: usize) -> Vec<String> {
    values.iter().map(|&v| format_amount(v, decimals)).collect()
}

/// Check lines print a plain 0 where they balance.
fn checks(values: &[f64], decimals: usize) -> Vec<String> {
    values
        .iter()
        .map(|&v| match format_amount(v, decimals) {
            s if s == "-" => "0".to_string(),
            s => s,
        })
        .collect()
}

fn row_cells(stmt: &Statement, id: RowId, values: &[f64]) -> Vec<String> {
    let decimals = stmt.decimals as usize;
    values
        .iter()
        .enumerate()
        .map(|(p, &v)| {
            if v != 0.0 {
                format_amount(v, decimals)
            } else if stmt.dashes.contains(&(id, p)) {
                "-".to_string()
            } else {
                String::new()
            }
        })
        .collect()
}

/// Statement rows of one section, with their headings re-printed where the
/// heading path changes.
fn push_rows(layout: &mut Layout, stmt: &Statement, rows: &[(RowId, Marker)]) {
    let mut current: Vec<String> = Vec::new();
    for &(id, marker) in rows {
        let Some(row) = stmt.row(id) else { continue };
        let shared = current
            .iter()
            .zip(&row.heading_path)
            .take_while(|(a, b)| a == b)
            .count();
        for (depth, h) in row.heading_path.iter().enumerate().skip(shared) {
            layout.push(Line::heading(h.clone(), Marker::None, depth));
        }
        current = row.heading_path.clone();
        layout.push(Line {
            marker,
            label: row.label.clone(),
            depth: row.heading_path.len(),
            cells: row_cells(stmt, id, &row.values),
            heading: false,
        });
    }
}

fn push_ratio_lines(layout: &mut Layout, stmt: &Statement) {
    let mut current: Vec<String> = Vec::new();
    for r in &stmt.ratio_lines {
        let shared = current.iter().zip(&r.heading_path).take_while(|(a, b)| a == b).count();
        for (depth, h) in r.heading_path.iter().enumerate().skip(shared) {
            layout.push(Line::heading(h.clone(), Marker::None, depth));
        }
        current = r.heading_path.clone();
        layout.push(Line {
            marker: Marker::None,
            label: r.label.clone(),
            depth: r.heading_path.len(),
            cells: r.cells.clone(),
            heading: false,
        });
    }
}

fn push_metric(layout: &mut Layout, heading: &str, calculated: &str, v: &Verification) {
    if v.metric_check.is_none() && v.metric_error.is_none() {
        return;
    }
    layout.push(Line::heading(heading, Marker::Analysis, 0));
    match (&v.metric_check, &v.metric_error) {
        (Some(m), _) => push_metric_lines(layout, calculated, m),
        (None, Some(e)) => layout.push(Line::analysis(format!("{calculated}: {e}"), Vec::new())),
        (None, None) => {}
    }
}

fn push_metric_lines(layout: &mut Layout, calculated: &str, m: &MetricVerification) {
    let d = m.decimals as usize;
    layout.push(Line::analysis(calculated, vec![format_rate(m.recalculated, d)]));
    layout.push(Line::analysis("reported below", vec![format_rate(m.reported, d)]));
    layout.push(Line::analysis("discrepancy", vec![format_rate(m.discrepancy, d)]));
}

fn discrepancy(v: &Verification, kind: DiscrepancyKind) -> &[f64] {
    v.discrepancies
        .iter()
        .find(|d| d.kind == kind)
        .map_or(&[], |d| d.values.as_slice())
}

fn total(v: &Verification, cluster: Cluster) -> &[f64] {
    v.cluster_totals
        .iter()
        .find(|t| t.cluster == cluster)
        .map_or(&[], |t| t.values.as_slice())
}

fn rows_where(result: &PartitionResult, keep: impl Fn(Cluster) -> bool) -> Vec<(RowId, Marker)> {
    result
        .assignment
        .iter()
        .filter(|a| keep(a.cluster))
        .map(|a| {
            let marker = if a.cluster == Cluster::Both {
                Marker::DoubleCount
            } else {
                Marker::None
            };
            (a.row, marker)
        })
        .collect()
}

fn two_way_layout(stmt: &Statement, spec: &TargetSpec, result: &PartitionResult, v: &Verification) -> Layout {
    let decimals = stmt.decimals as usize;
    let mut layout = Layout::new(stmt);
    let relevant = match &spec.target {
        Target::TwoWay { relevant } => relevant.as_slice(),
        Target::ThreeWay { .. } => &[],
    };
    let target_label = spec.labels.target.as_deref().unwrap_or("Relevant cash flow");
    layout.push(Line::analysis(target_label, amounts(relevant, decimals)));
    push_metric(
        &mut layout,
        spec.labels.metric.as_deref().unwrap_or("IRR"),
        "calculated from above",
        v,
    );
    layout.push(Line::heading("Discrepancy", Marker::Analysis, 0));
    layout.push(Line::analysis(
        format!("included-{}", target_label.to_lowercase()),
        checks(discrepancy(v, DiscrepancyKind::IncludedMinusTarget), decimals),
    ));
    layout.push(Line::analysis(
        "included+excluded",
        checks(discrepancy(v, DiscrepancyKind::IncludedPlusExcluded), decimals),
    ));
    layout.push(Line::heading("Total of items", Marker::Analysis, 0));
    layout.push(Line::analysis(
        "Included",
        amounts(total(v, Cluster::Included), decimals),
    ));
    layout.push(Line::analysis(
        "Excluded",
        amounts(total(v, Cluster::Excluded), decimals),
    ));
    layout.push(Line::heading("ITEMS INCLUDED", Marker::Analysis, 0));
    push_rows(&mut layout, stmt, &rows_where(result, |c| c == Cluster::Included));
    layout.push(Line::heading("ITEMS EXCLUDED", Marker::Analysis, 0));
    push_rows(&mut layout, stmt, &rows_where(result, |c| c != Cluster::Included));
    push_ratio_lines(&mut layout, stmt);
    layout
}

fn three_way_layout(stmt: &Statement, spec: &TargetSpec, result: &PartitionResult, v: &Verification) -> Layout {
    let decimals = stmt.decimals as usize;
    let mut layout = Layout::new(stmt);
    let (top, bottom) = match &spec.target {
        Target::ThreeWay { top, bottom } => (top.as_slice(), bottom.as_slice()),
        Target::TwoWay { .. } => (&[][..], &[][..]),
    };
    let labels = &spec.labels;
    let top_label = labels.top.as_deref().unwrap_or("top of fraction");
    let bottom_label = labels.bottom.as_deref().unwrap_or("bottom of fraction");
    let top_name = labels.top_cluster.as_deref().unwrap_or("top");
    let bottom_name = labels.bottom_cluster.as_deref().unwrap_or("bottom");

    layout.push(Line::heading("Ratio components", Marker::Analysis, 0));
    layout.push(Line::analysis(top_label, amounts(top, decimals)));
    layout.push(Line::analysis(bottom_label, amounts(bottom, decimals)));
    push_metric(
        &mut layout,
        labels.metric.as_deref().unwrap_or("Ratio"),
        "recalculated from above",
        v,
    );
    layout.push(Line::heading("Discrepancy", Marker::Analysis, 0));
    layout.push(Line::analysis(
        format!("included in {top_name} + {top_label}"),
        checks(discrepancy(v, DiscrepancyKind::TopPlusTarget), decimals),
    ));
    layout.push(Line::analysis(
        format!("included in {bottom_name} + {bottom_label}"),
        checks(discrepancy(v, DiscrepancyKind::BottomPlusTarget), decimals),
    ));
    layout.push(Line::analysis(
        format!("included in {top_name} + included in {bottom_name} + excluded"),
        checks(discrepancy(v, DiscrepancyKind::AllClusters), decimals),
    ));
    layout.push(Line::heading("Total of items", Marker::Analysis, 0));
    layout.push(Line::analysis(
        format!("included in {top_name}"),
        amounts(total(v, Cluster::Top), decimals),
    ));
    layout.push(Line::analysis(
        format!("included in {bottom_name}"),
        amounts(total(v, Cluster::Bottom), decimals),
    ));
    layout.push(Line::analysis(
        "excluded",
        amounts(total(v, Cluster::Excluded), decimals),
    ));
    layout.push(Line::heading(
        format!("INCLUDED IN {}", top_name.to_uppercase()),
        Marker::Analysis,
        0,
    ));
    push_rows(&mut layout, stmt, &rows_where(result, Cluster::in_top));
    layout.push(Line::heading(
        format!("INCLUDED IN {}", bottom_name.to_uppercase()),
        Marker::Analysis,
        0,
    ));
    push_rows(&mut layout, stmt, &rows_where(result, Cluster::in_bottom));
    layout.push(Line::heading("EXCLUDED", Marker::Analysis, 0));
    push_rows(&mut layout, stmt, &rows_where(result, |c| c == Cluster::Excluded));
    push_ratio_lines(&mut layout, stmt);
    layout
}

fn json_single(stmt: &Statement, spec: &TargetSpec, result: &PartitionResult, v: &Verification) -> Result<String> {
    AnalysisReport {
        schema: SCHEMA_VERSION,
        statement: stmt.clone(),
        target: spec.clone(),
        partitions: vec![result.clone()],
        verification: Some(v.clone()),
        diagnosis: None,
        stats: Some(result.solver_stats.clone()),
        warnings: Vec::new(),
    }
    .to_json()
}

pub fn render_two_way(
    stmt: &Statement,
    spec: &TargetSpec,
    result: &PartitionResult,
    verification: &Verification,
    format: Format,
) -> Result<String> {
    match format {
        Format::Json => json_single(stmt, spec, result, verification),
        _ => Ok(two_way_layout(stmt, spec, result, verification).render(format)),
    }
}

pub fn render_three_way(
    stmt: &Statement,
    spec: &TargetSpec,
    result: &PartitionResult,
    verification: &Verification,
    format: Format,
) -> Result<String> {
    match format {
        Format::Json => json_single(stmt, spec, result, verification),
        _ => Ok(three_way_layout(stmt, spec, result, verification).render(format)),
    }
}

fn notes(format: Format, title: &str, items: &[String]) -> String {
    if items.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    match format {
        Format::Markdown => {
            let _ = writeln!(out, "\n**{title}**\n");
            for i in items {
                let _ = writeln!(out, "- {i}");
            }
        }
        _ => {
            let _ = writeln!(out, "\n{title}");
            for i in items {
                let _ = writeln!(out, "  {i}");
            }
        }
    }
    out
}

fn assignment_summary(stmt: &Statement, result: &PartitionResult, three_way: bool) -> String {
    let names = |keep: &dyn Fn(Cluster) -> bool| -> String {
        let labels: Vec<String> = result
            .assignment
            .iter()
            .filter(|a| keep(a.cluster))
            .filter_map(|a| stmt.row(a.row).map(|r| r.label.clone()))
            .collect();
        if labels.is_empty() {
            "(none)".to_string()
        } else {
            labels.join(", ")
        }
    };
    if three_way {
        format!(
            "top: {}; bottom: {}",
            names(&|c: Cluster| c.in_top()),
            names(&|c: Cluster| c.in_bottom())
        )
    } else {
        format!("included: {}", names(&|c| c == Cluster::Included))
    }
}

/// Renders the preferred partition in full, followed by the alternatives in
/// one line each and any warnings. Without a partition, says so.
pub fn render_partitions(
    stmt: &Statement,
    spec: &TargetSpec,
    partitions: &Partitions,
    tol: f64,
    format: Format,
) -> Result<String> {
    if format == Format::Json {
        return AnalysisReport::new(stmt, spec, partitions, tol).to_json();
    }
    let mut out = String::new();
    match partitions.best() {
        Some(best) => {
            let v = verify_partition(stmt, spec, &best.assignment, tol);
            out.push_str(&if spec.is_three_way() {
                render_three_way(stmt, spec, best, &v, format)?
            } else {
                render_two_way(stmt, spec, best, &v, format)?
            });
            let others: Vec<String> = partitions.results[1..]
                .iter()
                .enumerate()
                .map(|(i, r)| format!("{}. {}", i + 2, assignment_summary(stmt, r, spec.is_three_way())))
                .collect();
            out.push_str(&notes(format, "OTHER SOLUTIONS", &others));
        }
        None => {
            out.push_str(match format {
                Format::Markdown => "**No exact partition reproduces the target.**\n",
                _ => "No exact partition reproduces the target.\n",
            });
        }
    }
    out.push_str(&notes(format, "WARNINGS", &partitions.warnings));
    Ok(out)
}

/// Findings in order of explanatory economy: timing shifts, double counts,
/// adjustment lines, the closest partition, then rows worth splitting.
pub fn render_diagnosis(stmt: &Statement, spec: &TargetSpec, diag: &Diagnosis, format: Format) -> Result<String> {
    if format == Format::Json {
        return AnalysisReport::for_diagnosis(stmt, spec, diag).to_json();
    }
    let md = format == Format::Markdown;
    let mut out = String::new();
    if diag.exact {
        out.push_str(if md {
            "**EXACT**: an exact partition reproduces the target.\n"
        } else {
            "EXACT: an exact partition reproduces the target.\n"
        });
        out.push_str(&notes(format, "WARNINGS", &diag.warnings));
        return Ok(out);
    }
    let decimals = stmt.decimals as usize;
    let section = |out: &mut String, title: &str| {
        let _ = if md {
            writeln!(out, "\n### {title}\n")
        } else {
            writeln!(out, "\n{title}")
        };
    };
    let item = |out: &mut String, text: &str| {
        let _ = if md {
            writeln!(out, "- {text}")
        } else {
            writeln!(out, "  {text}")
        };
    };
    out.push_str(if md {
        "**NO EXACT PARTITION**\n"
    } else {
        "NO EXACT PARTITION\n"
    });
    if !diag.zero_check.pass {
        section(&mut out, "ZERO CHECK");
        item(&mut out, &diag.zero_check.message());
    }
    if !diag.shift_findings.is_empty() {
        section(&mut out, "TIMING SHIFTS");
        for f in &diag.shift_findings {
            item(&mut out, &f.sentence());
        }
    }
    if !diag.double_count.is_empty() {
        section(&mut out, "DOUBLE COUNTING");
        for r in &diag.double_count {
            let labels: Vec<String> = r
                .double_counted
                .iter()
                .filter_map(|id| stmt.row(*id).map(|row| format!("{:?}", row.label)))
                .collect();
            item(
                &mut out,
                &format!(
                    "{} counted in both top and bottom ({})",
                    labels.join(", "),
                    assignment_summary(stmt, r, true)
                ),
            );
        }
    }
    if !diag.adjustments.is_empty() {
        section(&mut out, "ADJUSTMENTS");
        let mut layout = Layout::new(stmt);
        for a in &diag.adjustments {
            layout.push(Line::analysis(a.label.clone(), amounts(&a.values, decimals)));
        }
        out.push_str(&layout.render(format));
    }
    section(&mut out, "CLOSEST PARTITION");
    item(
        &mut out,
        &assignment_summary(stmt, &diag.best_partition, spec.is_three_way()),
    );
    let norm = match diag.norm {
        crate::inclusion::Norm::Max => "max",
        crate::inclusion::Norm::L1 => "L1",
    };
    let residual: Vec<String> = diag.residual.iter().map(|&r| format_amount(r, decimals)).collect();
    item(
        &mut out,
        &format!(
            "residual {} ({norm} norm {}){}",
            residual.join(" "),
            format_amount(diag.residual_norm, decimals),
            if diag.exhaustive { "" } else { ", search incomplete" }
        ),
    );
    if !diag.decomposition_requests.is_empty() {
        section(&mut out, "DECOMPOSITION REQUESTS");
        for d in &diag.decomposition_requests {
            let portion: Vec<String> = d.portion.iter().map(|&r| format_amount(r, decimals)).collect();
            let into = match d.into {
                Cluster::Excluded => "out of its cluster".to_string(),
                c => format!("into {}", cluster_name(c)),
            };
            item(
                &mut out,
                &format!("split {} from row {:?} and move it {into}", portion.join(" "), d.label),
            );
        }
    }
    out.push_str(&notes(format, "WARNINGS", &diag.warnings));
    Ok(out)
}

fn cluster_name(c: Cluster) -> &'static str {
    match c {
        Cluster::Included => "included",
        Cluster::Excluded => "excluded",
        Cluster::Top => "top",
        Cluster::Bottom => "bottom",
        Cluster::Both => "both",
    }
}

pub fn render_zero_check(stmt: &Statement, zc: &ZeroCheck, format: Format) -> Result<String> {
    if format == Format::Json {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: u32,
            periods: &'a [String],
            zero_check: &'a ZeroCheck,
        }
        return Ok(serde_json::to_string_pretty(&Doc {
            schema: SCHEMA_VERSION,
            periods: &stmt.periods,
            zero_check: zc,
        })? + "\n");
    }
    let mut layout = Layout::new(stmt);
    layout.push(Line::analysis(
        "Zero check",
        checks(&zc.residuals, stmt.decimals as usize),
    ));
    let mut out = layout.render(format);
    out.push('\n');
    out.push_str(&zc.message());
    out.push('\n');
    Ok(out)
}

pub fn render_grid_checks(report: &CheckReport, format: Format) -> Result<String> {
    if format == Format::Json {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: u32,
            grid: &'a CheckReport,
        }
        return Ok(serde_json::to_string_pretty(&Doc {
            schema: SCHEMA_VERSION,
            grid: report,
        })? + "\n");
    }
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    if format == Format::Markdown {
        out.push_str("| check | lhs | rhs | delta | result |\n|---|---:|---:|---:|---|\n");
    }
    for c in &report.checks {
        let verdict = if c.pass { "ok" } else { "FAIL" };
        if format == Format::Markdown {
            let _ = writeln!(out, "| {} | {} | {} | {} | {verdict} |", c.name, c.lhs, c.rhs, c.delta);
        } else {
            let _ = writeln!(
                out,
                "{:<width$}  {:>12}  {:>12}  {:>12}  {verdict}",
                c.name, c.lhs, c.rhs, c.delta
            );
        }
    }
    Ok(out)
}

/// A recalculated metric against the reported figure, or on its own.
pub fn render_metric(
    kind: MetricKind,
    recalculated: f64,
    check: Option<&MetricVerification>,
    notes_: &[String],
    format: Format,
) -> Result<String> {
    if format == Format::Json {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: u32,
            metric: MetricKind,
            recalculated: f64,
            check: Option<&'a MetricVerification>,
            warnings: &'a [String],
        }
        return Ok(serde_json::to_string_pretty(&Doc {
            schema: SCHEMA_VERSION,
            metric: kind,
            recalculated,
            check,
            warnings: notes_,
        })? + "\n");
    }
    let mut layout = Layout {
        corner: String::new(),
        periods: Vec::new(),
        lines: Vec::new(),
    };
    let heading = match kind {
        MetricKind::Irr => "IRR",
        MetricKind::Ratio => "Ratio",
    };
    layout.push(Line::heading(heading, Marker::Analysis, 0));
    match check {
        Some(m) => push_metric_lines(&mut layout, "calculated from above", m),
        None => layout.push(Line::analysis(
            "calculated from above",
            vec![format_rate(recalculated, kind.default_decimals() as usize)],
        )),
    }
    let text = layout.render(format);
    // Drop the empty header row.
    let mut out: String = text
        .lines()
        .skip(if format == Format::Markdown { 0 } else { 1 })
        .map(|l| format!("{l}\n"))
        .collect();
    out.push_str(&notes(format, "WARNINGS", notes_));
    Ok(out)
}
