//! Statement tables and analysis manifests.
//!
//! Cells follow the printed-statement convention: `(60)` is minus sixty, a
//! lone `-` or an empty cell is zero, commas are thousands separators and a
//! trailing `%` marks a rate rather than a currency amount.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inclusion::{Algorithm, Norm};
use crate::metrics::{MetricKind, RatioFormula, Reported};

pub const DEFAULT_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Blank,
    Amount,
    Rate,
}

/// A parsed cell. Rates are stored as fractions (`83.93%` is `0.8393`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub value: f64,
    pub kind: CellKind,
    /// Fractional digits as written (for rates, digits of the percentage).
    pub decimals: u8,
}

impl Cell {
    pub const BLANK: Cell = Cell {
        value: 0.0,
        kind: CellKind::Blank,
        decimals: 0,
    };

    pub fn is_rate(&self) -> bool {
        self.kind == CellKind::Rate
    }
}

/// Parses one cell of a statement.
pub fn parse_cell(text: &str) -> Result<Cell> {
    let t = text.trim();
    if t.is_empty() {
        return Ok(Cell::BLANK);
    }
    if t == "-" {
        return Ok(Cell {
            value: 0.0,
            kind: CellKind::Amount,
            decimals: 0,
        });
    }
    let syntax = |reason| Error::CellSyntax {
        text: text.to_string(),
        reason,
    };

    let (bracketed, inner) = match (t.starts_with('('), t.ends_with(')')) {
        (true, true) => (true, t[1..t.len() - 1].trim()),
        (false, false) => (false, t),
        _ => return Err(syntax("unbalanced parentheses")),
    };
    let (is_rate, inner) = match inner.strip_suffix('%') {
        Some(rest) => (true, rest.trim_end()),
        None => (false, inner),
    };
    let (signed_negative, digits) = if bracketed {
        (false, inner)
    } else if let Some(rest) = inner.strip_prefix('-') {
        (true, rest)
    } else if let Some(rest) = inner.strip_prefix('+') {
        (false, rest)
    } else {
        (false, inner)
    };

    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    if int_part.is_empty() && frac_part.is_none_or(str::is_empty) {
        return Err(syntax("no digits"));
    }
    if let Some(f) = frac_part {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return Err(syntax("bad fractional part"));
        }
    }
    let plain_int: String = if int_part.contains(',') {
        let mut groups = int_part.split(',');
        let first = groups.next().unwrap_or_default();
        let first_ok = (1..=3).contains(&first.len()) && first.bytes().all(|b| b.is_ascii_digit());
        if !first_ok || !groups.all(|g| g.len() == 3 && g.bytes().all(|b| b.is_ascii_digit())) {
            return Err(syntax("misplaced thousands separator"));
        }
        int_part.replace(',', "")
    } else {
        if !int_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(syntax("not a number"));
        }
        int_part.to_string()
    };

    let mut literal = if plain_int.is_empty() {
        "0".to_string()
    } else {
        plain_int
    };
    if let Some(f) = frac_part {
        literal.push('.');
        literal.push_str(f);
    }
    let magnitude: f64 = literal.parse().map_err(|_| syntax("not a number"))?;
    let decimals = frac_part.map_or(0, |f| f.len().min(u8::MAX as usize) as u8);
    // `+ 0.0` folds a negative zero such as "(0)" into plain zero.
    let signed = (if bracketed || signed_negative {
        -magnitude
    } else {
        magnitude
    }) + 0.0;
    Ok(if is_rate {
        Cell {
            value: signed / 100.0,
            kind: CellKind::Rate,
            decimals,
        }
    } else {
        Cell {
            value: signed,
            kind: CellKind::Amount,
            decimals,
        }
    })
}

/// Renders an amount in the statement convention: parentheses for negatives,
/// a dash for zero.
pub fn format_amount(value: f64, decimals: usize) -> String {
    let body = format!("{:.*}", decimals, value.abs());
    if body.bytes().all(|b| b == b'0' || b == b'.') {
        "-".to_string()
    } else if value < 0.0 {
        format!("({body})")
    } else {
        body
    }
}

/// Renders a rate as a percentage with `decimals` digits; negatives bracketed.
pub fn format_rate(value: f64, decimals: usize) -> String {
    let body = format!("{:.*}%", decimals, (value * 100.0).abs());
    let is_zero = body.trim_end_matches('%').bytes().all(|b| b == b'0' || b == b'.');
    if value < 0.0 && !is_zero {
        format!("({body})")
    } else {
        body
    }
}

pub fn format_cell(cell: &Cell) -> String {
    match cell.kind {
        CellKind::Blank => String::new(),
        CellKind::Amount => format_amount(cell.value, cell.decimals as usize),
        CellKind::Rate => format_rate(cell.value, cell.decimals as usize),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// All cells empty: groups the rows beneath it.
    Heading,
    Data,
    /// Carries reported rates or ratios (e.g. "to project 83.93%").
    Ratio,
    /// A heading whose block holds only ratio rows.
    RatioHeading,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub label: String,
    /// Leading whitespace of the label; display metadata only.
    pub indent: usize,
    pub cells: Vec<String>,
    pub values: Vec<Cell>,
    pub kind: RowKind,
    pub heading_path: Vec<String>,
    /// 1-based record number in the source file.
    pub line: usize,
}

impl RawRow {
    pub fn amounts(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.value).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    /// First field of the header record ("Year" in most statements).
    pub corner: String,
    pub periods: Vec<String>,
    pub rows: Vec<RawRow>,
}

impl RawTable {
    pub fn data_rows(&self) -> impl Iterator<Item = &RawRow> {
        self.rows.iter().filter(|r| r.kind == RowKind::Data)
    }

    pub fn heading_count(&self) -> usize {
        self.rows.iter().filter(|r| r.kind == RowKind::Heading).count()
    }

    /// Data rows equal to the sum of every other data row: the rows that can
    /// serve as the statement's bottom line.
    pub fn bottom_line_candidates(&self) -> Vec<usize> {
        let data: Vec<usize> = (0..self.rows.len())
            .filter(|&i| self.rows[i].kind == RowKind::Data)
            .collect();
        let totals: Vec<f64> = (0..self.periods.len())
            .map(|p| crate::numeric::exact_sum(data.iter().map(|&i| self.rows[i].values[p].value)))
            .collect();
        data.into_iter()
            .filter(|&i| {
                let row = &self.rows[i];
                row.values.iter().any(|c| c.value != 0.0)
                    && row
                        .values
                        .iter()
                        .zip(&totals)
                        .all(|(c, t)| (t - 2.0 * c.value).abs() <= DEFAULT_TOLERANCE)
            })
            .collect()
    }

    /// Resolves a row reference of the form `label`, `heading/label` or either
    /// followed by `#n` (1-based ordinal among identical matches).
    pub fn resolve(&self, reference: &str) -> Result<usize> {
        resolve_reference(
            self.rows.iter().map(|r| (r.heading_path.as_slice(), r.label.as_str())),
            reference,
        )
    }

    /// Writes the table back out as CSV, re-applying the cell convention.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().flexible(false).from_writer(Vec::new());
        let mut header = vec![self.corner.clone()];
        header.extend(self.periods.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![format!("{}{}", " ".repeat(row.indent), row.label)];
            rec.extend(row.values.iter().map(format_cell));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

/// Finds the single item whose heading path plus label ends with the
/// `/`-separated components of `reference`.
pub(crate) fn resolve_reference<'a, I>(items: I, reference: &str) -> Result<usize>
where
    I: Iterator<Item = (&'a [String], &'a str)> + Clone,
{
    let matching = |parts: &[&str]| -> Vec<usize> {
        items
            .clone()
            .enumerate()
            .filter(|(_, (path, label))| {
                let full: Vec<&str> = path.iter().map(String::as_str).chain(std::iter::once(*label)).collect();
                full.len() >= parts.len() && full[full.len() - parts.len()..] == *parts
            })
            .map(|(i, _)| i)
            .collect()
    };
    let (path, ordinal) = split_ordinal(reference);
    let parts: Vec<&str> = path.split('/').map(str::trim).collect();
    let mut matches = matching(&parts);
    if matches.is_empty() && parts.len() > 1 {
        // Labels may themselves contain a slash.
        matches = matching(&[path.trim()]);
    }
    match (matches.len(), ordinal) {
        (0, _) => Err(Error::UnknownRow(reference.to_string())),
        (_, Some(n)) => matches
            .get(n.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::UnknownRow(reference.to_string())),
        (1, None) => Ok(matches[0]),
        (n, None) => Err(Error::AmbiguousRow {
            reference: reference.to_string(),
            matches: n,
        }),
    }
}

fn split_ordinal(reference: &str) -> (&str, Option<usize>) {
    if let Some((head, tail)) = reference.rsplit_once('#') {
        if !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) {
            return (head, tail.parse().ok());
        }
    }
    (reference, None)
}

/// Parses a statement CSV: a header record `Year,p1,...,pn` followed by one
/// record per row, `label,c1,...,cn`.
pub fn parse_statement(table_text: &str) -> Result<RawTable> {
    let text = table_text.strip_prefix('\u{feff}').unwrap_or(table_text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(Error::Table("empty file".into())),
    };
    let corner = header.get(0).unwrap_or_default().trim().to_string();
    let periods: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if periods.is_empty() {
        return Err(Error::Table("header names no periods".into()));
    }
    for (i, p) in periods.iter().enumerate() {
        if p.is_empty() {
            return Err(Error::Table(format!("period label {} is empty", i + 1)));
        }
        if periods[..i].contains(p) {
            return Err(Error::Table(format!("duplicate period label {p:?}")));
        }
    }

    let mut rows = Vec::new();
    for (index, rec) in records.enumerate() {
        let rec = rec?;
        let line = index + 2;
        if rec.len() == 1 && rec.get(0).is_some_and(|s| s.trim().is_empty()) {
            continue;
        }
        if rec.len() != periods.len() + 1 {
            return Err(Error::Table(format!(
                "record {line} has {} cells, expected {}",
                rec.len() - 1,
                periods.len()
            )));
        }
        let raw_label = rec.get(0).unwrap_or_default();
        let label = raw_label.trim().to_string();
        if label.is_empty() {
            return Err(Error::Table(format!("record {line} has an empty label")));
        }
        let indent = raw_label.len() - raw_label.trim_start().len();
        let cells: Vec<String> = rec.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let values = cells
            .iter()
            .enumerate()
            .map(|(col, c)| {
                parse_cell(c).map_err(|e| Error::Cell {
                    row: line,
                    col: col + 2,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let has_rate = values.iter().any(Cell::is_rate);
        let has_amount = values.iter().any(|c| c.kind == CellKind::Amount);
        let kind = match (has_rate, has_amount) {
            (true, true) => return Err(Error::Table(format!("record {line} mixes rates and amounts"))),
            (true, false) => RowKind::Ratio,
            (false, true) => RowKind::Data,
            (false, false) => RowKind::Heading,
        };
        rows.push(RawRow {
            label,
            indent,
            cells,
            values,
            kind,
            heading_path: Vec::new(),
            line,
        });
    }

    mark_ratio_blocks(&mut rows);
    assign_heading_paths(&mut rows);

    if !rows.iter().any(|r| r.kind == RowKind::Data) {
        return Err(Error::Table("zero data rows".into()));
    }
    Ok(RawTable { corner, periods, rows })
}

fn mark_ratio_blocks(rows: &mut [RawRow]) {
    let mut i = 0;
    while i < rows.len() {
        if rows[i].kind == RowKind::Heading {
            let end = rows[i + 1..]
                .iter()
                .position(|r| matches!(r.kind, RowKind::Heading | RowKind::RatioHeading))
                .map_or(rows.len(), |p| i + 1 + p);
            let block = &rows[i + 1..end];
            if !block.is_empty() && block.iter().all(|r| r.kind == RowKind::Ratio) {
                rows[i].kind = RowKind::RatioHeading;
            }
        }
        i += 1;
    }
}

/// With indentation, a row belongs to every open heading that is less
/// indented than itself. Flat files fall back to "the most recent heading".
fn assign_heading_paths(rows: &mut [RawRow]) {
    let indented = rows.iter().any(|r| r.indent > 0);
    let mut stack: Vec<(usize, String)> = Vec::new();
    for row in rows.iter_mut() {
        let is_heading = matches!(row.kind, RowKind::Heading | RowKind::RatioHeading);
        if indented {
            while stack.last().is_some_and(|(ind, _)| *ind >= row.indent) {
                stack.pop();
            }
        } else if is_heading {
            stack.clear();
        }
        row.heading_path = stack.iter().map(|(_, l)| l.clone()).collect();
        if is_heading {
            stack.push((row.indent, row.label.clone()));
        }
    }
}

/// Where the two-way target vector comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSource {
    /// A row of the statement file (taken out of the analysed rows).
    Row(String),
    Vector(Vec<f64>),
    /// A CSV file holding a header and a single row.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetDecl {
    TwoWay(TargetSource),
    ThreeWay { top: Vec<f64>, bottom: Vec<f64> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetLabels {
    /// Name of the relevant cash flow line (two-way).
    pub target: Option<String>,
    pub top: Option<String>,
    pub bottom: Option<String>,
    /// Short names of the top and bottom clusters ("debt", "equity").
    pub top_cluster: Option<String>,
    pub bottom_cluster: Option<String>,
    /// Name of the metric ("IRR", "Debt:equity ratio").
    pub metric: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetDeclaration {
    pub decl: TargetDecl,
    pub metric: Option<MetricKind>,
    pub reported: Option<Reported>,
    /// Period whose ratio is checked (three-way, multi-period statements).
    pub period: Option<String>,
    pub formula: Option<RatioFormula>,
    pub labels: TargetLabels,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ManifestOptions {
    pub max_solutions: Option<usize>,
    pub allow_overlap: Option<bool>,
    pub shift_window: Option<usize>,
    pub norm: Option<Norm>,
    pub max_adjustment_lines: Option<usize>,
    pub algorithm: Option<Algorithm>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub invert_rows: Vec<String>,
    pub bottom_line: Option<String>,
    /// Whether the bottom line is flipped along with `invert_rows`. Statements
    /// printed in revenue-minus-costs form need it; already closed ones don't.
    pub invert_bottom_line: bool,
    pub drop_rows: Vec<String>,
    pub target: Option<TargetDeclaration>,
    /// Explicit tolerance, if the manifest set one.
    pub tolerance: Option<f64>,
    pub options: ManifestOptions,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            invert_rows: Vec::new(),
            bottom_line: None,
            invert_bottom_line: true,
            drop_rows: Vec::new(),
            target: None,
            tolerance: None,
            options: ManifestOptions::default(),
        }
    }
}

impl Manifest {
    pub fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(DEFAULT_TOLERANCE)
    }

    /// Every row whose sign normalization flips, bottom line included.
    pub fn inversion_targets(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.invert_rows.iter().map(String::as_str).collect();
        if let Some(bl) = &self.bottom_line {
            if self.invert_bottom_line && !out.contains(&bl.as_str()) {
                out.push(bl);
            }
        }
        out
    }

    /// Checks every row reference against `table`.
    pub fn validate_against(&self, table: &RawTable) -> Result<()> {
        let refs = self
            .invert_rows
            .iter()
            .chain(&self.drop_rows)
            .chain(self.bottom_line.iter());
        for r in refs {
            table.resolve(r)?;
        }
        if let Some(TargetDeclaration {
            decl: TargetDecl::TwoWay(TargetSource::Row(r)),
            ..
        }) = &self.target
        {
            table.resolve(r)?;
        }
        if let Some(bl) = &self.bottom_line {
            let idx = table.resolve(bl)?;
            if table.rows[idx].kind != RowKind::Data {
                return Err(Error::Manifest(format!("bottom line {bl:?} is not a data row")));
            }
        }
        Ok(())
    }

    /// Resolves file targets relative to `base`.
    pub fn rebase(&mut self, base: &Path) {
        if let Some(TargetDeclaration {
            decl: TargetDecl::TwoWay(TargetSource::File(path)),
            ..
        }) = &mut self.target
        {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CellInput {
    Number(f64),
    Text(String),
}

impl CellInput {
    fn parse(&self) -> Result<Cell> {
        match self {
            CellInput::Number(v) => Ok(Cell {
                value: *v,
                kind: CellKind::Amount,
                decimals: 0,
            }),
            CellInput::Text(t) => parse_cell(t),
        }
    }

    fn amount(&self) -> Result<f64> {
        let cell = self.parse()?;
        if cell.is_rate() {
            return Err(Error::Manifest(format!(
                "expected an amount, got rate {}",
                format_cell(&cell)
            )));
        }
        Ok(cell.value)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ValueInput {
    Scalar(CellInput),
    Vector(Vec<CellInput>),
}

impl ValueInput {
    fn amounts(&self) -> Result<Vec<f64>> {
        match self {
            ValueInput::Scalar(c) => Ok(vec![c.amount()?]),
            ValueInput::Vector(v) => v.iter().map(CellInput::amount).collect(),
        }
    }
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum TargetKindTag {
    TwoWay,
    ThreeWay,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetDoc {
    kind: TargetKindTag,
    rows: Option<String>,
    vector: Option<Vec<CellInput>>,
    file: Option<PathBuf>,
    top: Option<ValueInput>,
    bottom: Option<ValueInput>,
    reported: Option<CellInput>,
    metric: Option<MetricKind>,
    period: Option<String>,
    formula: Option<RatioFormula>,
    #[serde(default)]
    labels: TargetLabels,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct OptionsDoc {
    max_solutions: Option<usize>,
    allow_overlap: Option<bool>,
    shift_window: Option<usize>,
    norm: Option<Norm>,
    max_adjustment_lines: Option<usize>,
    algorithm: Option<Algorithm>,
    threads: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDoc {
    #[serde(default)]
    invert_rows: Vec<String>,
    bottom_line: Option<String>,
    invert_bottom_line: Option<bool>,
    #[serde(default)]
    drop_rows: Vec<String>,
    target: Option<TargetDoc>,
    tolerance: Option<f64>,
    #[serde(default)]
    options: OptionsDoc,
}

/// Parses a JSON manifest. Blank input yields the default manifest.
pub fn parse_manifest(manifest_text: &str) -> Result<Manifest> {
    if manifest_text.trim().is_empty() {
        return Ok(Manifest::default());
    }
    let doc: ManifestDoc = serde_json::from_str(manifest_text).map_err(|e| Error::Manifest(e.to_string()))?;

    if let Some(t) = doc.tolerance {
        if t.is_nan() || t <= 0.0 || t.is_infinite() {
            return Err(Error::InvalidTolerance(t));
        }
    }
    if doc.options.max_solutions == Some(0) {
        return Err(Error::Manifest("options.max_solutions must be at least 1".into()));
    }
    if doc.options.threads == Some(0) {
        return Err(Error::Manifest("options.threads must be at least 1".into()));
    }

    let target = doc.target.map(parse_target).transpose()?;
    Ok(Manifest {
        invert_rows: doc.invert_rows,
        bottom_line: doc.bottom_line,
        invert_bottom_line: doc.invert_bottom_line.unwrap_or(true),
        drop_rows: doc.drop_rows,
        target,
        tolerance: doc.tolerance,
        options: ManifestOptions {
            max_solutions: doc.options.max_solutions,
            allow_overlap: doc.options.allow_overlap,
            shift_window: doc.options.shift_window,
            norm: doc.options.norm,
            max_adjustment_lines: doc.options.max_adjustment_lines,
            algorithm: doc.options.algorithm,
            threads: doc.options.threads,
        },
    })
}

fn parse_target(doc: TargetDoc) -> Result<TargetDeclaration> {
    let decl = match doc.kind {
        TargetKindTag::TwoWay => {
            if doc.top.is_some() || doc.bottom.is_some() {
                return Err(Error::Manifest(
                    "two_way target takes rows, vector or file, not top/bottom".into(),
                ));
            }
            let mut sources = Vec::new();
            if let Some(r) = doc.rows {
                sources.push(TargetSource::Row(r));
            }
            if let Some(v) = doc.vector {
                sources.push(TargetSource::Vector(
                    v.iter().map(CellInput::amount).collect::<Result<_>>()?,
                ));
            }
            if let Some(f) = doc.file {
                sources.push(TargetSource::File(f));
            }
            if sources.len() != 1 {
                return Err(Error::Manifest(
                    "two_way target needs exactly one of rows, vector, file".into(),
                ));
            }
            TargetDecl::TwoWay(sources.remove(0))
        }
        TargetKindTag::ThreeWay => {
            if doc.rows.is_some() || doc.vector.is_some() || doc.file.is_some() {
                return Err(Error::Manifest("three_way target takes top and bottom".into()));
            }
            match (doc.top, doc.bottom) {
                (Some(top), Some(bottom)) => TargetDecl::ThreeWay {
                    top: top.amounts()?,
                    bottom: bottom.amounts()?,
                },
                _ => return Err(Error::Manifest("three_way target requires both top and bottom".into())),
            }
        }
    };
    let metric = match (doc.kind, doc.metric) {
        (TargetKindTag::TwoWay, Some(MetricKind::Ratio)) => {
            return Err(Error::Manifest("ratio metric applies to three_way targets".into()))
        }
        (TargetKindTag::ThreeWay, Some(MetricKind::Irr)) => {
            return Err(Error::Manifest("irr metric applies to two_way targets".into()))
        }
        (_, m) => m,
    };
    let reported = match doc.reported {
        None => None,
        Some(CellInput::Number(v)) => Some(Reported::exact(v)),
        Some(CellInput::Text(t)) => {
            let cell = parse_cell(&t)?;
            if cell.kind == CellKind::Blank {
                return Err(Error::Manifest("reported value is blank".into()));
            }
            Some(Reported::from_cell(cell))
        }
    };
    Ok(TargetDeclaration {
        decl,
        metric,
        reported,
        period: doc.period,
        formula: doc.formula,
        labels: doc.labels,
    })
}
