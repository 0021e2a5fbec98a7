//! The normalized zero-sum statement and its consistency checks.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{resolve_reference, CellKind, Manifest, RawTable, RowKind, TargetDecl, TargetSource};
use crate::numeric::{exact_sum, max_abs};

/// Stable row identifier: the row's record index in the source table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RowId(pub u32);

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Data,
    BottomLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineItem {
    pub id: RowId,
    pub heading_path: Vec<String>,
    pub label: String,
    pub values: Vec<f64>,
    pub role: Role,
    /// Set when normalization flipped the row's sign.
    pub inverted: bool,
}

impl LineItem {
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn path(&self) -> String {
        let mut parts = self.heading_path.clone();
        parts.push(self.label.clone());
        parts.join("/")
    }
}

/// A reported figure carried through from the source table, e.g.
/// "to project 83.93%". Kept verbatim for the report trailer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioLine {
    pub heading_path: Vec<String>,
    pub label: String,
    pub cells: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub periods: Vec<String>,
    pub rows: Vec<LineItem>,
    /// True when the rows were checked to add up to zero.
    pub normalized: bool,
    #[serde(default)]
    pub ratio_lines: Vec<RatioLine>,
    /// Fractional digits used when displaying amounts.
    #[serde(default)]
    pub decimals: u8,
    /// Header of the label column ("Year").
    #[serde(default)]
    pub corner: String,
    /// (row, period) cells the source wrote as an explicit zero rather than
    /// leaving blank; display metadata only.
    #[serde(default)]
    pub dashes: BTreeSet<(RowId, usize)>,
}

impl Statement {
    /// Builds a statement directly from rows; `normalized` reflects a zero
    /// check at `tol`.
    pub fn from_rows(periods: Vec<String>, rows: Vec<LineItem>, tol: f64) -> Result<Statement> {
        let mut stmt = Statement {
            periods,
            rows,
            normalized: false,
            ratio_lines: Vec::new(),
            decimals: 0,
            corner: String::new(),
            dashes: BTreeSet::new(),
        };
        stmt.validate()?;
        stmt.normalized = zero_check(&stmt, tol).pass;
        Ok(stmt)
    }

    pub fn period_count(&self) -> usize {
        self.periods.len()
    }

    pub fn row(&self, id: RowId) -> Option<&LineItem> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn position(&self, id: RowId) -> Option<usize> {
        self.rows.iter().position(|r| r.id == id)
    }

    pub fn bottom_line(&self) -> Option<&LineItem> {
        self.rows.iter().find(|r| r.role == Role::BottomLine)
    }

    /// Resolves a `heading/label#n` reference among the data rows.
    pub fn resolve(&self, reference: &str) -> Result<usize> {
        resolve_reference(
            self.rows.iter().map(|r| (r.heading_path.as_slice(), r.label.as_str())),
            reference,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods.is_empty() {
            return Err(Error::Dimension("statement has no periods".into()));
        }
        let mut ids = BTreeSet::new();
        let mut bottom_lines = 0;
        for row in &self.rows {
            if row.values.len() != self.periods.len() {
                return Err(Error::Dimension(format!(
                    "row {:?} has {} values for {} periods",
                    row.label,
                    row.values.len(),
                    self.periods.len()
                )));
            }
            if !ids.insert(row.id) {
                return Err(Error::Dimension(format!("duplicate row id {}", row.id)));
            }
            if row.role == Role::BottomLine {
                bottom_lines += 1;
            }
        }
        if bottom_lines > 1 {
            return Err(Error::Dimension("more than one bottom line".into()));
        }
        Ok(())
    }

    /// Re-applies a manifest. Rows already flagged `inverted` are left alone
    /// and drop references that no longer resolve are taken as already
    /// dropped, so applying the same manifest twice is the same as once.
    pub fn apply_manifest(&self, manifest: &Manifest) -> Result<Statement> {
        let mut rows = self.rows.clone();

        let mut drops: Vec<&str> = manifest.drop_rows.iter().map(String::as_str).collect();
        if let Some(TargetDecl::TwoWay(TargetSource::Row(r))) = manifest.target.as_ref().map(|t| &t.decl) {
            drops.push(r);
        }
        for reference in drops {
            let found = resolve_reference(
                rows.iter().map(|r| (r.heading_path.as_slice(), r.label.as_str())),
                reference,
            );
            match found {
                Ok(i) => {
                    rows.remove(i);
                }
                Err(Error::UnknownRow(_)) => {}
                Err(e) => return Err(e),
            }
        }

        let locate = |rows: &[LineItem], reference: &str| {
            resolve_reference(
                rows.iter().map(|r| (r.heading_path.as_slice(), r.label.as_str())),
                reference,
            )
        };
        for reference in manifest.inversion_targets() {
            let i = locate(&rows, reference)?;
            let row = &mut rows[i];
            if !row.inverted {
                for v in &mut row.values {
                    *v = -*v + 0.0;
                }
                row.inverted = true;
            }
        }
        if let Some(bl) = &manifest.bottom_line {
            let i = locate(&rows, bl)?;
            for (j, row) in rows.iter_mut().enumerate() {
                row.role = if j == i { Role::BottomLine } else { Role::Data };
            }
        }

        let mut stmt = Statement {
            periods: self.periods.clone(),
            rows,
            normalized: false,
            ratio_lines: self.ratio_lines.clone(),
            decimals: self.decimals,
            corner: self.corner.clone(),
            dashes: self.dashes.clone(),
        };
        stmt.validate()?;
        stmt.normalized = zero_check(&stmt, manifest.tolerance()).pass;
        Ok(stmt)
    }
}

/// Turns a raw table into a statement: drops footings, flips the rows the
/// manifest names so that every period adds to zero, and tags the bottom line.
pub fn normalize(raw: &RawTable, manifest: &Manifest) -> Result<Statement> {
    manifest.validate_against(raw)?;
    let mut dropped = BTreeSet::new();
    for r in &manifest.drop_rows {
        dropped.insert(raw.resolve(r)?);
    }
    if let Some(TargetDecl::TwoWay(TargetSource::Row(r))) = manifest.target.as_ref().map(|t| &t.decl) {
        dropped.insert(raw.resolve(r)?);
    }
    let mut inverted = BTreeSet::new();
    for r in manifest.inversion_targets() {
        let i = raw.resolve(r)?;
        if raw.rows[i].kind != RowKind::Data {
            return Err(Error::Manifest(format!("cannot invert non-data row {r:?}")));
        }
        inverted.insert(i);
    }
    let bottom_line = manifest.bottom_line.as_deref().map(|r| raw.resolve(r)).transpose()?;

    let mut rows = Vec::new();
    let mut ratio_lines = Vec::new();
    let mut decimals = 0u8;
    let mut dashes = BTreeSet::new();
    for (i, raw_row) in raw.rows.iter().enumerate() {
        if dropped.contains(&i) {
            continue;
        }
        match raw_row.kind {
            RowKind::Data => {
                let flip = inverted.contains(&i);
                decimals = raw_row.values.iter().fold(decimals, |d, c| d.max(c.decimals));
                for (p, c) in raw_row.values.iter().enumerate() {
                    if c.kind != CellKind::Blank && c.value == 0.0 {
                        dashes.insert((RowId(i as u32), p));
                    }
                }
                rows.push(LineItem {
                    id: RowId(i as u32),
                    heading_path: raw_row.heading_path.clone(),
                    label: raw_row.label.clone(),
                    values: raw_row
                        .values
                        .iter()
                        .map(|c| if flip { -c.value + 0.0 } else { c.value })
                        .collect(),
                    role: if bottom_line == Some(i) {
                        Role::BottomLine
                    } else {
                        Role::Data
                    },
                    inverted: flip,
                });
            }
            RowKind::Ratio => ratio_lines.push(RatioLine {
                heading_path: raw_row.heading_path.clone(),
                label: raw_row.label.clone(),
                cells: raw_row.cells.clone(),
            }),
            RowKind::Heading | RowKind::RatioHeading => {}
        }
    }
    if rows.is_empty() {
        return Err(Error::Table("no data rows remain after dropping".into()));
    }
    let mut stmt = Statement {
        periods: raw.periods.clone(),
        rows,
        normalized: false,
        ratio_lines,
        decimals: decimals.min(6),
        corner: raw.corner.clone(),
        dashes,
    };
    stmt.normalized = zero_check(&stmt, manifest.tolerance()).pass;
    Ok(stmt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCheck {
    /// Per-period sum of every data row.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Periods outside tolerance, worst first.
    pub failing_periods: Vec<String>,
}

impl ZeroCheck {
    pub fn message(&self) -> String {
        if self.pass {
            "zero check passes".to_string()
        } else {
            format!(
                "statement does not add up: worst periods {} (max residual {})",
                self.failing_periods.join(", "),
                self.max_residual
            )
        }
    }
}

/// Sums every data row per period. A failure is a finding about the model,
/// so it is returned rather than raised.
pub fn zero_check(stmt: &Statement, tol: f64) -> ZeroCheck {
    let residuals: Vec<f64> = (0..stmt.period_count())
        .map(|p| exact_sum(stmt.rows.iter().map(|r| r.values[p])))
        .collect();
    let max_residual = max_abs(&residuals);
    let mut failing: Vec<usize> = (0..residuals.len()).filter(|&p| residuals[p].abs() > tol).collect();
    failing.sort_by(|&a, &b| residuals[b].abs().total_cmp(&residuals[a].abs()).then(a.cmp(&b)));
    ZeroCheck {
        pass: failing.is_empty(),
        failing_periods: failing.into_iter().map(|p| stmt.periods[p].clone()).collect(),
        residuals,
        max_residual,
        tolerance: tol,
    }
}

/// A table with row totals, column totals and a grand total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotaledGrid {
    pub body: Vec<Vec<f64>>,
    pub row_totals: Vec<f64>,
    pub col_totals: Vec<f64>,
    pub grand_total: f64,
}

impl TotaledGrid {
    /// Builds a grid whose totals are computed from `body`.
    pub fn from_body(body: Vec<Vec<f64>>) -> TotaledGrid {
        let cols = body.first().map_or(0, Vec::len);
        let row_totals = body.iter().map(|r| exact_sum(r.iter().copied())).collect();
        let col_totals = (0..cols).map(|c| exact_sum(body.iter().map(|r| r[c]))).collect();
        let grand_total = exact_sum(body.iter().flatten().copied());
        TotaledGrid {
            body,
            row_totals,
            col_totals,
            grand_total,
        }
    }

    /// Reads a totaled table: the last column holds row totals and the last
    /// data row holds column totals, ending in the grand total.
    pub fn from_raw(raw: &RawTable) -> Result<TotaledGrid> {
        let data: Vec<Vec<f64>> = raw.data_rows().map(|r| r.amounts()).collect();
        if data.len() < 2 || raw.periods.len() < 2 {
            return Err(Error::Dimension(
                "a totaled grid needs at least two rows and two columns".into(),
            ));
        }
        let (totals_row, body_rows) = data.split_last().expect("checked length");
        let (grand_total, col_totals) = totals_row.split_last().expect("checked width");
        let mut body = Vec::with_capacity(body_rows.len());
        let mut row_totals = Vec::with_capacity(body_rows.len());
        for r in body_rows {
            let (t, cells) = r.split_last().expect("checked width");
            body.push(cells.to_vec());
            row_totals.push(*t);
        }
        Ok(TotaledGrid {
            body,
            row_totals,
            col_totals: col_totals.to_vec(),
            grand_total: *grand_total,
        })
    }

    fn validate(&self) -> Result<()> {
        let cols = self.body.first().map_or(0, Vec::len);
        if self.body.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("grid body is not rectangular".into()));
        }
        if self.row_totals.len() != self.body.len() {
            return Err(Error::Dimension(format!(
                "{} row totals for {} body rows",
                self.row_totals.len(),
                self.body.len()
            )));
        }
        if self.col_totals.len() != cols {
            return Err(Error::Dimension(format!(
                "{} column totals for {} body columns",
                self.col_totals.len(),
                cols
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub delta: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<IdentityCheck>,
    pub pass: bool,
}

impl CheckReport {
    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Evaluates every redundant-total identity of a totaled grid.
pub fn grid_checks(grid: &TotaledGrid, tol: f64) -> Result<CheckReport> {
    grid.validate()?;
    let mut checks = Vec::new();
    let mut push = |name: String, lhs: f64, rhs: f64| {
        let delta = lhs - rhs;
        checks.push(IdentityCheck {
            name,
            lhs,
            rhs,
            delta,
            pass: delta.abs() <= tol,
        });
    };

    for (i, row) in grid.body.iter().enumerate() {
        push(
            format!("R[{i}] = SUM(T row {i})"),
            grid.row_totals[i],
            exact_sum(row.iter().copied()),
        );
    }
    for (j, &total) in grid.col_totals.iter().enumerate() {
        push(
            format!("C[{j}] = SUM(T column {j})"),
            total,
            exact_sum(grid.body.iter().map(|r| r[j])),
        );
    }
    let sum_r = exact_sum(grid.row_totals.iter().copied());
    let sum_c = exact_sum(grid.col_totals.iter().copied());
    let g = grid.grand_total;
    push("SUM(R) = SUM(C)".into(), sum_r, sum_c);
    push("SUM(R) = G".into(), sum_r, g);
    push("SUM(C) = G".into(), sum_c, g);
    let sum_a = exact_sum(
        grid.body
            .iter()
            .flatten()
            .chain(&grid.row_totals)
            .chain(&grid.col_totals)
            .chain(std::iter::once(&g))
            .copied(),
    );
    push("SUM(A) = G * 4".into(), sum_a, g * 4.0);

    let pass = checks.iter().all(|c| c.pass);
    Ok(CheckReport { checks, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_manifest, parse_statement};
    use proptest::prelude::*;

    const CASH_FLOW_RAW: &str = "Year,2008,2009,2010,2011,2012
Revenue,,80,80,80,
Costs,,,,,
  construction,(60),,,,
  operating,,(20),(20),(20),
  decommissioning,,,,,(30)
Shareholders,,,,,
  initial investment,60,,,,
  dividends,,(30),(30),(30),
  return of capital,,,,,(60)
Increase in cash at bank,-,30,30,30,(90)
";

    fn cash_flow() -> Statement {
        let raw = parse_statement(CASH_FLOW_RAW).unwrap();
        let m = parse_manifest(r#"{"bottom_line": "Increase in cash at bank"}"#).unwrap();
        normalize(&raw, &m).unwrap()
    }

    #[test]
    fn raw_cash_flow_normalizes_to_zero_sum() {
        let stmt = cash_flow();
        assert!(stmt.normalized);
        let zc = zero_check(&stmt, 0.005);
        assert_eq!(zc.residuals, vec![0.0; 5]);
        let bl = stmt.bottom_line().unwrap();
        assert_eq!(bl.values, vec![0.0, -30.0, -30.0, -30.0, 90.0]);
        assert!(bl.inverted);
    }

    #[test]
    fn deleting_a_row_leaves_its_negation() {
        let mut stmt = cash_flow();
        let i = stmt.resolve("decommissioning").unwrap();
        stmt.rows.remove(i);
        let zc = zero_check(&stmt, 0.005);
        assert_eq!(zc.residuals, vec![0.0, 0.0, 0.0, 0.0, 30.0]);
        assert!(!zc.pass);
        assert_eq!(zc.failing_periods, vec!["2012"]);
    }

    #[test]
    fn single_zero_row_passes() {
        let stmt = Statement::from_rows(
            vec!["a".into(), "b".into()],
            vec![LineItem {
                id: RowId(0),
                heading_path: vec![],
                label: "z".into(),
                values: vec![0.0, 0.0],
                role: Role::Data,
                inverted: false,
            }],
            0.005,
        )
        .unwrap();
        assert!(zero_check(&stmt, 0.005).pass);
    }

    #[test]
    fn identity_on_closed_table() {
        let raw = parse_statement("Year,2008\nA,5\nB,(5)\n").unwrap();
        let stmt = normalize(&raw, &Manifest::default()).unwrap();
        assert!(stmt.normalized);
        assert_eq!(stmt.rows[0].values, vec![5.0]);
        assert_eq!(stmt.rows[1].values, vec![-5.0]);
        assert!(stmt.rows.iter().all(|r| !r.inverted));
    }

    #[test]
    fn normalize_is_idempotent() {
        let m = parse_manifest(r#"{"bottom_line": "Increase in cash at bank"}"#).unwrap();
        let once = cash_flow();
        let twice = once.apply_manifest(&m).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn unresolved_reference_is_an_error() {
        let raw = parse_statement(CASH_FLOW_RAW).unwrap();
        let m = parse_manifest(r#"{"invert_rows": ["interest"]}"#).unwrap();
        assert!(matches!(normalize(&raw, &m), Err(Error::UnknownRow(_))));
    }

    #[test]
    fn grid_example_passes() {
        let grid = TotaledGrid {
            body: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            row_totals: vec![3.0, 7.0],
            col_totals: vec![4.0, 6.0],
            grand_total: 10.0,
        };
        let report = grid_checks(&grid, 0.005).unwrap();
        assert!(report.pass);
        let a = report.checks.iter().find(|c| c.name == "SUM(A) = G * 4").unwrap();
        assert_eq!((a.lhs, a.rhs), (40.0, 40.0));
    }

    #[test]
    fn grid_wrong_grand_total() {
        let grid = TotaledGrid {
            body: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            row_totals: vec![3.0, 7.0],
            col_totals: vec![4.0, 6.0],
            grand_total: 11.0,
        };
        let report = grid_checks(&grid, 0.005).unwrap();
        assert!(!report.pass);
        let failed: Vec<(&str, f64, f64, f64)> = report
            .failures()
            .map(|c| (c.name.as_str(), c.lhs, c.rhs, c.delta))
            .collect();
        assert_eq!(
            failed,
            vec![
                ("SUM(R) = G", 10.0, 11.0, -1.0),
                ("SUM(C) = G", 10.0, 11.0, -1.0),
                ("SUM(A) = G * 4", 41.0, 44.0, -3.0),
            ]
        );
    }

    #[test]
    fn grid_zero_and_mismatch() {
        let zero = TotaledGrid::from_body(vec![vec![0.0; 3]; 2]);
        assert!(grid_checks(&zero, 0.005).unwrap().pass);
        let bad = TotaledGrid {
            body: vec![vec![1.0, 2.0]],
            row_totals: vec![3.0, 0.0],
            col_totals: vec![1.0, 2.0],
            grand_total: 3.0,
        };
        assert!(matches!(grid_checks(&bad, 0.005), Err(Error::Dimension(_))));
    }

    proptest! {
        #[test]
        fn negating_a_row_shifts_residual_by_twice_its_values(
            values in proptest::collection::vec(proptest::collection::vec(-1000i32..1000, 4), 2..10),
            pick in any::<proptest::sample::Index>(),
        ) {
            let mut rows: Vec<LineItem> = values
                .iter()
                .enumerate()
                .map(|(i, v)| LineItem {
                    id: RowId(i as u32),
                    heading_path: vec![],
                    label: format!("row {i}"),
                    values: v.iter().map(|&x| x as f64).collect(),
                    role: Role::Data,
                    inverted: false,
                })
                .collect();
            let closing: Vec<f64> = (0..4).map(|p| -rows.iter().map(|r| r.values[p]).sum::<f64>()).collect();
            rows.push(LineItem { id: RowId(99), heading_path: vec![], label: "close".into(), values: closing, role: Role::BottomLine, inverted: false });
            let periods: Vec<String> = (0..4).map(|p| p.to_string()).collect();
            let stmt = Statement::from_rows(periods, rows, 0.005).unwrap();
            prop_assert!(zero_check(&stmt, 0.005).pass);

            let k = pick.index(stmt.rows.len());
            let mut flipped = stmt.clone();
            for v in &mut flipped.rows[k].values { *v = -*v; }
            let zc = zero_check(&flipped, 0.005);
            for p in 0..4 {
                prop_assert_eq!(zc.residuals[p], -2.0 * stmt.rows[k].values[p]);
            }
        }

        #[test]
        fn consistent_grids_pass_and_perturbations_fail(
            rows in 1usize..6, cols in 1usize..6,
            cells in proptest::collection::vec(-500i32..500, 36),
            which in 0usize..4, at in any::<proptest::sample::Index>(),
            delta in prop_oneof![0.01f64..100.0, -100.0f64..-0.01],
        ) {
            let body: Vec<Vec<f64>> = (0..rows).map(|r| (0..cols).map(|c| cells[r * 6 + c] as f64).collect()).collect();
            let mut grid = TotaledGrid::from_body(body);
            prop_assert!(grid_checks(&grid, 0.005).unwrap().pass);
            match which {
                0 => { let i = at.index(rows * cols); grid.body[i / cols][i % cols] += delta; }
                1 => { let i = at.index(rows); grid.row_totals[i] += delta; }
                2 => { let i = at.index(cols); grid.col_totals[i] += delta; }
                _ => grid.grand_total += delta,
            }
            prop_assert!(!grid_checks(&grid, 0.005).unwrap().pass);
        }
    }
}
