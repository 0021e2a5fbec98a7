use std::fs;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{parse_statement, RawTable, RowKind, TargetDecl, TargetDeclaration, TargetLabels, TargetSource};
use crate::metrics::{MetricKind, RatioFormula, Reported};

/// The figures a partition has to reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// Included rows must sum to the relevant cash flow.
    TwoWay { relevant: Vec<f64> },
    /// Top and bottom clusters must sum to the negated components, so that
    /// `sum(top) + top = 0` and `sum(bottom) + bottom = 0`.
    ThreeWay { top: Vec<f64>, bottom: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub target: Target,
    pub metric: Option<MetricKind>,
    pub reported: Option<Reported>,
    /// Period index whose ratio is recalculated (three-way).
    pub period: Option<usize>,
    #[serde(default)]
    pub formula: RatioFormula,
    #[serde(default)]
    pub labels: TargetLabels,
}

impl TargetSpec {
    pub fn two_way(relevant: Vec<f64>) -> TargetSpec {
        TargetSpec {
            target: Target::TwoWay { relevant },
            metric: None,
            reported: None,
            period: None,
            formula: RatioFormula::default(),
            labels: TargetLabels::default(),
        }
    }

    pub fn three_way(top: Vec<f64>, bottom: Vec<f64>) -> TargetSpec {
        TargetSpec {
            target: Target::ThreeWay { top, bottom },
            ..TargetSpec::two_way(Vec::new())
        }
    }

    /// Attaches a reported figure; the metric follows from the target shape.
    pub fn with_reported(mut self, reported: Reported) -> TargetSpec {
        self.metric = Some(match self.target {
            Target::TwoWay { .. } => MetricKind::Irr,
            Target::ThreeWay { .. } => MetricKind::Ratio,
        });
        self.reported = Some(reported);
        self
    }

    pub fn with_labels(mut self, labels: TargetLabels) -> TargetSpec {
        self.labels = labels;
        self
    }

    pub fn is_three_way(&self) -> bool {
        matches!(self.target, Target::ThreeWay { .. })
    }

    pub fn validate(&self, periods: usize) -> Result<()> {
        let check = |name: &str, v: &[f64]| {
            if v.len() != periods {
                Err(Error::Dimension(format!(
                    "{name} target has {} values for {periods} periods",
                    v.len()
                )))
            } else {
                Ok(())
            }
        };
        match &self.target {
            Target::TwoWay { relevant } => check("relevant cash flow", relevant),
            Target::ThreeWay { top, bottom } => {
                check("top", top)?;
                check("bottom", bottom)
            }
        }?;
        if let Some(p) = self.period {
            if p >= periods {
                return Err(Error::Dimension(format!("metric period {p} out of range")));
            }
        }
        Ok(())
    }

    /// Dimensions searched: the relevant cash flow, or the negated top and
    /// bottom components back to back.
    pub(crate) fn search_vector(&self) -> Vec<f64> {
        match &self.target {
            Target::TwoWay { relevant } => relevant.clone(),
            Target::ThreeWay { top, bottom } => top.iter().chain(bottom).map(|v| -v + 0.0).collect(),
        }
    }
}

/// Turns a manifest target declaration into concrete vectors for `raw`.
pub fn resolve_target(raw: &RawTable, decl: &TargetDeclaration) -> Result<TargetSpec> {
    let periods = raw.periods.len();
    let widen = |name: &str, v: &[f64]| -> Result<Vec<f64>> {
        match (v.len(), periods) {
            (n, m) if n == m => Ok(v.to_vec()),
            (1, _) => Err(Error::Dimension(format!(
                "scalar {name} target needs a single-period statement, this one has {periods}"
            ))),
            (n, m) => Err(Error::Dimension(format!(
                "{name} target has {n} values for {m} periods"
            ))),
        }
    };
    let target = match &decl.decl {
        TargetDecl::TwoWay(source) => {
            let relevant = match source {
                TargetSource::Vector(v) => widen("relevant cash flow", v)?,
                TargetSource::Row(r) => {
                    let row = &raw.rows[raw.resolve(r)?];
                    if row.kind != RowKind::Data {
                        return Err(Error::Manifest(format!("target row {r:?} holds no amounts")));
                    }
                    row.amounts()
                }
                TargetSource::File(path) => {
                    let text =
                        fs::read_to_string(path).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
                    let table = parse_statement(&text)?;
                    if table.periods != raw.periods {
                        return Err(Error::Dimension(format!(
                            "{}: periods {:?} differ from the statement's {:?}",
                            path.display(),
                            table.periods,
                            raw.periods
                        )));
                    }
                    let mut rows = table.data_rows();
                    match (rows.next(), rows.next()) {
                        (Some(row), None) => row.amounts(),
                        _ => return Err(Error::Manifest(format!("{}: expected exactly one row", path.display()))),
                    }
                }
            };
            Target::TwoWay { relevant }
        }
        TargetDecl::ThreeWay { top, bottom } => Target::ThreeWay {
            top: widen("top", top)?,
            bottom: widen("bottom", bottom)?,
        },
    };
    let period = match &decl.period {
        Some(label) => Some(
            raw.periods
                .iter()
                .position(|p| p == label)
                .ok_or_else(|| Error::Manifest(format!("unknown period {label:?}")))?,
        ),
        None => None,
    };
    let metric = decl.metric.or(match (&target, decl.reported) {
        (_, None) => None,
        (Target::TwoWay { .. }, Some(_)) => Some(MetricKind::Irr),
        (Target::ThreeWay { .. }, Some(_)) => Some(MetricKind::Ratio),
    });
    if metric == Some(MetricKind::Ratio) && period.is_none() && periods > 1 {
        return Err(Error::Manifest(
            "ratio check on a multi-period statement needs target.period".into(),
        ));
    }
    let spec = TargetSpec {
        target,
        metric,
        reported: decl.reported,
        period,
        formula: decl.formula.unwrap_or_default(),
        labels: decl.labels.clone(),
    };
    spec.validate(periods)?;
    Ok(spec)
}
