//! Synthetic zero-sum statements with a planted partition and, optionally, a
//! seeded fault whose detection is known in advance.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inclusion::{Assignment, Cluster, Target, TargetSpec};
use crate::numeric::exact_sum;
use crate::statement::{LineItem, Role, RowId, Statement};

pub const BALANCING_LABEL: &str = "net cash flow";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "offset", rename_all = "snake_case")]
pub enum Fault {
    #[default]
    None,
    /// A planted row is left out of its target.
    Omission,
    /// A top row is also added into the bottom target.
    DoubleCount,
    /// A row's sign is flipped in the statement.
    SignError,
    /// A planted row's values move by the given number of periods.
    TimingShift(i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    #[default]
    TwoWay,
    ThreeWay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
    /// Rows including the balancing row.
    pub rows: usize,
    pub periods: usize,
    /// Every value is an integer in `-magnitude..=magnitude` times this.
    pub value_scale: f64,
    pub magnitude: i64,
    pub shape: Shape,
    pub fault: Fault,
    /// Adds uniform noise well below `tolerance` to every value.
    pub noise: bool,
    pub tolerance: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            seed: 0,
            rows: 12,
            periods: 6,
            value_scale: 1.0,
            magnitude: 1000,
            shape: Shape::TwoWay,
            fault: Fault::None,
            noise: false,
            tolerance: crate::ingest::DEFAULT_TOLERANCE,
        }
    }
}

impl FixtureSpec {
    fn validate(&self) -> Result<()> {
        if self.rows < 3 {
            return Err(Error::Fixture(format!("need at least 3 rows, got {}", self.rows)));
        }
        if self.periods == 0 {
            return Err(Error::Fixture("need at least one period".into()));
        }
        if self.magnitude < 1 {
            return Err(Error::Fixture("magnitude must be at least 1".into()));
        }
        if self.value_scale.is_nan() || self.value_scale <= 0.0 || self.value_scale.is_infinite() {
            return Err(Error::Fixture(format!("bad value scale {}", self.value_scale)));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidTolerance(self.tolerance));
        }
        if self.shape == Shape::ThreeWay && self.rows < 4 {
            return Err(Error::Fixture("three-way fixtures need at least 4 rows".into()));
        }
        Ok(())
    }
}

/// What a detector is expected to report for the injected fault.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpectedFinding {
    /// The row shows up in the excluded cluster.
    Excluded { row: RowId },
    /// The zero check fails by this residual.
    ZeroCheck { row: RowId, residual: Vec<f64> },
    /// Moving the row by `offset` periods restores a match.
    Shift { row: RowId, offset: i32 },
    /// The row is counted in both top and bottom.
    DoubleCounted { row: RowId },
}

impl ExpectedFinding {
    pub fn row(&self) -> RowId {
        match self {
            ExpectedFinding::Excluded { row }
            | ExpectedFinding::ZeroCheck { row, .. }
            | ExpectedFinding::Shift { row, .. }
            | ExpectedFinding::DoubleCounted { row } => *row,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// The planted assignment of the un-faulted instance.
    pub assignment: Vec<Assignment>,
    pub fault: Fault,
    pub expected: Option<ExpectedFinding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub spec: FixtureSpec,
    pub statement: Statement,
    pub target: TargetSpec,
    pub truth: GroundTruth,
}

/// Builds the instance described by `spec`, fault included. The same spec
/// always gives a bit-identical fixture.
pub fn generate(spec: &FixtureSpec) -> Result<Fixture> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.rows;
    let free = n - 1;

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..free {
        loop {
            let row: Vec<f64> = (0..spec.periods)
                .map(|_| {
                    if rng.gen_bool(0.2) {
                        0.0
                    } else {
                        let v = rng.gen_range(-spec.magnitude..=spec.magnitude) as f64 * spec.value_scale;
                        if spec.noise {
                            v + rng.gen_range(-0.25..0.25) * spec.tolerance / n as f64
                        } else {
                            v
                        }
                    }
                })
                .map(|v| v + 0.0)
                .collect();
            if row.iter().any(|&v| v != 0.0) {
                rows.push(row);
                break;
            }
        }
    }
    rows.push(balancing(&rows, spec.periods));

    // Planted clusters: 30-60% of the free rows, never the balancing row.
    let lo = ((free as f64) * 0.3).ceil().max(1.0) as usize;
    let hi = ((free as f64) * 0.6).floor().max(lo as f64) as usize;
    let size = rng.gen_range(lo..=hi);
    let mut order: Vec<usize> = (0..free).collect();
    order.shuffle(&mut rng);
    let mut clusters = vec![Cluster::Excluded; n];
    match spec.shape {
        Shape::TwoWay => {
            for &i in &order[..size] {
                clusters[i] = Cluster::Included;
            }
        }
        Shape::ThreeWay => {
            let size = size.max(2);
            let split = rng.gen_range(1..size);
            for (j, &i) in order[..size].iter().enumerate() {
                clusters[i] = if j < split { Cluster::Top } else { Cluster::Bottom };
            }
        }
    }

    let mut fixture = Fixture {
        spec: spec.clone(),
        statement: statement(&rows, spec)?,
        target: TargetSpec::two_way(Vec::new()),
        truth: GroundTruth {
            assignment: clusters
                .iter()
                .enumerate()
                .map(|(i, &cluster)| Assignment {
                    row: RowId(i as u32),
                    cluster,
                })
                .collect(),
            fault: Fault::None,
            expected: None,
        },
    };
    fixture.target = planted_target(&fixture.statement, &clusters, spec.shape);
    if spec.fault != Fault::None {
        fixture = inject_fault(&fixture, spec.fault)?;
    }
    Ok(fixture)
}

fn balancing(rows: &[Vec<f64>], periods: usize) -> Vec<f64> {
    (0..periods)
        .map(|p| -exact_sum(rows.iter().map(|r| r[p])) + 0.0)
        .collect()
}

fn statement(rows: &[Vec<f64>], spec: &FixtureSpec) -> Result<Statement> {
    let last = rows.len() - 1;
    let items = rows
        .iter()
        .enumerate()
        .map(|(i, values)| LineItem {
            id: RowId(i as u32),
            heading_path: Vec::new(),
            label: if i == last {
                BALANCING_LABEL.to_string()
            } else {
                format!("item {:02}", i + 1)
            },
            values: values.clone(),
            role: if i == last { Role::BottomLine } else { Role::Data },
            inverted: false,
        })
        .collect();
    let mut stmt = Statement::from_rows(
        (1..=spec.periods).map(|p| format!("P{p}")).collect(),
        items,
        spec.tolerance,
    )?;
    stmt.corner = "Period".into();
    stmt.decimals = if spec.noise { 6 } else { decimals_of(spec.value_scale) };
    Ok(stmt)
}

fn decimals_of(scale: f64) -> u8 {
    (0..=6u8)
        .find(|&d| {
            let shifted = scale * 10f64.powi(d as i32);
            (shifted - shifted.round()).abs() < 1e-9 * shifted.abs().max(1.0)
        })
        .unwrap_or(6)
}

fn sum_where(stmt: &Statement, clusters: &[Cluster], keep: impl Fn(Cluster) -> bool) -> Vec<f64> {
    (0..stmt.period_count())
        .map(|p| {
            exact_sum(
                stmt.rows
                    .iter()
                    .zip(clusters)
                    .filter(|(_, &c)| keep(c))
                    .map(|(r, _)| r.values[p]),
            )
        })
        .collect()
}

fn planted_target(stmt: &Statement, clusters: &[Cluster], shape: Shape) -> TargetSpec {
    let neg = |v: Vec<f64>| v.into_iter().map(|x| -x + 0.0).collect();
    match shape {
        Shape::TwoWay => TargetSpec::two_way(sum_where(stmt, clusters, |c| c == Cluster::Included)),
        Shape::ThreeWay => TargetSpec::three_way(
            neg(sum_where(stmt, clusters, Cluster::in_top)),
            neg(sum_where(stmt, clusters, Cluster::in_bottom)),
        ),
    }
}

fn fault_rng(fixture: &Fixture, fault: Fault) -> ChaCha8Rng {
    let tag = match fault {
        Fault::None => 0,
        Fault::Omission => 1,
        Fault::DoubleCount => 2,
        Fault::SignError => 3,
        Fault::TimingShift(o) => 4 + ((o as i64) << 8) as u64,
    };
    ChaCha8Rng::seed_from_u64(fixture.spec.seed ^ 0x9e37_79b9_7f4a_7c15 ^ tag)
}

/// Applies `fault` to an un-faulted fixture and records what should detect it.
pub fn inject_fault(fixture: &Fixture, fault: Fault) -> Result<Fixture> {
    if fixture.truth.fault != Fault::None {
        return Err(Error::Fixture("fixture already carries a fault".into()));
    }
    let mut rng = fault_rng(fixture, fault);
    let mut out = fixture.clone();
    out.truth.fault = fault;
    out.spec.fault = fault;
    let clusters: Vec<Cluster> = fixture.truth.assignment.iter().map(|a| a.cluster).collect();
    let planted: Vec<usize> = (0..clusters.len())
        .filter(|&i| clusters[i] != Cluster::Excluded)
        .collect();
    let pick = |rng: &mut ChaCha8Rng, from: &[usize]| -> Result<usize> {
        from.choose(rng)
            .copied()
            .ok_or_else(|| Error::Fixture("no row qualifies for this fault".into()))
    };

    match fault {
        Fault::None => {}
        Fault::Omission => {
            let k = pick(&mut rng, &planted)?;
            let mut c = clusters.clone();
            c[k] = Cluster::Excluded;
            out.target = TargetSpec {
                target: planted_target(&out.statement, &c, fixture.spec.shape).target,
                ..fixture.target.clone()
            };
            out.truth.expected = Some(ExpectedFinding::Excluded { row: RowId(k as u32) });
        }
        Fault::DoubleCount => {
            let Target::ThreeWay { top, bottom } = &fixture.target.target else {
                return Err(Error::Fixture("double counting needs a three-way fixture".into()));
            };
            let tops: Vec<usize> = planted
                .iter()
                .copied()
                .filter(|&i| clusters[i] == Cluster::Top)
                .collect();
            let k = pick(&mut rng, &tops)?;
            let values = &fixture.statement.rows[k].values;
            let bottom = bottom
                .iter()
                .zip(values)
                .map(|(b, v)| exact_sum([*b, -v]) + 0.0)
                .collect();
            out.target.target = Target::ThreeWay {
                top: top.clone(),
                bottom,
            };
            out.truth.expected = Some(ExpectedFinding::DoubleCounted { row: RowId(k as u32) });
        }
        Fault::SignError => {
            let last = fixture.statement.rows.len() - 1;
            let candidates: Vec<usize> = (0..last).collect();
            let k = pick(&mut rng, &candidates)?;
            let row = &mut out.statement.rows[k];
            let residual = row.values.iter().map(|v| -2.0 * v + 0.0).collect();
            for v in &mut row.values {
                *v = -*v + 0.0;
            }
            out.statement.normalized = false;
            out.truth.expected = Some(ExpectedFinding::ZeroCheck {
                row: RowId(k as u32),
                residual,
            });
        }
        Fault::TimingShift(offset) => {
            let periods = fixture.statement.period_count();
            if offset == 0 || offset.unsigned_abs() as usize >= periods {
                return Err(Error::Fixture(format!(
                    "shift of {offset} periods does not fit {periods} periods"
                )));
            }
            let k = pick(&mut rng, &planted)?;
            let mut rows: Vec<Vec<f64>> = fixture.statement.rows.iter().map(|r| r.values.clone()).collect();
            // Clear the cells the shift would push off the statement, so that
            // the move is lossless; the targets follow the trimmed row.
            let original = &mut rows[k];
            for (p, v) in original.iter_mut().enumerate() {
                let q = p as i64 + offset as i64;
                if q < 0 || q >= periods as i64 {
                    *v = 0.0;
                }
            }
            if original.iter().all(|&v| v == 0.0) {
                let keep = if offset > 0 { 0 } else { periods - 1 };
                original[keep] = fixture.spec.value_scale;
            }
            let last = rows.len() - 1;
            let closing = balancing(&rows[..last], periods);
            rows[last] = closing;
            let base_stmt = statement(&rows, &fixture.spec)?;
            out.target = TargetSpec {
                target: planted_target(&base_stmt, &clusters, fixture.spec.shape).target,
                ..fixture.target.clone()
            };

            let mut moved = vec![0.0; periods];
            for (p, &v) in rows[k].iter().enumerate() {
                let q = p as i64 + offset as i64;
                if (0..periods as i64).contains(&q) {
                    moved[q as usize] = v;
                }
            }
            rows[k] = moved;
            rows[last] = balancing(&rows[..last], periods);
            out.statement = statement(&rows, &fixture.spec)?;
            out.truth.expected = Some(ExpectedFinding::Shift {
                row: RowId(k as u32),
                offset: -offset,
            });
        }
    }
    Ok(out)
}

fn csv_number(v: f64) -> String {
    if v == 0.0 {
        "-".to_string()
    } else if v < 0.0 {
        format!("({})", -v)
    } else {
        format!("{v}")
    }
}

impl Fixture {
    /// The statement as CSV, in the same convention as hand-made inputs.
    pub fn statement_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.statement.corner.clone()];
        header.extend(self.statement.periods.iter().cloned());
        let mut records = vec![header];
        for row in &self.statement.rows {
            let mut rec = vec![row.label.clone()];
            rec.extend(row.values.iter().map(|&v| csv_number(v)));
            records.push(rec);
        }
        for rec in records {
            w.write_record(&rec).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 input")
    }

    /// A manifest naming the balancing row and inlining the target.
    pub fn manifest_json(&self) -> Result<String> {
        let target = match &self.target.target {
            Target::TwoWay { relevant } => serde_json::json!({"kind": "two_way", "vector": relevant}),
            Target::ThreeWay { top, bottom } => serde_json::json!({"kind": "three_way", "top": top, "bottom": bottom}),
        };
        let doc = serde_json::json!({
            "bottom_line": BALANCING_LABEL,
            "invert_bottom_line": false,
            "tolerance": self.spec.tolerance,
            "target": target,
        });
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    pub fn truth_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: u32,
            spec: &'a FixtureSpec,
            truth: &'a GroundTruth,
        }
        Ok(serde_json::to_string_pretty(&Doc {
            schema: crate::report::SCHEMA_VERSION,
            spec: &self.spec,
            truth: &self.truth,
        })? + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{detect_double_count, detect_shift};
    use crate::inclusion::resolve_target;
    use crate::inclusion::{partition, SolverOptions};
    use crate::ingest::{parse_manifest, parse_statement};
    use crate::statement::{normalize, zero_check};
    use proptest::prelude::*;

    fn spec(seed: u64) -> FixtureSpec {
        FixtureSpec {
            seed,
            rows: 10,
            periods: 5,
            ..Default::default()
        }
    }

    #[test]
    fn clean_fixture_is_exactly_zero_sum_and_recovered() {
        let f = generate(&FixtureSpec { seed: 1, ..spec(1) }).unwrap();
        let zc = zero_check(&f.statement, 0.005);
        assert!(zc.residuals.iter().all(|&r| r == 0.0));
        let out = partition(&f.statement, &f.target, &SolverOptions::default()).unwrap();
        assert!(out.results.iter().any(|r| r.assignment == f.truth.assignment));
    }

    #[test]
    fn smallest_fixture() {
        let f = generate(&FixtureSpec {
            rows: 3,
            periods: 1,
            ..spec(3)
        })
        .unwrap();
        let v: Vec<f64> = f.statement.rows.iter().map(|r| r.values[0]).collect();
        assert_eq!(v[2], -(v[0] + v[1]) + 0.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&FixtureSpec { rows: 2, ..spec(0) }).is_err());
        assert!(generate(&FixtureSpec { periods: 0, ..spec(0) }).is_err());
        assert!(generate(&FixtureSpec {
            fault: Fault::DoubleCount,
            ..spec(0)
        })
        .is_err());
        assert!(generate(&FixtureSpec {
            fault: Fault::TimingShift(5),
            ..spec(0)
        })
        .is_err());
    }

    #[test]
    fn omission_lands_in_excluded() {
        let f = generate(&FixtureSpec {
            fault: Fault::Omission,
            ..spec(7)
        })
        .unwrap();
        let row = f.truth.expected.as_ref().unwrap().row();
        let out = partition(&f.statement, &f.target, &SolverOptions::default()).unwrap();
        assert_eq!(out.best().unwrap().cluster_of(row), Some(Cluster::Excluded));
    }

    #[test]
    fn sign_error_residual() {
        let f = generate(&FixtureSpec {
            fault: Fault::SignError,
            ..spec(8)
        })
        .unwrap();
        let Some(ExpectedFinding::ZeroCheck { residual, .. }) = &f.truth.expected else {
            panic!()
        };
        assert_eq!(&zero_check(&f.statement, 0.005).residuals, residual);
    }

    #[test]
    fn shift_is_found() {
        let f = generate(&FixtureSpec {
            fault: Fault::TimingShift(1),
            ..spec(9)
        })
        .unwrap();
        assert!(zero_check(&f.statement, 0.005).pass);
        let Some(ExpectedFinding::Shift { row, offset }) = f.truth.expected else {
            panic!()
        };
        assert_eq!(offset, -1);
        let found = detect_shift(&f.statement, &f.target, 2, &SolverOptions::default()).unwrap();
        assert!(found.iter().any(|s| s.row == row && s.offset == -1 && !s.lossy));
    }

    #[test]
    fn double_count_is_flagged() {
        let f = generate(&FixtureSpec {
            shape: Shape::ThreeWay,
            fault: Fault::DoubleCount,
            ..spec(11)
        })
        .unwrap();
        let row = f.truth.expected.as_ref().unwrap().row();
        let out = detect_double_count(&f.statement, &f.target, &SolverOptions::default()).unwrap();
        assert!(out.results.iter().any(|r| r.double_counted == vec![row]));
    }

    #[test]
    fn files_round_trip_through_ingest() {
        for (scale, noise) in [(1.0, false), (0.01, false), (1.0, true)] {
            let f = generate(&FixtureSpec {
                value_scale: scale,
                noise,
                shape: Shape::ThreeWay,
                ..spec(5)
            })
            .unwrap();
            let raw = parse_statement(&f.statement_csv()).unwrap();
            let manifest = parse_manifest(&f.manifest_json().unwrap()).unwrap();
            let stmt = normalize(&raw, &manifest).unwrap();
            for (a, b) in stmt.rows.iter().zip(&f.statement.rows) {
                assert_eq!(a.label, b.label);
                assert_eq!(a.values, b.values);
                assert_eq!(a.role, b.role);
            }
            let spec = resolve_target(&raw, manifest.target.as_ref().unwrap()).unwrap();
            assert_eq!(spec.target, f.target.target);
        }
    }

    proptest! {
        #[test]
        fn deterministic_per_seed(seed in any::<u64>(), shape in prop_oneof![Just(Shape::TwoWay), Just(Shape::ThreeWay)]) {
            let s = FixtureSpec { seed, shape, ..spec(0) };
            let a = generate(&s).unwrap();
            let b = generate(&s).unwrap();
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }

        #[test]
        fn planted_assignment_is_a_solution(seed in any::<u64>(), shape in prop_oneof![Just(Shape::TwoWay), Just(Shape::ThreeWay)], noise in any::<bool>()) {
            let f = generate(&FixtureSpec { seed, shape, noise, rows: 8, periods: 3, ..Default::default() }).unwrap();
            let v = crate::inclusion::verify_partition(&f.statement, &f.target, &f.truth.assignment, 0.005);
            prop_assert!(v.pass);
            if !noise {
                prop_assert!(zero_check(&f.statement, 0.005).residuals.iter().all(|&r| r == 0.0));
            }
        }
    }
}
