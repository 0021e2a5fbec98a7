#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use inclusion_core::{
    normalize, parse_manifest, parse_statement, resolve_target, Cluster, Partitions, SolverOptions, Statement, Target,
    TargetSpec,
};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

pub fn read(name: &str) -> String {
    std::fs::read_to_string(data_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Loads a statement and its manifest target from `tests/data`.
pub fn load(csv: &str, manifest: &str) -> (Statement, TargetSpec) {
    let raw = parse_statement(&read(&format!("data/{csv}"))).unwrap();
    let manifest = parse_manifest(&read(&format!("data/{manifest}"))).unwrap();
    let stmt = normalize(&raw, &manifest).unwrap();
    let spec = resolve_target(&raw, manifest.target.as_ref().unwrap()).unwrap();
    (stmt, spec)
}

pub fn labels(stmt: &Statement, assignment: &[Cluster], cluster: Cluster) -> Vec<String> {
    stmt.rows
        .iter()
        .zip(assignment)
        .filter(|(_, &c)| c == cluster)
        .map(|(r, _)| r.label.clone())
        .collect()
}

pub fn clusters(stmt: &Statement, p: &inclusion_core::PartitionResult) -> Vec<Cluster> {
    stmt.rows.iter().map(|r| p.cluster_of(r.id).unwrap()).collect()
}

pub fn solution_set(stmt: &Statement, parts: &Partitions) -> BTreeSet<Vec<Cluster>> {
    parts.results.iter().map(|p| clusters(stmt, p)).collect()
}

/// Every assignment of the statement's rows that meets the target, found by
/// plain enumeration. All-zero rows stay excluded.
pub fn brute_force(stmt: &Statement, spec: &TargetSpec, tol: f64, overlap: bool) -> BTreeSet<Vec<Cluster>> {
    let n = stmt.rows.len();
    let periods = stmt.periods.len();
    let states: &[Cluster] = match (&spec.target, overlap) {
        (Target::TwoWay { .. }, _) => &[Cluster::Excluded, Cluster::Included],
        (Target::ThreeWay { .. }, false) => &[Cluster::Excluded, Cluster::Top, Cluster::Bottom],
        (Target::ThreeWay { .. }, true) => &[Cluster::Excluded, Cluster::Top, Cluster::Bottom, Cluster::Both],
    };
    let free: Vec<usize> = (0..n)
        .filter(|&i| stmt.rows[i].values.iter().any(|&v| v != 0.0))
        .collect();
    let k = states.len();
    let total = k.pow(free.len() as u32);
    let mut out = BTreeSet::new();
    let mut assignment = vec![Cluster::Excluded; n];
    for code in 0..total {
        let mut c = code;
        for &i in &free {
            assignment[i] = states[c % k];
            c /= k;
        }
        let ok = (0..periods).all(|p| {
            let sum_where = |f: &dyn Fn(Cluster) -> bool| -> f64 {
                (0..n)
                    .filter(|&i| f(assignment[i]))
                    .map(|i| stmt.rows[i].values[p])
                    .sum()
            };
            match &spec.target {
                Target::TwoWay { relevant } => (sum_where(&|c| c == Cluster::Included) - relevant[p]).abs() <= tol,
                Target::ThreeWay { top, bottom } => {
                    let t = sum_where(&|c| c == Cluster::Top || c == Cluster::Both);
                    let b = sum_where(&|c| c == Cluster::Bottom || c == Cluster::Both);
                    (t + top[p]).abs() <= tol && (b + bottom[p]).abs() <= tol
                }
            }
        });
        if ok {
            out.insert(assignment.clone());
        }
    }
    out
}

/// The fixture behind oracle case `seed`: shape, size and magnitude vary so
/// that both unique and heavily repeated solutions occur.
pub fn oracle_fixture(seed: u64) -> (inclusion_core::fixtures::Fixture, bool) {
    use inclusion_core::fixtures::{generate, FixtureSpec, Shape};
    let kind = seed % 3;
    let (shape, max_rows, overlap) = match kind {
        0 => (Shape::TwoWay, 16, false),
        1 => (Shape::ThreeWay, 12, false),
        _ => (Shape::ThreeWay, 10, true),
    };
    let rows = 4 + (seed / 3) as usize % (max_rows - 3);
    let magnitude = if seed.is_multiple_of(4) { 3 } else { 1000 };
    let spec = FixtureSpec {
        seed,
        rows,
        periods: 1 + (seed % 5) as usize,
        magnitude,
        shape,
        ..Default::default()
    };
    (generate(&spec).unwrap(), overlap)
}

/// Solver and enumeration agree on oracle case `seed` under `algorithm`.
pub fn oracle_agrees(seed: u64, algorithm: inclusion_core::Algorithm, threads: Option<usize>) -> Result<(), String> {
    let (fx, overlap) = oracle_fixture(seed);
    let tol = fx.spec.tolerance;
    let expected = brute_force(&fx.statement, &fx.target, tol, overlap);
    let opts = SolverOptions {
        max_solutions: 1 << 20,
        allow_overlap: overlap,
        algorithm,
        threads,
        ..SolverOptions::with_tolerance(tol)
    };
    let parts = inclusion_core::partition(&fx.statement, &fx.target, &opts).map_err(|e| e.to_string())?;
    let got = solution_set(&fx.statement, &parts);
    if got.len() != parts.results.len() {
        return Err(format!("seed {seed}: duplicate solutions"));
    }
    if got != expected {
        return Err(format!(
            "seed {seed}: solver found {} solutions, enumeration {}",
            got.len(),
            expected.len()
        ));
    }
    Ok(())
}
