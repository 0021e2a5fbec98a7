//! Command-line front end for inclusion analysis.
//!
//! [`run`] parses arguments, does the work and returns the exit code with
//! everything meant for stdout and stderr, so the binary is a thin wrapper.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use inclusion_core::diagnostics::{diagnose, DiagnosticOptions};
use inclusion_core::fixtures::{generate, Fault, FixtureSpec, Shape};
use inclusion_core::ingest::{
    parse_cell, TargetDecl, TargetDeclaration, TargetLabels, TargetSource, DEFAULT_TOLERANCE,
};
use inclusion_core::metrics::verify_reported;
use inclusion_core::report::{
    self, render_diagnosis, render_grid_checks, render_metric, render_partitions, render_zero_check,
};
use inclusion_core::{
    grid_checks, irr, normalize, parse_manifest, parse_statement, partition, resolve_target, zero_check, Algorithm,
    Manifest, MetricKind, Norm, RawTable, Reported, SolutionOrder, SolverOptions, Statement, TargetSpec, TotaledGrid,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Environment variable holding the default tolerance.
pub const TOLERANCE_ENV: &str = "INCLUSION_TOLERANCE";

/// Rows with this label are dropped when no manifest is given.
const ZERO_CHECK_LABEL: &str = "zero check";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// A fault in the model under test, as opposed to a failure of the tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Finding {
    ZeroCheckFailed,
    GridIdentityFailed,
    NoExactPartition,
    MetricMismatch,
    DoubleCount,
}

/// Exit code for a completed run: any finding makes it 1.
pub fn exit_code(findings: &[Finding]) -> i32 {
    if findings.is_empty() {
        EXIT_OK
    } else {
        EXIT_FINDINGS
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "inclusion",
    version = concat!(env!("CARGO_PKG_VERSION"), " (report schema 1)"),
    about = "Check which rows of a financial statement feed a reported metric"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Absolute tolerance; overrides the manifest and INCLUSION_TOLERANCE.
    #[arg(long, global = true, value_parser = positive_f64)]
    tolerance: Option<f64>,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,

    /// Solver worker threads (results do not depend on it).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Markdown,
    Json,
}

impl From<FormatArg> for report::Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => report::Format::Text,
            FormatArg::Markdown => report::Format::Markdown,
            FormatArg::Json => report::Format::Json,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Zero check of a statement, or the identities of a totaled grid.
    Check {
        statement: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Treat the file as a grid with row totals, column totals and a grand total.
        #[arg(long)]
        grid: bool,
    },
    /// Internal rate of return of a cash flow, checked against a reported figure.
    Irr {
        /// Statement whose manifest declares the relevant cash flow.
        statement: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Comma-separated flows, e.g. "-60,60,60,60,0" or "(60),60,60,60,-".
        #[arg(long, allow_hyphen_values = true, conflicts_with = "statement")]
        flows: Option<String>,
        /// Reported figure, e.g. "83.93%".
        #[arg(long)]
        reported: Option<String>,
        #[arg(long, default_value_t = 0.10, allow_hyphen_values = true)]
        guess: f64,
    },
    /// Two-way analysis: rows included in and excluded from a cash flow.
    Include {
        statement: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Relevant cash flow, one value per period.
        #[arg(long, allow_hyphen_values = true)]
        target: Option<String>,
        #[arg(long)]
        reported: Option<String>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Three-way analysis: rows in the top and bottom of a ratio, and the rest.
    Include3 {
        statement: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        ratio: RatioArgs,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Explains why no exact partition exists.
    Diagnose {
        statement: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Relevant cash flow for a two-way diagnosis.
        #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["top", "bottom"])]
        target: Option<String>,
        #[command(flatten)]
        ratio: RatioArgs,
        #[arg(long)]
        shift_window: Option<usize>,
        #[arg(long, value_enum)]
        norm: Option<NormArg>,
        #[arg(long)]
        max_adjustment_lines: Option<usize>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Writes a synthetic statement, manifest and ground truth.
    Gen {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        rows: usize,
        #[arg(long, default_value_t = 6)]
        periods: usize,
        #[arg(long, value_enum, default_value_t = ShapeArg::TwoWay)]
        shape: ShapeArg,
        #[arg(long, value_enum, default_value_t = FaultArg::None)]
        fault: FaultArg,
        /// Periods to move the row by, for timing shifts.
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        offset: i32,
        #[arg(long, default_value_t = 1000)]
        magnitude: i64,
        #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
        scale: f64,
        #[arg(long)]
        noise: bool,
    },
}

#[derive(Debug, Args)]
struct RatioArgs {
    /// Top of the ratio, one value per period.
    #[arg(long, allow_hyphen_values = true)]
    top: Option<String>,
    /// Bottom of the ratio, one value per period.
    #[arg(long, allow_hyphen_values = true)]
    bottom: Option<String>,
    /// Reported ratio, e.g. "89%".
    #[arg(long)]
    reported: Option<String>,
    /// Period whose ratio is checked.
    #[arg(long)]
    period: Option<String>,
    #[arg(long)]
    top_label: Option<String>,
    #[arg(long)]
    bottom_label: Option<String>,
    /// Let a row count in both top and bottom, to find double counting.
    #[arg(long)]
    allow_overlap: bool,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_solutions: Option<u64>,
    #[arg(long, value_enum)]
    order: Option<OrderArg>,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OrderArg {
    FewestRows,
    StatementOrder,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Auto,
    Exhaustive,
    MeetInMiddle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormArg {
    Max,
    L1,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ShapeArg {
    TwoWay,
    ThreeWay,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    Omission,
    DoubleCount,
    SignError,
    TimingShift,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

/// Runs one invocation, reading the default tolerance from the environment.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_env(args, std::env::var(TOLERANCE_ENV).ok())
}

/// [`run`] with the environment tolerance passed in.
pub fn run_with_env<I, T>(args: I, env_tolerance: Option<String>) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    let env_tolerance = match env_tolerance.map(|s| positive_f64(s.trim())).transpose() {
        Ok(t) => t,
        Err(e) => return error_outcome(anyhow::anyhow!("{TOLERANCE_ENV}: {e}")),
    };
    let mut out = String::new();
    match execute(&cli, env_tolerance, &mut out) {
        Ok(findings) => Outcome {
            code: exit_code(&findings),
            stdout: out,
            stderr: String::new(),
        },
        Err(e) => error_outcome(e),
    }
}

fn error_outcome(e: anyhow::Error) -> Outcome {
    Outcome {
        code: EXIT_ERROR,
        stdout: String::new(),
        stderr: format!("error: {e:#}\n"),
    }
}

struct Settings {
    format: report::Format,
    flag_tolerance: Option<f64>,
    env_tolerance: Option<f64>,
    threads: Option<usize>,
}

impl Settings {
    /// Flag, then manifest, then environment, then the built-in default.
    fn tolerance(&self, manifest: &Manifest) -> f64 {
        self.flag_tolerance
            .or(manifest.tolerance)
            .or(self.env_tolerance)
            .unwrap_or(DEFAULT_TOLERANCE)
    }

    fn solver(&self, manifest: &Manifest, search: &SearchArgs, overlap: bool) -> SolverOptions {
        let o = &manifest.options;
        SolverOptions {
            tolerance: self.tolerance(manifest),
            max_solutions: search
                .max_solutions
                .map(|n| n as usize)
                .or(o.max_solutions)
                .unwrap_or(inclusion_core::inclusion::DEFAULT_MAX_SOLUTIONS),
            allow_overlap: overlap || o.allow_overlap.unwrap_or(false),
            order: match search.order {
                Some(OrderArg::FewestRows) => SolutionOrder::FewestRows,
                Some(OrderArg::StatementOrder) => SolutionOrder::StatementOrder,
                None => SolutionOrder::default(),
            },
            algorithm: match search.algorithm {
                Some(AlgorithmArg::Auto) => Algorithm::Auto,
                Some(AlgorithmArg::Exhaustive) => Algorithm::Exhaustive,
                Some(AlgorithmArg::MeetInMiddle) => Algorithm::MeetInMiddle,
                None => o.algorithm.unwrap_or_default(),
            },
            threads: self.threads.or(o.threads),
        }
    }
}

fn execute(cli: &Cli, env_tolerance: Option<f64>, out: &mut String) -> anyhow::Result<Vec<Finding>> {
    let ctx = Settings {
        format: cli.format.into(),
        flag_tolerance: cli.tolerance,
        env_tolerance,
        threads: cli.threads.map(usize::from),
    };
    match &cli.command {
        Command::Check {
            statement,
            manifest,
            grid,
        } => check(&ctx, statement, manifest.as_deref(), *grid, out),
        Command::Irr {
            statement,
            manifest,
            flows,
            reported,
            guess,
        } => irr_command(
            &ctx,
            statement.as_deref(),
            manifest.as_deref(),
            flows.as_deref(),
            reported.as_deref(),
            *guess,
            out,
        ),
        Command::Include {
            statement,
            manifest,
            target,
            reported,
            search,
        } => {
            let mut input = Input::load(statement, manifest.as_deref())?;
            input.override_two_way(target.as_deref(), reported.as_deref())?;
            analyse(&ctx, input, search, false, out)
        }
        Command::Include3 {
            statement,
            manifest,
            ratio,
            search,
        } => {
            let mut input = Input::load(statement, manifest.as_deref())?;
            input.override_three_way(ratio)?;
            analyse(&ctx, input, search, ratio.allow_overlap, out)
        }
        Command::Diagnose {
            statement,
            manifest,
            target,
            ratio,
            shift_window,
            norm,
            max_adjustment_lines,
            search,
        } => {
            let mut input = Input::load(statement, manifest.as_deref())?;
            if ratio.top.is_some() || ratio.bottom.is_some() {
                input.override_three_way(ratio)?;
            } else {
                input.override_two_way(target.as_deref(), ratio.reported.as_deref())?;
            }
            let (stmt, spec) = input.resolve()?;
            let o = &input.manifest.options;
            let opts = DiagnosticOptions {
                solver: ctx.solver(&input.manifest, search, ratio.allow_overlap),
                norm: match norm {
                    Some(NormArg::Max) => Norm::Max,
                    Some(NormArg::L1) => Norm::L1,
                    None => o.norm.unwrap_or_default(),
                },
                shift_window: shift_window
                    .or(o.shift_window)
                    .unwrap_or(inclusion_core::diagnostics::DEFAULT_SHIFT_WINDOW),
                max_adjustment_lines: max_adjustment_lines
                    .or(o.max_adjustment_lines)
                    .unwrap_or(inclusion_core::diagnostics::DEFAULT_MAX_ADJUSTMENT_LINES),
                ..Default::default()
            };
            let d = diagnose(&stmt, &spec, &opts)?;
            out.push_str(&render_diagnosis(&stmt, &spec, &d, ctx.format)?);
            let mut findings = Vec::new();
            if !d.zero_check.pass {
                findings.push(Finding::ZeroCheckFailed);
            }
            if !d.exact {
                findings.push(Finding::NoExactPartition);
            } else if d.best_partition.metric_check.as_ref().is_some_and(|m| !m.pass) {
                findings.push(Finding::MetricMismatch);
            }
            if !d.double_count.is_empty() || !d.best_partition.double_counted.is_empty() {
                findings.push(Finding::DoubleCount);
            }
            Ok(findings)
        }
        Command::Gen {
            out: dir,
            seed,
            rows,
            periods,
            shape,
            fault,
            offset,
            magnitude,
            scale,
            noise,
        } => {
            let spec = FixtureSpec {
                seed: *seed,
                rows: *rows,
                periods: *periods,
                value_scale: *scale,
                magnitude: *magnitude,
                shape: match shape {
                    ShapeArg::TwoWay => Shape::TwoWay,
                    ShapeArg::ThreeWay => Shape::ThreeWay,
                },
                fault: match fault {
                    FaultArg::None => Fault::None,
                    FaultArg::Omission => Fault::Omission,
                    FaultArg::DoubleCount => Fault::DoubleCount,
                    FaultArg::SignError => Fault::SignError,
                    FaultArg::TimingShift => Fault::TimingShift(*offset),
                },
                noise: *noise,
                tolerance: ctx.flag_tolerance.or(ctx.env_tolerance).unwrap_or(DEFAULT_TOLERANCE),
            };
            let fixture = generate(&spec)?;
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, text) in [
                ("statement.csv", fixture.statement_csv()),
                ("manifest.json", fixture.manifest_json()?),
                ("truth.json", fixture.truth_json()?),
            ] {
                let path = dir.join(name);
                std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
                let _ = writeln!(out, "{}", path.display());
            }
            Ok(Vec::new())
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// A statement file with its manifest, before normalization.
struct Input {
    path: PathBuf,
    raw: RawTable,
    manifest: Manifest,
}

impl Input {
    fn load(statement: &Path, manifest: Option<&Path>) -> anyhow::Result<Input> {
        let raw = parse_statement(&read(statement)?).with_context(|| statement.display().to_string())?;
        let manifest = match manifest {
            Some(path) => {
                let mut m = parse_manifest(&read(path)?).with_context(|| path.display().to_string())?;
                m.rebase(path.parent().unwrap_or(Path::new(".")));
                m.validate_against(&raw).with_context(|| path.display().to_string())?;
                m
            }
            None => Manifest {
                drop_rows: raw
                    .data_rows()
                    .filter(|r| r.label.eq_ignore_ascii_case(ZERO_CHECK_LABEL) && r.amounts().iter().all(|&v| v == 0.0))
                    .map(|r| r.label.clone())
                    .take(1)
                    .collect(),
                ..Manifest::default()
            },
        };
        Ok(Input {
            path: statement.to_path_buf(),
            raw,
            manifest,
        })
    }

    fn declaration(&mut self) -> &mut TargetDeclaration {
        self.manifest.target.get_or_insert_with(|| TargetDeclaration {
            decl: TargetDecl::TwoWay(TargetSource::Vector(Vec::new())),
            metric: None,
            reported: None,
            period: None,
            formula: None,
            labels: TargetLabels::default(),
        })
    }

    fn override_two_way(&mut self, target: Option<&str>, reported: Option<&str>) -> anyhow::Result<()> {
        let decl = self.declaration();
        if let Some(t) = target {
            decl.decl = TargetDecl::TwoWay(TargetSource::Vector(parse_list(t).context("--target")?));
        }
        if let Some(r) = reported {
            decl.reported = Some(parse_reported(r)?);
        }
        match &decl.decl {
            TargetDecl::TwoWay(TargetSource::Vector(v)) if v.is_empty() => {
                bail!("no relevant cash flow: pass --target or declare one in the manifest")
            }
            TargetDecl::ThreeWay { .. } => bail!("the manifest declares a three-way target; use include3"),
            _ => Ok(()),
        }
    }

    fn override_three_way(&mut self, ratio: &RatioArgs) -> anyhow::Result<()> {
        let decl = self.declaration();
        let (mut top, mut bottom) = match &decl.decl {
            TargetDecl::ThreeWay { top, bottom } => (Some(top.clone()), Some(bottom.clone())),
            TargetDecl::TwoWay(_) => (None, None),
        };
        if let Some(t) = &ratio.top {
            top = Some(parse_list(t).context("--top")?);
        }
        if let Some(b) = &ratio.bottom {
            bottom = Some(parse_list(b).context("--bottom")?);
        }
        let (Some(top), Some(bottom)) = (top, bottom) else {
            bail!("three-way analysis needs --top and --bottom, or a three-way target in the manifest");
        };
        decl.decl = TargetDecl::ThreeWay { top, bottom };
        if let Some(r) = &ratio.reported {
            decl.reported = Some(parse_reported(r)?);
        }
        if let Some(p) = &ratio.period {
            decl.period = Some(p.clone());
        }
        if let Some(l) = &ratio.top_label {
            decl.labels.top = Some(l.clone());
        }
        if let Some(l) = &ratio.bottom_label {
            decl.labels.bottom = Some(l.clone());
        }
        Ok(())
    }

    fn resolve(&self) -> anyhow::Result<(Statement, TargetSpec)> {
        let name = self.path.display().to_string();
        let stmt = normalize(&self.raw, &self.manifest).with_context(|| name.clone())?;
        let decl = self.manifest.target.as_ref().context("no target declared")?;
        let spec = resolve_target(&self.raw, decl).with_context(|| name.clone())?;
        Ok((stmt, spec))
    }
}

fn parse_list(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|item| {
            if item.trim().is_empty() {
                bail!("empty value in {text:?}; write 0 or - for zero");
            }
            Ok(parse_cell(item.trim())?.value)
        })
        .collect()
}

fn parse_reported(text: &str) -> anyhow::Result<Reported> {
    let cell = parse_cell(text.trim()).with_context(|| format!("--reported {text:?}"))?;
    Ok(Reported::from_cell(cell))
}

fn check(
    ctx: &Settings,
    statement: &Path,
    manifest: Option<&Path>,
    grid: bool,
    out: &mut String,
) -> anyhow::Result<Vec<Finding>> {
    let input = Input::load(statement, manifest)?;
    let tol = ctx.tolerance(&input.manifest);
    if grid {
        let grid = TotaledGrid::from_raw(&input.raw).with_context(|| statement.display().to_string())?;
        let report = grid_checks(&grid, tol)?;
        out.push_str(&render_grid_checks(&report, ctx.format)?);
        return Ok(if report.pass {
            Vec::new()
        } else {
            vec![Finding::GridIdentityFailed]
        });
    }
    let stmt = normalize(&input.raw, &input.manifest).with_context(|| statement.display().to_string())?;
    let zc = zero_check(&stmt, tol);
    out.push_str(&render_zero_check(&stmt, &zc, ctx.format)?);
    Ok(if zc.pass {
        Vec::new()
    } else {
        vec![Finding::ZeroCheckFailed]
    })
}

fn irr_command(
    ctx: &Settings,
    statement: Option<&Path>,
    manifest: Option<&Path>,
    flows: Option<&str>,
    reported: Option<&str>,
    guess: f64,
    out: &mut String,
) -> anyhow::Result<Vec<Finding>> {
    let mut reported = reported.map(parse_reported).transpose()?;
    let flows = match (flows, statement) {
        (Some(f), _) => parse_list(f).context("--flows")?,
        (None, Some(path)) => {
            let mut input = Input::load(path, manifest)?;
            input.override_two_way(None, None)?;
            let (_, spec) = input.resolve()?;
            reported = reported.or(spec.reported);
            match spec.target {
                inclusion_core::Target::TwoWay { relevant } => relevant,
                inclusion_core::Target::ThreeWay { .. } => unreachable!("rejected by override_two_way"),
            }
        }
        (None, None) => bail!("pass --flows or a statement with a manifest"),
    };
    let solution = irr(&flows, guess)?;
    let check = reported.map(|r| verify_reported(MetricKind::Irr, solution.rate, &r));
    let mut notes = Vec::new();
    if solution.possibly_non_unique {
        notes.push(format!(
            "the flows change sign more than once; {} roots found, the one nearest the guess is shown",
            solution.roots_found
        ));
    }
    out.push_str(&render_metric(
        MetricKind::Irr,
        solution.rate,
        check.as_ref(),
        &notes,
        ctx.format,
    )?);
    Ok(match check {
        Some(c) if !c.pass => vec![Finding::MetricMismatch],
        _ => Vec::new(),
    })
}

fn analyse(
    ctx: &Settings,
    input: Input,
    search: &SearchArgs,
    overlap: bool,
    out: &mut String,
) -> anyhow::Result<Vec<Finding>> {
    let (stmt, spec) = input.resolve()?;
    let opts = ctx.solver(&input.manifest, search, overlap);
    let zc = zero_check(&stmt, opts.tolerance);
    if !zc.pass {
        out.push_str(&render_zero_check(&stmt, &zc, ctx.format)?);
        return Ok(vec![Finding::ZeroCheckFailed]);
    }
    let parts = partition(&stmt, &spec, &opts)?;
    out.push_str(&render_partitions(&stmt, &spec, &parts, opts.tolerance, ctx.format)?);
    let mut findings = Vec::new();
    match parts.best() {
        None => findings.push(Finding::NoExactPartition),
        Some(best) => {
            if best.metric_check.as_ref().is_some_and(|m| !m.pass) || best.metric_error.is_some() {
                findings.push(Finding::MetricMismatch);
            }
            if !best.double_counted.is_empty() {
                findings.push(Finding::DoubleCount);
            }
        }
    }
    Ok(findings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn version_names_report_schema() {
        let out = run_with_env(["inclusion", "--version"], None);
        assert_eq!(out.code, EXIT_OK);
        assert!(out
            .stdout
            .contains(&format!("report schema {}", report::SCHEMA_VERSION)));
    }

    #[test]
    fn tolerance_precedence() {
        let ctx = |flag, env| Settings {
            format: report::Format::Text,
            flag_tolerance: flag,
            env_tolerance: env,
            threads: None,
        };
        let with = Manifest {
            tolerance: Some(0.1),
            ..Manifest::default()
        };
        let without = Manifest::default();
        assert_eq!(ctx(Some(1.0), Some(2.0)).tolerance(&with), 1.0);
        assert_eq!(ctx(None, Some(2.0)).tolerance(&with), 0.1);
        assert_eq!(ctx(None, Some(2.0)).tolerance(&without), 2.0);
        assert_eq!(ctx(None, None).tolerance(&without), DEFAULT_TOLERANCE);
    }

    #[test]
    fn lists_accept_statement_notation() {
        assert_eq!(parse_list("(60), 60,60,60,-").unwrap(), [-60.0, 60.0, 60.0, 60.0, 0.0]);
        assert_eq!(parse_list("-60,1.5").unwrap(), [-60.0, 1.5]);
        assert!(parse_list("1,,2").is_err());
    }

    #[test]
    fn invalid_flags_fail_before_reading_files() {
        let out = run_with_env(["inclusion", "check", "/nonexistent.csv", "--tolerance", "-1"], None);
        assert_eq!(out.code, EXIT_ERROR);
        assert!(!out.stderr.contains("nonexistent"));
        let out = run_with_env(["inclusion", "check", "/nonexistent.csv"], Some("zero".into()));
        assert_eq!(out.code, EXIT_ERROR);
        assert!(out.stderr.contains(TOLERANCE_ENV));
    }

    fn finding() -> impl Strategy<Value = Finding> {
        prop_oneof![
            Just(Finding::ZeroCheckFailed),
            Just(Finding::GridIdentityFailed),
            Just(Finding::NoExactPartition),
            Just(Finding::MetricMismatch),
            Just(Finding::DoubleCount),
        ]
    }

    proptest! {
        #[test]
        fn any_finding_exits_one(findings in proptest::collection::vec(finding(), 0..6)) {
            let code = exit_code(&findings);
            prop_assert_eq!(code, if findings.is_empty() { EXIT_OK } else { EXIT_FINDINGS });
            prop_assert_ne!(code, EXIT_ERROR);
        }
    }
}
