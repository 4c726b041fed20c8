//! `wwlog` command line: sessions, calibrate, metrics, compare, generate.
//!
//! Exit codes: 0 on success, 1 when the analysis is empty or degenerate,
//! 2 on unreadable input or bad configuration.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::calibration::{
    calibrate, CalibrationError, CalibrationResult, ThresholdGrid, DEFAULT_OUTLIER_RATIO,
};
use crate::cohort::{
    compare_table, default_edges, describe, histogram, metric_values, split_groups,
    MetricComparison, DEFAULT_CUT, DEFAULT_HISTOGRAM_BINS,
};
use crate::ingest::{
    infer_utc_offset, load_course_tables, read_answer_log, read_login_log, reconcile_logins,
    write_normalized_events, AnswerLog, LoadedTables, LoginLog, LoginStamp, OffsetEstimate,
    RejectSummary, TableError, TablePaths,
};
use crate::metrics::{
    compute_class_metrics, validity_report, ClassMetrics, DEFAULT_COMPARISON_METRICS,
    STUDENT_METRICS,
};
use crate::session::{
    index_activity, sessionize, Scope, Threshold, UserActivity, DEFAULT_THRESHOLD_HOURS,
};
use crate::synth::{
    generate_course, write_atomic, write_logs, GeneratorParams, InvalidParams, GROUND_TRUTH_FILE,
};

#[derive(Debug, Parser)]
#[command(
    name = "wwlog",
    version,
    about = "Time-on-task and behaviour metrics from WeBWorK logs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize events and write per-assignment and whole-course sessions.
    Sessions {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        theta: ThetaArgs,
    },
    /// Sweep the inactivity threshold against LMS hours.
    Calibrate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Per-assignment, per-student and per-problem metrics.
    Metrics {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        theta: ThetaArgs,
    },
    /// Low versus high scorers: group statistics, Cohen's d, plot data.
    Compare {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        theta: ThetaArgs,
        /// Score fraction separating the groups; the boundary goes high.
        #[arg(long, default_value_t = DEFAULT_CUT, value_parser = parse_cut)]
        cut: f64,
        /// Comma-separated metric names.
        #[arg(long, value_delimiter = ',')]
        metrics: Option<Vec<String>>,
    },
    /// Write a synthetic course with known ground truth.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the parameter file.
        #[arg(long)]
        seed: Option<u64>,
        /// JSON parameter file; missing fields take defaults.
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub answer_log: PathBuf,
    #[arg(long)]
    pub login_log: Option<PathBuf>,
    /// Directory holding lms_times.csv, roster.csv, deadlines.csv, weights.csv.
    #[arg(long)]
    pub tables: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Threshold sweep in hours as lo:hi:step.
    #[arg(long, default_value = "0.1:2:0.05", value_parser = parse_grid)]
    pub grid: ThresholdGrid,
    /// Drop students whose LMS hours fall below this multiple of their log hours.
    #[arg(long, default_value_t = DEFAULT_OUTLIER_RATIO, value_parser = parse_ratio)]
    pub ratio: f64,
}

#[derive(Debug, Args)]
pub struct ThetaArgs {
    /// Inactivity threshold in hours, or "calibrate".
    #[arg(long, default_value_t = ThetaChoice::Fixed(DEFAULT_THRESHOLD_HOURS))]
    pub theta: ThetaChoice,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaChoice {
    Fixed(f64),
    Calibrate,
}

impl std::fmt::Display for ThetaChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ThetaChoice::Fixed(h) => write!(f, "{h}"),
            ThetaChoice::Calibrate => f.write_str("calibrate"),
        }
    }
}

impl FromStr for ThetaChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "calibrate" {
            return Ok(ThetaChoice::Calibrate);
        }
        let h: f64 = s
            .parse()
            .map_err(|_| format!("expected hours or \"calibrate\", got {s:?}"))?;
        Threshold::from_hours(h).map_err(|e| e.to_string())?;
        Ok(ThetaChoice::Fixed(h))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn parse_grid(s: &str) -> Result<ThresholdGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, step] = parts[..] else {
        return Err(format!("expected lo:hi:step, got {s:?}"));
    };
    let grid = ThresholdGrid {
        lo: parse_positive(lo)?,
        hi: parse_positive(hi)?,
        step: parse_positive(step)?,
    };
    if grid.lo >= grid.hi {
        return Err(format!("grid lo must be below hi, got {s:?}"));
    }
    Ok(grid)
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    parse_positive(s)
}

fn parse_cut(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("cut must lie strictly between 0 and 1, got {s:?}")),
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Tables(#[from] TableError),
    #[error(transparent)]
    Params(#[from] InvalidParams),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Empty(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Empty(_) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parse `args` (program name first) and run. Returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Sessions { input, theta } => cmd_sessions(&input, &theta),
        Command::Calibrate { input, grid } => cmd_calibrate(&input, &grid),
        Command::Metrics { input, theta } => cmd_metrics(&input, &theta),
        Command::Compare {
            input,
            theta,
            cut,
            metrics,
        } => cmd_compare(&input, &theta, cut, metrics.as_deref()),
        Command::Generate { out, seed, params } => cmd_generate(&out, seed, params.as_deref()),
    }
}

#[derive(Debug, Clone, Serialize)]
struct InputDigest {
    role: &'static str,
    file: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Clone, Serialize)]
struct Provenance {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    inputs: Vec<InputDigest>,
    config: serde_json::Value,
}

struct Inputs {
    answers: AnswerLog,
    logins: LoginLog,
    tables: LoadedTables,
    has_lms: bool,
    offset: OffsetEstimate,
    stamps: Vec<LoginStamp>,
    activity: BTreeMap<String, UserActivity>,
    digests: Vec<InputDigest>,
}

fn read_digested(role: &'static str, path: &Path) -> Result<(Vec<u8>, InputDigest), CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let digest = InputDigest {
        role,
        file: path
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
        bytes: bytes.len(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    };
    Ok((bytes, digest))
}

fn warn_rejects(what: &str, rejects: &RejectSummary) {
    if rejects.count > 0 {
        eprintln!("warning: {} malformed {what} line(s)", rejects.count);
        for (line, reason) in &rejects.samples {
            eprintln!("  line {line}: {reason}");
        }
    }
}

fn load_inputs(args: &InputArgs) -> Result<Inputs, CliError> {
    let mut digests = Vec::new();
    let (bytes, d) = read_digested("answer_log", &args.answer_log)?;
    digests.push(d);
    let answers = read_answer_log(&bytes[..]).map_err(io_err(&args.answer_log))?;
    warn_rejects("answer log", &answers.rejects);

    let logins = match &args.login_log {
        Some(path) => {
            let (bytes, d) = read_digested("login_log", path)?;
            digests.push(d);
            read_login_log(&bytes[..]).map_err(io_err(path))?
        }
        None => LoginLog::default(),
    };
    warn_rejects("login log", &logins.rejects);

    let paths = match &args.tables {
        Some(dir) if !dir.is_dir() => {
            return Err(CliError::Config(format!(
                "tables directory {} does not exist",
                dir.display()
            )))
        }
        Some(dir) => TablePaths::in_dir(dir),
        None => TablePaths::default(),
    };
    for (role, path) in [
        ("lms", &paths.lms),
        ("roster", &paths.roster),
        ("deadlines", &paths.deadlines),
        ("weights", &paths.weights),
    ] {
        if let Some(p) = path {
            digests.push(read_digested(role, p)?.1);
        }
    }
    let tables = load_course_tables(&paths)?;
    for issue in &tables.issues {
        eprintln!("warning: {issue}");
    }

    let offset = infer_utc_offset(&answers.events)
        .ok_or_else(|| CliError::Empty("answer log holds no valid submissions".into()))?;
    if offset.is_inconsistent() {
        eprintln!(
            "warning: {} of {} events disagree with the inferred clock offset {} s",
            offset.disagreeing, offset.events, offset.offset_seconds
        );
    }
    let stamps = reconcile_logins(&logins.events, offset.offset_seconds);
    let activity = index_activity(&answers.events, &stamps);
    Ok(Inputs {
        answers,
        logins,
        has_lms: paths.lms.is_some(),
        tables,
        offset,
        stamps,
        activity,
        digests,
    })
}

fn grid_thresholds(grid: &ThresholdGrid) -> Result<Vec<Threshold>, CliError> {
    grid.values()
        .into_iter()
        .map(|h| Threshold::from_hours(h).map_err(|e| CliError::Config(e.to_string())))
        .collect()
}

fn run_calibration(inputs: &Inputs, grid: &GridArgs) -> Result<CalibrationResult, CliError> {
    if !inputs.has_lms {
        return Err(CliError::Config(format!(
            "calibration needs {} in the --tables directory",
            crate::ingest::LMS_FILE
        )));
    }
    let thresholds = grid_thresholds(&grid.grid)?;
    calibrate(
        &inputs.activity,
        &inputs.tables.tables.lms_hours,
        &thresholds,
        grid.ratio,
    )
    .map_err(|e| match e {
        CalibrationError::EmptyGrid => CliError::Config(e.to_string()),
        CalibrationError::NoValidRows => CliError::Empty(e.to_string()),
    })
}

fn resolve_theta(
    inputs: &Inputs,
    args: &ThetaArgs,
) -> Result<(Threshold, Option<CalibrationResult>), CliError> {
    match args.theta {
        ThetaChoice::Fixed(h) => Ok((
            Threshold::from_hours(h).map_err(|e| CliError::Config(e.to_string()))?,
            None,
        )),
        ThetaChoice::Calibrate => {
            let result = run_calibration(inputs, &args.grid)?;
            let t = Threshold::from_hours(result.theta_star)
                .map_err(|e| CliError::Config(e.to_string()))?;
            eprintln!("calibrated theta_star = {} h", result.theta_star);
            Ok((t, Some(result)))
        }
    }
}

fn theta_config(args: &ThetaArgs, chosen: Threshold) -> serde_json::Value {
    json!({
        "theta": args.theta.to_string(),
        "theta_hours": chosen.hours(),
        "grid": args.grid.grid,
        "ratio": args.grid.ratio,
    })
}

fn provenance(command: &'static str, inputs: &Inputs, config: serde_json::Value) -> Provenance {
    Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        inputs: inputs.digests.clone(),
        config,
    }
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn emit(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    write_atomic(&path, bytes).map_err(io_err(&path))
}

fn emit_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
    bytes.push(b'\n');
    emit(dir, name, &bytes)
}

fn csv_table(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    answer_lines: usize,
    answer_events: usize,
    answer_rejects: &'a RejectSummary,
    login_lines: usize,
    login_events: usize,
    login_skipped: usize,
    login_rejects: &'a RejectSummary,
    offset: OffsetEstimate,
    table_issues: Vec<String>,
}

fn ingest_summary(inputs: &Inputs) -> IngestSummary<'_> {
    IngestSummary {
        answer_lines: inputs.answers.lines,
        answer_events: inputs.answers.events.len(),
        answer_rejects: &inputs.answers.rejects,
        login_lines: inputs.logins.lines,
        login_events: inputs.logins.events.len(),
        login_skipped: inputs.logins.skipped,
        login_rejects: &inputs.logins.rejects,
        offset: inputs.offset,
        table_issues: inputs
            .tables
            .issues
            .iter()
            .map(ToString::to_string)
            .collect(),
    }
}

fn cmd_sessions(args: &InputArgs, theta: &ThetaArgs) -> Result<(), CliError> {
    let inputs = load_inputs(args)?;
    let (threshold, _) = resolve_theta(&inputs, theta)?;
    prepare_out(&args.out)?;

    let mut events = Vec::new();
    write_normalized_events(
        &mut events,
        &inputs.answers.events,
        &inputs.logins.events,
        inputs.offset.offset_seconds,
    )
    .expect("in-memory write");
    emit(&args.out, "events.jsonl", &events)?;

    let mut rows = Vec::new();
    let mut assignment_sessions = 0usize;
    let mut course_sessions = 0usize;
    for (user, act) in &inputs.activity {
        let mut scopes: Vec<Scope> = act
            .submissions
            .keys()
            .map(|s| Scope::Assignment(s.clone()))
            .collect();
        scopes.push(Scope::WholeCourse);
        for scope in scopes {
            let whole = scope == Scope::WholeCourse;
            for s in sessionize(&act.stream(user, &scope), threshold) {
                // Logins join every set's stream; a set's sessions are the
                // ones holding a submission to it.
                if !whole && s.submission_count == 0 {
                    continue;
                }
                if whole {
                    course_sessions += 1;
                } else {
                    assignment_sessions += 1;
                }
                rows.push(vec![
                    user.clone(),
                    scope.label().to_string(),
                    s.start_epoch.to_string(),
                    s.end_epoch.to_string(),
                    s.event_count.to_string(),
                    num(s.length_hours()),
                ]);
            }
        }
    }
    emit(
        &args.out,
        "sessions.csv",
        &csv_table(
            &[
                "user_id",
                "scope",
                "start_epoch",
                "end_epoch",
                "events",
                "length_hours",
            ],
            rows,
        ),
    )?;

    let report = json!({
        "provenance": provenance("sessions", &inputs, theta_config(theta, threshold)),
        "ingest": ingest_summary(&inputs),
        "users": inputs.activity.len(),
        "assignment_sessions": assignment_sessions,
        "course_sessions": course_sessions,
    });
    emit_json(&args.out, "sessions_report.json", &report)?;

    println!(
        "answer events: {} ({} rejected); logins: {} ({} skipped, {} rejected); offset {} s",
        inputs.answers.events.len(),
        inputs.answers.rejects.count,
        inputs.stamps.len(),
        inputs.logins.skipped,
        inputs.logins.rejects.count,
        inputs.offset.offset_seconds
    );
    println!(
        "users: {}; sessions at theta {} h: {} per assignment, {} whole course",
        inputs.activity.len(),
        threshold.hours(),
        assignment_sessions,
        course_sessions
    );
    Ok(())
}

fn cmd_calibrate(args: &InputArgs, grid: &GridArgs) -> Result<(), CliError> {
    let inputs = load_inputs(args)?;
    let result = run_calibration(&inputs, grid)?;
    prepare_out(&args.out)?;

    let rows = result
        .sweep
        .iter()
        .map(|r| {
            let fit = r.fit.as_ref();
            vec![
                num(r.theta_hours),
                opt(r.slope),
                opt(fit.map(|f| f.intercept)),
                opt(fit.map(|f| f.slope_ci95.0)),
                opt(fit.map(|f| f.slope_ci95.1)),
                opt(fit.and_then(|f| f.pearson_r)),
                num(r.mean_total_hours),
                r.n_users.to_string(),
                r.n_paired.to_string(),
                r.n_retained.to_string(),
            ]
        })
        .collect();
    emit(
        &args.out,
        "sweep.csv",
        &csv_table(
            &[
                "theta_hours",
                "slope",
                "intercept",
                "slope_ci95_low",
                "slope_ci95_high",
                "pearson_r",
                "mean_total_hours",
                "n_users",
                "n_paired",
                "n_retained",
            ],
            rows,
        ),
    )?;
    let config = json!({ "grid": grid.grid, "ratio": grid.ratio });
    let report = json!({
        "provenance": provenance("calibrate", &inputs, config),
        "theta_star": result.theta_star,
        "fit": result.fit_at_star,
        "outliers": result.outliers_at_star,
        "sweep": result.sweep,
    });
    emit_json(&args.out, "calibration.json", &report)?;

    let fit = &result.fit_at_star;
    println!(
        "theta_star={} slope={:.4} ci95=[{:.4}, {:.4}] r={} n={} outliers={}",
        result.theta_star,
        fit.slope,
        fit.slope_ci95.0,
        fit.slope_ci95.1,
        fit.pearson_r
            .map_or_else(|| "undefined".into(), |r| format!("{r:.4}")),
        fit.n_used,
        result.outliers_at_star.len()
    );
    Ok(())
}

fn class_metrics(inputs: &Inputs, threshold: Threshold) -> Result<ClassMetrics, CliError> {
    let class = compute_class_metrics(
        &inputs.answers.events,
        &inputs.activity,
        &inputs.tables.tables,
        threshold,
    );
    if class.students.is_empty() {
        return Err(CliError::Empty("no students with submissions".into()));
    }
    Ok(class)
}

fn cmd_metrics(args: &InputArgs, theta: &ThetaArgs) -> Result<(), CliError> {
    let inputs = load_inputs(args)?;
    let (threshold, _) = resolve_theta(&inputs, theta)?;
    let class = class_metrics(&inputs, threshold)?;
    prepare_out(&args.out)?;

    let rows = class
        .assignments
        .iter()
        .map(|r| {
            vec![
                r.user_id.clone(),
                r.set_id.clone(),
                num(r.total_hours),
                r.session_count.to_string(),
                opt(r.mean_session_hours),
                num(r.first_last_submission_days),
                opt(r.mean_between_session_hours),
                opt(r.first_submission_days_before_deadline),
                num(r.points_earned),
                r.problems_attempted.to_string(),
                r.problems_completed.to_string(),
                r.attempts.to_string(),
            ]
        })
        .collect();
    emit(
        &args.out,
        "assignment_metrics.csv",
        &csv_table(
            &[
                "user_id",
                "set_id",
                "total_hours",
                "session_count",
                "mean_session_hours",
                "first_last_submission_days",
                "mean_between_session_hours",
                "first_submission_days_before_deadline",
                "points_earned",
                "problems_attempted",
                "problems_completed",
                "attempts",
            ],
            rows,
        ),
    )?;

    let mut header = vec!["user_id", "self_report", "assignments_active"];
    header.extend_from_slice(STUDENT_METRICS);
    let rows = class
        .students
        .iter()
        .map(|s| {
            let mut row = vec![
                s.user_id.clone(),
                s.self_report.clone().unwrap_or_default(),
                s.assignments_active.to_string(),
            ];
            row.extend(
                STUDENT_METRICS
                    .iter()
                    .map(|m| opt(s.metric(m).expect("listed metric"))),
            );
            row
        })
        .collect();
    emit(&args.out, "student_metrics.csv", &csv_table(&header, rows))?;

    let rows = class
        .summaries
        .iter()
        .map(|a| {
            vec![
                a.set_id.clone(),
                a.students.to_string(),
                opt(a.mean_total_hours),
                a.question_count.to_string(),
            ]
        })
        .collect();
    emit(
        &args.out,
        "assignment_summary.csv",
        &csv_table(
            &["set_id", "students", "mean_total_hours", "question_count"],
            rows,
        ),
    )?;

    let rows = class
        .difficulty
        .iter()
        .map(|((set, problem), d)| vec![set.clone(), problem.to_string(), num(*d)])
        .collect();
    emit(
        &args.out,
        "difficulty.csv",
        &csv_table(&["set_id", "problem", "difficulty"], rows),
    )?;

    let validity = validity_report(&class);
    let report = json!({
        "provenance": provenance("metrics", &inputs, theta_config(theta, threshold)),
        "students": class.students.len(),
        "assignments": class.summaries.len(),
        "validity": validity,
    });
    emit_json(&args.out, "metrics_report.json", &report)?;

    println!(
        "students: {}; assignments: {}; theta {} h",
        class.students.len(),
        class.summaries.len(),
        threshold.hours()
    );
    println!(
        "r(score, hours) = {}; r(questions, class hours) = {}",
        opt(validity.score_vs_hours_r),
        opt(validity.hours_vs_questions_r)
    );
    Ok(())
}

fn cmd_compare(
    args: &InputArgs,
    theta: &ThetaArgs,
    cut: f64,
    metrics: Option<&[String]>,
) -> Result<(), CliError> {
    let names: Vec<&str> = match metrics {
        Some(list) => list
            .iter()
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .collect(),
        None => DEFAULT_COMPARISON_METRICS.to_vec(),
    };
    if names.is_empty() {
        return Err(CliError::Config("--metrics names no metric".into()));
    }
    if let Some(bad) = names.iter().find(|n| !STUDENT_METRICS.contains(n)) {
        return Err(CliError::Config(format!(
            "unknown metric {bad:?}; known: {}",
            STUDENT_METRICS.join(", ")
        )));
    }

    let inputs = load_inputs(args)?;
    let (threshold, _) = resolve_theta(&inputs, theta)?;
    let class = class_metrics(&inputs, threshold)?;
    let split = split_groups(&class.students, cut);
    if split.low.is_empty() || split.high.is_empty() {
        return Err(CliError::Empty(format!(
            "cut {cut} leaves {} low and {} high scorers",
            split.low.len(),
            split.high.len()
        )));
    }
    let table = compare_table(&split, &class.students, &names)
        .map_err(|e| CliError::Config(e.to_string()))?;
    prepare_out(&args.out)?;

    let rows = table
        .iter()
        .map(|c| {
            vec![
                c.metric.clone(),
                MetricComparison::cell(&c.low),
                MetricComparison::cell(&c.high),
                opt(c.cohens_d),
                c.low.map_or(0, |d| d.n).to_string(),
                c.high.map_or(0, |d| d.n).to_string(),
            ]
        })
        .collect();
    let low_label = format!("ww_below_{cut}");
    let high_label = format!("ww_at_least_{cut}");
    emit(
        &args.out,
        "comparison.csv",
        &csv_table(
            &[
                "metric",
                &low_label,
                &high_label,
                "cohens_d",
                "n_low",
                "n_high",
            ],
            rows,
        ),
    )?;

    let mut hist_rows = Vec::new();
    let mut box_rows = Vec::new();
    for name in &names {
        let low = metric_values(&class.students, &split.low, name).expect("validated");
        let high = metric_values(&class.students, &split.high, name).expect("validated");
        let all: Vec<f64> = low.iter().chain(&high).copied().collect();
        let edges = default_edges(&all, DEFAULT_HISTOGRAM_BINS);
        for (group, values) in [("low", &low), ("high", &high)] {
            let h = histogram(values, &edges).expect("default edges increase");
            for (i, count) in h.counts.iter().enumerate() {
                hist_rows.push(vec![
                    name.to_string(),
                    group.to_string(),
                    num(h.edges[i]),
                    num(h.edges[i + 1]),
                    count.to_string(),
                ]);
            }
            if let Ok(d) = describe(values) {
                box_rows.push(vec![
                    name.to_string(),
                    group.to_string(),
                    d.n.to_string(),
                    num(d.min),
                    num(d.q1),
                    num(d.median),
                    num(d.q3),
                    num(d.max),
                    num(d.mean),
                    opt(d.sd),
                ]);
            }
        }
    }
    emit(
        &args.out,
        "histograms.csv",
        &csv_table(
            &["metric", "group", "bin_low", "bin_high", "count"],
            hist_rows,
        ),
    )?;
    emit(
        &args.out,
        "boxplots.csv",
        &csv_table(
            &[
                "metric", "group", "n", "min", "q1", "median", "q3", "max", "mean", "sd",
            ],
            box_rows,
        ),
    )?;

    let mut config = theta_config(theta, threshold);
    config["cut"] = json!(cut);
    config["metrics"] = json!(names);
    let report = json!({
        "provenance": provenance("compare", &inputs, config),
        "n_low": split.low.len(),
        "n_high": split.high.len(),
        "rows": table,
    });
    emit_json(&args.out, "comparison.json", &report)?;

    println!(
        "{:<28} {:>14} {:>14} {:>9}",
        "metric",
        format!("WW < {cut}"),
        format!("WW >= {cut}"),
        "d"
    );
    for c in &table {
        println!(
            "{:<28} {:>14} {:>14} {:>9}",
            c.metric,
            MetricComparison::cell(&c.low),
            MetricComparison::cell(&c.high),
            c.cohens_d.map_or_else(String::new, |d| format!("{d:.2}"))
        );
    }
    println!("n = {} / {}", split.low.len(), split.high.len());
    Ok(())
}

fn cmd_generate(out: &Path, seed: Option<u64>, params_path: Option<&Path>) -> Result<(), CliError> {
    let mut params = match params_path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            serde_json::from_str::<GeneratorParams>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => GeneratorParams::default(),
    };
    if let Some(seed) = seed {
        params.seed = seed;
    }
    let course = generate_course(&params)?;
    write_logs(&course, out).map_err(io_err(out))?;
    println!("{}", out.join(GROUND_TRUTH_FILE).display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_parsing() {
        assert_eq!("0.95".parse::<ThetaChoice>(), Ok(ThetaChoice::Fixed(0.95)));
        assert_eq!(
            "calibrate".parse::<ThetaChoice>(),
            Ok(ThetaChoice::Calibrate)
        );
        assert!("0".parse::<ThetaChoice>().is_err());
        assert!("-1".parse::<ThetaChoice>().is_err());
        assert!("soon".parse::<ThetaChoice>().is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0.1:2:0.05").unwrap(), ThresholdGrid::default());
        assert!(parse_grid("2:1:0.1").is_err());
        assert!(parse_grid("1:1:0.1").is_err());
        assert!(parse_grid("0.1:2:0").is_err());
        assert!(parse_grid("0.1:2").is_err());
    }

    #[test]
    fn cut_parsing() {
        assert_eq!(parse_cut("0.5"), Ok(0.5));
        assert!(parse_cut("0").is_err());
        assert!(parse_cut("1").is_err());
    }

    #[test]
    fn bad_flags_exit_two() {
        assert_eq!(
            run([
                "wwlog",
                "sessions",
                "--answer-log",
                "a",
                "--out",
                "o",
                "--theta",
                "0"
            ]),
            2
        );
        assert_eq!(run(["wwlog", "frobnicate"]), 2);
        assert_eq!(run(["wwlog", "--help"]), 0);
    }

    #[test]
    fn missing_answer_log_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope");
        let out = dir.path().join("out");
        let code = run([
            "wwlog".as_ref(),
            "sessions".as_ref(),
            "--answer-log".as_ref(),
            missing.as_os_str(),
            "--out".as_ref(),
            out.as_os_str(),
        ]);
        assert_eq!(code, 2);
    }
}
