//! Comma-separated side tables, each with a header row:
//!
//! | file              | columns                                  |
//! |-------------------|------------------------------------------|
//! | `lms_times.csv`   | `user_id,hours`                          |
//! | `roster.csv`      | `user_id,self_report,official_score`     |
//! | `deadlines.csv`   | `set_id,deadline_iso8601`                |
//! | `weights.csv`     | `set_id,problem,points`                  |
//!
//! Bad rows are dropped and reported as [`TableIssue`]s; a duplicated key
//! keeps the last row.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime};
use serde::Serialize;
use thiserror::Error;

pub const LMS_FILE: &str = "lms_times.csv";
pub const ROSTER_FILE: &str = "roster.csv";
pub const DEADLINES_FILE: &str = "deadlines.csv";
pub const WEIGHTS_FILE: &str = "weights.csv";

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RosterEntry {
    pub self_report: Option<String>,
    pub official_score: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CourseTables {
    pub lms_hours: BTreeMap<String, f64>,
    pub roster: BTreeMap<String, RosterEntry>,
    pub deadlines: BTreeMap<String, i64>,
    pub weights: BTreeMap<(String, u32), f64>,
}

impl CourseTables {
    /// Points for a problem; unlisted problems are worth 1.
    pub fn weight(&self, set_id: &str, problem: u32) -> f64 {
        self.weights
            .get(&(set_id.to_string(), problem))
            .copied()
            .unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TablePaths {
    pub lms: Option<PathBuf>,
    pub roster: Option<PathBuf>,
    pub deadlines: Option<PathBuf>,
    pub weights: Option<PathBuf>,
}

impl TablePaths {
    /// Pick up whichever of the standard file names exist in `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        let existing = |name: &str| {
            let p = dir.join(name);
            p.is_file().then_some(p)
        };
        Self {
            lms: existing(LMS_FILE),
            roster: existing(ROSTER_FILE),
            deadlines: existing(DEADLINES_FILE),
            weights: existing(WEIGHTS_FILE),
        }
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("missing table file {0}")]
    MissingFile(PathBuf),
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TableIssue {
    DuplicateKey {
        file: String,
        key: String,
    },
    NonNumericValue {
        file: String,
        line: u64,
        value: String,
    },
    NegativeValue {
        file: String,
        line: u64,
        value: String,
    },
    OutOfRange {
        file: String,
        line: u64,
        value: String,
    },
    BadDate {
        file: String,
        line: u64,
        value: String,
    },
    ShortRow {
        file: String,
        line: u64,
    },
}

impl fmt::Display for TableIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableIssue::DuplicateKey { file, key } => {
                write!(f, "{file}: duplicate key {key:?}, last row wins")
            }
            TableIssue::NonNumericValue { file, line, value } => {
                write!(f, "{file}:{line}: non-numeric value {value:?}")
            }
            TableIssue::NegativeValue { file, line, value } => {
                write!(f, "{file}:{line}: negative value {value:?}")
            }
            TableIssue::OutOfRange { file, line, value } => {
                write!(f, "{file}:{line}: value {value:?} outside [0, 1]")
            }
            TableIssue::BadDate { file, line, value } => {
                write!(f, "{file}:{line}: unparseable deadline {value:?}")
            }
            TableIssue::ShortRow { file, line } => write!(f, "{file}:{line}: too few columns"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadedTables {
    pub tables: CourseTables,
    pub issues: Vec<TableIssue>,
}

/// Deadline as RFC 3339, a naive `YYYY-MM-DDTHH:MM:SS` (read as UTC), or
/// bare epoch seconds.
pub fn parse_deadline(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    s.parse().ok()
}

struct Rows {
    file: String,
    records: Vec<(u64, csv::StringRecord)>,
}

fn read_rows(path: &Path) -> Result<Rows, TableError> {
    if !path.is_file() {
        return Err(TableError::MissingFile(path.to_path_buf()));
    }
    let csv_err = |source| TableError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        records.push((line, rec));
    }
    Ok(Rows {
        file: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        records,
    })
}

fn non_negative(file: &str, line: u64, raw: &str, issues: &mut Vec<TableIssue>) -> Option<f64> {
    let value = raw.to_string();
    match raw.parse::<f64>() {
        Ok(v) if !v.is_finite() => {
            issues.push(TableIssue::NonNumericValue {
                file: file.into(),
                line,
                value,
            });
            None
        }
        Ok(v) if v < 0.0 => {
            issues.push(TableIssue::NegativeValue {
                file: file.into(),
                line,
                value,
            });
            None
        }
        Ok(v) => Some(v),
        Err(_) => {
            issues.push(TableIssue::NonNumericValue {
                file: file.into(),
                line,
                value,
            });
            None
        }
    }
}

fn insert_unique<K: Ord + fmt::Debug, V>(
    map: &mut BTreeMap<K, V>,
    file: &str,
    key: K,
    value: V,
    issues: &mut Vec<TableIssue>,
) {
    let shown = format!("{key:?}");
    if map.insert(key, value).is_some() {
        issues.push(TableIssue::DuplicateKey {
            file: file.into(),
            key: shown,
        });
    }
}

/// Load whichever tables are named in `paths`. A named file that does not
/// exist is an error; an absent entry yields an empty map.
pub fn load_course_tables(paths: &TablePaths) -> Result<LoadedTables, TableError> {
    let mut out = LoadedTables::default();
    let issues = &mut out.issues;

    if let Some(path) = &paths.lms {
        let rows = read_rows(path)?;
        for (line, rec) in &rows.records {
            let (Some(user), Some(hours)) = (rec.get(0), rec.get(1)) else {
                issues.push(TableIssue::ShortRow {
                    file: rows.file.clone(),
                    line: *line,
                });
                continue;
            };
            if let Some(h) = non_negative(&rows.file, *line, hours, issues) {
                insert_unique(
                    &mut out.tables.lms_hours,
                    &rows.file,
                    user.to_string(),
                    h,
                    issues,
                );
            }
        }
    }

    if let Some(path) = &paths.roster {
        let rows = read_rows(path)?;
        for (line, rec) in &rows.records {
            let Some(user) = rec.get(0).filter(|u| !u.is_empty()) else {
                issues.push(TableIssue::ShortRow {
                    file: rows.file.clone(),
                    line: *line,
                });
                continue;
            };
            let self_report = rec.get(1).filter(|s| !s.is_empty()).map(str::to_string);
            let official_score = match rec.get(2).filter(|s| !s.is_empty()) {
                None => None,
                Some(raw) => match non_negative(&rows.file, *line, raw, issues) {
                    Some(v) if v <= 1.0 => Some(v),
                    Some(_) => {
                        issues.push(TableIssue::OutOfRange {
                            file: rows.file.clone(),
                            line: *line,
                            value: raw.to_string(),
                        });
                        continue;
                    }
                    None => continue,
                },
            };
            let entry = RosterEntry {
                self_report,
                official_score,
            };
            insert_unique(
                &mut out.tables.roster,
                &rows.file,
                user.to_string(),
                entry,
                issues,
            );
        }
    }

    if let Some(path) = &paths.deadlines {
        let rows = read_rows(path)?;
        for (line, rec) in &rows.records {
            let (Some(set), Some(raw)) = (rec.get(0), rec.get(1)) else {
                issues.push(TableIssue::ShortRow {
                    file: rows.file.clone(),
                    line: *line,
                });
                continue;
            };
            match parse_deadline(raw) {
                Some(epoch) => insert_unique(
                    &mut out.tables.deadlines,
                    &rows.file,
                    set.to_string(),
                    epoch,
                    issues,
                ),
                None => issues.push(TableIssue::BadDate {
                    file: rows.file.clone(),
                    line: *line,
                    value: raw.to_string(),
                }),
            }
        }
    }

    if let Some(path) = &paths.weights {
        let rows = read_rows(path)?;
        for (line, rec) in &rows.records {
            let (Some(set), Some(problem), Some(points)) = (rec.get(0), rec.get(1), rec.get(2))
            else {
                issues.push(TableIssue::ShortRow {
                    file: rows.file.clone(),
                    line: *line,
                });
                continue;
            };
            let Ok(problem) = problem.parse::<u32>() else {
                issues.push(TableIssue::NonNumericValue {
                    file: rows.file.clone(),
                    line: *line,
                    value: problem.to_string(),
                });
                continue;
            };
            if let Some(p) = non_negative(&rows.file, *line, points, issues) {
                insert_unique(
                    &mut out.tables.weights,
                    &rows.file,
                    (set.to_string(), problem),
                    p,
                    issues,
                );
            }
        }
    }

    Ok(out)
}
