//! Parsing of WeBWorK answer and login logs, clock reconciliation, and the
//! side tables (LMS hours, roster, deadlines, problem weights).

mod answer;
mod login;
mod offset;
mod tables;

use std::io::{self, BufRead, Write};

use chrono::NaiveDateTime;
use serde::Serialize;
use thiserror::Error;

pub use answer::{parse_answer_line, AnswerEvent};
pub use login::{parse_login_line, LoginEvent, LoginLine};
pub use offset::{infer_utc_offset, local_as_utc, OffsetEstimate, OFFSET_QUANTUM_SECONDS};
pub use tables::{
    load_course_tables, parse_deadline, CourseTables, LoadedTables, RosterEntry, TableError,
    TableIssue, TablePaths, DEADLINES_FILE, LMS_FILE, ROSTER_FILE, WEIGHTS_FILE,
};

const STAMP_FORMAT: &str = "%a %b %d %H:%M:%S %Y";

/// Number of rejected lines kept verbatim for diagnostics.
pub const REJECT_SAMPLE_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed line: {reason}")]
pub struct MalformedLine {
    pub reason: String,
}

impl MalformedLine {
    pub(crate) fn new(reason: impl Into<String>) -> Self {
        Self {
            reason: reason.into(),
        }
    }
}

/// Parse a `[Fri Dec 02 23:01:13 2016]` stamp. Runs of whitespace inside the
/// brackets are collapsed, so `Dec  2` and `Dec 02` both parse.
pub(crate) fn parse_bracket_stamp(s: &str) -> Result<NaiveDateTime, MalformedLine> {
    let inner = s
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| MalformedLine::new("missing bracketed date"))?;
    let collapsed = inner.split_whitespace().collect::<Vec<_>>().join(" ");
    NaiveDateTime::parse_from_str(&collapsed, STAMP_FORMAT)
        .map_err(|e| MalformedLine::new(format!("bad date {inner:?}: {e}")))
}

pub(crate) fn format_stamp(stamp: &NaiveDateTime) -> String {
    stamp.format(STAMP_FORMAT).to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RejectSummary {
    pub count: usize,
    /// `(1-based line number, reason)` for the first few rejects.
    pub samples: Vec<(usize, String)>,
}

impl RejectSummary {
    fn record(&mut self, line_no: usize, err: MalformedLine) {
        self.count += 1;
        if self.samples.len() < REJECT_SAMPLE_LIMIT {
            self.samples.push((line_no, err.reason));
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AnswerLog {
    /// Sorted by epoch; ties keep file order.
    pub events: Vec<AnswerEvent>,
    pub lines: usize,
    pub rejects: RejectSummary,
}

#[derive(Debug, Clone, Default)]
pub struct LoginLog {
    /// Sorted by local stamp; ties keep file order.
    pub events: Vec<LoginEvent>,
    pub lines: usize,
    pub skipped: usize,
    pub rejects: RejectSummary,
}

/// Read a whole answer log. Malformed lines are counted, never fatal.
pub fn read_answer_log<R: BufRead>(reader: R) -> io::Result<AnswerLog> {
    let mut log = AnswerLog::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        log.lines += 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_answer_line(&line) {
            Ok(ev) => log.events.push(ev),
            Err(e) => log.rejects.record(i + 1, e),
        }
    }
    log.events.sort_by_key(|e| e.epoch_seconds);
    Ok(log)
}

pub fn read_login_log<R: BufRead>(reader: R) -> io::Result<LoginLog> {
    let mut log = LoginLog::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        log.lines += 1;
        match parse_login_line(&line) {
            Ok(LoginLine::Event(ev)) => log.events.push(ev),
            Ok(LoginLine::Skip) => log.skipped += 1,
            Err(e) => log.rejects.record(i + 1, e),
        }
    }
    log.events.sort_by_key(|e| e.local_stamp);
    Ok(log)
}

/// A login placed on the epoch axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoginStamp {
    pub user_id: String,
    pub epoch_seconds: i64,
    pub success: bool,
}

/// Convert local login stamps to epoch seconds using a server offset
/// (`local-as-UTC − epoch`, as returned by [`infer_utc_offset`]).
pub fn reconcile_logins(logins: &[LoginEvent], offset_seconds: i64) -> Vec<LoginStamp> {
    logins
        .iter()
        .map(|l| LoginStamp {
            user_id: l.user_id.clone(),
            epoch_seconds: local_as_utc(&l.local_stamp) - offset_seconds,
            success: l.success,
        })
        .collect()
}

/// One line of the normalized events file.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalizedEvent<'a> {
    Answer {
        epoch: i64,
        local: String,
        user_id: &'a str,
        set_id: &'a str,
        problem: u32,
        flags: &'a str,
        fraction_correct: f64,
    },
    Login {
        epoch: i64,
        local: String,
        user_id: &'a str,
        success: bool,
    },
}

impl NormalizedEvent<'_> {
    fn epoch(&self) -> i64 {
        match self {
            NormalizedEvent::Answer { epoch, .. } | NormalizedEvent::Login { epoch, .. } => *epoch,
        }
    }
}

/// Write answers and logins as JSON lines, merged by epoch. At equal epochs
/// answers precede logins and each source keeps its input order.
pub fn write_normalized_events<W: Write>(
    mut out: W,
    answers: &[AnswerEvent],
    logins: &[LoginEvent],
    offset_seconds: i64,
) -> io::Result<()> {
    let mut rows: Vec<NormalizedEvent<'_>> = answers
        .iter()
        .map(|a| NormalizedEvent::Answer {
            epoch: a.epoch_seconds,
            local: a.local_stamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            user_id: &a.user_id,
            set_id: &a.set_id,
            problem: a.problem_number,
            flags: &a.flags,
            fraction_correct: a.fraction_correct(),
        })
        .chain(logins.iter().map(|l| NormalizedEvent::Login {
            epoch: local_as_utc(&l.local_stamp) - offset_seconds,
            local: l.local_stamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            user_id: &l.user_id,
            success: l.success,
        }))
        .collect();
    rows.sort_by_key(NormalizedEvent::epoch);
    for row in &rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
