//! Per-problem, per-assignment and per-student behaviour metrics.
//!
//! Undefined quantities (a rate over zero hours, persistence for a student
//! who never left a problem unfinished, deadline lead without a deadline) are
//! `None`, never zero.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::calibration::{pearson, PairedSample};
use crate::cohort::{describe, Description};
use crate::ingest::{AnswerEvent, CourseTables};
use crate::session::{sessionize, time_on_task, ActivitySession, Scope, Threshold, UserActivity};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
const SECONDS_PER_HOUR: f64 = 3_600.0;

/// `(set_id, problem_number)`
pub type ProblemKey = (String, u32);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemOutcome {
    pub user_id: String,
    pub set_id: String,
    pub problem_number: u32,
    pub attempts: usize,
    pub first_epoch: i64,
    pub last_epoch: i64,
    pub best_fraction: f64,
    /// Some submission had every blank correct.
    pub completed: bool,
}

impl ProblemOutcome {
    pub fn key(&self) -> ProblemKey {
        (self.set_id.clone(), self.problem_number)
    }

    pub fn span_hours(&self) -> f64 {
        (self.last_epoch - self.first_epoch) as f64 / SECONDS_PER_HOUR
    }
}

/// Roll submissions up per `(user, set, problem)`, ordered by that key.
pub fn problem_outcomes(answers: &[AnswerEvent]) -> Vec<ProblemOutcome> {
    let mut by_key: BTreeMap<(&str, &str, u32), ProblemOutcome> = BTreeMap::new();
    for a in answers {
        let fraction = a.fraction_correct();
        let complete = a.fully_correct();
        by_key
            .entry((&a.user_id, &a.set_id, a.problem_number))
            .and_modify(|o| {
                o.attempts += 1;
                o.first_epoch = o.first_epoch.min(a.epoch_seconds);
                o.last_epoch = o.last_epoch.max(a.epoch_seconds);
                o.best_fraction = o.best_fraction.max(fraction);
                o.completed |= complete;
            })
            .or_insert_with(|| ProblemOutcome {
                user_id: a.user_id.clone(),
                set_id: a.set_id.clone(),
                problem_number: a.problem_number,
                attempts: 1,
                first_epoch: a.epoch_seconds,
                last_epoch: a.epoch_seconds,
                best_fraction: fraction,
                completed: complete,
            });
    }
    by_key.into_values().collect()
}

/// Percentage of a problem's attempters who never completed it (0–100).
/// Problems nobody attempted are absent.
pub fn difficulty_ratings(outcomes: &[ProblemOutcome]) -> BTreeMap<ProblemKey, f64> {
    let mut tally: BTreeMap<ProblemKey, (usize, usize)> = BTreeMap::new();
    for o in outcomes {
        let (attempters, failed) = tally.entry(o.key()).or_default();
        *attempters += 1;
        *failed += usize::from(!o.completed);
    }
    tally
        .into_iter()
        .map(|(k, (n, failed))| (k, 100.0 * failed as f64 / n as f64))
        .collect()
}

/// Problems and their point values per assignment: every problem listed in
/// the weights table plus every problem anyone submitted to (weight 1 unless
/// listed).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AssignmentCatalog {
    pub sets: BTreeMap<String, BTreeMap<u32, f64>>,
}

impl AssignmentCatalog {
    pub fn build(outcomes: &[ProblemOutcome], tables: &CourseTables) -> Self {
        let mut sets: BTreeMap<String, BTreeMap<u32, f64>> = BTreeMap::new();
        for ((set, problem), &points) in &tables.weights {
            sets.entry(set.clone())
                .or_default()
                .insert(*problem, points);
        }
        for o in outcomes {
            sets.entry(o.set_id.clone())
                .or_default()
                .entry(o.problem_number)
                .or_insert(1.0);
        }
        Self { sets }
    }

    pub fn weight(&self, set_id: &str, problem: u32) -> f64 {
        self.sets
            .get(set_id)
            .and_then(|p| p.get(&problem))
            .copied()
            .unwrap_or(1.0)
    }

    pub fn question_count(&self, set_id: &str) -> usize {
        self.sets.get(set_id).map_or(0, BTreeMap::len)
    }

    pub fn possible_points(&self, set_id: &str) -> f64 {
        self.sets.get(set_id).map_or(0.0, |p| p.values().sum())
    }

    pub fn total_possible(&self) -> f64 {
        self.sets.values().flat_map(BTreeMap::values).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudentAssignmentMetrics {
    pub user_id: String,
    pub set_id: String,
    pub total_hours: f64,
    /// Sessions containing at least one submission to this set.
    pub session_count: usize,
    pub mean_session_hours: Option<f64>,
    pub first_last_submission_days: f64,
    pub mean_between_session_hours: Option<f64>,
    /// Negative when the first submission came after the deadline.
    pub first_submission_days_before_deadline: Option<f64>,
    pub points_earned: f64,
    pub problems_attempted: usize,
    pub problems_completed: usize,
    pub attempts: usize,
}

/// Metrics for one student on one set.
///
/// `outcomes` are the student's outcomes in the set (non-empty) and
/// `sessions` come from the set-scoped stream. Time on task counts every
/// session of that stream; the session statistics only count sessions with
/// a submission to the set, since logins join every set's stream.
pub fn assignment_metrics(
    outcomes: &[&ProblemOutcome],
    sessions: &[ActivitySession],
    deadline: Option<i64>,
    catalog: &AssignmentCatalog,
) -> StudentAssignmentMetrics {
    let first = outcomes.iter().map(|o| o.first_epoch).min().unwrap_or(0);
    let last = outcomes.iter().map(|o| o.last_epoch).max().unwrap_or(0);
    let working: Vec<&ActivitySession> =
        sessions.iter().filter(|s| s.submission_count > 0).collect();
    let mean_session_hours = (!working.is_empty())
        .then(|| working.iter().map(|s| s.length_hours()).sum::<f64>() / working.len() as f64);
    let mean_between_session_hours = (working.len() >= 2).then(|| {
        let gaps: i64 = working
            .windows(2)
            .map(|w| w[1].start_epoch - w[0].end_epoch)
            .sum();
        gaps as f64 / SECONDS_PER_HOUR / (working.len() - 1) as f64
    });
    let (user_id, set_id) = outcomes
        .first()
        .map(|o| (o.user_id.clone(), o.set_id.clone()))
        .unwrap_or_default();
    let points_earned = outcomes
        .iter()
        .map(|o| catalog.weight(&o.set_id, o.problem_number) * o.best_fraction)
        .sum();

    StudentAssignmentMetrics {
        user_id,
        set_id,
        total_hours: time_on_task(sessions),
        session_count: working.len(),
        mean_session_hours,
        first_last_submission_days: (last - first) as f64 / SECONDS_PER_DAY,
        mean_between_session_hours,
        first_submission_days_before_deadline: deadline
            .map(|d| (d - first) as f64 / SECONDS_PER_DAY),
        points_earned,
        problems_attempted: outcomes.len(),
        problems_completed: outcomes.iter().filter(|o| o.completed).count(),
        attempts: outcomes.iter().map(|o| o.attempts).sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudentAggregate {
    pub user_id: String,
    pub self_report: Option<String>,
    pub assignments_active: usize,
    pub ww_score: Option<f64>,
    pub points_per_hour: Option<f64>,
    pub problems_per_hour: Option<f64>,
    pub mean_difficulty_attempted: Option<f64>,
    /// Mean first-to-last hours on problems attempted but never completed.
    pub persistence_hours: Option<f64>,
    pub persistence_attempts: Option<f64>,
    /// Whole-course time on task (merged stream).
    pub course_hours: f64,
    // Means over the student's active assignments.
    pub mean_total_hours: Option<f64>,
    pub mean_session_count: Option<f64>,
    pub mean_session_hours: Option<f64>,
    pub mean_first_last_days: Option<f64>,
    pub mean_between_session_hours: Option<f64>,
    pub mean_days_before_deadline: Option<f64>,
    pub mean_points: Option<f64>,
    pub mean_problems_attempted: Option<f64>,
    pub mean_attempts: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown metric {0:?}")]
pub struct UnknownMetricName(pub String);

/// Every metric name accepted by [`StudentAggregate::metric`].
pub const STUDENT_METRICS: &[&str] = &[
    "ww_score",
    "points_per_hour",
    "problems_per_hour",
    "difficulty_attempted",
    "persistence_hours",
    "persistence_attempts",
    "total_hours",
    "session_hours",
    "sessions_per_assignment",
    "first_last_days",
    "between_session_hours",
    "days_before_deadline",
    "points_per_assignment",
    "problems_per_assignment",
    "attempts_per_assignment",
    "course_hours",
];

/// Rows of the two group-comparison tables, in order.
pub const DEFAULT_COMPARISON_METRICS: &[&str] = &[
    "points_per_hour",
    "problems_per_hour",
    "difficulty_attempted",
    "persistence_hours",
    "persistence_attempts",
    "total_hours",
    "session_hours",
    "sessions_per_assignment",
    "first_last_days",
    "between_session_hours",
    "days_before_deadline",
];

impl StudentAggregate {
    pub fn metric(&self, name: &str) -> Result<Option<f64>, UnknownMetricName> {
        Ok(match name {
            "ww_score" => self.ww_score,
            "points_per_hour" => self.points_per_hour,
            "problems_per_hour" => self.problems_per_hour,
            "difficulty_attempted" => self.mean_difficulty_attempted,
            "persistence_hours" => self.persistence_hours,
            "persistence_attempts" => self.persistence_attempts,
            "total_hours" => self.mean_total_hours,
            "session_hours" => self.mean_session_hours,
            "sessions_per_assignment" => self.mean_session_count,
            "first_last_days" => self.mean_first_last_days,
            "between_session_hours" => self.mean_between_session_hours,
            "days_before_deadline" => self.mean_days_before_deadline,
            "points_per_assignment" => self.mean_points,
            "problems_per_assignment" => self.mean_problems_attempted,
            "attempts_per_assignment" => self.mean_attempts,
            "course_hours" => Some(self.course_hours),
            other => return Err(UnknownMetricName(other.to_string())),
        })
    }
}

fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Roll one student's per-assignment rows and problem outcomes into the
/// course-level profile. `official_score` overrides the log-derived score.
pub fn student_aggregate(
    user_id: &str,
    rows: &[&StudentAssignmentMetrics],
    outcomes: &[&ProblemOutcome],
    difficulty: &BTreeMap<ProblemKey, f64>,
    catalog: &AssignmentCatalog,
    course_hours: f64,
    roster: Option<&crate::ingest::RosterEntry>,
) -> StudentAggregate {
    let hours: f64 = rows.iter().map(|r| r.total_hours).sum();
    let points: f64 = rows.iter().map(|r| r.points_earned).sum();
    let distinct: BTreeSet<ProblemKey> = outcomes.iter().map(|o| o.key()).collect();
    let incomplete: Vec<&&ProblemOutcome> = outcomes.iter().filter(|o| !o.completed).collect();
    let ww_score = roster
        .and_then(|r| r.official_score)
        .or_else(|| ratio(points, catalog.total_possible()));

    StudentAggregate {
        user_id: user_id.to_string(),
        self_report: roster.and_then(|r| r.self_report.clone()),
        assignments_active: rows.len(),
        ww_score,
        points_per_hour: ratio(points, hours),
        problems_per_hour: ratio(distinct.len() as f64, hours),
        mean_difficulty_attempted: mean_defined(
            distinct.iter().map(|k| difficulty.get(k).copied()),
        ),
        persistence_hours: mean_defined(incomplete.iter().map(|o| Some(o.span_hours()))),
        persistence_attempts: mean_defined(incomplete.iter().map(|o| Some(o.attempts as f64))),
        course_hours,
        mean_total_hours: mean_defined(rows.iter().map(|r| Some(r.total_hours))),
        mean_session_count: mean_defined(rows.iter().map(|r| Some(r.session_count as f64))),
        mean_session_hours: mean_defined(rows.iter().map(|r| r.mean_session_hours)),
        mean_first_last_days: mean_defined(rows.iter().map(|r| Some(r.first_last_submission_days))),
        mean_between_session_hours: mean_defined(rows.iter().map(|r| r.mean_between_session_hours)),
        mean_days_before_deadline: mean_defined(
            rows.iter().map(|r| r.first_submission_days_before_deadline),
        ),
        mean_points: mean_defined(rows.iter().map(|r| Some(r.points_earned))),
        mean_problems_attempted: mean_defined(
            rows.iter().map(|r| Some(r.problems_attempted as f64)),
        ),
        mean_attempts: mean_defined(rows.iter().map(|r| Some(r.attempts as f64))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentSummary {
    pub set_id: String,
    pub students: usize,
    pub mean_total_hours: Option<f64>,
    pub question_count: usize,
}

/// Class mean time per set alongside the set's question count.
pub fn assignment_summaries(
    rows: &[StudentAssignmentMetrics],
    catalog: &AssignmentCatalog,
) -> Vec<AssignmentSummary> {
    let mut by_set: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_set.entry(&r.set_id).or_default().push(r.total_hours);
    }
    by_set
        .into_iter()
        .map(|(set, hours)| AssignmentSummary {
            set_id: set.to_string(),
            students: hours.len(),
            mean_total_hours: mean_defined(hours.iter().map(|&h| Some(h))),
            question_count: catalog.question_count(set),
        })
        .collect()
}

/// Everything derived from the logs at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub theta_hours: f64,
    pub outcomes: Vec<ProblemOutcome>,
    pub difficulty: BTreeMap<ProblemKey, f64>,
    pub catalog: AssignmentCatalog,
    pub assignments: Vec<StudentAssignmentMetrics>,
    pub students: Vec<StudentAggregate>,
    pub summaries: Vec<AssignmentSummary>,
}

/// Full metrics pass. Students are the users with at least one answer
/// submission.
pub fn compute_class_metrics(
    answers: &[AnswerEvent],
    activity: &BTreeMap<String, UserActivity>,
    tables: &CourseTables,
    threshold: Threshold,
) -> ClassMetrics {
    let outcomes = problem_outcomes(answers);
    let difficulty = difficulty_ratings(&outcomes);
    let catalog = AssignmentCatalog::build(&outcomes, tables);

    let mut by_user_set: BTreeMap<(&str, &str), Vec<&ProblemOutcome>> = BTreeMap::new();
    for o in &outcomes {
        by_user_set
            .entry((&o.user_id, &o.set_id))
            .or_default()
            .push(o);
    }

    let empty = UserActivity::default();
    let assignments: Vec<StudentAssignmentMetrics> = by_user_set
        .iter()
        .map(|(&(user, set), outs)| {
            let act = activity.get(user).unwrap_or(&empty);
            let sessions = sessionize(&act.stream(user, &Scope::Assignment(set.into())), threshold);
            assignment_metrics(
                outs,
                &sessions,
                tables.deadlines.get(set).copied(),
                &catalog,
            )
        })
        .collect();

    let mut rows_by_user: BTreeMap<&str, Vec<&StudentAssignmentMetrics>> = BTreeMap::new();
    for r in &assignments {
        rows_by_user.entry(&r.user_id).or_default().push(r);
    }
    let mut outcomes_by_user: BTreeMap<&str, Vec<&ProblemOutcome>> = BTreeMap::new();
    for o in &outcomes {
        outcomes_by_user.entry(&o.user_id).or_default().push(o);
    }
    let students = rows_by_user
        .iter()
        .map(|(&user, rows)| {
            let course_hours = activity
                .get(user)
                .map_or(0.0, |a| a.course_total_time(threshold));
            student_aggregate(
                user,
                rows,
                &outcomes_by_user[user],
                &difficulty,
                &catalog,
                course_hours,
                tables.roster.get(user),
            )
        })
        .collect();
    let summaries = assignment_summaries(&assignments, &catalog);

    ClassMetrics {
        theta_hours: threshold.hours(),
        outcomes,
        difficulty,
        catalog,
        assignments,
        students,
        summaries,
    }
}

/// Cross-checks of the time estimate against other per-student and
/// per-assignment quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    /// Score against mean hours per assignment, across students.
    pub score_vs_hours_r: Option<f64>,
    /// Class mean hours against question count, across assignments.
    pub hours_vs_questions_r: Option<f64>,
    /// Mean hours against mean attempts per assignment, across students.
    pub hours_vs_attempts_r: Option<f64>,
    /// Mean hours per assignment grouped by self-reported time category.
    pub hours_by_self_report: BTreeMap<String, Description>,
}

fn correlation(pairs: impl Iterator<Item = (Option<f64>, Option<f64>)>) -> Option<f64> {
    let xy: Vec<(f64, f64)> = pairs.filter_map(|(x, y)| Some((x?, y?))).collect();
    pearson(&PairedSample::from_xy(&xy)).ok()
}

pub fn validity_report(class: &ClassMetrics) -> ValidityReport {
    let mut by_report: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in &class.students {
        if let (Some(cat), Some(h)) = (&s.self_report, s.mean_total_hours) {
            by_report.entry(cat.clone()).or_default().push(h);
        }
    }
    ValidityReport {
        score_vs_hours_r: correlation(
            class
                .students
                .iter()
                .map(|s| (s.mean_total_hours, s.ww_score)),
        ),
        hours_vs_questions_r: correlation(
            class
                .summaries
                .iter()
                .map(|a| (Some(a.question_count as f64), a.mean_total_hours)),
        ),
        hours_vs_attempts_r: correlation(
            class
                .students
                .iter()
                .map(|s| (s.mean_attempts, s.mean_total_hours)),
        ),
        hours_by_self_report: by_report
            .into_iter()
            .filter_map(|(k, v)| describe(&v).ok().map(|d| (k, d)))
            .collect(),
    }
}
