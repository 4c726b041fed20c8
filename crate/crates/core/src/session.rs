//! Activity sessions and time-on-task.
//!
//! A student's submissions and successful logins form an event stream. The
//! stream is cut wherever two consecutive events are more than the
//! inactivity threshold apart; each resulting run is a session whose length
//! is the span from its first to its last event. Time on task is the sum of
//! session lengths.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{AnswerEvent, LoginStamp};

pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// Inactivity threshold used when none is calibrated or given.
pub const DEFAULT_THRESHOLD_HOURS: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("inactivity threshold must be a positive number of hours, got {0}")]
pub struct NonPositiveThreshold(pub f64);

/// Inactivity threshold. Stored in seconds, rounded to the millisecond so
/// that e.g. 0.95 h compares as exactly 3420 s against integer gaps.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold {
    hours: f64,
    seconds: f64,
}

impl Threshold {
    pub fn from_hours(hours: f64) -> Result<Self, NonPositiveThreshold> {
        if !(hours.is_finite() && hours > 0.0) {
            return Err(NonPositiveThreshold(hours));
        }
        let seconds = (hours * SECONDS_PER_HOUR * 1000.0).round() / 1000.0;
        if seconds <= 0.0 {
            return Err(NonPositiveThreshold(hours));
        }
        Ok(Self { hours, seconds })
    }

    pub fn hours(&self) -> f64 {
        self.hours
    }

    pub fn seconds(&self) -> f64 {
        self.seconds
    }

    /// A gap splits two sessions only when strictly longer than the threshold.
    pub fn splits(&self, gap_seconds: i64) -> bool {
        gap_seconds as f64 > self.seconds
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Self::from_hours(DEFAULT_THRESHOLD_HOURS).expect("default threshold is positive")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Scope {
    Assignment(String),
    WholeCourse,
}

impl Scope {
    /// Label used in exported tables; the whole course is written as `*`.
    pub fn label(&self) -> &str {
        match self {
            Scope::Assignment(set) => set,
            Scope::WholeCourse => "*",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EventKind {
    Submission,
    Login,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ActivityEvent {
    pub epoch_seconds: i64,
    pub kind: EventKind,
}

impl ActivityEvent {
    pub fn submission(epoch_seconds: i64) -> Self {
        Self {
            epoch_seconds,
            kind: EventKind::Submission,
        }
    }

    pub fn login(epoch_seconds: i64) -> Self {
        Self {
            epoch_seconds,
            kind: EventKind::Login,
        }
    }
}

/// One student's activity in a scope, sorted by time. Events sharing a
/// second are kept as distinct entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    pub user_id: String,
    pub scope: Scope,
    pub events: Vec<ActivityEvent>,
}

impl EventStream {
    pub fn new(user_id: impl Into<String>, scope: Scope, mut events: Vec<ActivityEvent>) -> Self {
        events.sort();
        Self {
            user_id: user_id.into(),
            scope,
            events,
        }
    }

    pub fn timestamps(&self) -> impl Iterator<Item = i64> + '_ {
        self.events.iter().map(|e| e.epoch_seconds)
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ActivitySession {
    pub start_epoch: i64,
    pub end_epoch: i64,
    pub event_count: usize,
    /// Events in the session that are answer submissions (the rest are
    /// logins).
    pub submission_count: usize,
}

impl ActivitySession {
    pub fn length_seconds(&self) -> i64 {
        self.end_epoch - self.start_epoch
    }

    pub fn length_hours(&self) -> f64 {
        self.length_seconds() as f64 / SECONDS_PER_HOUR
    }
}

/// Stream for one user: submissions in scope plus every successful login of
/// that user. Logins carry no assignment, so they join every assignment
/// scope.
pub fn build_event_stream(
    answers: &[AnswerEvent],
    logins: &[LoginStamp],
    user_id: &str,
    scope: &Scope,
) -> EventStream {
    let submissions = answers
        .iter()
        .filter(|a| a.user_id == user_id)
        .filter(|a| match scope {
            Scope::Assignment(set) => &a.set_id == set,
            Scope::WholeCourse => true,
        })
        .map(|a| ActivityEvent::submission(a.epoch_seconds));
    let user_logins = logins
        .iter()
        .filter(|l| l.success && l.user_id == user_id)
        .map(|l| ActivityEvent::login(l.epoch_seconds));
    EventStream::new(
        user_id,
        scope.clone(),
        submissions.chain(user_logins).collect(),
    )
}

/// Split sorted events into maximal runs whose internal gaps do not exceed
/// the threshold.
pub fn sessionize_events(events: &[ActivityEvent], threshold: Threshold) -> Vec<ActivitySession> {
    let mut sorted;
    let events = if events.windows(2).all(|w| w[0] <= w[1]) {
        events
    } else {
        sorted = events.to_vec();
        sorted.sort();
        &sorted
    };

    let mut sessions: Vec<ActivitySession> = Vec::new();
    for ev in events {
        let is_submission = usize::from(ev.kind == EventKind::Submission);
        match sessions.last_mut() {
            Some(cur) if !threshold.splits(ev.epoch_seconds - cur.end_epoch) => {
                cur.end_epoch = ev.epoch_seconds;
                cur.event_count += 1;
                cur.submission_count += is_submission;
            }
            _ => sessions.push(ActivitySession {
                start_epoch: ev.epoch_seconds,
                end_epoch: ev.epoch_seconds,
                event_count: 1,
                submission_count: is_submission,
            }),
        }
    }
    sessions
}

pub fn sessionize(stream: &EventStream, threshold: Threshold) -> Vec<ActivitySession> {
    sessionize_events(&stream.events, threshold)
}

/// Sum of session lengths, in hours.
pub fn time_on_task(sessions: &[ActivitySession]) -> f64 {
    let seconds: i64 = sessions.iter().map(ActivitySession::length_seconds).sum();
    seconds as f64 / SECONDS_PER_HOUR
}

/// Per-user index of submission times by set and successful login times.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserActivity {
    pub submissions: BTreeMap<String, Vec<i64>>,
    pub logins: Vec<i64>,
}

impl UserActivity {
    pub fn stream(&self, user_id: &str, scope: &Scope) -> EventStream {
        let logins = self.logins.iter().map(|&t| ActivityEvent::login(t));
        let events: Vec<ActivityEvent> = match scope {
            Scope::Assignment(set) => self
                .submissions
                .get(set)
                .into_iter()
                .flatten()
                .map(|&t| ActivityEvent::submission(t))
                .chain(logins)
                .collect(),
            Scope::WholeCourse => self
                .submissions
                .values()
                .flatten()
                .map(|&t| ActivityEvent::submission(t))
                .chain(logins)
                .collect(),
        };
        EventStream::new(user_id, scope.clone(), events)
    }

    /// Time on task over the merged whole-course stream. Interleaved work on
    /// several sets is counted once.
    pub fn course_total_time(&self, threshold: Threshold) -> f64 {
        time_on_task(&sessionize(
            &self.stream("", &Scope::WholeCourse),
            threshold,
        ))
    }
}

/// Index every user appearing in the answers or among successful logins.
pub fn index_activity(
    answers: &[AnswerEvent],
    logins: &[LoginStamp],
) -> BTreeMap<String, UserActivity> {
    let mut users: BTreeMap<String, UserActivity> = BTreeMap::new();
    for a in answers {
        users
            .entry(a.user_id.clone())
            .or_default()
            .submissions
            .entry(a.set_id.clone())
            .or_default()
            .push(a.epoch_seconds);
    }
    for l in logins.iter().filter(|l| l.success) {
        users
            .entry(l.user_id.clone())
            .or_default()
            .logins
            .push(l.epoch_seconds);
    }
    users
}

/// Whole-course time on task for one user's events.
pub fn course_total_time(
    answers: &[AnswerEvent],
    logins: &[LoginStamp],
    user_id: &str,
    threshold: Threshold,
) -> f64 {
    time_on_task(&sessionize(
        &build_event_stream(answers, logins, user_id, &Scope::WholeCourse),
        threshold,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_answer_line;

    fn theta(h: f64) -> Threshold {
        Threshold::from_hours(h).unwrap()
    }

    fn subs(ts: &[i64]) -> Vec<ActivityEvent> {
        ts.iter().map(|&t| ActivityEvent::submission(t)).collect()
    }

    fn answer(user: &str, set: &str, epoch: i64) -> AnswerEvent {
        let mut ev =
            parse_answer_line(&format!("[Fri Dec 02 23:01:13 2016] |{user}|{set}|1|1 1 x"))
                .unwrap();
        ev.epoch_seconds = epoch;
        ev
    }

    fn login(user: &str, epoch: i64) -> LoginStamp {
        LoginStamp {
            user_id: user.into(),
            epoch_seconds: epoch,
            success: true,
        }
    }

    #[test]
    fn threshold_rejects_non_positive() {
        assert!(Threshold::from_hours(0.0).is_err());
        assert!(Threshold::from_hours(-1.0).is_err());
        assert!(Threshold::from_hours(f64::NAN).is_err());
        assert!(Threshold::from_hours(1e-9).is_err());
        assert_eq!(theta(0.95).seconds(), 3420.0);
    }

    #[test]
    fn splits_only_on_gap_above_threshold() {
        let sessions = sessionize_events(&subs(&[0, 600, 1800, 12000]), theta(0.95));
        assert_eq!(sessions.len(), 2);
        assert_eq!((sessions[0].start_epoch, sessions[0].end_epoch), (0, 1800));
        assert_eq!(
            (sessions[1].start_epoch, sessions[1].end_epoch),
            (12000, 12000)
        );
        assert_eq!(sessions[0].length_hours(), 0.5);
        assert_eq!(sessions[1].length_hours(), 0.0);
        assert_eq!(time_on_task(&sessions), 0.5);
    }

    #[test]
    fn gap_equal_to_threshold_stays_together() {
        let sessions = sessionize_events(&subs(&[0, 3420]), theta(0.95));
        assert_eq!(sessions.len(), 1);
        let sessions = sessionize_events(&subs(&[0, 3421]), theta(0.95));
        assert_eq!(sessions.len(), 2);
    }

    #[test]
    fn single_event_and_large_threshold() {
        let one = sessionize_events(&subs(&[42]), theta(0.95));
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].length_seconds(), 0);
        let all = sessionize_events(&subs(&[0, 5000, 20000, 20001]), theta(10.0));
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].length_seconds(), 20001);
        assert_eq!(all[0].event_count, 4);
    }

    #[test]
    fn same_second_events_never_split() {
        let s = sessionize_events(&subs(&[10, 10, 10]), theta(0.1));
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].event_count, 3);
    }

    #[test]
    fn time_on_task_edges() {
        assert_eq!(time_on_task(&[]), 0.0);
        let s = ActivitySession {
            start_epoch: 0,
            end_epoch: 3600,
            event_count: 2,
            submission_count: 2,
        };
        assert_eq!(time_on_task(&[s]), 1.0);
    }

    #[test]
    fn assignment_scope_takes_all_logins() {
        let answers = vec![
            answer("u", "A", 100),
            answer("u", "A", 200),
            answer("u", "B", 300),
        ];
        let logins = vec![login("u", 50), login("u", 250), login("v", 60)];
        let a = build_event_stream(&answers, &logins, "u", &Scope::Assignment("A".into()));
        assert_eq!(a.timestamps().collect::<Vec<_>>(), vec![50, 100, 200, 250]);
        let all = build_event_stream(&answers, &logins, "u", &Scope::WholeCourse);
        assert_eq!(
            all.timestamps().collect::<Vec<_>>(),
            vec![50, 100, 200, 250, 300]
        );
        let nobody = build_event_stream(&answers, &logins, "w", &Scope::WholeCourse);
        assert!(nobody.is_empty());
    }

    #[test]
    fn failed_logins_are_not_activity() {
        let logins = vec![LoginStamp {
            user_id: "u".into(),
            epoch_seconds: 5,
            success: false,
        }];
        assert!(build_event_stream(&[], &logins, "u", &Scope::WholeCourse).is_empty());
        assert!(index_activity(&[], &logins).is_empty());
    }

    #[test]
    fn interleaved_sitting_counts_once_for_the_course() {
        // Two sets worked alternately in one sitting, 10 minutes apart.
        let answers = vec![
            answer("u", "A", 0),
            answer("u", "B", 600),
            answer("u", "A", 1200),
            answer("u", "B", 1800),
            answer("u", "A", 2400),
            answer("u", "B", 3000),
        ];
        let t = theta(0.95);
        let per_set: f64 = ["A", "B"]
            .iter()
            .map(|s| {
                time_on_task(&sessionize(
                    &build_event_stream(&answers, &[], "u", &Scope::Assignment(s.to_string())),
                    t,
                ))
            })
            .sum();
        let course = course_total_time(&answers, &[], "u", t);
        // A: 0..2400, B: 600..3000, course: 0..3000
        assert_eq!(per_set, 4800.0 / 3600.0);
        assert_eq!(course, 3000.0 / 3600.0);
        assert!(course < per_set);
    }

    #[test]
    fn course_total_with_one_assignment_and_no_events() {
        let answers = vec![answer("u", "A", 0), answer("u", "A", 900)];
        let t = theta(0.95);
        let set_total = time_on_task(&sessionize(
            &build_event_stream(&answers, &[], "u", &Scope::Assignment("A".into())),
            t,
        ));
        assert_eq!(course_total_time(&answers, &[], "u", t), set_total);
        assert_eq!(course_total_time(&answers, &[], "nobody", t), 0.0);
    }

    #[test]
    fn index_matches_direct_streams() {
        let answers = vec![
            answer("u", "A", 100),
            answer("u", "B", 300),
            answer("v", "A", 10),
        ];
        let logins = vec![login("u", 50), login("v", 5)];
        let index = index_activity(&answers, &logins);
        for (user, activity) in &index {
            for scope in [
                Scope::Assignment("A".into()),
                Scope::Assignment("B".into()),
                Scope::WholeCourse,
            ] {
                assert_eq!(
                    activity.stream(user, &scope),
                    build_event_stream(&answers, &logins, user, &scope)
                );
            }
        }
    }

    #[test]
    fn submission_counts_track_event_kinds() {
        let events = vec![
            ActivityEvent::login(0),
            ActivityEvent::submission(60),
            ActivityEvent::login(9000),
        ];
        let s = sessionize_events(&events, theta(0.95));
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].event_count, s[0].submission_count), (2, 1));
        assert_eq!((s[1].event_count, s[1].submission_count), (1, 0));
    }
}
