//! Deterministic synthetic courses with known ground truth.
//!
//! Every student works through each assignment in a few sittings. A sitting
//! opens with a `LOGIN OK` line and continues with answer submissions whose
//! spacing never exceeds `within_gap_margin · θ_true`; consecutive sittings
//! (of any assignment) are at least `between_gap_factor · θ_true` apart. With
//! `margin < 1 < factor`, sessionizing at `θ_true` recovers the planted
//! sittings exactly.
//!
//! Two behaviour profiles are planted: low scorers start later, work in
//! shorter and fewer sittings, move faster, and give up sooner on problems
//! they cannot solve.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, FixedOffset};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{AnswerEvent, LoginEvent};

pub const ANSWER_LOG_FILE: &str = "answer_log";
pub const LOGIN_LOG_FILE: &str = "login.log";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

const ANSWER_POOL: &[&str] = &[
    "(sqrt(3)/2)+pi/12",
    "(120^2) / (32*2 )",
    "9*(-9^(1/3))/(1+-9^(1/3))",
    "((h^2d-hd^2)/(h-d))^(1/2)",
    "2.6678",
    "-18",
    "7.006 1/2(10-(1+pi/2)(20/(4+pi)))",
    "3x^2-2x+1",
    "e^(2t)*cos(t)",
    "ln(4)/2",
    "1/(1+x^2)",
    "0.5",
];

const USER_AGENTS: &[&str] = &[
    "Mozilla/5.0 (Macintosh; Intel Mac OS X 10_12) AppleWebKit/602.1.50 (KHTML, like Gecko) Version/10.0 Safari/602.1.50",
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/53.0.2785.143 Safari/537.36",
    "Mozilla/5.0 (X11; Linux x86_64; rv:49.0) Gecko/20100101 Firefox/49.0",
    "Mozilla/5.0 (iPhone; CPU iPhone OS 10_1 like Mac OS X) AppleWebKit/602.2.14 (KHTML, like Gecko) Mobile/14B72",
];

const ID_ALPHABET: &[u8] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
const MIN_WITHIN_GAP_SECONDS: i64 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profile {
    /// Inclusive range of sittings per assignment.
    pub sessions_per_assignment: (u32, u32),
    /// Within-sitting gaps as fractions of the `margin · θ_true` bound.
    pub within_gap_fraction: (f64, f64),
    /// Hours added on top of the `factor · θ_true` floor between sittings.
    pub between_gap_extra_hours: (f64, f64),
    pub start_days_before_deadline: (f64, f64),
    pub attempt_probability: f64,
    pub completion_probability: f64,
    /// Attempts on a problem the student completes, the last one correct.
    pub success_attempts: (u32, u32),
    /// Attempts on a problem the student gives up on.
    pub failure_attempts: (u32, u32),
}

impl Profile {
    pub fn low_scorer() -> Self {
        Self {
            sessions_per_assignment: (1, 3),
            within_gap_fraction: (0.02, 0.35),
            between_gap_extra_hours: (0.25, 20.0),
            start_days_before_deadline: (0.3, 2.0),
            attempt_probability: 0.6,
            completion_probability: 0.45,
            success_attempts: (1, 3),
            failure_attempts: (1, 3),
        }
    }

    pub fn high_scorer() -> Self {
        Self {
            sessions_per_assignment: (3, 7),
            within_gap_fraction: (0.05, 1.0),
            between_gap_extra_hours: (0.25, 16.0),
            start_days_before_deadline: (2.0, 5.0),
            attempt_probability: 0.97,
            completion_probability: 0.9,
            success_attempts: (1, 3),
            failure_attempts: (2, 7),
        }
    }
}

impl Default for Profile {
    fn default() -> Self {
        Self::high_scorer()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub seed: u64,
    pub n_students: usize,
    pub n_assignments: usize,
    pub problems_per_assignment: u32,
    pub blanks_per_problem: (u32, u32),
    pub theta_true_hours: f64,
    pub within_gap_margin: f64,
    pub between_gap_factor: f64,
    /// Server clock as `local-as-UTC − epoch`.
    pub utc_offset_seconds: i64,
    /// Epoch of the course's first day (local midnight).
    pub course_start_epoch: i64,
    pub assignment_spacing_days: f64,
    pub low_scorer_fraction: f64,
    pub direct_access_fraction: f64,
    pub lms_noise_fraction: f64,
    pub failed_login_probability: f64,
    pub low: Profile,
    pub high: Profile,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            seed: 2016,
            n_students: 120,
            n_assignments: 8,
            problems_per_assignment: 12,
            blanks_per_problem: (1, 3),
            theta_true_hours: 0.95,
            within_gap_margin: 0.5,
            between_gap_factor: 2.0,
            utc_offset_seconds: -8 * 3600,
            // 2016-09-12T00:00:00-08:00
            course_start_epoch: 1_473_667_200,
            assignment_spacing_days: 7.0,
            low_scorer_fraction: 0.25,
            direct_access_fraction: 0.1,
            lms_noise_fraction: 0.05,
            failed_login_probability: 0.05,
            low: Profile::low_scorer(),
            high: Profile::high_scorer(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid generator parameters: {0}")]
pub struct InvalidParams(pub String);

fn check(ok: bool, what: &str) -> Result<(), InvalidParams> {
    if ok {
        Ok(())
    } else {
        Err(InvalidParams(what.to_string()))
    }
}

fn prob(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

fn range_ok<T: PartialOrd>(r: (T, T)) -> bool {
    r.0 <= r.1
}

impl Profile {
    fn validate(&self, name: &str) -> Result<(), InvalidParams> {
        let (lo, hi) = self.within_gap_fraction;
        check(
            lo > 0.0 && hi <= 1.0 && lo <= hi,
            &format!("{name}.within_gap_fraction must satisfy 0 < lo <= hi <= 1"),
        )?;
        check(
            self.sessions_per_assignment.0 >= 1 && range_ok(self.sessions_per_assignment),
            &format!("{name}.sessions_per_assignment"),
        )?;
        check(
            self.between_gap_extra_hours.0 >= 0.0 && range_ok(self.between_gap_extra_hours),
            &format!("{name}.between_gap_extra_hours"),
        )?;
        check(
            self.start_days_before_deadline.0 >= 0.0 && range_ok(self.start_days_before_deadline),
            &format!("{name}.start_days_before_deadline"),
        )?;
        check(
            prob(self.attempt_probability),
            &format!("{name}.attempt_probability"),
        )?;
        check(
            prob(self.completion_probability),
            &format!("{name}.completion_probability"),
        )?;
        check(
            self.success_attempts.0 >= 1 && range_ok(self.success_attempts),
            &format!("{name}.success_attempts"),
        )?;
        check(
            self.failure_attempts.0 >= 1 && range_ok(self.failure_attempts),
            &format!("{name}.failure_attempts"),
        )
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), InvalidParams> {
        check(
            self.theta_true_hours.is_finite() && self.theta_true_hours > 0.0,
            "theta_true_hours must be positive",
        )?;
        check(
            self.within_gap_margin > 0.0 && self.within_gap_margin < 1.0,
            "within_gap_margin must lie in (0, 1)",
        )?;
        check(
            self.between_gap_factor > 1.0 && self.between_gap_factor.is_finite(),
            "between_gap_factor must exceed 1",
        )?;
        check(
            self.within_gap_bound_seconds() >= MIN_WITHIN_GAP_SECONDS,
            "within-session gap bound is shorter than 20 s",
        )?;
        check(
            self.n_assignments == 0 || self.problems_per_assignment >= 1,
            "problems_per_assignment must be at least 1",
        )?;
        check(
            self.blanks_per_problem.0 >= 1
                && self.blanks_per_problem.1 <= 8
                && range_ok(self.blanks_per_problem),
            "blanks_per_problem must lie within 1..=8",
        )?;
        check(
            self.assignment_spacing_days > 0.0,
            "assignment_spacing_days must be positive",
        )?;
        check(
            self.course_start_epoch > 0,
            "course_start_epoch must be positive",
        )?;
        check(
            self.utc_offset_seconds.abs() <= 14 * 3600,
            "utc_offset_seconds out of range",
        )?;
        check(prob(self.low_scorer_fraction), "low_scorer_fraction")?;
        check(prob(self.direct_access_fraction), "direct_access_fraction")?;
        check(
            prob(self.lms_noise_fraction) && self.lms_noise_fraction < 0.5,
            "lms_noise_fraction",
        )?;
        check(
            prob(self.failed_login_probability),
            "failed_login_probability",
        )?;
        self.low.validate("low")?;
        self.high.validate("high")
    }

    /// Longest allowed gap inside a sitting.
    pub fn within_gap_bound_seconds(&self) -> i64 {
        (self.within_gap_margin * self.theta_true_hours * 3600.0).floor() as i64
    }

    /// Shortest allowed gap between sittings.
    pub fn between_gap_floor_seconds(&self) -> i64 {
        (self.between_gap_factor * self.theta_true_hours * 3600.0).ceil() as i64
    }

    pub fn set_id(&self, index: usize) -> String {
        format!("Assignment_{:02}", index + 1)
    }

    /// Sunday 23:59 local of the assignment's week.
    pub fn deadline(&self, index: usize) -> i64 {
        self.course_start_epoch
            + ((index + 1) as f64 * self.assignment_spacing_days * 86_400.0).round() as i64
            - 60
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantedGroup {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueSession {
    pub start_epoch: i64,
    pub end_epoch: i64,
    /// Login plus submissions.
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentTruth {
    pub set_id: String,
    pub sessions: Vec<TrueSession>,
    pub hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentTruth {
    pub user_id: String,
    pub group: PlantedGroup,
    pub direct_access: bool,
    pub course_hours: f64,
    pub lms_hours: f64,
    pub assignments: Vec<AssignmentTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub params: GeneratorParams,
    pub offset_seconds: i64,
    pub deadlines: BTreeMap<String, i64>,
    pub students: Vec<StudentTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Course {
    pub answer_lines: Vec<String>,
    pub login_lines: Vec<String>,
    pub truth: GroundTruth,
}

impl Course {
    pub fn lms_hours(&self) -> BTreeMap<String, f64> {
        self.truth
            .students
            .iter()
            .map(|s| (s.user_id.clone(), s.lms_hours))
            .collect()
    }
}

fn seconds_to_hours(s: i64) -> f64 {
    s as f64 / 3600.0
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo >= hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn uniform_int(rng: &mut ChaCha8Rng, (lo, hi): (u32, u32)) -> u32 {
    rng.random_range(lo..=hi)
}

fn user_id(rng: &mut ChaCha8Rng) -> String {
    (0..12)
        .map(|_| ID_ALPHABET[rng.random_range(0..ID_ALPHABET.len())] as char)
        .collect()
}

/// Flags for a wrong submission: at least one blank incorrect.
fn wrong_flags(rng: &mut ChaCha8Rng, blanks: u32) -> String {
    let mut bits: Vec<bool> = (0..blanks).map(|_| rng.random_bool(0.4)).collect();
    let zero = rng.random_range(0..blanks as usize);
    bits[zero] = false;
    bits.into_iter()
        .map(|b| if b { '1' } else { '0' })
        .collect()
}

struct Submission {
    problem: u32,
    flags: String,
}

struct Emitted {
    epoch: i64,
    seq: usize,
    line: String,
}

struct Student {
    user_id: String,
    group: PlantedGroup,
    host: String,
    port: u16,
    credential_source: &'static str,
    user_agent: &'static str,
}

fn local_stamp(epoch: i64, offset: i64) -> chrono::NaiveDateTime {
    DateTime::from_timestamp(epoch + offset, 0)
        .expect("epoch in range")
        .naive_utc()
}

pub fn generate_course(params: &GeneratorParams) -> Result<Course, InvalidParams> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n_students;

    let mut ids = std::collections::BTreeSet::new();
    let mut students = Vec::with_capacity(n);
    let n_low = (params.low_scorer_fraction * n as f64).round() as usize;
    let n_direct = (params.direct_access_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let low: std::collections::BTreeSet<usize> = order[..n_low].iter().copied().collect();
    order.shuffle(&mut rng);
    let direct: std::collections::BTreeSet<usize> = order[..n_direct].iter().copied().collect();

    for i in 0..n {
        let id = loop {
            let candidate = user_id(&mut rng);
            if ids.insert(candidate.clone()) {
                break candidate;
            }
        };
        students.push(Student {
            user_id: id,
            group: if low.contains(&i) {
                PlantedGroup::Low
            } else {
                PlantedGroup::High
            },
            host: format!(
                "10.{}.{}.{}",
                rng.random_range(0..=255),
                rng.random_range(0..=255),
                rng.random_range(1..=254)
            ),
            port: rng.random_range(40000..=60000),
            credential_source: if rng.random_bool(0.8) {
                "LTI"
            } else {
                "params"
            },
            user_agent: USER_AGENTS[rng.random_range(0..USER_AGENTS.len())],
        });
    }

    let blanks: Vec<Vec<u32>> = (0..params.n_assignments)
        .map(|_| {
            (0..params.problems_per_assignment)
                .map(|_| uniform_int(&mut rng, params.blanks_per_problem))
                .collect()
        })
        .collect();

    let within_bound = params.within_gap_bound_seconds();
    let between_floor = params.between_gap_floor_seconds();
    let offset = params.utc_offset_seconds;

    let mut answers: Vec<Emitted> = Vec::new();
    let mut logins: Vec<Emitted> = Vec::new();
    let mut seq = 0usize;
    let mut truths = Vec::with_capacity(n);

    for (i, student) in students.iter().enumerate() {
        let profile = match student.group {
            PlantedGroup::Low => &params.low,
            PlantedGroup::High => &params.high,
        };
        let login_template = LoginEvent {
            local_stamp: local_stamp(params.course_start_epoch, offset),
            user_id: student.user_id.clone(),
            success: true,
            login_type: "normal".into(),
            credential_source: student.credential_source.into(),
            host: student.host.clone(),
            port: Some(student.port),
            user_agent: student.user_agent.into(),
        };

        // Earliest moment the next sitting may begin.
        let mut cursor = params.course_start_epoch;
        let mut assignments = Vec::new();
        for (a, set_blanks) in blanks.iter().enumerate() {
            let set_id = params.set_id(a);
            let mut work: Vec<Vec<Submission>> = Vec::new();
            for (p, &b) in set_blanks.iter().enumerate() {
                if !rng.random_bool(profile.attempt_probability) {
                    continue;
                }
                let problem = p as u32 + 1;
                let mut subs = Vec::new();
                if rng.random_bool(profile.completion_probability) {
                    let k = uniform_int(&mut rng, profile.success_attempts);
                    for _ in 1..k {
                        subs.push(Submission {
                            problem,
                            flags: wrong_flags(&mut rng, b),
                        });
                    }
                    subs.push(Submission {
                        problem,
                        flags: "1".repeat(b as usize),
                    });
                } else {
                    let k = uniform_int(&mut rng, profile.failure_attempts);
                    for _ in 0..k {
                        subs.push(Submission {
                            problem,
                            flags: wrong_flags(&mut rng, b),
                        });
                    }
                }
                work.push(subs);
            }
            // Every student touches every assignment at least once.
            if work.is_empty() {
                let b = set_blanks[0];
                work.push(vec![Submission {
                    problem: 1,
                    flags: wrong_flags(&mut rng, b),
                }]);
            }

            let k =
                (uniform_int(&mut rng, profile.sessions_per_assignment) as usize).min(work.len());
            let mut cuts: Vec<usize> = (1..work.len()).collect();
            cuts.shuffle(&mut rng);
            let mut cuts: Vec<usize> = cuts.into_iter().take(k - 1).collect();
            cuts.sort_unstable();
            cuts.push(work.len());

            let deadline = params.deadline(a);
            let desired = deadline
                - (uniform(&mut rng, profile.start_days_before_deadline) * 86_400.0).round() as i64;
            let mut start = desired.max(cursor);
            let mut sessions = Vec::with_capacity(k);
            let mut from = 0;
            for &to in &cuts {
                if !sessions.is_empty() {
                    let extra = (uniform(&mut rng, profile.between_gap_extra_hours) * 3600.0)
                        .round() as i64;
                    start = cursor.max(start) + extra;
                }
                if rng.random_bool(params.failed_login_probability) {
                    let mut failed = login_template.clone();
                    failed.success = false;
                    let at = start - rng.random_range(5..=60);
                    failed.local_stamp = local_stamp(at, offset);
                    logins.push(Emitted {
                        epoch: at,
                        seq,
                        line: failed.to_line(),
                    });
                    seq += 1;
                }
                let mut login = login_template.clone();
                login.local_stamp = local_stamp(start, offset);
                logins.push(Emitted {
                    epoch: start,
                    seq,
                    line: login.to_line(),
                });
                seq += 1;

                let mut t = start;
                let mut events = 1;
                for sub in work[from..to].iter().flatten() {
                    let frac = uniform(&mut rng, profile.within_gap_fraction);
                    let gap = ((frac * within_bound as f64).round() as i64)
                        .clamp(MIN_WITHIN_GAP_SECONDS, within_bound);
                    t += gap;
                    let ev = AnswerEvent {
                        local_stamp: local_stamp(t, offset),
                        user_id: student.user_id.clone(),
                        set_id: set_id.clone(),
                        problem_number: sub.problem,
                        flags: sub.flags.clone(),
                        epoch_seconds: t,
                        answer_text: ANSWER_POOL[rng.random_range(0..ANSWER_POOL.len())].into(),
                    };
                    answers.push(Emitted {
                        epoch: t,
                        seq,
                        line: ev.to_line(),
                    });
                    seq += 1;
                    events += 1;
                }
                sessions.push(TrueSession {
                    start_epoch: start,
                    end_epoch: t,
                    events,
                });
                cursor = t + between_floor;
                from = to;
            }
            let seconds: i64 = sessions.iter().map(|s| s.end_epoch - s.start_epoch).sum();
            assignments.push(AssignmentTruth {
                set_id,
                sessions,
                hours: seconds_to_hours(seconds),
            });
        }

        let course_seconds: i64 = assignments
            .iter()
            .flat_map(|a| &a.sessions)
            .map(|s| s.end_epoch - s.start_epoch)
            .sum();
        let course_hours = seconds_to_hours(course_seconds);
        let direct_access = direct.contains(&i);
        let factor = if direct_access {
            uniform(&mut rng, (0.05, 0.3))
        } else {
            1.0 + uniform(
                &mut rng,
                (-params.lms_noise_fraction, params.lms_noise_fraction),
            )
        };
        // Four decimals keeps the CSV short; the rounded value is the truth.
        let lms_hours = (course_hours * factor * 1e4).round() / 1e4;
        truths.push(StudentTruth {
            user_id: student.user_id.clone(),
            group: student.group,
            direct_access,
            course_hours,
            lms_hours,
            assignments,
        });
    }

    answers.sort_by_key(|e| (e.epoch, e.seq));
    logins.sort_by_key(|e| (e.epoch, e.seq));
    let deadlines = (0..params.n_assignments)
        .map(|a| (params.set_id(a), params.deadline(a)))
        .collect();

    Ok(Course {
        answer_lines: answers.into_iter().map(|e| e.line).collect(),
        login_lines: logins.into_iter().map(|e| e.line).collect(),
        truth: GroundTruth {
            params: params.clone(),
            offset_seconds: offset,
            deadlines,
            students: truths,
        },
    })
}

fn lines_bytes(lines: &[String]) -> Vec<u8> {
    let mut out = Vec::new();
    for l in lines {
        out.extend_from_slice(l.as_bytes());
        out.push(b'\n');
    }
    out
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> io::Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

/// Write to a temporary sibling, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Write the course as the two logs plus LMS, deadline and weight tables and
/// the ground truth. Returns the paths written.
pub fn write_logs(course: &Course, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let truth = &course.truth;
    let offset = FixedOffset::east_opt(truth.offset_seconds as i32)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "bad offset"))?;

    let lms = csv_bytes(
        &["user_id", "hours"],
        truth
            .students
            .iter()
            .map(|s| [s.user_id.clone(), s.lms_hours.to_string()]),
    )?;
    let deadlines = csv_bytes(
        &["set_id", "deadline_iso8601"],
        truth.deadlines.iter().map(|(set, &epoch)| {
            let local = DateTime::from_timestamp(epoch, 0)
                .expect("epoch in range")
                .with_timezone(&offset);
            [
                set.clone(),
                local.format("%Y-%m-%dT%H:%M:%S%:z").to_string(),
            ]
        }),
    )?;
    let weights = csv_bytes(
        &["set_id", "problem", "points"],
        truth.deadlines.keys().flat_map(|set| {
            (1..=truth.params.problems_per_assignment)
                .map(move |p| [set.clone(), p.to_string(), "1".to_string()])
        }),
    )?;
    let mut truth_json = serde_json::to_vec_pretty(truth).map_err(io::Error::other)?;
    truth_json.push(b'\n');

    let files: [(&str, Vec<u8>); 6] = [
        (ANSWER_LOG_FILE, lines_bytes(&course.answer_lines)),
        (LOGIN_LOG_FILE, lines_bytes(&course.login_lines)),
        (crate::ingest::LMS_FILE, lms),
        (crate::ingest::DEADLINES_FILE, deadlines),
        (crate::ingest::WEIGHTS_FILE, weights),
        (GROUND_TRUTH_FILE, truth_json),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GeneratorParams {
        GeneratorParams {
            n_students: 12,
            n_assignments: 3,
            problems_per_assignment: 5,
            ..Default::default()
        }
    }

    #[test]
    fn empty_course() {
        let course = generate_course(&GeneratorParams {
            n_students: 0,
            ..Default::default()
        })
        .unwrap();
        assert!(course.answer_lines.is_empty());
        assert!(course.login_lines.is_empty());
        assert!(course.truth.students.is_empty());
    }

    #[test]
    fn deterministic() {
        let a = generate_course(&small()).unwrap();
        let b = generate_course(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_course(&GeneratorParams { seed: 7, ..small() }).unwrap();
        assert_ne!(a.answer_lines, c.answer_lines);
    }

    #[test]
    fn rejects_bad_params() {
        for bad in [
            GeneratorParams {
                within_gap_margin: 1.0,
                ..small()
            },
            GeneratorParams {
                between_gap_factor: 1.0,
                ..small()
            },
            GeneratorParams {
                theta_true_hours: 0.0,
                ..small()
            },
            GeneratorParams {
                direct_access_fraction: 1.5,
                ..small()
            },
            GeneratorParams {
                blanks_per_problem: (0, 2),
                ..small()
            },
            GeneratorParams {
                low: Profile {
                    sessions_per_assignment: (3, 1),
                    ..Profile::low_scorer()
                },
                ..small()
            },
        ] {
            assert!(generate_course(&bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn gaps_honour_bounds() {
        let params = small();
        let course = generate_course(&params).unwrap();
        for s in &course.truth.students {
            let mut all: Vec<&TrueSession> =
                s.assignments.iter().flat_map(|a| &a.sessions).collect();
            all.sort_by_key(|t| t.start_epoch);
            for w in all.windows(2) {
                assert!(w[1].start_epoch - w[0].end_epoch >= params.between_gap_floor_seconds());
            }
            assert!(s.course_hours > 0.0);
        }
    }

    #[test]
    fn planted_counts() {
        let params = GeneratorParams {
            n_students: 40,
            ..small()
        };
        let course = generate_course(&params).unwrap();
        let direct = course
            .truth
            .students
            .iter()
            .filter(|s| s.direct_access)
            .count();
        let low = course
            .truth
            .students
            .iter()
            .filter(|s| s.group == PlantedGroup::Low)
            .count();
        assert_eq!(direct, 4);
        assert_eq!(low, 10);
    }

    #[test]
    fn params_json_uses_defaults_for_missing_fields() {
        let p: GeneratorParams = serde_json::from_str(r#"{"seed": 5, "n_students": 3}"#).unwrap();
        assert_eq!(p.seed, 5);
        assert_eq!(p.n_students, 3);
        assert_eq!(p.theta_true_hours, 0.95);
        assert!(serde_json::from_str::<GeneratorParams>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn writes_all_files_without_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let course = generate_course(&small()).unwrap();
        let paths = write_logs(&course, dir.path()).unwrap();
        assert_eq!(paths.len(), 6);
        // second write overwrites in place
        write_logs(&course, dir.path()).unwrap();
        let names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names.len(), 6);
        assert!(names.iter().all(|n| !n.ends_with(".tmp")));
        let answer = fs::read_to_string(dir.path().join(ANSWER_LOG_FILE)).unwrap();
        assert!(answer.ends_with('\n'));
        assert_eq!(answer.lines().count(), course.answer_lines.len());
    }

    #[test]
    fn empty_course_files() {
        let dir = tempfile::tempdir().unwrap();
        let course = generate_course(&GeneratorParams {
            n_students: 0,
            ..Default::default()
        })
        .unwrap();
        write_logs(&course, dir.path()).unwrap();
        assert_eq!(fs::read(dir.path().join(ANSWER_LOG_FILE)).unwrap().len(), 0);
        assert_eq!(fs::read(dir.path().join(LOGIN_LOG_FILE)).unwrap().len(), 0);
        assert_eq!(
            fs::read_to_string(dir.path().join(crate::ingest::LMS_FILE)).unwrap(),
            "user_id,hours\n"
        );
    }
}
