use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wwlog::synth::GroundTruth;

fn wwlog<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wwlog"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    course: PathBuf,
}

impl Fixture {
    fn new(params: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let params_path = root.join("params.json");
        fs::write(&params_path, params).unwrap();
        let course = root.join("course");
        let out = wwlog(&["generate", "--out", s(&course), "--params", s(&params_path)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        Self {
            _dir: dir,
            root,
            course,
        }
    }

    fn small() -> Self {
        Self::new(
            r#"{"seed": 11, "n_students": 24, "n_assignments": 3, "problems_per_assignment": 6}"#,
        )
    }

    fn args(&self, command: &str, out: &Path) -> Vec<String> {
        [
            command,
            "--answer-log",
            s(&self.course.join("answer_log")),
            "--login-log",
            s(&self.course.join("login.log")),
            "--tables",
            s(&self.course),
            "--out",
            s(out),
        ]
        .map(String::from)
        .to_vec()
    }

    fn truth(&self) -> GroundTruth {
        serde_json::from_slice(&fs::read(self.course.join("ground_truth.json")).unwrap()).unwrap()
    }
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn generate_prints_truth_path_and_is_reproducible() {
    let a = Fixture::small();
    let b = Fixture::small();
    assert_eq!(read_dir_bytes(&a.course), read_dir_bytes(&b.course));

    let out = wwlog(&[
        "generate",
        "--out",
        s(&a.root.join("again")),
        "--seed",
        "11",
    ]);
    assert_eq!(code(&out), 0);
    let printed = String::from_utf8(out.stdout).unwrap();
    assert!(printed.trim().ends_with("ground_truth.json"));
}

#[test]
fn generate_rejects_bad_params() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    fs::write(&params, r#"{"within_gap_margin": 1.0}"#).unwrap();
    let out = wwlog(&[
        "generate",
        "--out",
        s(&dir.path().join("c")),
        "--params",
        s(&params),
    ]);
    assert_eq!(code(&out), 2);
    fs::write(&params, "not json").unwrap();
    let out = wwlog(&[
        "generate",
        "--out",
        s(&dir.path().join("c")),
        "--params",
        s(&params),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn empty_course_generates_but_sessions_exit_one() {
    let fx = Fixture::new(r#"{"n_students": 0}"#);
    assert_eq!(fs::read(fx.course.join("answer_log")).unwrap().len(), 0);
    let out_dir = fx.root.join("out");
    let out = wwlog(&fx.args("sessions", &out_dir));
    assert_eq!(code(&out), 1);
}

#[test]
fn sessions_match_ground_truth() {
    let fx = Fixture::small();
    let out_dir = fx.root.join("sessions");
    let out = wwlog(&fx.args("sessions", &out_dir));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let mut reader = csv::Reader::from_path(out_dir.join("sessions.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap(),
        vec![
            "user_id",
            "scope",
            "start_epoch",
            "end_epoch",
            "events",
            "length_hours"
        ]
    );
    let found: BTreeSet<(String, String, i64, i64, usize)> = reader
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[1] != "*")
        .map(|r| {
            (
                r[0].to_string(),
                r[1].to_string(),
                r[2].parse().unwrap(),
                r[3].parse().unwrap(),
                r[4].parse().unwrap(),
            )
        })
        .collect();
    let truth = fx.truth();
    let planted: BTreeSet<(String, String, i64, i64, usize)> = truth
        .students
        .iter()
        .flat_map(|st| {
            st.assignments.iter().flat_map(move |a| {
                a.sessions.iter().map(move |t| {
                    (
                        st.user_id.clone(),
                        a.set_id.clone(),
                        t.start_epoch,
                        t.end_epoch,
                        t.events,
                    )
                })
            })
        })
        .collect();
    assert_eq!(found, planted);

    let events = fs::read_to_string(out_dir.join("events.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(events.lines().next().unwrap()).unwrap();
    assert!(first.get("kind").is_some());
}

#[test]
fn reruns_are_byte_identical() {
    let fx = Fixture::small();
    for command in ["sessions", "calibrate", "metrics", "compare"] {
        let one = fx.root.join(format!("{command}-1"));
        let two = fx.root.join(format!("{command}-2"));
        assert_eq!(code(&wwlog(&fx.args(command, &one))), 0, "{command}");
        assert_eq!(code(&wwlog(&fx.args(command, &two))), 0, "{command}");
        assert_eq!(read_dir_bytes(&one), read_dir_bytes(&two), "{command}");
    }
}

#[test]
fn reports_carry_provenance() {
    let fx = Fixture::small();
    let out_dir = fx.root.join("m");
    assert_eq!(code(&wwlog(&fx.args("metrics", &out_dir))), 0);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("metrics_report.json")).unwrap()).unwrap();
    let prov = &report["provenance"];
    assert_eq!(prov["command"], "metrics");
    assert_eq!(prov["config"]["theta_hours"], 0.95);
    let inputs = prov["inputs"].as_array().unwrap();
    assert!(inputs.iter().any(|i| i["role"] == "answer_log"));
    assert!(inputs
        .iter()
        .all(|i| i["sha256"].as_str().unwrap().len() == 64));
}

#[test]
fn calibrate_reports_theta_star() {
    let fx = Fixture::small();
    let out_dir = fx.root.join("cal");
    let out = wwlog(&fx.args("calibrate", &out_dir));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("theta_star="));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("calibration.json")).unwrap()).unwrap();
    let theta = report["theta_star"].as_f64().unwrap();
    // within-session gaps stay under 0.475 h; between-session gaps exceed the grid
    assert!((0.475..=2.0).contains(&theta), "{theta}");
    let slope = report["fit"]["slope"].as_f64().unwrap();
    assert!((0.94..=1.06).contains(&slope), "{slope}");
    let sweep = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 39);
}

#[test]
fn one_point_grid_reports_that_point() {
    let fx = Fixture::small();
    let out_dir = fx.root.join("cal1");
    let mut args = fx.args("calibrate", &out_dir);
    args.extend(["--grid", "0.7:0.72:0.05"].map(String::from));
    let out = wwlog(&args);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("theta_star=0.7 "));
}

#[test]
fn calibrate_without_lms_exits_two() {
    let fx = Fixture::small();
    fs::remove_file(fx.course.join("lms_times.csv")).unwrap();
    let out = wwlog(&fx.args("calibrate", &fx.root.join("x")));
    assert_eq!(code(&out), 2);
    let mut args = fx.args("metrics", &fx.root.join("y"));
    args.extend(["--theta", "calibrate"].map(String::from));
    assert_eq!(code(&wwlog(&args)), 2);
}

#[test]
fn bad_configuration_exits_two() {
    let fx = Fixture::small();
    let out_dir = fx.root.join("bad");
    for extra in [
        vec!["--theta", "0"],
        vec!["--theta", "-1"],
        vec!["--grid", "2:1:0.1"],
        vec!["--grid", "0.1:2"],
        vec!["--ratio", "0"],
    ] {
        let mut args = fx.args("sessions", &out_dir);
        args.extend(extra.iter().map(|e| e.to_string()));
        assert_eq!(code(&wwlog(&args)), 2, "{extra:?}");
    }
    let mut args = fx.args("compare", &out_dir);
    args.extend(["--metrics", "not_a_metric"].map(String::from));
    assert_eq!(code(&wwlog(&args)), 2);
    let mut args = fx.args("compare", &out_dir);
    args.extend(["--cut", "1.5"].map(String::from));
    assert_eq!(code(&wwlog(&args)), 2);
}

#[test]
fn missing_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = wwlog(&[
        "sessions",
        "--answer-log",
        s(&dir.path().join("missing")),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));

    let fx = Fixture::small();
    let mut args = fx.args("metrics", &fx.root.join("o"));
    let tables = fx.root.join("no-such-dir");
    args[6] = s(&tables).to_string();
    assert_eq!(code(&wwlog(&args)), 2);
}

#[test]
fn compare_with_empty_low_group_exits_one() {
    let fx = Fixture::small();
    let mut args = fx.args("compare", &fx.root.join("c"));
    args.extend(["--cut", "0.0001"].map(String::from));
    assert_eq!(code(&wwlog(&args)), 1);
}

#[test]
fn compare_single_metric() {
    let fx = Fixture::small();
    let out_dir = fx.root.join("c");
    let mut args = fx.args("compare", &out_dir);
    args.extend(["--metrics", "total_hours"].map(String::from));
    let out = wwlog(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("total_hours,"));
    let d: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
    assert!(d < 0.0);
    for name in ["histograms.csv", "boxplots.csv", "comparison.json"] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
}

#[test]
fn malformed_lines_are_counted_not_fatal() {
    let fx = Fixture::small();
    let log = fx.course.join("answer_log");
    let mut text = fs::read_to_string(&log).unwrap();
    text.push_str("garbage without pipes\n");
    fs::write(&log, text).unwrap();
    let out_dir = fx.root.join("s");
    let out = wwlog(&fx.args("sessions", &out_dir));
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("(1 rejected)"));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("sessions_report.json")).unwrap()).unwrap();
    assert_eq!(report["ingest"]["answer_rejects"]["count"], 1);
}
