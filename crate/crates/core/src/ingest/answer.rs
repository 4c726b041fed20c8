//! Answer-log grammar.
//!
//! One line per submission:
//!
//! ```text
//! [Fri Dec 02 23:01:19 2016] |76ARTLFSBF01|Assignment_12|24|1 1480748479 (120^2) / (32*2 )
//! ```
//!
//! The bracket date is server-local time, the pipe-separated fields carry
//! user, set and problem, and the tail holds one correctness bit per answer
//! blank, the submission time in Unix seconds, and the raw answer text.

use chrono::NaiveDateTime;
use serde::Serialize;

use super::{format_stamp, parse_bracket_stamp, MalformedLine};

/// One parsed answer-log record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnswerEvent {
    pub local_stamp: NaiveDateTime,
    pub user_id: String,
    pub set_id: String,
    pub problem_number: u32,
    pub flags: String,
    pub epoch_seconds: i64,
    pub answer_text: String,
}

impl AnswerEvent {
    pub fn correct_blanks(&self) -> usize {
        self.flags.bytes().filter(|&b| b == b'1').count()
    }

    /// Share of answer blanks marked correct, in `[0, 1]`.
    pub fn fraction_correct(&self) -> f64 {
        self.correct_blanks() as f64 / self.flags.len() as f64
    }

    pub fn fully_correct(&self) -> bool {
        self.flags.bytes().all(|b| b == b'1')
    }

    /// Canonical single-space rendering of the record.
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "[{}] |{}|{}|{}|{} {}",
            format_stamp(&self.local_stamp),
            self.user_id,
            self.set_id,
            self.problem_number,
            self.flags,
            self.epoch_seconds
        );
        if !self.answer_text.is_empty() {
            line.push(' ');
            line.push_str(&self.answer_text);
        }
        line
    }
}

fn is_bits(token: &str) -> bool {
    !token.is_empty() && token.bytes().all(|b| b == b'0' || b == b'1')
}

/// Parse one physical answer-log line.
pub fn parse_answer_line(line: &str) -> Result<AnswerEvent, MalformedLine> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut fields = line.splitn(5, '|');
    let (Some(head), Some(user), Some(set), Some(problem), Some(tail)) = (
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
    ) else {
        return Err(MalformedLine::new("fewer than four '|' separators"));
    };

    let local_stamp = parse_bracket_stamp(head.trim())?;
    let user_id = user.trim();
    if user_id.is_empty() {
        return Err(MalformedLine::new("empty user id"));
    }
    let set_id = set.trim();
    if set_id.is_empty() {
        return Err(MalformedLine::new("empty set id"));
    }
    let problem_number: u32 = problem
        .trim()
        .parse()
        .map_err(|_| MalformedLine::new(format!("bad problem number {problem:?}")))?;

    let tail = tail.trim_start_matches([' ', '\t']);
    let (flags, rest) = split_token(tail);
    if !is_bits(flags) {
        return Err(MalformedLine::new(format!(
            "bad correctness flags {flags:?}"
        )));
    }
    let (epoch, rest) = split_token(rest);
    let epoch_seconds: i64 = epoch
        .parse()
        .map_err(|_| MalformedLine::new(format!("bad epoch {epoch:?}")))?;
    if epoch_seconds <= 0 {
        return Err(MalformedLine::new(format!(
            "non-positive epoch {epoch_seconds}"
        )));
    }

    Ok(AnswerEvent {
        local_stamp,
        user_id: user_id.to_string(),
        set_id: set_id.to_string(),
        problem_number,
        flags: flags.to_string(),
        epoch_seconds,
        answer_text: rest.to_string(),
    })
}

/// Split off the first run of non-blank characters; the remainder has its
/// leading spaces and tabs removed.
fn split_token(s: &str) -> (&str, &str) {
    match s.find([' ', '\t']) {
        Some(i) => (&s[..i], s[i..].trim_start_matches([' ', '\t'])),
        None => (s, ""),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE_1: &str =
        "[Fri Dec 02 23:01:13 2016] |AMFFPSX4I202|Assignment_12|10|0 1480748473 (sqrt(3)/2)+pi/12";

    #[test]
    fn parses_single_blank_submission() {
        let ev = parse_answer_line(
            "[Fri Dec 02 23:01:19 2016] |76ARTLFSBF01|Assignment_12|24|1 1480748479 (120^2) / (32*2 )",
        )
        .unwrap();
        assert_eq!(ev.user_id, "76ARTLFSBF01");
        assert_eq!(ev.set_id, "Assignment_12");
        assert_eq!(ev.problem_number, 24);
        assert_eq!(ev.flags, "1");
        assert_eq!(ev.epoch_seconds, 1480748479);
        assert_eq!(ev.answer_text, "(120^2) / (32*2 )");
        assert!(ev.fully_correct());
        assert_eq!(ev.fraction_correct(), 1.0);
    }

    #[test]
    fn multi_blank_answer_keeps_all_entries() {
        let ev = parse_answer_line(
            "[Fri Dec 02 23:04:00 2016] |DYRXI8W6ZC16|Assignment_12|15|00 1480748640 7.006 1/2(10-(1+pi/2)(20/(4+pi)))",
        )
        .unwrap();
        assert_eq!(ev.flags, "00");
        assert_eq!(ev.fraction_correct(), 0.0);
        assert!(!ev.fully_correct());
        assert_eq!(ev.answer_text, "7.006 1/2(10-(1+pi/2)(20/(4+pi)))");
    }

    #[test]
    fn partial_credit_fraction() {
        let ev = parse_answer_line(
            "[Fri Dec 02 23:04:39 2016] |CL9JMXD1PK09|Assignment_12|0|110 1480748679 3/2s^2csc^2(t)",
        )
        .unwrap();
        assert_eq!(ev.problem_number, 0);
        assert!((ev.fraction_correct() - 2.0 / 3.0).abs() < 1e-15);
        assert!(!ev.fully_correct());
    }

    #[test]
    fn tab_separated_tail() {
        let ev =
            parse_answer_line("[Fri Dec 02 23:01:13 2016] |U|S|3|01\t1480748473\tx + 1").unwrap();
        assert_eq!(ev.flags, "01");
        assert_eq!(ev.epoch_seconds, 1480748473);
        assert_eq!(ev.answer_text, "x + 1");
    }

    #[test]
    fn empty_answer_text() {
        let ev = parse_answer_line("[Fri Dec 02 23:01:13 2016] |U|S|3|1 1480748473").unwrap();
        assert_eq!(ev.answer_text, "");
        assert_eq!(
            ev.to_line(),
            "[Fri Dec 02 23:01:13 2016] |U|S|3|1 1480748473"
        );
    }

    #[test]
    fn canonical_line_round_trips() {
        let ev = parse_answer_line(LINE_1).unwrap();
        assert_eq!(ev.to_line(), LINE_1);
    }

    #[test]
    fn rejects_degenerate_lines() {
        for bad in [
            "garbage without pipes",
            "",
            "[Fri Dec 02 23:01:13 2016] |U|S|3",
            "[Fri Dec 02 23:01:13 2016] |U|S|x|1 1480748473 a",
            "[Fri Dec 02 23:01:13 2016] |U|S|3|12 1480748473 a",
            "[Fri Dec 02 23:01:13 2016] |U|S|3| 1480748473 a",
            "[Fri Dec 02 23:01:13 2016] |U|S|3|1 14807x8473 a",
            "[Fri Dec 02 23:01:13 2016] |U|S|3|1 0 a",
            "[Fri Dec 32 23:01:13 2016] |U|S|3|1 1480748473 a",
            "Fri Dec 02 23:01:13 2016 |U|S|3|1 1480748473 a",
            "[Fri Dec 02 23:01:13 2016] ||S|3|1 1480748473 a",
        ] {
            assert!(parse_answer_line(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn space_padded_day_is_accepted() {
        let ev = parse_answer_line("[Fri Dec  2 23:01:13 2016] |U|S|3|1 1480748473 a").unwrap();
        assert_eq!(ev.local_stamp.to_string(), "2016-12-02 23:01:13");
    }
}
