use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use serde::Serialize;

use super::AnswerEvent;

/// Per-event clock differences are snapped to this grid before voting. The
/// bracket date is the log-write time and can trail the submission epoch by
/// several seconds; every real UTC offset is a multiple of 15 minutes.
pub const OFFSET_QUANTUM_SECONDS: i64 = 900;

const DST_SHIFT_SECONDS: i64 = 3600;

/// Seconds since the epoch of a naive stamp read as if it were UTC.
pub fn local_as_utc(stamp: &NaiveDateTime) -> i64 {
    stamp.and_utc().timestamp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OffsetEstimate {
    /// `local-as-UTC − epoch`; e.g. −28800 for a server on UTC−8.
    pub offset_seconds: i64,
    pub events: usize,
    /// Events whose snapped offset differs from the mode by anything other
    /// than a one-hour daylight-saving shift.
    pub disagreeing: usize,
}

impl OffsetEstimate {
    /// More than 5% of events disagree with the mode.
    pub fn is_inconsistent(&self) -> bool {
        self.disagreeing * 20 > self.events
    }
}

fn snap(diff: i64) -> i64 {
    (diff as f64 / OFFSET_QUANTUM_SECONDS as f64).round() as i64 * OFFSET_QUANTUM_SECONDS
}

/// Modal server offset across answer events. Ties go to the smaller offset,
/// which makes the result independent of input order. Returns `None` for an
/// empty slice.
pub fn infer_utc_offset(events: &[AnswerEvent]) -> Option<OffsetEstimate> {
    if events.is_empty() {
        return None;
    }
    let mut votes: BTreeMap<i64, usize> = BTreeMap::new();
    for ev in events {
        *votes
            .entry(snap(local_as_utc(&ev.local_stamp) - ev.epoch_seconds))
            .or_default() += 1;
    }
    let (&mode, _) = votes
        .iter()
        .rev()
        .max_by_key(|&(_, &count)| count)
        .expect("non-empty");
    let disagreeing = votes
        .iter()
        .filter(|&(&off, _)| off != mode && (off - mode).abs() != DST_SHIFT_SECONDS)
        .map(|(_, &count)| count)
        .sum();
    Some(OffsetEstimate {
        offset_seconds: mode,
        events: events.len(),
        disagreeing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_answer_line;
    use chrono::DateTime;

    fn event(local: &str, epoch: i64) -> AnswerEvent {
        parse_answer_line(&format!("[{local}] |U|S|1|1 {epoch} x")).unwrap()
    }

    #[test]
    fn first_sample_line_is_utc_minus_eight() {
        let ev = parse_answer_line(
            "[Fri Dec 02 23:01:13 2016] |AMFFPSX4I202|Assignment_12|10|0 1480748473 (sqrt(3)/2)+pi/12",
        )
        .unwrap();
        assert_eq!(local_as_utc(&ev.local_stamp), 1480719673);
        let est = infer_utc_offset(&[ev]).unwrap();
        assert_eq!(est.offset_seconds, -28800);
        assert!(!est.is_inconsistent());
    }

    #[test]
    fn identity_when_bracket_is_utc_rendering() {
        let epoch = 1480748473;
        let utc = DateTime::from_timestamp(epoch, 0).unwrap().naive_utc();
        let local = utc.format("%a %b %d %H:%M:%S %Y").to_string();
        assert_eq!(
            infer_utc_offset(&[event(&local, epoch)])
                .unwrap()
                .offset_seconds,
            0
        );
    }

    #[test]
    fn epoch_an_hour_ahead() {
        // local-as-UTC is 1480719673
        let ev = event("Fri Dec 02 23:01:13 2016", 1480719673 + 3600);
        assert_eq!(infer_utc_offset(&[ev]).unwrap().offset_seconds, -3600);
    }

    #[test]
    fn write_lag_of_a_few_seconds_is_absorbed() {
        // Fig-1a style: the 23:02:40 stamp trails its epoch by 10 s.
        let ev = event("Fri Dec 02 23:02:40 2016", 1480748550);
        assert_eq!(infer_utc_offset(&[ev]).unwrap().offset_seconds, -28800);
    }

    #[test]
    fn dst_shift_is_not_a_disagreement() {
        let mut events = vec![event("Fri Dec 02 23:01:13 2016", 1480748473); 10];
        events.push(event("Fri Dec 02 23:01:13 2016", 1480748473 - 3600));
        let est = infer_utc_offset(&events).unwrap();
        assert_eq!(est.offset_seconds, -28800);
        assert_eq!(est.disagreeing, 0);
    }

    #[test]
    fn flags_inconsistent_offsets_but_keeps_mode() {
        let mut events = vec![event("Fri Dec 02 23:01:13 2016", 1480748473); 10];
        events.push(event("Fri Dec 02 23:01:13 2016", 1480719673));
        let est = infer_utc_offset(&events).unwrap();
        assert_eq!(est.offset_seconds, -28800);
        assert_eq!(est.disagreeing, 1);
        assert!(est.is_inconsistent());
    }

    #[test]
    fn tie_prefers_smaller_offset_regardless_of_order() {
        let a = event("Fri Dec 02 23:01:13 2016", 1480748473);
        let b = event("Fri Dec 02 23:01:13 2016", 1480719673);
        let fwd = infer_utc_offset(&[a.clone(), b.clone()]).unwrap();
        let rev = infer_utc_offset(&[b, a]).unwrap();
        assert_eq!(fwd, rev);
        assert_eq!(fwd.offset_seconds, -28800);
    }

    #[test]
    fn empty_input() {
        assert!(infer_utc_offset(&[]).is_none());
    }
}
