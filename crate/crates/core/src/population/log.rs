use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::TypeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Birth,
    Death,
}

impl EventKind {
    pub fn code(self) -> &'static str {
        match self {
            EventKind::Birth => "B",
            EventKind::Death => "D",
        }
    }
}

/// A birth (of `type_id`) or a death (of `type_id`) at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub type_id: TypeId,
}

/// Time-ordered events of one trajectory observed on `[0, horizon]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub horizon: f64,
    pub events: Vec<Event>,
}

/// Population size `n` and cumulative type count `S` at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n: u64,
    pub s: u64,
}

impl EventLog {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn births(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Birth)
            .count()
    }

    /// `time,kind,type_id` with kind `B` or `D`, header included.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["time", "kind", "type_id"])?;
        for e in &self.events {
            out.write_record([
                e.time.to_string(),
                e.kind.code().to_owned(),
                e.type_id.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn counts_at(&self, time: f64) -> Result<Counts> {
        Ok(snapshot_counts(self, &[time])?[0])
    }
}

/// `(n, S)` at each query time. Events with time `<= s` are counted at `s`.
pub fn snapshot_counts(log: &EventLog, times: &[f64]) -> Result<Vec<Counts>> {
    if times.windows(2).any(|w| {
        !matches!(
            w[0].partial_cmp(&w[1]),
            Some(Ordering::Less | Ordering::Equal)
        )
    }) {
        return Err(Error::Argument("snapshot times must be sorted".into()));
    }
    if let Some(&bad) = times.iter().find(|&&s| !(0.0..=log.horizon).contains(&s)) {
        return Err(Error::Argument(format!(
            "snapshot time {bad} outside [0, {}]",
            log.horizon
        )));
    }

    let mut out = Vec::with_capacity(times.len());
    let mut counts = Counts { n: 1, s: 1 };
    let mut events = log.events.iter().peekable();
    for &s in times {
        while let Some(e) = events.next_if(|e| e.time <= s) {
            match e.kind {
                EventKind::Birth => {
                    counts.n += 1;
                    counts.s += 1;
                }
                EventKind::Death => counts.n -= 1,
            }
        }
        out.push(counts);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(time: f64, kind: EventKind, type_id: TypeId) -> Event {
        Event {
            time,
            kind,
            type_id,
        }
    }

    fn sample_log() -> EventLog {
        EventLog {
            horizon: 5.0,
            events: vec![
                ev(1.0, EventKind::Birth, 1),
                ev(2.0, EventKind::Birth, 2),
                ev(3.0, EventKind::Death, 0),
            ],
        }
    }

    #[test]
    fn origin_is_single_type() {
        assert_eq!(
            snapshot_counts(&sample_log(), &[0.0]).unwrap(),
            vec![Counts { n: 1, s: 1 }]
        );
    }

    #[test]
    fn event_time_is_included() {
        let log = EventLog {
            horizon: 2.0,
            events: vec![ev(1.0, EventKind::Birth, 1)],
        };
        assert_eq!(log.counts_at(1.0).unwrap(), Counts { n: 2, s: 2 });
    }

    #[test]
    fn step_function_between_events() {
        let counts = snapshot_counts(&sample_log(), &[1.5, 2.5, 3.0, 5.0]).unwrap();
        assert_eq!(
            counts,
            vec![
                Counts { n: 2, s: 2 },
                Counts { n: 3, s: 3 },
                Counts { n: 2, s: 3 },
                Counts { n: 2, s: 3 },
            ]
        );
    }

    #[test]
    fn unsorted_times_rejected() {
        assert!(matches!(
            snapshot_counts(&sample_log(), &[2.0, 1.0]),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            snapshot_counts(&sample_log(), &[6.0]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample_log().write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time,kind,type_id\n1,B,1\n2,B,2\n3,D,0\n"
        );
    }
}
