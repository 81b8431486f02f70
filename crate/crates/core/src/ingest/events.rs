use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{open, parse_f64, read_csv, with_path, IngestError};

/// SLAM map-initialisation milestones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlamEvent {
    InitSearchStart,
    InitSuccess,
    InitFailure,
}

impl fmt::Display for SlamEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SlamEvent::InitSearchStart => "InitSearchStart",
            SlamEvent::InitSuccess => "InitSuccess",
            SlamEvent::InitFailure => "InitFailure",
        })
    }
}

impl FromStr for SlamEvent {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "InitSearchStart" => Ok(SlamEvent::InitSearchStart),
            "InitSuccess" => Ok(SlamEvent::InitSuccess),
            "InitFailure" => Ok(SlamEvent::InitFailure),
            _ => Err(()),
        }
    }
}

/// Time-ordered initialisation events. Every `InitSuccess` has an
/// `InitSearchStart` before it with no other `InitSuccess` in between.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlamEventLog {
    events: Vec<(f64, SlamEvent)>,
}

impl SlamEventLog {
    /// Validates ordering and the search-start/success pairing.
    pub fn new(events: Vec<(f64, SlamEvent)>) -> Result<Self, IngestError> {
        let mut log = SlamEventLog::default();
        for (i, (t, e)) in events.into_iter().enumerate() {
            log.push(i as u64 + 1, t, e)?;
        }
        Ok(log)
    }

    fn push(&mut self, line: u64, t: f64, event: SlamEvent) -> Result<(), IngestError> {
        if let Some((prev, _)) = self.events.last() {
            if t < *prev {
                return Err(IngestError::NonMonotonicTime { line });
            }
        }
        if event == SlamEvent::InitSuccess {
            let open_search = self
                .events
                .iter()
                .rev()
                .take_while(|(_, e)| *e != SlamEvent::InitSuccess)
                .any(|(_, e)| *e == SlamEvent::InitSearchStart);
            if !open_search {
                return Err(IngestError::InvalidEventSequence {
                    line,
                    reason: "InitSuccess without a preceding InitSearchStart".into(),
                });
            }
        }
        self.events.push((t, event));
        Ok(())
    }

    pub fn events(&self) -> &[(f64, SlamEvent)] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }
}

pub fn parse_slam_events(path: &Path) -> Result<SlamEventLog, IngestError> {
    with_path(path, parse_slam_events_from(open(path)?))
}

pub fn parse_slam_events_from<R: Read>(reader: R) -> Result<SlamEventLog, IngestError> {
    let mut log = SlamEventLog::default();
    read_csv(reader, &["timestamp", "event"], |line, f| {
        let t = parse_f64(f[0], line, "timestamp")?;
        let event = f[1].parse().map_err(|_| IngestError::UnknownEvent {
            line,
            name: f[1].to_string(),
        })?;
        log.push(line, t, event)
    })?;
    Ok(log)
}

pub fn write_slam_events<W: Write>(mut w: W, log: &SlamEventLog) -> std::io::Result<()> {
    writeln!(w, "timestamp,event")?;
    for (t, e) in log.events() {
        writeln!(w, "{t},{e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_body() {
        assert!(parse_slam_events_from("timestamp,event\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn unknown_event() {
        assert!(matches!(
            parse_slam_events_from("timestamp,event\n0,Boom\n".as_bytes()),
            Err(IngestError::UnknownEvent { line: 2, .. })
        ));
    }

    #[test]
    fn reset_path_fixture() {
        let s = "timestamp,event\n1.0,InitSearchStart\n2.5,InitFailure\n3.0,InitSearchStart\n4.5,InitSuccess\n";
        let log = parse_slam_events_from(s.as_bytes()).unwrap();
        assert_eq!(log.len(), 4);
        assert_eq!(log.events()[3], (4.5, SlamEvent::InitSuccess));
        let mut buf = Vec::new();
        write_slam_events(&mut buf, &log).unwrap();
        assert_eq!(parse_slam_events_from(buf.as_slice()).unwrap(), log);
    }

    #[test]
    fn success_needs_search_start() {
        let s = "timestamp,event\n1,InitSearchStart\n2,InitSuccess\n3,InitSuccess\n";
        assert!(matches!(
            parse_slam_events_from(s.as_bytes()),
            Err(IngestError::InvalidEventSequence { line: 4, .. })
        ));
    }
}
