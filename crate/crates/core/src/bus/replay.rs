use super::{EventLog, LogError, LogReader, SessionEvent};
use std::io::Read;
use std::str::FromStr;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReplaySpeed {
    /// Inter-event media gaps are divided by this factor.
    Scaled(f64),
    /// Emit back to back.
    Unthrottled,
}

impl FromStr for ReplaySpeed {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" | "max" | "unthrottled" => Ok(ReplaySpeed::Unthrottled),
            _ => {
                let f: f64 = s.parse().map_err(|_| format!("invalid speed {s:?}"))?;
                if f.is_infinite() && f > 0.0 {
                    Ok(ReplaySpeed::Unthrottled)
                } else if f > 0.0 {
                    Ok(ReplaySpeed::Scaled(f))
                } else {
                    Err(format!("speed must be positive, got {s}"))
                }
            }
        }
    }
}

/// Paces emissions against a fixed origin so sleep overshoot does not accumulate.
struct Pacer {
    speed: ReplaySpeed,
    origin: Option<(Instant, u64)>,
}

impl Pacer {
    fn wait_for(&mut self, media_ms: u64) {
        let ReplaySpeed::Scaled(factor) = self.speed else {
            return;
        };
        let (t0, m0) = *self.origin.get_or_insert((Instant::now(), media_ms));
        let offset = Duration::from_secs_f64(media_ms.saturating_sub(m0) as f64 / 1000.0 / factor);
        let deadline = t0 + offset;
        let now = Instant::now();
        if deadline > now {
            std::thread::sleep(deadline - now);
        }
    }
}

/// Re-emits every event of `log` in order, pacing by media time.
pub fn replay<F: FnMut(&SessionEvent)>(log: &EventLog, speed: ReplaySpeed, mut sink: F) -> usize {
    let mut pacer = Pacer { speed, origin: None };
    for event in &log.records {
        pacer.wait_for(event.media_time_ms);
        sink(event);
    }
    log.records.len()
}

/// Streams a log from a reader, aborting at the first corrupt record.
///
/// Events before the corrupt line have already been emitted when the error
/// is returned.
pub fn replay_reader<R: Read, F: FnMut(&SessionEvent)>(
    reader: LogReader<R>,
    speed: ReplaySpeed,
    mut sink: F,
) -> Result<usize, LogError> {
    let mut pacer = Pacer { speed, origin: None };
    let mut n = 0;
    for event in reader {
        let event = event?;
        pacer.wait_for(event.media_time_ms);
        sink(&event);
        n += 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::{to_raw, LogHeader, Topic};
    use serde_json::json;

    fn log_with_gaps(gap: u64, n: u64) -> EventLog {
        EventLog {
            header: LogHeader::new("s", "c", json!(null)),
            records: (0..n)
                .map(|i| SessionEvent {
                    session_id: "s".into(),
                    topic: Topic::WizardRating,
                    seq: i + 1,
                    wall_time_ms: 0,
                    media_time_ms: i * gap,
                    payload: to_raw(&json!({ "i": i })),
                })
                .collect(),
        }
    }

    #[test]
    fn unthrottled_replay_is_identity() {
        let log = log_with_gaps(1000, 3);
        let mut out = Vec::new();
        replay(&log, ReplaySpeed::Unthrottled, |e| out.push(e.clone()));
        assert_eq!(out, log.records);
    }

    #[test]
    fn scaled_replay_halves_gaps() {
        let log = log_with_gaps(200, 3);
        let mut stamps = Vec::new();
        replay(&log, ReplaySpeed::Scaled(2.0), |_| stamps.push(Instant::now()));
        for pair in stamps.windows(2) {
            let gap = pair[1] - pair[0];
            assert!(gap >= Duration::from_millis(90), "gap {gap:?}");
            assert!(gap <= Duration::from_millis(160), "gap {gap:?}");
        }
    }

    #[test]
    fn corrupt_record_aborts_with_position() {
        let mut text = log_with_gaps(0, 2).to_ndjson();
        text.push_str("garbage\n");
        let mut seen = 0;
        let err = replay_reader(
            LogReader::new(text.as_bytes()).unwrap(),
            ReplaySpeed::Unthrottled,
            |_| seen += 1,
        )
        .unwrap_err();
        assert!(matches!(err, LogError::Corrupt { line: 4, .. }));
        assert_eq!(seen, 2);
    }

    #[test]
    fn speed_parsing() {
        assert_eq!("inf".parse::<ReplaySpeed>().unwrap(), ReplaySpeed::Unthrottled);
        assert_eq!("2.0".parse::<ReplaySpeed>().unwrap(), ReplaySpeed::Scaled(2.0));
        assert!("0".parse::<ReplaySpeed>().is_err());
        assert!("-1".parse::<ReplaySpeed>().is_err());
    }
}
