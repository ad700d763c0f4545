use super::{SessionEvent, Topic};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("cannot access log: {0}")]
    Io(#[from] std::io::Error),
    #[error("log is empty (no header line)")]
    MissingHeader,
    #[error("line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

/// First line of every log file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogHeader {
    pub session_id: String,
    pub schema_version: u32,
    pub catalog_id: String,
    /// Snapshot of the session configuration.
    pub config: serde_json::Value,
}

impl LogHeader {
    pub fn new(session_id: &str, catalog_id: &str, config: serde_json::Value) -> Self {
        LogHeader {
            session_id: session_id.to_string(),
            schema_version: LOG_SCHEMA_VERSION,
            catalog_id: catalog_id.to_string(),
            config,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log headers serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub header: LogHeader,
    pub records: Vec<SessionEvent>,
}

impl EventLog {
    pub fn new(header: LogHeader) -> Self {
        EventLog {
            header,
            records: Vec::new(),
        }
    }

    pub fn by_topic(&self, topic: Topic) -> impl Iterator<Item = &SessionEvent> {
        self.records.iter().filter(move |e| e.topic == topic)
    }

    /// Newline-delimited text: header line, then one event per line.
    pub fn to_ndjson(&self) -> String {
        let mut out = self.header.to_line();
        out.push('\n');
        for event in &self.records {
            out.push_str(&event.to_line());
            out.push('\n');
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_ndjson().as_bytes())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_ndjson())
    }

    pub fn from_ndjson(text: &str) -> Result<EventLog, LogError> {
        LogReader::new(text.as_bytes())?.into_log()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EventLog, LogError> {
        LogReader::open(path)?.into_log()
    }
}

/// Streaming, validating log reader.
///
/// Yields events one by one and stops at the first bad record with its
/// 1-based line number.
pub struct LogReader<R> {
    lines: std::io::Lines<BufReader<R>>,
    header: LogHeader,
    line_no: usize,
    last_seq: BTreeMap<Topic, u64>,
    last_media_ms: u64,
    failed: bool,
}

impl LogReader<std::fs::File> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LogError> {
        LogReader::new(std::fs::File::open(path)?)
    }
}

impl<R: Read> LogReader<R> {
    pub fn new(reader: R) -> Result<Self, LogError> {
        let mut lines = BufReader::new(reader).lines();
        let first = lines.next().ok_or(LogError::MissingHeader)??;
        let header: LogHeader = serde_json::from_str(&first).map_err(|e| LogError::Corrupt {
            line: 1,
            reason: format!("bad header: {e}"),
        })?;
        if header.schema_version != LOG_SCHEMA_VERSION {
            return Err(LogError::Corrupt {
                line: 1,
                reason: format!("unsupported schemaVersion {}", header.schema_version),
            });
        }
        Ok(LogReader {
            lines,
            header,
            line_no: 1,
            last_seq: BTreeMap::new(),
            last_media_ms: 0,
            failed: false,
        })
    }

    pub fn header(&self) -> &LogHeader {
        &self.header
    }

    fn corrupt(&mut self, reason: String) -> LogError {
        self.failed = true;
        LogError::Corrupt {
            line: self.line_no,
            reason,
        }
    }

    fn check(&mut self, line: &str) -> Result<SessionEvent, LogError> {
        let event: SessionEvent = serde_json::from_str(line).map_err(|e| self.corrupt(e.to_string()))?;
        if event.session_id != self.header.session_id {
            let reason = format!("event belongs to session {:?}", event.session_id);
            return Err(self.corrupt(reason));
        }
        let last = self.last_seq.get(&event.topic).copied().unwrap_or(0);
        if event.seq <= last {
            let reason = format!("{} seq {} does not follow {}", event.topic, event.seq, last);
            return Err(self.corrupt(reason));
        }
        if event.media_time_ms < self.last_media_ms {
            let reason = format!("media time {} precedes {}", event.media_time_ms, self.last_media_ms);
            return Err(self.corrupt(reason));
        }
        self.last_seq.insert(event.topic, event.seq);
        self.last_media_ms = event.media_time_ms;
        Ok(event)
    }

    pub fn into_log(mut self) -> Result<EventLog, LogError> {
        let mut records = Vec::new();
        for event in &mut self {
            records.push(event?);
        }
        Ok(EventLog {
            header: self.header,
            records,
        })
    }
}

impl<R: Read> Iterator for LogReader<R> {
    type Item = Result<SessionEvent, LogError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(self.check(&line));
        }
    }
}
