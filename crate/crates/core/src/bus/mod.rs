//! Ordered, topic-based publish/subscribe with an append-only log per session.
//!
//! Every session owns one log. Publishing assigns (or checks) a per-topic
//! sequence number, appends the event to the log (and to the log file, if
//! one is attached) and only then fans it out to subscribers. Subscriber
//! queues are bounded; a full queue blocks the publisher rather than drop.

mod analysis;
mod log;
pub mod payload;
mod replay;

pub use analysis::{
    extract_fragments, summarize_signals, Fragment, FragmentParams, FragmentReason, SignalSummary, StreamPresence,
    StyleHistogram,
};
pub use log::{EventLog, LogError, LogHeader, LogReader, LOG_SCHEMA_VERSION};
pub use replay::{replay, replay_reader, ReplaySpeed};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, SyncSender, TryRecvError};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};
use thiserror::Error;

/// Default per-subscriber queue depth.
pub const DEFAULT_SUBSCRIBER_CAPACITY: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Topic {
    #[serde(rename = "session.control")]
    SessionControl,
    #[serde(rename = "teacher.cue")]
    TeacherCue,
    #[serde(rename = "teacher.act")]
    TeacherAct,
    #[serde(rename = "wizard.rating")]
    WizardRating,
    #[serde(rename = "student.command")]
    StudentCommand,
    #[serde(rename = "affect.state")]
    AffectState,
    #[serde(rename = "norm.eval")]
    NormEval,
    #[serde(rename = "outcome")]
    Outcome,
}

impl Topic {
    pub const ALL: [Topic; 8] = [
        Topic::SessionControl,
        Topic::TeacherCue,
        Topic::TeacherAct,
        Topic::WizardRating,
        Topic::StudentCommand,
        Topic::AffectState,
        Topic::NormEval,
        Topic::Outcome,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Topic::SessionControl => "session.control",
            Topic::TeacherCue => "teacher.cue",
            Topic::TeacherAct => "teacher.act",
            Topic::WizardRating => "wizard.rating",
            Topic::StudentCommand => "student.command",
            Topic::AffectState => "affect.state",
            Topic::NormEval => "norm.eval",
            Topic::Outcome => "outcome",
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Topic {
    type Err = BusError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Topic::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| BusError::UnknownTopic(s.to_string()))
    }
}

/// One logged record. The payload is kept as raw JSON so its bytes survive
/// logging, reloading and replay unchanged.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionEvent {
    pub session_id: String,
    pub topic: Topic,
    pub seq: u64,
    pub wall_time_ms: u64,
    pub media_time_ms: u64,
    pub payload: Box<RawValue>,
}

impl PartialEq for SessionEvent {
    fn eq(&self, other: &Self) -> bool {
        self.session_id == other.session_id
            && self.topic == other.topic
            && self.seq == other.seq
            && self.wall_time_ms == other.wall_time_ms
            && self.media_time_ms == other.media_time_ms
            && self.payload.get() == other.payload.get()
    }
}

impl SessionEvent {
    pub fn payload_as<'a, T: Deserialize<'a>>(&'a self) -> Result<T, serde_json::Error> {
        serde_json::from_str(self.payload.get())
    }

    /// The event as one log line (no trailing newline); also the WebSocket frame body.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("session events serialize")
    }
}

/// An event on its way into the bus.
#[derive(Debug, Clone)]
pub struct EventDraft {
    pub session_id: String,
    pub topic: Topic,
    /// Expected sequence number; assigned by the bus when `None`.
    pub seq: Option<u64>,
    pub media_time_ms: u64,
    /// Wall-clock stamp; taken from the bus clock when `None`.
    pub wall_time_ms: Option<u64>,
    pub payload: Box<RawValue>,
}

impl EventDraft {
    pub fn new<T: Serialize>(session_id: &str, topic: Topic, media_time_ms: u64, payload: &T) -> Self {
        EventDraft {
            session_id: session_id.to_string(),
            topic,
            seq: None,
            media_time_ms,
            wall_time_ms: None,
            payload: to_raw(payload),
        }
    }
}

pub fn to_raw<T: Serialize>(value: &T) -> Box<RawValue> {
    serde_json::value::to_raw_value(value).expect("payloads serialize")
}

#[derive(Debug, Error)]
pub enum BusError {
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("session {0:?} is closed")]
    SessionClosed(String),
    #[error("session {0:?} already exists")]
    DuplicateSession(String),
    #[error("{topic}: expected seq {expected}, got {got}")]
    SeqMismatch { topic: Topic, expected: u64, got: u64 },
    #[error("media time {got} ms precedes {last} ms")]
    MediaTimeRegression { last: u64, got: u64 },
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
    #[error("log write failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TopicFilter {
    #[default]
    All,
    Only(Vec<Topic>),
}

impl TopicFilter {
    pub fn matches(&self, topic: Topic) -> bool {
        match self {
            TopicFilter::All => true,
            TopicFilter::Only(topics) => topics.contains(&topic),
        }
    }
}

/// Ordered stream of events for one subscriber.
///
/// Ends once the session is closed and every delivered event was received.
pub struct Subscription {
    backlog: VecDeque<SessionEvent>,
    rx: Receiver<SessionEvent>,
}

impl Subscription {
    pub fn recv(&mut self) -> Option<SessionEvent> {
        self.backlog.pop_front().or_else(|| self.rx.recv().ok())
    }

    pub fn recv_timeout(&mut self, timeout: Duration) -> Result<SessionEvent, RecvTimeoutError> {
        match self.backlog.pop_front() {
            Some(e) => Ok(e),
            None => self.rx.recv_timeout(timeout),
        }
    }

    pub fn try_recv(&mut self) -> Result<SessionEvent, TryRecvError> {
        match self.backlog.pop_front() {
            Some(e) => Ok(e),
            None => self.rx.try_recv(),
        }
    }

    /// Drains everything currently available without blocking.
    pub fn drain(&mut self) -> Vec<SessionEvent> {
        let mut out: Vec<SessionEvent> = self.backlog.drain(..).collect();
        out.extend(self.rx.try_iter());
        out
    }
}

impl Iterator for Subscription {
    type Item = SessionEvent;
    fn next(&mut self) -> Option<SessionEvent> {
        self.recv()
    }
}

struct Subscriber {
    filter: TopicFilter,
    tx: SyncSender<SessionEvent>,
}

struct Channel {
    log: EventLog,
    last_seq: BTreeMap<Topic, u64>,
    last_media_ms: u64,
    writer: Option<BufWriter<File>>,
    subscribers: Vec<Subscriber>,
    closed: bool,
}

type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// In-process session bus.
pub struct SessionBus {
    channels: RwLock<HashMap<String, Arc<Mutex<Channel>>>>,
    clock: Clock,
    capacity: usize,
}

impl Default for SessionBus {
    fn default() -> Self {
        SessionBus::new()
    }
}

impl SessionBus {
    pub fn new() -> Self {
        SessionBus::with_clock(Arc::new(system_clock_ms))
    }

    pub fn with_clock(clock: Clock) -> Self {
        SessionBus {
            channels: RwLock::new(HashMap::new()),
            clock,
            capacity: DEFAULT_SUBSCRIBER_CAPACITY,
        }
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = capacity.max(1);
        self
    }

    pub fn now_ms(&self) -> u64 {
        (self.clock)()
    }

    /// Opens a session log, optionally mirrored to a file at `path`.
    pub fn open(&self, header: LogHeader, path: Option<&Path>) -> Result<(), BusError> {
        let mut channels = self.channels.write().unwrap();
        if channels.contains_key(&header.session_id) {
            return Err(BusError::DuplicateSession(header.session_id));
        }
        let writer = match path {
            Some(path) => {
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                let mut w = BufWriter::new(File::create(path)?);
                writeln!(w, "{}", header.to_line())?;
                w.flush()?;
                Some(w)
            }
            None => None,
        };
        let id = header.session_id.clone();
        let channel = Channel {
            log: EventLog::new(header),
            last_seq: BTreeMap::new(),
            last_media_ms: 0,
            writer,
            subscribers: Vec::new(),
            closed: false,
        };
        channels.insert(id, Arc::new(Mutex::new(channel)));
        Ok(())
    }

    fn channel(&self, session_id: &str) -> Result<Arc<Mutex<Channel>>, BusError> {
        self.channels
            .read()
            .unwrap()
            .get(session_id)
            .cloned()
            .ok_or_else(|| BusError::UnknownSession(session_id.to_string()))
    }

    /// Appends and fans out one event; returns the stored record as the acknowledgment.
    pub fn publish(&self, draft: EventDraft) -> Result<SessionEvent, BusError> {
        let channel = self.channel(&draft.session_id)?;
        let mut ch = channel.lock().unwrap();
        if ch.closed {
            return Err(BusError::SessionClosed(draft.session_id));
        }
        let expected = ch.last_seq.get(&draft.topic).copied().unwrap_or(0) + 1;
        if let Some(got) = draft.seq {
            if got != expected {
                return Err(BusError::SeqMismatch {
                    topic: draft.topic,
                    expected,
                    got,
                });
            }
        }
        if draft.media_time_ms < ch.last_media_ms {
            return Err(BusError::MediaTimeRegression {
                last: ch.last_media_ms,
                got: draft.media_time_ms,
            });
        }
        let event = SessionEvent {
            session_id: draft.session_id,
            topic: draft.topic,
            seq: expected,
            wall_time_ms: draft.wall_time_ms.unwrap_or_else(|| self.now_ms()),
            media_time_ms: draft.media_time_ms,
            payload: draft.payload,
        };
        if let Some(w) = ch.writer.as_mut() {
            writeln!(w, "{}", event.to_line())?;
            w.flush()?;
        }
        ch.last_seq.insert(event.topic, expected);
        ch.last_media_ms = event.media_time_ms;
        ch.log.records.push(event.clone());
        // Blocks while a subscriber queue is full; dropped receivers are pruned.
        ch.subscribers
            .retain(|s| !s.filter.matches(event.topic) || s.tx.send(event.clone()).is_ok());
        Ok(event)
    }

    pub fn subscribe(&self, session_id: &str, filter: TopicFilter) -> Result<Subscription, BusError> {
        self.subscribe_after(session_id, filter, None)
    }

    /// Subscribes and first replays logged events of the matching topics.
    ///
    /// With `after = Some((topic, seq))`, the backlog starts after that event
    /// (used to resume a dropped stream); with `None` only live events follow.
    pub fn subscribe_after(
        &self,
        session_id: &str,
        filter: TopicFilter,
        after: Option<ResumePoint>,
    ) -> Result<Subscription, BusError> {
        let channel = self.channel(session_id)?;
        let mut ch = channel.lock().unwrap();
        let backlog: VecDeque<SessionEvent> = match after {
            None => VecDeque::new(),
            Some(point) => {
                let start = point.position_in(&ch.log.records);
                ch.log.records[start..]
                    .iter()
                    .filter(|e| filter.matches(e.topic))
                    .cloned()
                    .collect()
            }
        };
        let (tx, rx) = mpsc::sync_channel(self.capacity);
        if !ch.closed {
            ch.subscribers.push(Subscriber { filter, tx });
        }
        Ok(Subscription { backlog, rx })
    }

    /// Closes the session: later publishes fail and subscriptions end.
    pub fn close(&self, session_id: &str) -> Result<EventLog, BusError> {
        let channel = self.channel(session_id)?;
        let mut ch = channel.lock().unwrap();
        if ch.closed {
            return Err(BusError::SessionClosed(session_id.to_string()));
        }
        ch.closed = true;
        ch.subscribers.clear();
        if let Some(mut w) = ch.writer.take() {
            w.flush()?;
        }
        Ok(ch.log.clone())
    }

    pub fn is_closed(&self, session_id: &str) -> Result<bool, BusError> {
        Ok(self.channel(session_id)?.lock().unwrap().closed)
    }

    /// Snapshot of a session's log so far.
    pub fn log(&self, session_id: &str) -> Result<EventLog, BusError> {
        Ok(self.channel(session_id)?.lock().unwrap().log.clone())
    }

    /// Forgets a session entirely, closing it first if needed.
    pub fn remove(&self, session_id: &str) -> Option<EventLog> {
        let channel = self.channels.write().unwrap().remove(session_id)?;
        let mut ch = channel.lock().unwrap();
        ch.closed = true;
        ch.subscribers.clear();
        if let Some(mut w) = ch.writer.take() {
            let _ = w.flush();
        }
        Some(std::mem::replace(&mut ch.log, EventLog::new(LogHeader::default())))
    }
}

/// Where a resumed subscription picks up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResumePoint {
    /// Everything from the start of the log.
    Beginning,
    /// Everything after the given event.
    After { topic: Topic, seq: u64 },
}

impl ResumePoint {
    fn position_in(&self, records: &[SessionEvent]) -> usize {
        match *self {
            ResumePoint::Beginning => 0,
            ResumePoint::After { topic, seq } => records
                .iter()
                .position(|e| e.topic == topic && e.seq == seq)
                .map_or(0, |i| i + 1),
        }
    }
}
