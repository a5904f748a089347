//! Message acquisition: NDJSON sources, the bounded sliding window, and
//! keyword queries.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of messages held by a [`Window`].
pub const DEFAULT_WINDOW_CAPACITY: usize = 500;

/// One ingested text packet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    /// Milliseconds since the epoch.
    pub ts: u64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    /// Normalized terms; empty until tokenized.
    #[serde(skip)]
    pub tokens: Vec<String>,
}

impl Message {
    pub fn new(id: impl Into<String>, ts: u64, text: impl Into<String>) -> Self {
        Message {
            id: id.into(),
            ts,
            text: text.into(),
            author: None,
            tokens: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("message id `{0}` is already in the window")]
    DuplicateId(String),
    #[error("message id must be non-empty")]
    EmptyId,
    #[error("window capacity must be positive")]
    ZeroCapacity,
    #[error("window max age must be positive")]
    ZeroMaxAge,
    #[error("cannot read `{path}`: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid source spec `{0}` (expected `stdin`, `http` or `replay:<path>`)")]
    BadSourceSpec(String),
    #[error("replay speed must be positive and finite")]
    BadReplaySpeed,
    #[error("malformed query: {0}")]
    MalformedQuery(String),
}

/// Parses one NDJSON line into a message.
///
/// Returns `Ok(None)` for blank lines.
pub fn parse_line(line: &str) -> Result<Option<Message>, serde_json::Error> {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    let msg: Message = serde_json::from_str(trimmed)?;
    if msg.id.is_empty() {
        return Err(serde::de::Error::custom("empty message id"));
    }
    Ok(Some(msg))
}

/// Incremental NDJSON reader. Malformed lines are skipped and counted.
pub struct NdjsonReader<R> {
    lines: io::Lines<R>,
    malformed: Arc<AtomicUsize>,
}

impl<R: BufRead> NdjsonReader<R> {
    pub fn new(reader: R) -> Self {
        NdjsonReader {
            lines: reader.lines(),
            malformed: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn malformed(&self) -> usize {
        self.malformed.load(Ordering::Relaxed)
    }

    pub fn malformed_counter(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.malformed)
    }
}

impl<R: BufRead> Iterator for NdjsonReader<R> {
    type Item = Message;

    fn next(&mut self) -> Option<Message> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(err) => {
                    // invalid UTF-8 or a read error mid-stream
                    log::warn!("skipping unreadable line: {err}");
                    self.malformed.fetch_add(1, Ordering::Relaxed);
                    if err.kind() == io::ErrorKind::InvalidData {
                        continue;
                    }
                    return None;
                }
            };
            match parse_line(&line) {
                Ok(Some(msg)) => return Some(msg),
                Ok(None) => continue,
                Err(err) => {
                    log::warn!("skipping malformed record: {err}");
                    self.malformed.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
    }
}

/// A fully read replay file.
#[derive(Debug, Clone, Default)]
pub struct Replay {
    /// Messages in non-decreasing `ts` order (stable with respect to the file).
    pub messages: Vec<Message>,
    pub malformed: usize,
}

pub fn read_replay(path: &Path) -> Result<Replay, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(read_replay_from(BufReader::new(file)))
}

pub fn read_replay_from<R: BufRead>(reader: R) -> Replay {
    let mut reader = NdjsonReader::new(reader);
    let mut messages: Vec<Message> = reader.by_ref().collect();
    messages.sort_by_key(|m| m.ts);
    Replay {
        messages,
        malformed: reader.malformed(),
    }
}

/// Wall-clock pacing of a replay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// Emit everything as fast as it is consumed (batch mode).
    Unpaced,
    /// Emit with inter-message gaps of `Δts / speed`.
    Speed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceConfig {
    Replay { path: PathBuf, pacing: Pacing },
    Stdin,
    /// Messages arrive only through the HTTP ingestion endpoint.
    Http,
}

impl SourceConfig {
    /// Parses a `--source` value: `stdin` (or `-`), `http`, or `replay:<path>`.
    pub fn parse(spec: &str, replay_speed: Option<f64>) -> Result<Self, IngestError> {
        let pacing = match replay_speed {
            None => Pacing::Unpaced,
            Some(s) if s.is_finite() && s > 0.0 => Pacing::Speed(s),
            Some(_) => return Err(IngestError::BadReplaySpeed),
        };
        match spec {
            "stdin" | "-" => Ok(SourceConfig::Stdin),
            "http" => Ok(SourceConfig::Http),
            _ => match spec.strip_prefix("replay:") {
                Some(path) if !path.is_empty() => Ok(SourceConfig::Replay {
                    path: PathBuf::from(path),
                    pacing,
                }),
                _ => Err(IngestError::BadSourceSpec(spec.to_string())),
            },
        }
    }
}

/// A stream of messages plus the count of records skipped as malformed.
pub struct MessageStream {
    inner: Box<dyn Iterator<Item = Message> + Send>,
    malformed: Arc<AtomicUsize>,
}

impl MessageStream {
    pub fn malformed(&self) -> usize {
        self.malformed.load(Ordering::Relaxed)
    }
}

impl Iterator for MessageStream {
    type Item = Message;

    fn next(&mut self) -> Option<Message> {
        self.inner.next()
    }
}

struct Paced {
    messages: std::vec::IntoIter<Message>,
    speed: f64,
    origin: Option<(u64, Instant)>,
}

impl Iterator for Paced {
    type Item = Message;

    fn next(&mut self) -> Option<Message> {
        let msg = self.messages.next()?;
        match self.origin {
            None => self.origin = Some((msg.ts, Instant::now())),
            Some((ts0, start)) => {
                let due = Duration::from_secs_f64((msg.ts - ts0) as f64 / 1000.0 / self.speed);
                let elapsed = start.elapsed();
                if due > elapsed {
                    std::thread::sleep(due - elapsed);
                }
            }
        }
        Some(msg)
    }
}

/// Opens a message source. Blocking iterators; run them off the async runtime.
pub fn open_source(config: &SourceConfig) -> Result<MessageStream, IngestError> {
    match config {
        SourceConfig::Replay { path, pacing } => {
            let replay = read_replay(path)?;
            let malformed = Arc::new(AtomicUsize::new(replay.malformed));
            let inner: Box<dyn Iterator<Item = Message> + Send> = match *pacing {
                Pacing::Unpaced => Box::new(replay.messages.into_iter()),
                Pacing::Speed(speed) => Box::new(Paced {
                    messages: replay.messages.into_iter(),
                    speed,
                    origin: None,
                }),
            };
            Ok(MessageStream { inner, malformed })
        }
        SourceConfig::Stdin => {
            let reader = NdjsonReader::new(BufReader::new(io::stdin()));
            let malformed = reader.malformed_counter();
            Ok(MessageStream {
                inner: Box::new(reader),
                malformed,
            })
        }
        SourceConfig::Http => Ok(MessageStream {
            inner: Box::new(std::iter::empty()),
            malformed: Arc::new(AtomicUsize::new(0)),
        }),
    }
}

/// Bounded sliding window of messages ordered by `(ts, id)`.
#[derive(Debug, Clone)]
pub struct Window {
    capacity: usize,
    max_age_ms: Option<u64>,
    entries: BTreeMap<(u64, String), Message>,
    by_id: HashMap<String, u64>,
}

impl Window {
    pub fn new(capacity: usize, max_age_ms: Option<u64>) -> Result<Self, IngestError> {
        if capacity == 0 {
            return Err(IngestError::ZeroCapacity);
        }
        if max_age_ms == Some(0) {
            return Err(IngestError::ZeroMaxAge);
        }
        Ok(Window {
            capacity,
            max_age_ms,
            entries: BTreeMap::new(),
            by_id: HashMap::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn max_age_ms(&self) -> Option<u64> {
        self.max_age_ms
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn newest_ts(&self) -> Option<u64> {
        self.entries.keys().next_back().map(|(ts, _)| *ts)
    }

    /// Entries in `(ts, id)` order.
    pub fn iter(&self) -> impl Iterator<Item = &Message> {
        self.entries.values()
    }

    /// Copies the current entries out; ticks run on this, never on the live window.
    pub fn snapshot(&self) -> Vec<Message> {
        self.entries.values().cloned().collect()
    }

    /// Inserts `msg`, then evicts in `(ts, id)` order until the capacity and
    /// age bounds hold. Returns the evicted messages (which may include `msg`).
    pub fn push(&mut self, msg: Message) -> Result<Vec<Message>, IngestError> {
        if msg.id.is_empty() {
            return Err(IngestError::EmptyId);
        }
        if self.by_id.contains_key(&msg.id) {
            return Err(IngestError::DuplicateId(msg.id));
        }
        self.by_id.insert(msg.id.clone(), msg.ts);
        self.entries.insert((msg.ts, msg.id.clone()), msg);

        let mut evicted = Vec::new();
        let cutoff = match (self.max_age_ms, self.newest_ts()) {
            (Some(age), Some(newest)) => newest.saturating_sub(age),
            _ => 0,
        };
        let mut len = self.entries.len();
        while let Some(entry) = self.entries.first_entry() {
            let too_old = entry.key().0 < cutoff;
            if !too_old && len <= self.capacity {
                break;
            }
            let old = entry.remove();
            len -= 1;
            self.by_id.remove(&old.id);
            evicted.push(old);
        }
        Ok(evicted)
    }
}

/// Conjunctive keyword query. An empty query matches everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Query {
    keywords: Vec<String>,
}

impl Query {
    pub fn match_all() -> Self {
        Query::default()
    }

    /// Parses a user query. Terms are separated by whitespace, `,` or `+`,
    /// lowercased and stripped of edge punctuation; they are kept sorted and
    /// deduplicated so equal queries share one key.
    pub fn parse(raw: &str) -> Result<Self, IngestError> {
        if raw.chars().any(char::is_control) {
            return Err(IngestError::MalformedQuery(
                "control characters are not allowed".into(),
            ));
        }
        let mut keywords = Vec::new();
        for part in raw.split(|c: char| c.is_whitespace() || c == ',' || c == '+') {
            if part.is_empty() {
                continue;
            }
            let term = crate::semantics::strip_edge_punctuation(&part.to_lowercase()).to_string();
            if term.is_empty() {
                return Err(IngestError::MalformedQuery(format!(
                    "`{part}` contains no searchable characters"
                )));
            }
            keywords.push(term);
        }
        keywords.sort();
        keywords.dedup();
        Ok(Query { keywords })
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn is_match_all(&self) -> bool {
        self.keywords.is_empty()
    }

    /// Canonical string form; equal queries produce equal keys.
    pub fn key(&self) -> String {
        self.keywords.join(" ")
    }
}

impl std::fmt::Display for Query {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.key())
    }
}

/// True iff every keyword occurs among the message's tokens.
pub fn matches(msg: &Message, query: &Query) -> bool {
    query
        .keywords
        .iter()
        .all(|k| msg.tokens.iter().any(|t| t == k))
}
