//! The single ingestion path: one task owns the window and publishes
//! immutable snapshots after every batch.

use std::sync::Arc;

use serde::Serialize;
use streammap_core::ingest::{self, Message, MessageStream, Window};
use thiserror::Error;
use tokio::sync::{mpsc, oneshot, watch};

pub type Snapshot = Arc<Vec<Message>>;

/// What happened to a submitted batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestOutcome {
    pub accepted: usize,
    pub duplicates: usize,
    pub malformed: usize,
}

#[derive(Debug, Error)]
#[error("ingestion has stopped")]
pub struct IngestClosed;

struct Batch {
    messages: Vec<Message>,
    reply: Option<oneshot::Sender<IngestOutcome>>,
}

/// Cheap, cloneable access to the ingestion task.
#[derive(Clone)]
pub struct IngestHandle {
    tx: mpsc::Sender<Batch>,
    snapshots: watch::Receiver<Snapshot>,
}

const QUEUE: usize = 1024;

impl IngestHandle {
    /// Starts the ingestion task on the current runtime.
    pub fn spawn(window: Window) -> Self {
        let (tx, mut rx) = mpsc::channel::<Batch>(QUEUE);
        let (snap_tx, snapshots) = watch::channel(Arc::new(Vec::new()));
        tokio::spawn(async move {
            let mut window = window;
            while let Some(first) = rx.recv().await {
                let mut replies = Vec::new();
                let mut batch = Some(first);
                // apply everything already queued, then publish once
                while let Some(Batch { messages, reply }) = batch.take() {
                    let mut outcome = IngestOutcome::default();
                    for msg in messages {
                        match window.push(msg) {
                            Ok(_) => outcome.accepted += 1,
                            Err(e) => {
                                log::debug!("rejected message: {e}");
                                outcome.duplicates += 1;
                            }
                        }
                    }
                    if let Some(r) = reply {
                        replies.push((r, outcome));
                    }
                    batch = rx.try_recv().ok();
                }
                snap_tx.send_replace(Arc::new(window.snapshot()));
                for (r, outcome) in replies {
                    let _ = r.send(outcome);
                }
            }
        });
        IngestHandle { tx, snapshots }
    }

    /// Adds messages and waits until they are visible in snapshots.
    pub async fn submit(&self, messages: Vec<Message>) -> Result<IngestOutcome, IngestClosed> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(Batch { messages, reply: Some(reply) })
            .await
            .map_err(|_| IngestClosed)?;
        rx.await.map_err(|_| IngestClosed)
    }

    /// Fire-and-forget submission from a non-async thread.
    pub fn blocking_submit(&self, messages: Vec<Message>) -> Result<(), IngestClosed> {
        self.tx
            .blocking_send(Batch { messages, reply: None })
            .map_err(|_| IngestClosed)
    }

    /// Latest published window contents.
    pub fn snapshot(&self) -> Snapshot {
        Arc::clone(&self.snapshots.borrow())
    }
}

/// Parses an NDJSON body. Blank lines are ignored.
pub fn parse_ndjson(body: &str) -> (Vec<Message>, usize) {
    let mut messages = Vec::new();
    let mut malformed = 0;
    for line in body.lines() {
        match ingest::parse_line(line) {
            Ok(Some(m)) => messages.push(m),
            Ok(None) => {}
            Err(e) => {
                log::warn!("skipping malformed record: {e}");
                malformed += 1;
            }
        }
    }
    (messages, malformed)
}

/// Feeds a blocking message source into the ingestion task from a
/// dedicated thread.
pub fn pump(stream: MessageStream, handle: IngestHandle) -> std::thread::JoinHandle<()> {
    std::thread::spawn(move || {
        let mut stream = stream;
        let mut count = 0usize;
        for msg in stream.by_ref() {
            if handle.blocking_submit(vec![msg]).is_err() {
                break;
            }
            count += 1;
        }
        log::info!("source finished: {count} messages, {} malformed", stream.malformed());
    })
}
