//! Per-query pipeline instances, each with its own ticker, and frame
//! fan-out to subscribers.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::ws::Utf8Bytes;
use streammap_core::ingest::{Message, Query};
use streammap_core::pipeline::{Pipeline, PipelineConfig, Resources};
use thiserror::Error;
use tokio::sync::{broadcast, watch};
use tokio::task::AbortHandle;
use tokio::time::MissedTickBehavior;

use crate::ingest::IngestHandle;

/// Frames buffered per subscriber before it is considered slow.
const FANOUT_BUFFER: usize = 16;

/// A frame as sent on the wire, serialized once per tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Published {
    pub seq: u64,
    pub json: Utf8Bytes,
}

#[derive(Debug, Error, PartialEq)]
pub enum HubError {
    #[error("too many distinct queries (limit {0})")]
    TooManyQueries(usize),
}

/// One tick: the window snapshot and tick time in, `(seq, frame json)` out.
pub type StepFn = Box<dyn FnMut(&[Message], u64) -> Result<(u64, String), String> + Send>;

/// One pipeline instance. Dropping it stops its ticker.
pub struct Instance {
    query: Query,
    frames: broadcast::Sender<Published>,
    latest: watch::Receiver<Option<Published>>,
    ticker: AbortHandle,
}

impl Drop for Instance {
    fn drop(&mut self) {
        self.ticker.abort();
    }
}

impl Instance {
    /// Starts a ticker that calls `step` every `period`. A failed or
    /// panicking step keeps the previous frame and the subscribers.
    pub fn spawn(query: Query, ingest: IngestHandle, period: Duration, step: StepFn) -> Instance {
        let (frames, _) = broadcast::channel(FANOUT_BUFFER);
        let (latest_tx, latest) = watch::channel(None);
        let task = tokio::spawn(run_ticker(step, ingest, frames.clone(), latest_tx, period));
        Instance {
            query,
            frames,
            latest,
            ticker: task.abort_handle(),
        }
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn latest(&self) -> Option<Published> {
        self.latest.borrow().clone()
    }

    /// Waits up to `timeout` for the first frame.
    pub async fn wait_latest(&self, timeout: Duration) -> Option<Published> {
        let mut rx = self.latest.clone();
        let got = tokio::time::timeout(timeout, rx.wait_for(Option::is_some)).await;
        match got {
            Ok(Ok(v)) => v.clone(),
            _ => None,
        }
    }

    /// Joins the frame stream, starting with the latest frame.
    pub fn subscribe(&self) -> Subscription {
        // subscribe before reading the latest frame so nothing published in
        // between is missed; duplicates are filtered by seq
        let rx = self.frames.subscribe();
        let pending = self.latest();
        Subscription {
            rx,
            latest: self.latest.clone(),
            last_seq: None,
            pending,
        }
    }

    pub fn subscriber_count(&self) -> usize {
        self.frames.receiver_count()
    }
}

/// Ordered frames of one instance. Seq strictly increases; a subscriber
/// that falls behind skips ahead to the latest frame.
pub struct Subscription {
    rx: broadcast::Receiver<Published>,
    latest: watch::Receiver<Option<Published>>,
    last_seq: Option<u64>,
    pending: Option<Published>,
}

impl Subscription {
    fn accept(&mut self, p: Published) -> Option<Published> {
        if self.last_seq.is_some_and(|s| p.seq <= s) {
            return None;
        }
        self.last_seq = Some(p.seq);
        Some(p)
    }

    /// Next frame, or `None` once the instance is gone.
    pub async fn next(&mut self) -> Option<Published> {
        if let Some(p) = self.pending.take() {
            if let Some(p) = self.accept(p) {
                return Some(p);
            }
        }
        loop {
            match self.rx.recv().await {
                Ok(p) => {
                    if let Some(p) = self.accept(p) {
                        return Some(p);
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::debug!("subscriber skipped {n} frames");
                    let latest = self.latest.borrow().clone();
                    if let Some(p) = latest.and_then(|p| self.accept(p)) {
                        return Some(p);
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    }
}

/// Registry of pipeline instances keyed by normalized query.
pub struct Hub {
    config: PipelineConfig,
    resources: Resources,
    ingest: IngestHandle,
    max_instances: usize,
    instances: Mutex<HashMap<String, Arc<Instance>>>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl Hub {
    pub fn new(config: PipelineConfig, resources: Resources, ingest: IngestHandle, max_instances: usize) -> Arc<Self> {
        Arc::new(Hub {
            config,
            resources,
            ingest,
            max_instances,
            instances: Mutex::new(HashMap::new()),
        })
    }

    pub fn ingest(&self) -> &IngestHandle {
        &self.ingest
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// The instance for `query`, started on first use.
    pub fn instance(&self, query: &Query) -> Result<Arc<Instance>, HubError> {
        let mut map = self.instances.lock().expect("hub lock");
        if let Some(i) = map.get(&query.key()) {
            return Ok(Arc::clone(i));
        }
        if map.len() >= self.max_instances {
            return Err(HubError::TooManyQueries(self.max_instances));
        }
        let inst = Arc::new(self.start(query.clone()));
        map.insert(query.key(), Arc::clone(&inst));
        log::info!("started pipeline for query `{}`", query.key());
        Ok(inst)
    }

    pub fn instance_count(&self) -> usize {
        self.instances.lock().expect("hub lock").len()
    }

    fn start(&self, query: Query) -> Instance {
        let mut pipeline = Pipeline::new(query.clone(), self.config.clone(), self.resources.clone());
        let key = query.key();
        let step: StepFn = Box::new(move |snapshot, ts| {
            let (frame, report) = pipeline.step(snapshot, ts).map_err(|e| format!("query `{key}`: {e}"))?;
            log::debug!(
                "query `{key}` seq {}: {} messages, {} components in {:?}",
                frame.seq,
                report.message_count,
                report.component_count,
                report.durations.total()
            );
            Ok((frame.seq, frame.to_json()))
        });
        Instance::spawn(query, self.ingest.clone(), Duration::from_millis(self.config.tick_ms), step)
    }
}

async fn run_ticker(
    mut step: StepFn,
    ingest: IngestHandle,
    frames: broadcast::Sender<Published>,
    latest: watch::Sender<Option<Published>>,
    period: Duration,
) {
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(MissedTickBehavior::Skip);
    loop {
        interval.tick().await;
        let snapshot = ingest.snapshot();
        let ts = now_ms();
        let joined = tokio::task::spawn_blocking(move || {
            let result = catch_unwind(AssertUnwindSafe(|| step(&snapshot, ts)))
                .unwrap_or_else(|_| Err("tick panicked".to_string()));
            (step, result)
        })
        .await;
        let Ok((s, result)) = joined else {
            log::error!("ticker stopped: blocking task was cancelled");
            return;
        };
        step = s;
        match result {
            Ok((seq, json)) => {
                let published = Published { seq, json: json.into() };
                latest.send_replace(Some(published.clone()));
                // no receivers is fine; send never waits on subscribers
                let _ = frames.send(published);
            }
            Err(e) => log::error!("tick failed: {e}"),
        }
    }
}
