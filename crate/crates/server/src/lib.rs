//! Live topic-map server: one ingestion path feeding per-query pipeline
//! instances, published over HTTP and WebSocket.

pub mod config;
pub mod http;
pub mod hub;
pub mod ingest;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use anyhow::Context;
use streammap_core::ingest::{open_source, Query, SourceConfig};
use streammap_core::pipeline::{PipelineConfig, Resources};
use tokio::net::TcpListener;

pub use hub::{Hub, Instance, Published, StepFn, Subscription};
pub use ingest::IngestHandle;

/// Default cap on concurrently running query pipelines.
pub const DEFAULT_MAX_QUERIES: usize = 64;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub listen: SocketAddr,
    pub source: SourceConfig,
    pub config: PipelineConfig,
    pub max_queries: usize,
}

/// A bound, not yet serving, server.
pub struct Server {
    listener: TcpListener,
    hub: Arc<Hub>,
}

impl Server {
    /// Loads resources, starts ingestion and the default pipeline, and binds
    /// the listener.
    pub async fn bind(opts: ServeOptions) -> anyhow::Result<Server> {
        opts.config.validate()?;
        let resources = Resources::load(&opts.config)?;
        let ingest = IngestHandle::spawn(opts.config.window()?);
        if !matches!(opts.source, SourceConfig::Http) {
            let stream = open_source(&opts.source)?;
            ingest::pump(stream, ingest.clone());
        }
        let hub = Hub::new(opts.config, resources, ingest, opts.max_queries);
        hub.instance(&Query::match_all())?;
        let listener = TcpListener::bind(opts.listen)
            .await
            .with_context(|| format!("cannot listen on {}", opts.listen))?;
        Ok(Server { listener, hub })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    /// Serves until `shutdown` resolves.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> anyhow::Result<()> {
        axum::serve(self.listener, http::router(self.hub))
            .with_graceful_shutdown(shutdown)
            .await?;
        Ok(())
    }
}
