//! Analysis worker: follows a table's event stream and publishes derived
//! layers for the newest commit.

use std::time::Duration;

use cityio_core::analysis::{
    accessibility, building_heights, density, diversity, height_field, shadow_layer, AnalysisError, SunPosition,
    TravelSpeeds,
};
use cityio_core::spec::{Category, TableSpec};
use cityio_core::{Commit, EventBody, Layer};
use futures::FutureExt;
use tokio::sync::watch;
use tracing::{debug, info, warn};

use crate::client::{Client, ClientError, EventStream, StreamItem};

pub const MIN_BACKOFF: Duration = Duration::from_millis(250);
pub const MAX_BACKOFF: Duration = Duration::from_secs(30);

/// Categories that get an `access_<category>` layer.
pub const ACCESS_TARGETS: [Category; 3] = [Category::Building, Category::Road, Category::Park];

#[derive(Clone, Debug)]
pub struct WorkerConfig {
    pub server: String,
    pub table: String,
    pub token: String,
    pub sun: SunPosition,
    pub speeds: TravelSpeeds,
    pub producer: String,
}

/// Every layer the worker publishes for one commit.
pub fn compute_layers(
    commit: &Commit,
    spec: &TableSpec,
    sun: SunPosition,
    speeds: TravelSpeeds,
    producer: &str,
) -> Result<Vec<Layer>, AnalysisError> {
    let (grid, v) = (&commit.grid, commit.version);
    let mut layers = vec![
        building_heights(grid, spec, v, producer),
        shadow_layer(&height_field(grid, spec), spec, sun, v, producer)?,
        density(grid, spec, v, producer),
        diversity(grid, spec, v, producer),
    ];
    for target in ACCESS_TARGETS {
        layers.push(accessibility(grid, spec, target, speeds, v, producer)?);
    }
    Ok(layers)
}

pub fn next_backoff(current: Duration) -> Duration {
    (current * 2).min(MAX_BACKOFF)
}

struct Progress {
    since: Option<u64>,
    published: u64,
    backoff: Duration,
}

/// Runs until `shutdown` turns true. Network failures are retried with
/// exponential backoff.
pub async fn run(config: WorkerConfig, mut shutdown: watch::Receiver<bool>) {
    let client = Client::new(&config.server);
    let mut progress = Progress { since: None, published: 0, backoff: MIN_BACKOFF };
    loop {
        if *shutdown.borrow() {
            return;
        }
        match session(&client, &config, &mut progress, &mut shutdown).await {
            Ok(()) => debug!(table = config.table, "stream ended"),
            Err(e) => warn!(table = config.table, error = %e, retry_in = ?progress.backoff, "worker session failed"),
        }
        tokio::select! {
            _ = tokio::time::sleep(progress.backoff) => {}
            _ = shutdown.wait_for(|s| *s) => return,
        }
        progress.backoff = next_backoff(progress.backoff);
    }
}

async fn session(
    client: &Client,
    config: &WorkerConfig,
    progress: &mut Progress,
    shutdown: &mut watch::Receiver<bool>,
) -> Result<(), ClientError> {
    let spec = client.table(&config.table).await?.spec;
    let mut stream = match client.subscribe(&config.table, progress.since).await {
        Err(e) if e.status() == Some(400) && progress.since.is_some() => {
            // the server lost events we saw; start over from its head
            progress.since = None;
            client.subscribe(&config.table, None).await?
        }
        r => r?,
    };
    progress.backoff = MIN_BACKOFF;
    info!(table = config.table, since = ?progress.since, "subscribed");

    let mut pending = None;
    let head = client.head(&config.table).await?;
    if head.version > progress.published {
        pending = Some(head);
    }
    loop {
        if let Some(commit) = pending.take() {
            publish(client, config, &spec, commit, progress).await?;
        }
        let item = tokio::select! {
            item = stream.next() => item,
            _ = shutdown.wait_for(|s| *s) => return Ok(()),
        };
        let Some(item) = item else { return Ok(()) };
        absorb(item?, progress, &mut pending);
        // skip to the newest commit already delivered
        while let Some(Some(item)) = next_ready(&mut stream) {
            absorb(item?, progress, &mut pending);
        }
    }
}

fn next_ready(stream: &mut EventStream) -> Option<Option<Result<StreamItem, ClientError>>> {
    stream.next().now_or_never()
}

fn absorb(item: StreamItem, progress: &mut Progress, pending: &mut Option<Commit>) {
    let newer = |c: &Commit, p: &Option<Commit>| p.as_ref().is_none_or(|p| c.version > p.version);
    match item {
        StreamItem::Snapshot(s) => {
            progress.since = Some(s.seq);
            if s.head.version > progress.published && newer(&s.head, pending) {
                *pending = Some(s.head);
            }
        }
        StreamItem::Event(e) => {
            progress.since = Some(e.seq);
            if let EventBody::Commit(ce) = e.body {
                if ce.commit.version > progress.published && newer(&ce.commit, pending) {
                    *pending = Some(ce.commit);
                }
            }
        }
        StreamItem::Heartbeat(_) => {}
    }
}

async fn publish(
    client: &Client,
    config: &WorkerConfig,
    spec: &TableSpec,
    commit: Commit,
    progress: &mut Progress,
) -> Result<(), ClientError> {
    let version = commit.version;
    let (spec2, sun, speeds, producer) = (spec.clone(), config.sun, config.speeds, config.producer.clone());
    let layers = tokio::task::spawn_blocking(move || compute_layers(&commit, &spec2, sun, speeds, &producer))
        .await
        .map_err(|e| ClientError::Decode(e.to_string()))?
        .map_err(|e| ClientError::Decode(e.to_string()))?;
    for layer in &layers {
        match client.post_layer(&config.table, &config.token, layer).await {
            Ok(_) => {}
            Err(e) if e.status() == Some(409) => debug!(layer = layer.name(), version, "newer layer already stored"),
            Err(e) => return Err(e),
        }
    }
    progress.published = version;
    info!(table = config.table, version, "published layers");
    Ok(())
}
