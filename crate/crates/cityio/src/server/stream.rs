//! `GET /api/tables/{name}/stream`: server-sent events.
//!
//! Frames carry the event seq as `id`, the kind as `event` and the encoded
//! event as `data`. Without a starting seq the stream opens with a
//! `snapshot` frame holding the head; `heartbeat` frames fill idle time.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::HeaderMap;
use axum::response::sse::{Event as Frame, Sse};
use axum::response::{IntoResponse, Response};
use futures::stream::{self, Stream};
use tokio::sync::{broadcast, mpsc, watch};
use tokio::time::{interval_at, Instant, MissedTickBehavior};
use tracing::{debug, warn};

use crate::store::{StoredEvent, Subscription};
use crate::wire::{Heartbeat, Snapshot};

use super::{ApiError, AppState};

const OUTBOX: usize = 64;

fn event_frame(e: &StoredEvent) -> Frame {
    Frame::default().id(e.seq.to_string()).event(e.kind.as_str()).data(&*e.line)
}

fn json_string<T: serde::Serialize>(v: &T) -> String {
    String::from_utf8(cityio_core::encoding::to_canonical(v)).expect("canonical encoding is UTF-8")
}

pub(crate) async fn subscribe(
    State(state): State<AppState>,
    Path(name): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let since = match q.get("since").filter(|s| !s.is_empty()) {
        Some(s) => Some(s.parse::<u64>().map_err(|_| ApiError::bad_request("invalid_query", "since must be an integer"))?),
        None => headers
            .get("last-event-id")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok()),
    };
    let table = state.store.table(&name)?;
    let sub = table.subscribe(since)?;
    let (tx, rx) = mpsc::channel(OUTBOX);
    tokio::spawn(pump(name, sub, since, tx, state.config.heartbeat, state.shutdown.clone()));
    Ok(Sse::new(receiver_stream(rx)).into_response())
}

fn receiver_stream(rx: mpsc::Receiver<Frame>) -> impl Stream<Item = Result<Frame, Infallible>> {
    stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|f| (Ok(f), rx)) })
}

/// Feeds one subscriber until it disconnects, falls too far behind, or the
/// server shuts down.
async fn pump(
    table: String,
    sub: Subscription,
    since: Option<u64>,
    tx: mpsc::Sender<Frame>,
    heartbeat: Duration,
    mut shutdown: watch::Receiver<bool>,
) {
    let Subscription { backlog, snapshot, mut live } = sub;
    let mut last = since.unwrap_or(0);
    if let Some((seq, head)) = snapshot {
        last = seq;
        let data = json_string(&Snapshot { seq, head: (*head).clone() });
        if tx.send(Frame::default().id(seq.to_string()).event("snapshot").data(data)).await.is_err() {
            return;
        }
    }
    for e in backlog {
        last = e.seq;
        if tx.send(event_frame(&e)).await.is_err() {
            return;
        }
    }
    let mut ticks = interval_at(Instant::now() + heartbeat, heartbeat);
    ticks.set_missed_tick_behavior(MissedTickBehavior::Delay);
    loop {
        let frame = tokio::select! {
            r = live.recv() => match r {
                Ok(e) if e.seq <= last => continue,
                Ok(e) => {
                    last = e.seq;
                    event_frame(&Arc::clone(&e))
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    warn!(table, missed = n, "dropping slow subscriber");
                    return;
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            _ = ticks.tick() => Frame::default().event("heartbeat").data(json_string(&Heartbeat { seq: last })),
            _ = shutdown.wait_for(|s| *s) => {
                debug!(table, "closing stream for shutdown");
                return;
            }
            _ = tx.closed() => return,
        };
        if tx.send(frame).await.is_err() {
            return;
        }
    }
}
