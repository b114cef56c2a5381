//! HTTP client for the API, including the event stream.

use std::pin::Pin;
use std::time::Duration;

use bytes::{Buf, BytesMut};
use cityio_core::encoding::{from_canonical, to_canonical};
use cityio_core::feedback::{Anchor, Comment, RankedComment};
use cityio_core::{Commit, Event, Layer};
use futures::{Stream, StreamExt};
use reqwest::header::{HeaderValue, CONTENT_TYPE, ETAG, IF_NONE_MATCH};
use reqwest::{RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::wire::{
    ErrorBody, GridPost, Heartbeat, LayerAck, NewComment, NewReaction, NewTable, ReactionAck, Snapshot, TableInfo,
    TableSummary, EXCLUDED_HEADER, WORKER_TOKEN_HEADER,
};

const REQUEST_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("{status}: {} ({})", body.message, body.error)]
    Api { status: u16, body: Box<ErrorBody> },
    #[error("version conflict, head is {}", .0.version)]
    Conflict(Box<Commit>),
    #[error("bad response: {0}")]
    Decode(String),
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Conflict(_) => Some(409),
            ClientError::Http(e) => e.status().map(|s| s.as_u16()),
            ClientError::Decode(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Client {
    http: reqwest::Client,
    base: String,
}

fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ClientError> {
    serde_json::from_slice(bytes).map_err(|e| ClientError::Decode(e.to_string()))
}

async fn api_error(status: StatusCode, res: reqwest::Response) -> ClientError {
    let bytes = match res.bytes().await {
        Ok(b) => b,
        Err(e) => return e.into(),
    };
    let body = serde_json::from_slice::<ErrorBody>(&bytes).unwrap_or_else(|_| ErrorBody {
        error: "unknown".into(),
        message: String::from_utf8_lossy(&bytes).into_owned(),
        head: None,
    });
    match body.head {
        Some(head) if status == StatusCode::CONFLICT => ClientError::Conflict(Box::new(head)),
        _ => ClientError::Api { status: status.as_u16(), body: Box::new(body) },
    }
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: &str) -> Self {
        Client { http: reqwest::Client::new(), base: base.trim_end_matches('/').to_string() }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn with_json<T: Serialize + ?Sized>(rb: RequestBuilder, body: &T) -> RequestBuilder {
        rb.header(CONTENT_TYPE, "application/json").body(to_canonical(body))
    }

    async fn send<T: DeserializeOwned>(&self, rb: RequestBuilder) -> Result<T, ClientError> {
        let res = rb.timeout(REQUEST_TIMEOUT).send().await?;
        let status = res.status();
        if !status.is_success() {
            return Err(api_error(status, res).await);
        }
        decode(&res.bytes().await?)
    }

    pub async fn list_tables(&self) -> Result<Vec<TableSummary>, ClientError> {
        self.send(self.http.get(self.url("/api/tables"))).await
    }

    /// Creates a table and returns its genesis commit.
    pub async fn create_table(&self, table: &NewTable) -> Result<Commit, ClientError> {
        self.send(Self::with_json(self.http.post(self.url("/api/tables")), table)).await
    }

    pub async fn table(&self, name: &str) -> Result<TableInfo, ClientError> {
        self.send(self.http.get(self.url(&format!("/api/tables/{name}")))).await
    }

    pub async fn head(&self, name: &str) -> Result<Commit, ClientError> {
        self.send(self.http.get(self.url(&format!("/api/tables/{name}/head")))).await
    }

    /// `None` when the head is still at `known_version`.
    pub async fn head_if_changed(&self, name: &str, known_version: u64) -> Result<Option<Commit>, ClientError> {
        let res = self
            .http
            .get(self.url(&format!("/api/tables/{name}/head")))
            .header(IF_NONE_MATCH, format!("\"{known_version}\""))
            .timeout(REQUEST_TIMEOUT)
            .send()
            .await?;
        match res.status() {
            StatusCode::NOT_MODIFIED => Ok(None),
            s if s.is_success() => {
                let tag = res.headers().get(ETAG).cloned();
                let head: Commit = decode(&res.bytes().await?)?;
                if tag != HeaderValue::from_str(&format!("\"{}\"", head.version)).ok() {
                    return Err(ClientError::Decode("ETag does not match head version".into()));
                }
                Ok(Some(head))
            }
            s => Err(api_error(s, res).await),
        }
    }

    /// Posts a frame or edit list. A stale base yields
    /// [`ClientError::Conflict`] with the current head.
    pub async fn post_grid(&self, name: &str, post: &GridPost) -> Result<Commit, ClientError> {
        self.send(Self::with_json(self.http.post(self.url(&format!("/api/tables/{name}/grid"))), post)).await
    }

    pub async fn commit(&self, name: &str, version: u64) -> Result<Commit, ClientError> {
        self.send(self.http.get(self.url(&format!("/api/tables/{name}/commits/{version}")))).await
    }

    pub async fn commits(&self, name: &str, from: u64, to: u64) -> Result<Vec<Commit>, ClientError> {
        self.send(self.http.get(self.url(&format!("/api/tables/{name}/commits?from={from}&to={to}")))).await
    }

    pub async fn post_layer(&self, name: &str, token: &str, layer: &Layer) -> Result<LayerAck, ClientError> {
        let rb = self.http.post(self.url(&format!("/api/tables/{name}/layers"))).header(WORKER_TOKEN_HEADER, token);
        self.send(Self::with_json(rb, layer)).await
    }

    pub async fn layer(&self, name: &str, layer: &str) -> Result<Layer, ClientError> {
        self.send(self.http.get(self.url(&format!("/api/tables/{name}/layers/{layer}")))).await
    }

    pub async fn add_comment(&self, name: &str, anchor: Anchor, text: &str, author: &str) -> Result<Comment, ClientError> {
        let body = NewComment { anchor, text: text.into(), author: author.into() };
        self.send(Self::with_json(self.http.post(self.url(&format!("/api/tables/{name}/comments"))), &body)).await
    }

    /// Likes a comment; returns the like count.
    pub async fn react(&self, name: &str, comment_id: u64, author: &str) -> Result<u64, ClientError> {
        let url = self.url(&format!("/api/tables/{name}/comments/{comment_id}/reactions"));
        let ack: ReactionAck = self.send(Self::with_json(self.http.post(url), &NewReaction { author: author.into() })).await?;
        Ok(ack.like_count)
    }

    pub async fn top_comments(&self, name: &str, k: Option<u64>) -> Result<Vec<RankedComment>, ClientError> {
        let q = k.map(|k| format!("?top={k}")).unwrap_or_default();
        self.send(self.http.get(self.url(&format!("/api/tables/{name}/comments{q}")))).await
    }

    /// The comment heatmap and the number of comments left out of it.
    pub async fn heatmap(&self, name: &str) -> Result<(Layer, u64), ClientError> {
        let res = self.http.get(self.url(&format!("/api/tables/{name}/comments/heatmap"))).timeout(REQUEST_TIMEOUT).send().await?;
        if !res.status().is_success() {
            return Err(api_error(res.status(), res).await);
        }
        let excluded = res
            .headers()
            .get(EXCLUDED_HEADER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| ClientError::Decode(format!("missing {EXCLUDED_HEADER}")))?;
        Ok((decode(&res.bytes().await?)?, excluded))
    }

    /// Opens the event stream, from just after `since` or, without it, with
    /// a snapshot of the head.
    pub async fn subscribe(&self, name: &str, since: Option<u64>) -> Result<EventStream, ClientError> {
        let q = since.map(|s| format!("?since={s}")).unwrap_or_default();
        let res = self
            .http
            .get(self.url(&format!("/api/tables/{name}/stream{q}")))
            .header("accept", "text/event-stream")
            .send()
            .await?;
        if !res.status().is_success() {
            return Err(api_error(res.status(), res).await);
        }
        Ok(EventStream::new(res.bytes_stream()))
    }
}

/// One decoded frame of the event stream.
#[derive(Clone, Debug, PartialEq)]
pub enum StreamItem {
    Snapshot(Snapshot),
    Event(Event),
    Heartbeat(Heartbeat),
}

/// A raw server-sent event.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SseFrame {
    pub id: Option<String>,
    pub event: Option<String>,
    pub data: String,
}

/// Incremental `text/event-stream` parser.
#[derive(Debug, Default)]
pub struct SseParser {
    buf: BytesMut,
    frame: SseFrame,
    has_data: bool,
}

impl SseParser {
    pub fn push(&mut self, chunk: &[u8]) {
        self.buf.extend_from_slice(chunk);
    }

    /// The next complete frame, if buffered.
    pub fn next_frame(&mut self) -> Option<SseFrame> {
        while let Some(nl) = self.buf.iter().position(|b| *b == b'\n') {
            let raw = self.buf.split_to(nl + 1);
            let mut line = &raw[..nl];
            if let Some(l) = line.strip_suffix(b"\r") {
                line = l;
            }
            let line = String::from_utf8_lossy(line);
            if line.is_empty() {
                let frame = std::mem::take(&mut self.frame);
                let had = std::mem::take(&mut self.has_data);
                if had || frame.event.is_some() {
                    return Some(frame);
                }
                continue;
            }
            if line.starts_with(':') {
                continue;
            }
            let (field, value) = match line.split_once(':') {
                Some((f, v)) => (f.to_string(), v.strip_prefix(' ').unwrap_or(v).to_string()),
                None => (line.to_string(), String::new()),
            };
            match field.as_str() {
                "id" => self.frame.id = Some(value),
                "event" => self.frame.event = Some(value),
                "data" => {
                    if self.has_data {
                        self.frame.data.push('\n');
                    }
                    self.frame.data.push_str(&value);
                    self.has_data = true;
                }
                _ => {}
            }
        }
        if self.buf.capacity() > 1 << 20 && self.buf.is_empty() {
            self.buf = BytesMut::new();
        }
        None
    }
}

type ByteStream = Pin<Box<dyn Stream<Item = reqwest::Result<bytes::Bytes>> + Send>>;

/// Decoded events from one stream connection.
pub struct EventStream {
    body: ByteStream,
    parser: SseParser,
}

impl EventStream {
    fn new(body: impl Stream<Item = reqwest::Result<bytes::Bytes>> + Send + 'static) -> Self {
        EventStream { body: Box::pin(body), parser: SseParser::default() }
    }

    /// The next item; `None` once the server closes the stream.
    pub async fn next(&mut self) -> Option<Result<StreamItem, ClientError>> {
        loop {
            if let Some(frame) = self.parser.next_frame() {
                return Some(decode_frame(&frame));
            }
            match self.body.next().await? {
                Ok(mut chunk) => {
                    self.parser.push(chunk.chunk());
                    chunk.advance(chunk.len());
                }
                Err(e) => return Some(Err(e.into())),
            }
        }
    }
}

pub fn decode_frame(frame: &SseFrame) -> Result<StreamItem, ClientError> {
    let bad = |e: String| ClientError::Decode(format!("{:?} frame: {e}", frame.event));
    match frame.event.as_deref() {
        Some("snapshot") => decode(frame.data.as_bytes()).map(StreamItem::Snapshot),
        Some("heartbeat") => decode(frame.data.as_bytes()).map(StreamItem::Heartbeat),
        _ => {
            let event: Event = from_canonical(frame.data.as_bytes()).map_err(|e| bad(e.to_string()))?;
            if frame.id.as_deref() != Some(event.seq.to_string().as_str()) {
                return Err(bad("id does not match seq".into()));
            }
            Ok(StreamItem::Event(event))
        }
    }
}
