use std::collections::HashMap;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::header::{CONTENT_TYPE, ETAG, IF_MATCH, IF_NONE_MATCH};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use cityio_core::encoding::to_canonical;
use cityio_core::history::Source;
use cityio_core::Layer;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::store::{CommitOutcome, GridChange, StoreError, Table, MAX_RANGE};
use crate::wire::{
    GridPost, LayerAck, NewComment, NewReaction, NewTable, ReactionAck, TableInfo, TableSummary, EXCLUDED_HEADER,
    WORKER_TOKEN_HEADER,
};

use super::{ApiError, AppState};

pub(crate) type ApiResult = Result<Response, ApiError>;

pub(crate) fn json<T: Serialize + ?Sized>(status: StatusCode, body: &T) -> Response {
    let mut res = Response::new(Body::from(to_canonical(body)));
    *res.status_mut() = status;
    res.headers_mut().insert(CONTENT_TYPE, HeaderValue::from_static("application/json"));
    res
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("invalid_body", e.to_string()))
}

fn etag(version: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{version}\"")).expect("digits are a valid header")
}

/// Versions named by an `If-None-Match` or `If-Match` header.
fn header_versions(headers: &HeaderMap, name: axum::http::HeaderName) -> Vec<u64> {
    headers
        .get_all(name)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(','))
        .filter_map(|tag| {
            let tag = tag.trim();
            let tag = tag.strip_prefix("W/").unwrap_or(tag);
            tag.trim_matches('"').parse().ok()
        })
        .collect()
}

fn with_etag(mut res: Response, version: u64) -> Response {
    res.headers_mut().insert(ETAG, etag(version));
    res
}

fn table(state: &AppState, name: &str) -> Result<Arc<Table>, ApiError> {
    Ok(state.store.table(name)?)
}

/// Runs a blocking store mutation off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, StoreError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

pub(crate) async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub(crate) async fn list_tables(State(state): State<AppState>) -> Response {
    let list: Vec<TableSummary> = state
        .store
        .tables()
        .iter()
        .map(|t| TableSummary {
            name: t.name().into(),
            head_version: t.head().version,
            ncols: t.spec().ncols(),
            nrows: t.spec().nrows(),
            cell_size_m: t.spec().cell_size_m(),
        })
        .collect();
    json(StatusCode::OK, &list)
}

pub(crate) async fn create_table(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let req: NewTable = parse_body(&body)?;
    let spec = req.into_draft().validate().map_err(StoreError::from)?;
    let store = state.store.clone();
    let t = blocking(move || store.create_table(spec, "server", Source::Cli)).await?;
    let head = t.head();
    Ok(with_etag(json(StatusCode::CREATED, &*head), head.version))
}

pub(crate) async fn table_info(State(state): State<AppState>, Path(name): Path<String>) -> ApiResult {
    let t = table(&state, &name)?;
    let info = TableInfo {
        spec: t.spec().clone(),
        head_version: t.head().version,
        max_seq: t.max_seq(),
        layers: t.layer_names(),
    };
    Ok(json(StatusCode::OK, &info))
}

pub(crate) async fn head(State(state): State<AppState>, Path(name): Path<String>, headers: HeaderMap) -> ApiResult {
    let head = table(&state, &name)?.head();
    if header_versions(&headers, IF_NONE_MATCH).contains(&head.version) {
        let mut res = StatusCode::NOT_MODIFIED.into_response();
        res.headers_mut().insert(ETAG, etag(head.version));
        return Ok(res);
    }
    Ok(with_etag(json(StatusCode::OK, &*head), head.version))
}

pub(crate) async fn post_grid(
    State(state): State<AppState>,
    Path(name): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let t = table(&state, &name)?;
    let req: GridPost = parse_body(&body)?;
    let if_match = header_versions(&headers, IF_MATCH);
    let base_version = match (req.base_version, if_match.as_slice()) {
        (b, []) => b,
        (None, [v]) => Some(*v),
        (Some(b), [v]) if b == *v => Some(b),
        _ => return Err(ApiError::bad_request("invalid_base_version", "If-Match and base_version disagree")),
    };
    let (change, default_source) = match (req.grid, req.edits) {
        (Some(g), None) => (GridChange::Full(g), Source::Table),
        (None, Some(e)) => (GridChange::Edits(e), Source::Ui),
        _ => return Err(ApiError::bad_request("invalid_body", "give exactly one of grid and edits")),
    };
    let author = req.author.unwrap_or_else(|| "anonymous".into());
    let source = req.source.unwrap_or(default_source);
    let outcome = blocking(move || t.commit_grid(change, base_version, &author, source)).await?;
    match outcome {
        CommitOutcome::Created(c) | CommitOutcome::Unchanged(c) => Ok(with_etag(json(StatusCode::OK, &*c), c.version)),
        CommitOutcome::Conflict(head) => Err(ApiError::conflict(head)),
    }
}

pub(crate) async fn commit(State(state): State<AppState>, Path((name, version)): Path<(String, String)>) -> ApiResult {
    let version: u64 = version.parse().map_err(|_| ApiError::bad_request("invalid_version", "version must be an integer"))?;
    let c = table(&state, &name)?.commit(version)?;
    Ok(with_etag(json(StatusCode::OK, &*c), c.version))
}

fn query_u64(q: &HashMap<String, String>, key: &str) -> Result<Option<u64>, ApiError> {
    q.get(key)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().map_err(|_| ApiError::bad_request("invalid_query", format!("{key} must be an integer"))))
        .transpose()
}

pub(crate) async fn commit_range(
    State(state): State<AppState>,
    Path(name): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let t = table(&state, &name)?;
    let from = query_u64(&q, "from")?.unwrap_or(1);
    let to = match query_u64(&q, "to")? {
        Some(to) => to,
        None => t.head().version.min(from.saturating_add(MAX_RANGE - 1)),
    };
    let commits = t.commits(from, to)?;
    let commits: Vec<&cityio_core::Commit> = commits.iter().map(|c| &**c).collect();
    Ok(json(StatusCode::OK, &commits))
}

pub(crate) async fn post_layer(
    State(state): State<AppState>,
    Path(name): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let presented = headers.get(WORKER_TOKEN_HEADER).map(|v| v.as_bytes());
    match (state.config.worker_token.as_deref(), presented) {
        (Some(expected), Some(given)) if expected.as_bytes() == given => {}
        _ => return Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong worker token")),
    }
    let t = table(&state, &name)?;
    let layer: Layer = parse_body(&body)?;
    let ack_name = layer.name().to_string();
    let version = layer.produced_from_version();
    let seq = blocking(move || t.put_layer(layer)).await?;
    Ok(json(StatusCode::OK, &LayerAck { name: ack_name, produced_from_version: version, seq }))
}

pub(crate) async fn layer(State(state): State<AppState>, Path((name, layer)): Path<(String, String)>) -> ApiResult {
    let t = table(&state, &name)?;
    let l = t
        .layer(&layer)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_layer", format!("no layer named {layer:?}")))?;
    Ok(json(StatusCode::OK, &*l))
}

pub(crate) async fn add_comment(State(state): State<AppState>, Path(name): Path<String>, body: Bytes) -> ApiResult {
    let t = table(&state, &name)?;
    let req: NewComment = parse_body(&body)?;
    let c = blocking(move || t.add_comment(req.anchor, &req.text, &req.author)).await?;
    Ok(json(StatusCode::CREATED, &c))
}

pub(crate) async fn react(
    State(state): State<AppState>,
    Path((name, id)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult {
    let t = table(&state, &name)?;
    let comment_id: u64 = id.parse().map_err(|_| ApiError::bad_request("invalid_comment_id", "id must be an integer"))?;
    let req: NewReaction = parse_body(&body)?;
    let like_count = blocking(move || t.react(comment_id, &req.author)).await?;
    Ok(json(StatusCode::OK, &ReactionAck { comment_id, like_count }))
}

pub(crate) async fn top_comments(
    State(state): State<AppState>,
    Path(name): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let t = table(&state, &name)?;
    let k = query_u64(&q, "top")?.map_or(usize::MAX, |k| usize::try_from(k).unwrap_or(usize::MAX));
    Ok(json(StatusCode::OK, &t.top_comments(k)))
}

pub(crate) async fn heatmap(State(state): State<AppState>, Path(name): Path<String>) -> ApiResult {
    let h = table(&state, &name)?.heatmap();
    let mut res = json(StatusCode::OK, &h.layer);
    res.headers_mut().insert(EXCLUDED_HEADER, HeaderValue::from(h.excluded));
    Ok(res)
}
