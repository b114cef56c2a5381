//! HTTP API and event stream.

mod error;
mod routes;
mod stream;

use std::future::Future;
use std::io;
use std::sync::Arc;
use std::time::Duration;

use axum::routing::{get, post};
use axum::serve::ListenerExt;
use axum::http::header::{CONTENT_TYPE, ETAG, IF_MATCH, IF_NONE_MATCH};
use axum::http::{HeaderName, Method};
use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tower_http::cors::{Any, CorsLayer};

use crate::store::Store;
use crate::wire::EXCLUDED_HEADER;

pub use error::ApiError;

pub const DEFAULT_HEARTBEAT: Duration = Duration::from_secs(15);

#[derive(Clone, Debug)]
pub struct ServerConfig {
    /// Shared secret for layer uploads. Without one, uploads are refused.
    pub worker_token: Option<String>,
    pub heartbeat: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { worker_token: None, heartbeat: DEFAULT_HEARTBEAT }
    }
}

#[derive(Clone)]
pub(crate) struct AppState {
    store: Arc<Store>,
    config: Arc<ServerConfig>,
    shutdown: watch::Receiver<bool>,
}

/// The API router. Streams end when `shutdown` turns true.
pub fn router(store: Arc<Store>, config: ServerConfig, shutdown: watch::Receiver<bool>) -> Router {
    let state = AppState { store, config: Arc::new(config), shutdown };
    Router::new()
        .route("/api/tables", get(routes::list_tables).post(routes::create_table))
        .route("/api/tables/{name}", get(routes::table_info))
        .route("/api/tables/{name}/head", get(routes::head))
        .route("/api/tables/{name}/grid", post(routes::post_grid))
        .route("/api/tables/{name}/commits", get(routes::commit_range))
        .route("/api/tables/{name}/commits/{version}", get(routes::commit))
        .route("/api/tables/{name}/stream", get(stream::subscribe))
        .route("/api/tables/{name}/layers", post(routes::post_layer))
        .route("/api/tables/{name}/layers/{layer}", get(routes::layer))
        .route("/api/tables/{name}/comments", get(routes::top_comments).post(routes::add_comment))
        .route("/api/tables/{name}/comments/heatmap", get(routes::heatmap))
        .route("/api/tables/{name}/comments/{id}/reactions", post(routes::react))
        .fallback(routes::not_found)
        .layer(cors())
        .with_state(state)
}

/// Browser clients may be served from another origin. They need to read
/// the version tag and the heatmap's excluded count.
fn cors() -> CorsLayer {
    CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([CONTENT_TYPE, IF_MATCH, IF_NONE_MATCH, HeaderName::from_static("last-event-id")])
        .expose_headers([ETAG, HeaderName::from_static(EXCLUDED_HEADER)])
}

/// Serves until `signal` resolves, then closes open streams and drains.
pub async fn serve(
    listener: TcpListener,
    store: Arc<Store>,
    config: ServerConfig,
    signal: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    let (tx, rx) = watch::channel(false);
    let app = router(store, config, rx);
    let listener = listener.tap_io(|tcp| {
        // stream frames are small writes; do not hold them back
        if let Err(e) = tcp.set_nodelay(true) {
            tracing::warn!(error = %e, "cannot set TCP_NODELAY");
        }
    });
    axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            signal.await;
            let _ = tx.send(true);
        })
        .await
}
