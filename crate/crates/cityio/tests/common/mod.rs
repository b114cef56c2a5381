//! In-process server on an ephemeral port.
#![allow(dead_code)]

use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use cityio::client::Client;
use cityio::server::{self, ServerConfig};
use cityio::store::Store;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub const TOKEN: &str = "test-token";

pub struct TestServer {
    pub base: String,
    pub client: Client,
    pub store: Arc<Store>,
    pub dir: PathBuf,
    stop: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<io::Result<()>>>,
}

pub fn config() -> ServerConfig {
    ServerConfig { worker_token: Some(TOKEN.into()), heartbeat: Duration::from_secs(15) }
}

pub async fn start(dir: &Path) -> TestServer {
    start_with(dir, config()).await
}

pub async fn start_with(dir: &Path, config: ServerConfig) -> TestServer {
    let store = Arc::new(Store::open(dir).expect("open store"));
    let listener = TcpListener::bind("127.0.0.1:0").await.expect("bind");
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = oneshot::channel();
    let task = tokio::spawn(server::serve(listener, store.clone(), config, async {
        let _ = rx.await;
    }));
    TestServer { client: Client::new(&base), base, store, dir: dir.into(), stop: Some(tx), task: Some(task) }
}

impl TestServer {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(task) = self.task.take() {
            tokio::time::timeout(Duration::from_secs(10), task)
                .await
                .expect("server drains")
                .expect("server task")
                .expect("server io");
        }
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
    }
}
