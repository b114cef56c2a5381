//! The `cityio` operator command.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 integrity failure.

use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use cityio_core::history::replay;
use cityio_core::TableSpecDraft;
use tokio::net::TcpListener;
use tracing::{error, info};

use crate::archive::{self, ArchiveError};
use crate::client::Client;
use crate::demo;
use crate::fixtures;
use crate::server::{self, ServerConfig};
use crate::store::{self, Store, StoreError};
use crate::wire::NewTable;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INTEGRITY: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cityio", version, about = "Versioned urban grid server and operator tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP server.
    Serve(ServeArgs),
    /// Create a table on a running server.
    CreateTable(CreateTableArgs),
    /// Write a table's spec and commit log to a file.
    Export {
        #[arg(long, env = "DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        table: String,
        out: PathBuf,
    },
    /// Create a table from an export file.
    Import {
        #[arg(long, env = "DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        input: PathBuf,
    },
    /// Check the hash chain of an export, a commit log, or every table in
    /// the data directory.
    Verify {
        #[arg(long, env = "DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        /// Export or log file; all tables when omitted.
        file: Option<PathBuf>,
    },
    /// Rebuild a table's history and print the state at a version.
    Replay {
        #[arg(long, env = "DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        table: String,
        /// Version to print; the head when omitted.
        #[arg(long)]
        version: Option<u64>,
        /// Print the grid as well.
        #[arg(long)]
        grid: bool,
    },
    /// Play the demo scenario against a running server.
    SeedDemo {
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        server: String,
        #[arg(long, default_value = "demo")]
        table: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Post comments and report throughput.
    BenchComments {
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        server: String,
        #[arg(long, default_value = "bench")]
        table: String,
        #[arg(long, short, default_value_t = 200)]
        n: usize,
    },
    /// Write golden shadow fixtures for other shadow implementations.
    ShadowFixtures {
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = fixtures::DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "SERVE_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, env = "DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,
    #[arg(long, env = "WORKER_TOKEN", hide_env_values = true)]
    pub worker_token: Option<String>,
    /// Seconds between heartbeats on idle streams.
    #[arg(long, default_value_t = 15)]
    pub heartbeat_secs: u64,
}

#[derive(Debug, Args)]
pub struct CreateTableArgs {
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    pub server: String,
    pub name: String,
    #[arg(long)]
    pub cols: u32,
    #[arg(long)]
    pub rows: u32,
    #[arg(long, default_value_t = 10.0)]
    pub cell_size: f64,
    #[arg(long, default_value_t = 3.0)]
    pub floor_height: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub origin_lat: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub origin_lon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rotation: f64,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let integrity = error.downcast_ref::<StoreError>().is_some_and(StoreError::is_integrity)
            || error.downcast_ref::<ArchiveError>().is_some_and(|a| match a {
                ArchiveError::Chain(_) | ArchiveError::BadSpec(_) | ArchiveError::Truncated => true,
                ArchiveError::Store(s) => s.is_integrity(),
                _ => false,
            });
        Failure { code: if integrity { EXIT_INTEGRITY } else { EXIT_USAGE }, error }
    }
}

/// Parses `args` and runs the command, returning the exit code.
pub fn main_with(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let rt = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return EXIT_USAGE;
        }
    };
    match rt.block_on(run(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", describe(&f.error));
            f.code
        }
    }
}

/// The error and its causes, skipping causes already spelled out by the
/// message above them.
fn describe(error: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in error.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

pub async fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Serve(args) => serve(args).await,
        Command::CreateTable(a) => {
            let mut d = TableSpecDraft::new(&a.name, a.cols, a.rows);
            d.cell_size_m = a.cell_size;
            d.floor_height_m = a.floor_height;
            d.origin_lat = a.origin_lat;
            d.origin_lon = a.origin_lon;
            d.rotation_deg = a.rotation;
            let genesis = Client::new(&a.server).create_table(&NewTable::from(d)).await?;
            println!("created {} at version {}", a.name, genesis.version);
            Ok(())
        }
        Command::Export { data_dir, table, out } => {
            let bytes = archive::export_table(&data_dir, &table)?;
            fs::write(&out, &bytes).with_context(|| format!("writing {}", out.display()))?;
            let records = bytes.iter().filter(|b| **b == b'\n').count() - 1;
            println!("exported {table}: {records} commits");
            Ok(())
        }
        Command::Import { data_dir, input } => {
            let bytes = fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let (spec, records) = archive::import_table(&data_dir, &bytes)?;
            println!("imported {}: {records} commits", spec.name());
            Ok(())
        }
        Command::Verify { data_dir, file } => verify(&data_dir, file.as_deref()),
        Command::Replay { data_dir, table, version, grid } => {
            let spec = store::read_spec(&data_dir, &table)?;
            let lp = store::log_path(&data_dir, &table);
            let log = fs::read(&lp).with_context(|| format!("reading {}", lp.display()))?;
            let r = replay(&log, Some(&spec)).map_err(|source| StoreError::ChainBroken { table: table.clone(), source })?;
            let c = match version {
                Some(v) => r
                    .records
                    .get(v.checked_sub(1).unwrap_or(u64::MAX) as usize)
                    .ok_or_else(|| anyhow::anyhow!("{table} has no version {v}"))?,
                None => r.head().ok_or_else(|| anyhow::anyhow!("{table} has no commits"))?,
            };
            println!(
                "{table} version {} of {} grid_hash {} commit_hash {} author {} source {}",
                c.version,
                r.records.len(),
                c.grid_hash,
                c.commit_hash,
                c.author,
                c.source.as_str()
            );
            if grid {
                println!("{}", cityio_core::encoding::to_canonical_string(&c.grid));
            }
            Ok(())
        }
        Command::SeedDemo { server, table, seed } => {
            let report = demo::seed_demo(&Client::new(&server), &table, seed).await?;
            println!("{} head_version {} grid_hash {}", report.table, report.head.version, report.head.grid_hash);
            println!("comments {}", report.comments);
            if let Some(top) = report.top {
                println!("top comment {} with {} likes", top.comment.id, top.like_count);
            }
            Ok(())
        }
        Command::BenchComments { server, table, n } => {
            let r = demo::bench_comments(&Client::new(&server), &table, n).await?;
            println!(
                "{} comments acknowledged in {:.3} s ({:.1}/s), ids {}",
                r.acked,
                r.elapsed.as_secs_f64(),
                r.per_second(),
                match r.first_id {
                    Some(f) => format!("{f}..={}", f + r.acked as u64 - 1),
                    None => "none".into(),
                }
            );
            if !r.dense {
                return Err(Failure { code: EXIT_INTEGRITY, error: anyhow::anyhow!("comment ids are not dense") });
            }
            Ok(())
        }
        Command::ShadowFixtures { out, count, seed } => {
            let written = fixtures::write_all(&out, &fixtures::generate(seed, count))
                .with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} fixtures to {}", written.len(), out.display());
            Ok(())
        }
    }
}

fn verify(data_dir: &Path, file: Option<&Path>) -> Result<(), Failure> {
    if let Some(file) = file {
        let bytes = fs::read(file).with_context(|| format!("reading {}", file.display()))?;
        let report = archive::verify_file(&bytes)?;
        println!("{}: {} records ok, head {}", file.display(), report.records, report.head_hash.map(|h| h.to_hex()).unwrap_or_default());
        return Ok(());
    }
    let mut names: Vec<String> = fs::read_dir(data_dir)
        .with_context(|| format!("reading {}", data_dir.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|f| f.strip_suffix(".spec")).map(String::from))
        .collect();
    names.sort();
    for name in names {
        let bytes = archive::export_table(data_dir, &name)?;
        let (_, report) = archive::verify_export(&bytes)?;
        println!("{name}: {} records ok", report.records);
    }
    Ok(())
}

async fn serve(args: ServeArgs) -> Result<(), Failure> {
    let store = match Store::open(&args.data_dir) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            error!(error = %e, "cannot load data directory");
            return Err(e.into());
        }
    };
    let listener = TcpListener::bind(args.addr).await.with_context(|| format!("binding {}", args.addr))?;
    info!(addr = %listener.local_addr().context("local address")?, tables = store.tables().len(), "listening");
    if args.worker_token.is_none() {
        info!("no worker token configured, layer uploads are disabled");
    }
    let config = ServerConfig {
        worker_token: args.worker_token,
        heartbeat: Duration::from_secs(args.heartbeat_secs.max(1)),
    };
    server::serve(listener, store, config, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
    .context("server failed")?;
    Ok(())
}
