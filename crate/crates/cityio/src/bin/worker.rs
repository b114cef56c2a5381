use clap::Parser;
use cityio::worker::{self, WorkerConfig};
use cityio_core::analysis::{SunPosition, TravelSpeeds};
use tokio::sync::watch;
use tracing_subscriber::EnvFilter;

/// Follows a table and publishes analysis layers for each new head.
#[derive(Debug, Parser)]
#[command(name = "worker", version)]
struct Args {
    #[arg(long, env = "CITYIO_SERVER", default_value = "http://127.0.0.1:8080")]
    server: String,
    #[arg(long)]
    table: String,
    #[arg(long, env = "WORKER_TOKEN", hide_env_values = true)]
    token: String,
    #[arg(long, default_value_t = 180.0)]
    sun_azimuth: f64,
    #[arg(long, default_value_t = 35.0)]
    sun_elevation: f64,
    /// Meters per second on road cells.
    #[arg(long, default_value_t = 10.0)]
    road_speed: f64,
    /// Meters per second on every other passable cell.
    #[arg(long, default_value_t = 1.4)]
    walk_speed: f64,
    #[arg(long, default_value = "worker")]
    producer: String,
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let sun = match SunPosition::new(args.sun_azimuth, args.sun_elevation) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    };
    let speeds = TravelSpeeds { road_mps: args.road_speed, walk_mps: args.walk_speed };
    if !(speeds.road_mps > 0.0 && speeds.walk_mps > 0.0 && speeds.road_mps.is_finite() && speeds.walk_mps.is_finite()) {
        eprintln!("error: speeds must be positive");
        std::process::exit(1);
    }
    let config = WorkerConfig { server: args.server, table: args.table, token: args.token, sun, speeds, producer: args.producer };
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    rt.block_on(async move {
        let (tx, rx) = watch::channel(false);
        tokio::spawn(async move {
            let _ = tokio::signal::ctrl_c().await;
            let _ = tx.send(true);
        });
        worker::run(config, rx).await;
    });
}
