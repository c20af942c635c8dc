use std::net::SocketAddr;
use std::path::PathBuf;

use biam_bench::{MetricPolicy, MetricStore};
use biam_service::{router, AppState};
use clap::Parser;

/// Serves live planner sessions.
#[derive(Parser)]
#[command(name = "biam-service")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory for metric sidecar caches.
    #[arg(long)]
    metric_cache: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let store = MetricStore::new(MetricPolicy {
        cache_dir: args.metric_cache,
        ..MetricPolicy::default()
    });
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(store))).await
}
