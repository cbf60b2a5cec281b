use std::path::PathBuf;
use std::sync::Arc;

use bioauth_server::clock::SystemClock;
use bioauth_server::config::ResourceConfig;
use bioauth_server::resource::{router, ResourceService};
use clap::Parser;

/// Resource server verifying BCA tokens against a synced ledger replica.
#[derive(Debug, Parser)]
struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    listen: Option<String>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    bioauth_server::init_tracing();
    let args = Args::parse();
    let mut cfg = match &args.config {
        Some(p) => ResourceConfig::from_file(p)?,
        None => ResourceConfig::default(),
    };
    if let Some(l) = args.listen {
        cfg.listen = l;
    }
    let listen = cfg.listen.clone();
    let svc = Arc::new(ResourceService::new(cfg, Arc::new(SystemClock)));
    svc.sync_ledger().await;
    svc.spawn_sync_loop();
    let (addr, handle) = bioauth_server::spawn(router(svc), &listen).await?;
    tracing::info!(%addr, "resource-server listening");
    handle.await?;
    Ok(())
}
