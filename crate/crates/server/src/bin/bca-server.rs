use std::path::PathBuf;
use std::sync::Arc;

use bioauth_server::bca::{router, BcaService};
use bioauth_server::clock::SystemClock;
use bioauth_server::config::BcaConfig;
use clap::Parser;

/// Biometric continuous authentication identity provider.
#[derive(Debug, Parser)]
struct Args {
    /// JSON config file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured listen address.
    #[arg(long)]
    listen: Option<String>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    bioauth_server::init_tracing();
    let args = Args::parse();
    let mut cfg = match &args.config {
        Some(p) => BcaConfig::from_file(p)?,
        None => BcaConfig::default(),
    };
    if let Some(l) = args.listen {
        cfg.listen = l;
    }
    let listen = cfg.listen.clone();
    let svc = Arc::new(BcaService::new(cfg, Arc::new(SystemClock))?);
    let (addr, handle) = bioauth_server::spawn(router(svc), &listen).await?;
    tracing::info!(%addr, "bca-server listening");
    handle.await?;
    Ok(())
}
