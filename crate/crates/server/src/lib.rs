//! HTTP services for biometric continuous authentication: the BCA identity
//! provider and the resource server that trusts its ledger.

pub mod api;
pub mod bca;
pub mod chain_store;
pub mod clock;
pub mod config;
pub mod resource;
pub mod store;

use std::net::SocketAddr;

use axum::http::{header, HeaderMap};
use axum::Router;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

/// Token from an `Authorization: Bearer ...` header.
pub fn bearer(headers: &HeaderMap) -> Option<&str> {
    let value = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme
        .eq_ignore_ascii_case("bearer")
        .then(|| token.trim())
        .filter(|t| !t.is_empty())
}

/// Binds `addr` and serves `app` on a background task.
pub async fn spawn(app: Router, addr: &str) -> std::io::Result<(SocketAddr, JoinHandle<()>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!(error = %e, "server stopped");
        }
    });
    Ok((local, handle))
}

/// Stderr logging filtered by `RUST_LOG` (default `info`).
pub fn init_tracing() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).try_init();
}
