//! Resource server: serves configured documents to bearers of tokens that
//! verify against a ledger replica and clear the local confidence gate.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use bioauth_core::ledger::{sync, validate_chain, Chain, LedgerError};
use bioauth_core::token::{authorize, verify, AccessToken, Claims, TokenError};
use serde_json::Value;
use tokio::task::JoinHandle;
use tracing::{debug, info, warn};

use crate::api::ErrorBody;
use crate::bearer;
use crate::chain_store::ChainStore;
use crate::clock::Clock;
use crate::config::ResourceConfig;

/// What a sync attempt did to the local replica.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyncOutcome {
    Adopted { length: usize },
    KeptLocal { length: usize },
    RemoteInvalid { length: usize },
    Unreachable(String),
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Denial {
    /// Missing, malformed, forged, expired, or meant for another audience.
    Unauthorized(String),
    /// Verified, but below the local gate. Carries no confidence value.
    Forbidden,
    NotFound,
}

impl IntoResponse for Denial {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            Denial::Unauthorized(why) => (StatusCode::UNAUTHORIZED, why),
            Denial::Forbidden => (StatusCode::FORBIDDEN, "insufficient confidence".to_string()),
            Denial::NotFound => (StatusCode::NOT_FOUND, "no such resource".to_string()),
        };
        (
            status,
            Json(ErrorBody {
                error,
                fields: Vec::new(),
            }),
        )
            .into_response()
    }
}

pub struct ResourceService {
    cfg: ResourceConfig,
    chain: ChainStore,
    clock: Arc<dyn Clock>,
    http: reqwest::Client,
    /// When false the replica only changes through explicit calls; used to
    /// pin a replica in tests.
    auto_sync: bool,
}

impl ResourceService {
    pub fn new(cfg: ResourceConfig, clock: Arc<dyn Clock>) -> Self {
        let chain = ChainStore::in_memory(cfg.difficulty);
        Self {
            cfg,
            chain,
            clock,
            http: reqwest::Client::new(),
            auto_sync: true,
        }
    }

    pub fn without_sync(mut self) -> Self {
        self.auto_sync = false;
        self
    }

    pub fn config(&self) -> &ResourceConfig {
        &self.cfg
    }

    pub fn chain(&self) -> &ChainStore {
        &self.chain
    }

    /// Pulls the BCA chain and keeps whichever of local and remote wins
    /// [`sync`]. An unreachable or undecodable remote leaves the replica alone.
    pub async fn sync_ledger(&self) -> SyncOutcome {
        let url = format!("{}/chain", self.cfg.bca_endpoint.trim_end_matches('/'));
        let bytes = match fetch(&self.http, &url).await {
            Ok(b) => b,
            Err(e) => {
                warn!(%url, error = %e, "ledger sync degraded: BCA unreachable, keeping local chain");
                return SyncOutcome::Unreachable(e.to_string());
            }
        };
        self.sync_from_bytes(&bytes)
    }

    pub fn sync_from_bytes(&self, bytes: &[u8]) -> SyncOutcome {
        let local = self.chain.snapshot();
        let remote = Chain::from_bytes(bytes, self.cfg.difficulty).ok();
        let remote_valid = remote.as_ref().is_some_and(validate_chain);
        if !remote_valid {
            warn!(
                local = local.len(),
                "ledger sync failure: remote chain does not validate"
            );
            if !validate_chain(&local) {
                return SyncOutcome::Failed;
            }
            return SyncOutcome::RemoteInvalid {
                length: local.len(),
            };
        }
        let remote = remote.expect("validated above");
        match sync(&local, &remote) {
            Ok(next) if next.len() > local.len() || !validate_chain(&local) => {
                let length = next.len();
                self.chain.replace(next);
                info!(length, "ledger replica updated");
                SyncOutcome::Adopted { length }
            }
            Ok(_) => SyncOutcome::KeptLocal {
                length: local.len(),
            },
            Err(LedgerError::SyncFailure) | Err(_) => {
                warn!("ledger sync failure: neither chain validates");
                SyncOutcome::Failed
            }
        }
    }

    fn check(&self, token: &AccessToken) -> Result<Claims, TokenError> {
        verify(token, &self.chain.snapshot(), self.clock.now())
    }

    /// Verifies the bearer token, retrying once after a resync when the
    /// user is not yet on the replica, then applies the local gate.
    pub async fn serve(&self, resource_id: &str, headers: &HeaderMap) -> Result<Value, Denial> {
        let wire =
            bearer(headers).ok_or_else(|| Denial::Unauthorized("bearer token required".into()))?;
        let token =
            AccessToken::from_wire(wire).map_err(|e| Denial::Unauthorized(e.to_string()))?;
        let claims = match self.check(&token) {
            Err(TokenError::UnknownUser(user)) if self.auto_sync => {
                debug!(%user, "unknown user, resyncing once");
                self.sync_ledger().await;
                self.check(&token)
            }
            other => other,
        }
        .map_err(|e| Denial::Unauthorized(e.to_string()))?;
        if claims.audience != self.cfg.id {
            return Err(Denial::Unauthorized(format!(
                "token audience {:?} is not this server",
                claims.audience
            )));
        }
        if !authorize(&claims, self.cfg.gate) {
            return Err(Denial::Forbidden);
        }
        self.cfg
            .resources
            .get(resource_id)
            .cloned()
            .ok_or(Denial::NotFound)
    }

    /// Background poll of the BCA chain every `sync_interval_seconds`.
    pub fn spawn_sync_loop(self: &Arc<Self>) -> Option<JoinHandle<()>> {
        if !self.auto_sync || self.cfg.sync_interval_seconds == 0 {
            return None;
        }
        let svc = Arc::clone(self);
        let period = Duration::from_secs(svc.cfg.sync_interval_seconds);
        Some(tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                svc.sync_ledger().await;
            }
        }))
    }
}

async fn fetch(http: &reqwest::Client, url: &str) -> Result<Vec<u8>, reqwest::Error> {
    let resp = http.get(url).send().await?.error_for_status()?;
    Ok(resp.bytes().await?.to_vec())
}

pub fn router(svc: Arc<ResourceService>) -> Router {
    Router::new()
        .route("/resource/{id}", get(resource))
        .with_state(svc)
}

async fn resource(
    State(svc): State<Arc<ResourceService>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<Value>, Denial> {
    svc.serve(&id, &headers).await.map(Json)
}
